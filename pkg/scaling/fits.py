"""Exponent fits: power-law tails, finite-size scaling, winding angles, epsilon laws."""

from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import curve_fit

from scaling.ccdf import Ccdf, empirical_ccdf
from scaling.models import Estimate, FitResult, floor_error
from utils.errors import DegenerateWindow, InsufficientData, NonConvergence
from utils.logging import get_logger
from utils.rng import BOOTSTRAP_STREAM, mix, stream

logger = get_logger(__name__)

N_BOOT = 200
TAIL_MIN_POINTS = 8
CORRECTION_MIN_SIZES = 5
KAPPA_MIN_SIZES = 4
EPSILON_MIN_POINTS = 8
EPSILON_CUT = 0.3
F_TEST_LEVEL = 0.05
LM_XTOL = 1e-8
LM_MAXFEV = 500


class LinearFit(NamedTuple):
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    chi2: float
    residual_rms: float


def weighted_linear_fit(x, y, weights=None) -> LinearFit:
    """Weighted least squares y = intercept + slope * x.

    Errors come from the covariance scaled by the reduced chi-square, so
    they reflect the observed scatter.

    Raises:
        DegenerateWindow: All x equal (the normal equations are singular).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0:
        raise DegenerateWindow(f"Need at least two distinct abscissae, got {np.unique(x).size}")

    design = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    residuals = y - design @ beta
    chi2 = float(np.sum(w * residuals**2))
    dof = x.size - 2
    scale = chi2 / dof if dof > 0 else 0.0
    cov = scale * np.linalg.inv(design.T @ (design * w[:, None]))
    return LinearFit(
        slope=float(beta[1]),
        intercept=float(beta[0]),
        slope_se=float(np.sqrt(max(cov[1, 1], 0.0))),
        intercept_se=float(np.sqrt(max(cov[0, 0], 0.0))),
        chi2=chi2,
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
    )


def _log_sigma(values: np.ndarray, std_errors: Sequence[float] | None) -> np.ndarray | None:
    """Standard errors of ln(values); None when any error is missing or zero."""
    if std_errors is None:
        return None
    se = np.asarray(std_errors, dtype=np.float64)
    if se.shape != values.shape or not np.all(se > 0) or not np.all(np.isfinite(se)):
        return None
    return se / values


def bootstrap_mean(values: Sequence[float], n_boot: int = N_BOOT, seed: int = 0) -> Estimate:
    """Sample mean with a bootstrap standard error over the values."""
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise InsufficientData("Cannot average an empty sample")
    mean = float(np.mean(data))
    if data.size < 2 or n_boot < 2:
        return Estimate(value=mean, std_error=0.0)

    generator = stream(mix(seed, BOOTSTRAP_STREAM, data.size))
    picks = generator.integers(0, data.size, size=(n_boot, data.size))
    means = data[picks].mean(axis=1)
    return Estimate(value=mean, std_error=float(np.std(means, ddof=1)))


def fit_log_log(x_values, y_values, std_errors=None, method: str = "wls") -> FitResult:
    """Plain power-law fit: slope of ln y against ln x."""
    x = np.asarray(x_values, dtype=np.float64)
    y = np.asarray(y_values, dtype=np.float64)
    if np.any(x <= 0) or np.any(y <= 0):
        raise InsufficientData("Power-law fit needs positive abscissae and ordinates")
    sigma = _log_sigma(y, std_errors)
    fit = weighted_linear_fit(np.log(x), np.log(y), None if sigma is None else 1 / sigma**2)
    return FitResult(
        exponent=fit.slope,
        std_error=floor_error(fit.slope_se, fit.slope),
        intercept=fit.intercept,
        window=(float(x.min()), float(x.max())),
        residual_rms=fit.residual_rms,
        n_points=int(x.size),
        method=method,
    )


def fit_tail_exponent(
    ccdf: Ccdf,
    window: tuple[float, float],
    n_boot: int = N_BOOT,
    seed: int = 0,
    ) -> FitResult:
    """Tail exponent zeta from P[S > s] ~ s^-zeta on a window.

    Steps:
    1. Keep CCDF points with s in [lo, hi] and P > 0
    2. Weighted least squares of ln P against ln s, weights N P / (1 - P)
    3. zeta = -slope
    4. Error by resampling the underlying instances `n_boot` times

    Args:
        ccdf: Empirical (or exact) CCDF.
        window: (s_lo, s_hi).
        n_boot: Bootstrap resamples; the error falls back to the WLS error for exact curves.
        seed: Seed of the bootstrap sub-stream.

    Returns:
        The zeta estimate.
    """
    lo, hi = window
    if not lo < hi:
        raise DegenerateWindow(f"Empty tail window [{lo}, {hi}]")

    def select(c: Ccdf) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        mask = (c.values >= lo) & (c.values <= hi) & (c.tail > 0)
        s, p = c.values[mask], c.tail[mask]
        if c.n_samples:
            return np.log(s), np.log(p), c.n_samples * p / (1 - p)
        return np.log(s), np.log(p), None

    x, y, w = select(ccdf)
    if x.size < TAIL_MIN_POINTS:
        raise InsufficientData(f"Tail window [{lo}, {hi}] holds {x.size} CCDF points, need {TAIL_MIN_POINTS}")
    fit = weighted_linear_fit(x, y, w)
    zeta = -fit.slope
    std_error = fit.slope_se
    method = "wls"

    if ccdf.samples is not None and n_boot > 1:
        generator = stream(mix(seed, BOOTSTRAP_STREAM))
        slopes = []
        for _ in range(n_boot):
            resample = generator.choice(ccdf.samples, size=ccdf.samples.size, replace=True)
            bx, by, bw = select(empirical_ccdf(resample, min_samples=1))
            if bx.size >= 2 and np.ptp(bx) > 0:
                slopes.append(-weighted_linear_fit(bx, by, bw).slope)
        if len(slopes) >= 2:
            std_error = float(np.std(slopes, ddof=1))
            method = "wls+bootstrap"

    return FitResult(
        exponent=zeta,
        std_error=floor_error(std_error, zeta),
        intercept=fit.intercept,
        window=(float(lo), float(hi)),
        residual_rms=fit.residual_rms,
        n_points=int(x.size),
        method=method,
    )


def _correction_model(x, a, b, c, d):
    return a + b * x + c * np.exp(-d * x)


def _correction_jacobian(x, a, b, c, d):
    decay = np.exp(-d * x)
    return np.column_stack([np.ones_like(x), x, decay, -c * x * decay])


def fit_scaling_with_correction(
    L_values: Sequence[float],
    means: Sequence[float],
    std_errors: Sequence[float] | None = None,
    ) -> FitResult:
    """Finite-size scaling ln<y> = w1 + w ln L + w2 exp(-w3 ln L).

    Steps:
    1. Fit the pure power law (linear in ln L)
    2. If it leaves residuals, fit the correction model by Levenberg-Marquardt
    3. Keep the correction only if an F-test rejects w2 = 0 at the 5% level

    Args:
        L_values: System sizes, at least five distinct.
        means: Positive means of the observable per size.
        std_errors: Standard errors of the means (optional).

    Returns:
        The exponent w with its error; `correction` is (w2, w3) when kept.

    Raises:
        InsufficientData: Fewer than five distinct sizes or a non-positive mean.
        NonConvergence: Both the correction fit and the linear fallback failed.
    """
    L = np.asarray(L_values, dtype=np.float64)
    y_mean = np.asarray(means, dtype=np.float64)
    if np.unique(L).size < CORRECTION_MIN_SIZES:
        raise InsufficientData(f"Scaling fit needs {CORRECTION_MIN_SIZES} distinct sizes, got {np.unique(L).size}")
    if np.any(y_mean <= 0):
        raise InsufficientData("Scaling fit needs positive means")

    order = np.argsort(L)
    L, y_mean = L[order], y_mean[order]
    sigma = _log_sigma(y_mean, None if std_errors is None else np.asarray(std_errors, dtype=np.float64)[order])
    x, y = np.log(L), np.log(y_mean)
    window = (float(L[0]), float(L[-1]))

    try:
        linear = weighted_linear_fit(x, y, None if sigma is None else 1 / sigma**2)
    except (DegenerateWindow, np.linalg.LinAlgError) as e:
        raise NonConvergence(f"Linear scaling fit failed: {e}") from e

    linear_result = FitResult(
        exponent=linear.slope,
        std_error=floor_error(linear.slope_se, linear.slope),
        intercept=linear.intercept,
        window=window,
        residual_rms=linear.residual_rms,
        n_points=int(x.size),
        method="linear",
    )
    if linear.chi2 <= 1e-24 * max(1.0, float(np.sum(y**2))):
        return linear_result

    b0 = (y[-1] - y[-2]) / (x[-1] - x[-2])
    a0 = y[-1] - b0 * x[-1]
    d0 = 1.0
    c0 = (y[0] - a0 - b0 * x[0]) * np.exp(d0 * x[0])
    try:
        popt, pcov = curve_fit(
            _correction_model,
            x,
            y,
            p0=[a0, b0, c0, d0],
            sigma=sigma,
            absolute_sigma=False,
            jac=_correction_jacobian,
            method="lm",
            xtol=LM_XTOL,
            maxfev=LM_MAXFEV,
        )
    except (RuntimeError, ValueError) as e:
        logger.info(f"Correction fit did not converge ({e}); using the linear fit")
        return linear_result.model_copy(update={"method": "linear-fallback"})

    if not np.all(np.isfinite(popt)) or not np.all(np.isfinite(np.diag(pcov))):
        logger.info("Correction fit has undefined covariance; using the linear fit")
        return linear_result.model_copy(update={"method": "linear-fallback"})

    residuals = y - _correction_model(x, *popt)
    w = np.ones_like(x) if sigma is None else 1 / sigma**2
    chi2 = float(np.sum(w * residuals**2))
    dof = x.size - 4
    if chi2 <= 0:
        p_value = 0.0
    else:
        f_stat = ((linear.chi2 - chi2) / 2) / (chi2 / dof)
        p_value = float(stats.f.sf(f_stat, 2, dof))
    if p_value > F_TEST_LEVEL:
        logger.debug(f"Correction term not significant (p={p_value:.3f}); using the linear fit")
        return linear_result

    return FitResult(
        exponent=float(popt[1]),
        std_error=floor_error(float(np.sqrt(pcov[1, 1])), float(popt[1])),
        intercept=float(popt[0]),
        correction=(float(popt[2]), float(popt[3])),
        window=window,
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
        n_points=int(x.size),
        method="lm-correction",
    )


def fit_winding_kappa(
    L_values: Sequence[float],
    theta_sq_means: Sequence[float],
    std_errors: Sequence[float] | None = None,
    ) -> FitResult:
    """kappa = 4 * slope of <theta^2> against ln L."""
    L = np.asarray(L_values, dtype=np.float64)
    if np.unique(L).size < KAPPA_MIN_SIZES:
        raise InsufficientData(f"Kappa fit needs {KAPPA_MIN_SIZES} distinct sizes, got {np.unique(L).size}")

    weights = None
    if std_errors is not None:
        se = np.asarray(std_errors, dtype=np.float64)
        if np.all(se > 0) and np.all(np.isfinite(se)):
            weights = 1 / se**2
    fit = weighted_linear_fit(np.log(L), theta_sq_means, weights)
    kappa = 4 * fit.slope
    return FitResult(
        exponent=kappa,
        std_error=floor_error(4 * fit.slope_se, kappa),
        intercept=fit.intercept,
        window=(float(L.min()), float(L.max())),
        residual_rms=fit.residual_rms,
        n_points=int(L.size),
        method="wls",
    )


def fit_epsilon_exponents(
    epsilons: Sequence[float],
    mean_distances: Sequence[float],
    mean_energies: Sequence[float],
    distance_errors: Sequence[float] | None = None,
    energy_errors: Sequence[float] | None = None,
    cut: float | None = EPSILON_CUT,
    ) -> tuple[FitResult, FitResult]:
    """beta from d ~ eps^beta and tau from <dE>/N ~ d^tau.

    Args:
        epsilons: Grid values.
        mean_distances: <d> per epsilon.
        mean_energies: <dE>/N per epsilon, N the matching cardinality.
        distance_errors: Standard errors of <d> (optional).
        energy_errors: Standard errors of <dE>/N (optional).
        cut: Keep epsilon <= cut; None keeps the whole grid.

    Returns:
        (beta, tau).
    """
    eps = np.asarray(epsilons, dtype=np.float64)
    d = np.asarray(mean_distances, dtype=np.float64)
    energy = np.asarray(mean_energies, dtype=np.float64)
    d_se = None if distance_errors is None else np.asarray(distance_errors, dtype=np.float64)
    e_se = None if energy_errors is None else np.asarray(energy_errors, dtype=np.float64)

    mask = np.ones(eps.size, dtype=bool) if cut is None else eps <= cut
    positive = mask & (d > 0) & (energy > 0) & (eps > 0)
    if positive.sum() < mask.sum():
        logger.warning(f"Dropping {mask.sum() - positive.sum()} epsilon points with zero distance or energy")
    if positive.sum() < EPSILON_MIN_POINTS:
        raise InsufficientData(f"Epsilon fit needs {EPSILON_MIN_POINTS} usable points, got {positive.sum()}")
    if np.ptp(eps[positive]) == 0 or np.ptp(d[positive]) == 0:
        raise DegenerateWindow("Epsilon window has constant epsilon or distance")

    beta = fit_log_log(eps[positive], d[positive], None if d_se is None else d_se[positive])
    tau = fit_log_log(d[positive], energy[positive], None if e_se is None else e_se[positive])
    return beta, tau
