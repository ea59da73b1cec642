"""Scaling relations between exponents, with first-order error propagation.

Fits are treated as independent, so variances of derived quantities add
without covariance terms.
"""

import math

from pydantic import BaseModel

from scaling.models import Estimate


class ExponentSet(BaseModel):
    """Fitted exponents of one lattice kind; derived entries are filled by derive_exponent_relations."""

    kind: str = ""
    alpha: Estimate | None = None
    gamma: Estimate | None = None
    zeta_fit: Estimate | None = None
    kappa: Estimate | None = None
    kappa_winding_only: Estimate | None = None
    beta: Estimate | None = None
    tau: Estimate | None = None
    stiffness: Estimate | None = None

    d_f: Estimate | None = None
    zeta_derived: Estimate | None = None
    d_f_from_kappa: Estimate | None = None
    tau_from_beta: Estimate | None = None


class ConsistencyReport(BaseModel):
    exponents: ExponentSet
    zeta_tension: float | None = None
    tau_tension: float | None = None
    d_f_tension: float | None = None


def fractal_dimension(alpha: Estimate, gamma: Estimate) -> Estimate:
    """D_f = 2 - gamma + alpha."""
    return Estimate(
        value=2 - gamma.value + alpha.value,
        std_error=math.hypot(alpha.std_error, gamma.std_error),
    )


def zeta_from_relation(alpha: Estimate, gamma: Estimate) -> Estimate:
    """zeta = (2 - gamma) / D_f."""
    d_f = 2 - gamma.value + alpha.value
    value = (2 - gamma.value) / d_f
    d_alpha = -(2 - gamma.value) / d_f**2
    d_gamma = -alpha.value / d_f**2
    return Estimate(value=value, std_error=math.hypot(d_alpha * alpha.std_error, d_gamma * gamma.std_error))


def fractal_dimension_from_kappa(kappa: Estimate) -> Estimate:
    """D_f = min(1 + kappa / 8, 2)."""
    value = 1 + kappa.value / 8
    if value >= 2:
        return Estimate(value=2.0, std_error=0.0)
    return Estimate(value=value, std_error=kappa.std_error / 8)


def tau_from_beta(beta: Estimate) -> Estimate:
    """tau = (beta + 1) / beta."""
    return Estimate(value=(beta.value + 1) / beta.value, std_error=beta.std_error / beta.value**2)


def tension(a: Estimate, b: Estimate) -> float:
    """|a - b| in units of the combined standard error."""
    gap = abs(a.value - b.value)
    combined = math.hypot(a.std_error, b.std_error)
    if combined == 0:
        return 0.0 if gap == 0 else math.inf
    return gap / combined


def derive_exponent_relations(exponents: ExponentSet) -> ConsistencyReport:
    """Fill in derived exponents and measure how well the relations hold.

    Args:
        exponents: Fitted exponents; any may be missing.

    Returns:
        The completed set and the tensions zeta_fit vs zeta_derived,
        tau vs tau_from_beta and D_f vs D_f(kappa), where computable.
    """
    update: dict[str, Estimate] = {}
    if exponents.alpha is not None and exponents.gamma is not None:
        update["d_f"] = fractal_dimension(exponents.alpha, exponents.gamma)
        update["zeta_derived"] = zeta_from_relation(exponents.alpha, exponents.gamma)
    if exponents.kappa is not None:
        update["d_f_from_kappa"] = fractal_dimension_from_kappa(exponents.kappa)
    if exponents.beta is not None:
        update["tau_from_beta"] = tau_from_beta(exponents.beta)
    completed = exponents.model_copy(update=update)

    report = ConsistencyReport(exponents=completed)
    if completed.zeta_fit is not None and completed.zeta_derived is not None:
        report.zeta_tension = tension(completed.zeta_fit, completed.zeta_derived)
    if completed.tau is not None and completed.tau_from_beta is not None:
        report.tau_tension = tension(completed.tau, completed.tau_from_beta)
    if completed.d_f is not None and completed.d_f_from_kappa is not None:
        report.d_f_tension = tension(completed.d_f, completed.d_f_from_kappa)
    return report
