"""Fit reports and plot data from record files."""

import textwrap
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from pydantic import BaseModel

from harness.records import FINAL_NAME
from lattice import LatticeKind
from scaling.ccdf import empirical_ccdf
from scaling.fits import (
    CORRECTION_MIN_SIZES,
    EPSILON_CUT,
    EPSILON_MIN_POINTS,
    KAPPA_MIN_SIZES,
    N_BOOT,
    bootstrap_mean,
    fit_epsilon_exponents,
    fit_log_log,
    fit_scaling_with_correction,
    fit_tail_exponent,
    fit_winding_kappa,
)
from scaling.models import Estimate, FitResult
from scaling.relations import ConsistencyReport, ExponentSet, derive_exponent_relations
from templates import (
    DENSITY_ROW,
    DEPARTURE_ROW,
    EXPONENT_ROW,
    KIND_HEADER,
    MISSING_ROW,
    REFERENCE_EPSILON,
    REFERENCE_GROUND_COST_DENSITY,
    REFERENCE_MAX_WEIGHT,
    REFERENCE_RANDOM_LINK,
    REPORT_HEADER,
    TENSION_ROW,
)
from utils.errors import DegenerateWindow, InsufficientData, NonConvergence
from utils.logging import get_logger
from utils.rng import mix

logger = get_logger(__name__)

LINK_MODES = ("max", "random")
LINK_ROWS = ("alpha", "gamma", "zeta_fit", "zeta_derived", "d_f", "kappa", "kappa_winding_only", "d_f_from_kappa", "stiffness")
EPSILON_ROWS = ("beta", "tau", "tau_from_beta", "beta_uncut", "tau_uncut")

# Fit failures that leave a row empty instead of aborting the report.
FIT_ERRORS = (InsufficientData, DegenerateWindow, NonConvergence)


class DensityRow(BaseModel):
    L: int
    ground_cost_density: Estimate
    delta_e: Estimate | None = None


class DepartureRow(BaseModel):
    L: int
    threshold: Estimate | None = None
    never: int = 0


class KindReport(BaseModel):
    kind: str
    sizes: list[int]
    fits: dict[str, FitResult] = {}
    missing: dict[str, str] = {}
    consistency: ConsistencyReport
    densities: list[DensityRow] = []
    departures: list[DepartureRow] = []


class FitReport(BaseModel):
    records_path: str
    mode: str
    kinds: list[KindReport]


def resolve_records_path(records_path: Path) -> Path:
    return records_path / FINAL_NAME if records_path.is_dir() else records_path


def load_records(records_path: Path) -> pd.DataFrame:
    """Read a record file (or the records.csv inside a run directory).

    Raises:
        InsufficientData: The file is missing or holds no rows.
    """
    path = resolve_records_path(records_path)
    if not path.is_file():
        raise InsufficientData(f"No record file at {path}")
    frame = pd.read_csv(path, dtype={"kind": str, "excitation": str})
    if frame.empty:
        raise InsufficientData(f"Record file {path} holds no rows")
    return frame


def infer_mode(frame: pd.DataFrame, mode: str | None) -> str:
    modes = sorted(frame["excitation"].dropna().unique())
    if mode is None:
        if len(modes) != 1:
            raise ValueError(f"Records mix excitation modes {modes}; choose one with --mode")
        return modes[0]
    if mode not in modes:
        raise InsufficientData(f"No records for excitation mode '{mode}' (found {modes})")
    return mode


def cost_normalization(kind: str, L: int) -> float:
    """N in the ground-cost density: L^2/2 on H and Q, L^2 on T."""
    return float(L * L) if kind == LatticeKind.T else L * L / 2


def matching_cardinality(L: int) -> float:
    return L * L / 2


def _means(
    groups: dict[int, np.ndarray],
    n_boot: int,
    seed: int,
    ) -> tuple[list[int], list[float], list[float]]:
    sizes, values, errors = [], [], []
    for L, data in sorted(groups.items()):
        if data.size == 0:
            continue
        estimate = bootstrap_mean(data, n_boot, mix(seed, L))
        sizes.append(L)
        values.append(estimate.value)
        errors.append(estimate.std_error)
    return sizes, values, errors


def _scaling_fit(sizes: list[int], values: list[float], errors: list[float]) -> FitResult:
    if len(sizes) >= CORRECTION_MIN_SIZES:
        return fit_scaling_with_correction(sizes, values, errors)
    return fit_log_log(sizes, values, errors, method="linear")


def _attempt(name: str, fits: dict[str, FitResult], missing: dict[str, str], fit: Callable[[], FitResult]) -> None:
    try:
        fits[name] = fit()
    except FIT_ERRORS as e:
        logger.warning(f"Skipping {name}: {e}")
        missing[name] = str(e)


def _link_kind_report(
    kind: str,
    frame: pd.DataFrame,
    zeta_window: tuple[float, float],
    n_boot: int,
    seed: int,
    winding_only: bool,
    ) -> KindReport:
    """Exponents of one lattice kind from max-weight or random-link records.

    Steps:
    1. Per-size bootstrap means of S, R^2, theta^2 and dE
    2. alpha and gamma from finite-size scaling of <S> and <R^2>
    3. zeta from the largest-size CCDF on [L^a, L^b]
    4. kappa from <theta^2> against ln L, all loops and winding loops only
    5. Stiffness exponent of <dE> and the ground-cost density per size
    """
    loops = frame[frame["loop_index"].notna()]
    instances = frame[frame["loop_index"].isna()]
    sizes = sorted(int(L) for L in instances["L"].unique())
    if len(sizes) < KAPPA_MIN_SIZES:
        raise InsufficientData(f"Kind {kind} has records for sizes {sizes}; need at least {KAPPA_MIN_SIZES} distinct L")

    tag = LatticeKind(kind).tag
    by_size = {L: loops[loops["L"] == L] for L in sizes}
    winding = loops[(loops["wx"] != 0) | (loops["wy"] != 0)]
    fits: dict[str, FitResult] = {}
    missing: dict[str, str] = {}

    s_stats = _means({L: part["S"].to_numpy(float) for L, part in by_size.items()}, n_boot, mix(seed, tag, 1))
    r_stats = _means({L: part["R2"].to_numpy(float) for L, part in by_size.items()}, n_boot, mix(seed, tag, 2))
    _attempt("alpha", fits, missing, lambda: _scaling_fit(*s_stats))
    _attempt("gamma", fits, missing, lambda: _scaling_fit(*r_stats))

    largest = sizes[-1]
    window = (largest ** zeta_window[0], largest ** zeta_window[1])
    _attempt("zeta_fit", fits, missing, lambda: fit_tail_exponent(
        empirical_ccdf(by_size[largest]["S"].to_numpy(float)), window, n_boot, mix(seed, tag, 3),
    ))

    all_theta = _means({L: part["theta2_gauged"].to_numpy(float) for L, part in by_size.items()}, n_boot, mix(seed, tag, 4))
    winding_theta = _means(
        {L: winding[winding["L"] == L]["theta2_gauged"].to_numpy(float) for L in sizes}, n_boot, mix(seed, tag, 5),
    )
    _attempt("kappa_winding_only", fits, missing, lambda: fit_winding_kappa(*winding_theta))
    if winding_only:
        if "kappa_winding_only" in fits:
            fits["kappa"] = fits["kappa_winding_only"]
        else:
            missing["kappa"] = missing["kappa_winding_only"]
    else:
        _attempt("kappa", fits, missing, lambda: fit_winding_kappa(*all_theta))

    energy = _means(
        {L: instances[instances["L"] == L]["delta_e"].to_numpy(float) for L in sizes}, n_boot, mix(seed, tag, 6),
    )
    _attempt("stiffness", fits, missing, lambda: fit_log_log(*energy, method="linear"))

    densities = []
    delta_by_size = {L: Estimate(value=v, std_error=e) for L, v, e in zip(*energy)}
    for L, value, error in zip(*_means(
        {L: instances[instances["L"] == L]["ground_cost"].to_numpy(float) / cost_normalization(kind, L) for L in sizes},
        n_boot,
        mix(seed, tag, 7),
    )):
        densities.append(DensityRow(
            L=L,
            ground_cost_density=Estimate(value=value, std_error=error),
            delta_e=delta_by_size.get(L),
        ))

    exponents = ExponentSet(
        kind=kind,
        **{name: fit.estimate for name, fit in fits.items() if name in ExponentSet.model_fields},
    )
    return KindReport(
        kind=kind,
        sizes=sizes,
        fits=fits,
        missing=missing,
        consistency=derive_exponent_relations(exponents),
        densities=densities,
    )


def _epsilon_curves(instances: pd.DataFrame, L: int) -> pd.DataFrame:
    """Per-epsilon means of d and dE/N with their standard errors."""
    part = instances[instances["L"] == L].assign(energy=lambda f: f["delta_e"] / matching_cardinality(L))
    grouped = part.groupby("epsilon").agg(
        distance=("distance", "mean"),
        distance_se=("distance", "sem"),
        energy=("energy", "mean"),
        energy_se=("energy", "sem"),
    )
    return grouped.reset_index().sort_values("epsilon")


def _departures(instances: pd.DataFrame, L: int, n_boot: int, seed: int) -> DepartureRow:
    part = instances[instances["L"] == L]
    moved = part[part["distance"] > 0].groupby("instance")["epsilon"].min()
    never = int(part["instance"].nunique() - moved.size)
    if moved.empty:
        return DepartureRow(L=L, never=never)
    return DepartureRow(L=L, threshold=bootstrap_mean(moved.to_numpy(float), n_boot, seed), never=never)


def _epsilon_kind_report(kind: str, frame: pd.DataFrame, epsilon_cut: float, n_boot: int, seed: int) -> KindReport:
    """beta and tau per size; the largest size feeds the exponent set."""
    instances = frame[frame["loop_index"].isna()]
    sizes = sorted(int(L) for L in instances["L"].unique())
    tag = LatticeKind(kind).tag
    fits: dict[str, FitResult] = {}
    missing: dict[str, str] = {}
    departures = []

    for L in sizes:
        curves = _epsilon_curves(instances, L)
        if len(curves) < EPSILON_MIN_POINTS:
            raise InsufficientData(f"Stratum {kind}/{L} has {len(curves)} epsilon values; need at least {EPSILON_MIN_POINTS}")
        columns = (curves["epsilon"], curves["distance"], curves["energy"], curves["distance_se"], curves["energy_se"])
        for suffix, cut in (("", epsilon_cut), ("_uncut", None)):
            try:
                beta, tau = fit_epsilon_exponents(*columns, cut=cut)
                fits[f"beta{suffix}[L={L}]"] = beta
                fits[f"tau{suffix}[L={L}]"] = tau
            except FIT_ERRORS as e:
                logger.warning(f"Skipping epsilon fit{suffix} for {kind}/{L}: {e}")
                missing[f"beta{suffix}[L={L}]"] = str(e)
        departures.append(_departures(instances, L, n_boot, mix(seed, tag, L)))

    largest = sizes[-1]
    for suffix in ("", "_uncut"):
        for name in (f"beta{suffix}", f"tau{suffix}"):
            key = f"{name}[L={largest}]"
            if key in fits:
                fits[name] = fits[key]
            else:
                missing[name] = missing[f"beta{suffix}[L={largest}]"]

    exponents = ExponentSet(kind=kind, beta=fits["beta"].estimate if "beta" in fits else None,
                            tau=fits["tau"].estimate if "tau" in fits else None)
    return KindReport(
        kind=kind,
        sizes=sizes,
        fits=fits,
        missing=missing,
        consistency=derive_exponent_relations(exponents),
        departures=departures,
    )


def fit_report(
    records_path: Path,
    mode: str | None = None,
    zeta_window: tuple[float, float] = (1.0, 1.5),
    epsilon_cut: float = EPSILON_CUT,
    n_boot: int = N_BOOT,
    seed: int = 0,
    winding_only: bool = False,
    ) -> FitReport:
    """Run the statistics pipeline over a record file.

    Args:
        records_path: A records.csv or the run directory holding it.
        mode: Excitation mode to fit; inferred when the records hold one.
        zeta_window: Tail window exponents (a, b) giving [L^a, L^b].
        epsilon_cut: Largest epsilon in the small-epsilon fits.
        n_boot: Bootstrap resamples.
        seed: Bootstrap seed.
        winding_only: Take kappa from loops with non-zero winding only.

    Returns:
        One exponent set with consistency checks per lattice kind.

    Raises:
        InsufficientData: Missing records or a stratum with too few sizes or epsilon values.
    """
    frame = load_records(records_path)
    mode = infer_mode(frame, mode)
    frame = frame[frame["excitation"] == mode]

    kinds = []
    for kind in sorted(frame["kind"].unique()):
        part = frame[frame["kind"] == kind]
        if mode in LINK_MODES:
            kinds.append(_link_kind_report(kind, part, zeta_window, n_boot, seed, winding_only))
        else:
            kinds.append(_epsilon_kind_report(kind, part, epsilon_cut, n_boot, seed))
        logger.info(f"Fitted kind {kind}: {len(kinds[-1].fits)} fits, {len(kinds[-1].missing)} skipped")

    return FitReport(records_path=str(resolve_records_path(records_path)), mode=mode, kinds=kinds)


def _references(mode: str, kind: str) -> dict[str, float]:
    if mode == "epsilon":
        return REFERENCE_EPSILON.get(kind, {})
    table = REFERENCE_MAX_WEIGHT if mode == "max" else REFERENCE_RANDOM_LINK
    return table.get(kind, {})


def _estimate(kind_report: KindReport, name: str) -> Estimate | None:
    if name in kind_report.fits:
        return kind_report.fits[name].estimate
    return getattr(kind_report.consistency.exponents, name, None)


def render_text(report: FitReport) -> str:
    """Human-readable table of exponents next to published values."""
    lines = [textwrap.dedent(REPORT_HEADER.format(
        records_path=report.records_path,
        mode=report.mode,
        kinds=", ".join(k.kind for k in report.kinds),
    )).strip()]

    for kind_report in report.kinds:
        lines.append(textwrap.dedent(KIND_HEADER.format(kind=kind_report.kind, sizes=kind_report.sizes)).rstrip())
        references = _references(report.mode, kind_report.kind)
        for name in (EPSILON_ROWS if report.mode == "epsilon" else LINK_ROWS):
            estimate = _estimate(kind_report, name)
            if estimate is None:
                reason = kind_report.missing.get(name, "needs inputs that were skipped")
                lines.append(MISSING_ROW.format(name=name, reason=reason))
                continue
            reference = references.get(name)
            lines.append(EXPONENT_ROW.format(
                name=name,
                value=estimate.value,
                error=estimate.std_error,
                reference="-" if reference is None else f"{reference:.3f}",
            ))

        consistency = kind_report.consistency
        for name, value in (
            ("zeta_fit vs derived", consistency.zeta_tension),
            ("tau vs (1+beta)/beta", consistency.tau_tension),
            ("D_f vs 1+kappa/8", consistency.d_f_tension),
        ):
            if value is not None:
                lines.append(TENSION_ROW.format(name=name, value=value))

        for row in kind_report.densities:
            lines.append(DENSITY_ROW.format(
                L=row.L,
                value=row.ground_cost_density.value,
                error=row.ground_cost_density.std_error,
                delta=row.delta_e.value if row.delta_e else float("nan"),
                delta_error=row.delta_e.std_error if row.delta_e else float("nan"),
            ))
        if kind_report.densities:
            lines.append(f"    reference <E[D*]>/N = {REFERENCE_GROUND_COST_DENSITY.get(kind_report.kind, float('nan')):.3f}, "
                         f"<dE> = {references.get('delta_e', float('nan')):.3f}")

        for row in kind_report.departures:
            if row.threshold is None:
                lines.append(MISSING_ROW.format(name=f"eps* L={row.L}", reason="no instance left the ground state"))
            else:
                lines.append(DEPARTURE_ROW.format(L=row.L, value=row.threshold.value, error=row.threshold.std_error, never=row.never))

    return "\n".join(lines) + "\n"


def render_key_values(report: FitReport) -> str:
    """One line per exponent: kind, name and the FitResult keys, derived values with their error only."""
    lines = []
    for kind_report in report.kinds:
        for name, fit in kind_report.fits.items():
            fields = " ".join(f"{key}={value!r}" for key, value in fit.key_values().items())
            lines.append(f"kind={kind_report.kind} mode={report.mode} name={name} {fields} method={fit.method}")
        derived = kind_report.consistency.exponents
        for name in ("d_f", "zeta_derived", "d_f_from_kappa", "tau_from_beta"):
            estimate = getattr(derived, name)
            if estimate is not None:
                lines.append(
                    f"kind={kind_report.kind} mode={report.mode} name={name} "
                    f"exponent={estimate.value!r} std_error={estimate.std_error!r} method=derived"
                )
    return "\n".join(lines) + "\n"


def _save(path: Path, x, y) -> Path:
    np.savetxt(path, np.column_stack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)]), fmt="%.17g")
    return path


def write_plot_data(records_path: Path, out_dir: Path, mode: str | None = None) -> list[Path]:
    """Two-column data files for every figure of a run.

    Link modes: CCDF per size, <S> and <R^2> against L, <theta^2> against ln L.
    Epsilon mode: <d> against epsilon and <dE>/N against <d> per size.

    Returns:
        The written files.
    """
    frame = load_records(records_path)
    mode = infer_mode(frame, mode)
    frame = frame[frame["excitation"] == mode]
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    for kind in sorted(frame["kind"].unique()):
        part = frame[frame["kind"] == kind]
        instances = part[part["loop_index"].isna()]
        if mode == "epsilon":
            for L in sorted(int(v) for v in instances["L"].unique()):
                curves = _epsilon_curves(instances, L)
                written.append(_save(out_dir / f"distance_{kind}_L{L}.dat", curves["epsilon"], curves["distance"]))
                written.append(_save(out_dir / f"energy_{kind}_L{L}.dat", curves["distance"], curves["energy"]))
            continue

        loops = part[part["loop_index"].notna()]
        means = loops.groupby("L").agg(S=("S", "mean"), R2=("R2", "mean"), theta2=("theta2_gauged", "mean")).reset_index()
        for L, group in loops.groupby("L"):
            ccdf = empirical_ccdf(group["S"].to_numpy(float), min_samples=1)
            written.append(_save(out_dir / f"ccdf_{kind}_L{int(L)}.dat", ccdf.values, ccdf.tail))
        written.append(_save(out_dir / f"mean_S_{kind}.dat", means["L"], means["S"]))
        written.append(_save(out_dir / f"mean_R2_{kind}.dat", means["L"], means["R2"]))
        written.append(_save(out_dir / f"theta2_{kind}.dat", np.log(means["L"].to_numpy(float)), means["theta2"]))

    logger.info(f"Wrote {len(written)} plot data files to {out_dir}")
    return written
