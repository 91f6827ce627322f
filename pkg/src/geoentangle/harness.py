"""
Experiment orchestration: coupling sweeps, critical scans, log-linear fits
and report files.

Off criticality the saturated entanglement per block is fitted as
``E_asym = (c/12) ln ξ + const``; at the critical point the single-copy
entanglement is fitted as ``E₁(L) = (c/6) ln L + const``.
"""

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import geoent, imps, models
from .errors import CriticalDegeneracy, InsufficientPoints, InvalidInput, IoError, IterationLimit

logger = logging.getLogger(__name__)

CSV_HEADER = ("h", "chi", "L", "xi", "lambda1", "E_asym", "E_finite", "E1", "nu2_abs")
CRITICAL_COUPLING = {"tfim": 1.0, "xx": 0.0}
# local slope below this fraction of the first slope marks the window end
SATURATION_FRACTION = 0.1
BOUND_TOL = 1e-8
# the gap closes at the critical point, so imaginary-time relaxation is slow
CRITICAL_SCHEDULE = ((0.1, 3000), (0.02, 3000), (0.005, 2000), (0.001, 2000))
# parity-symmetric product start: finite-chi evolution from a generic start
# breaks the spin-flip symmetry at the critical point
SYMMETRIC_START = {"tfim": (1.0, 0.0)}


@dataclass(frozen=True)
class SweepRecord:
    """One row of a sweep or scan; ``L`` is the block size used for E₁ and E_finite."""

    h: float
    chi: int
    L: int
    xi: float
    lambda1: float
    E_asym: float
    E_finite: Optional[float]
    E1: float
    nu2_abs: float
    saturated: bool = False


@dataclass(frozen=True)
class FitResult:
    """Least-squares line ``y = slope ln x + intercept``.

    ``c_est`` is ``12 slope`` for ``mode="offcritical"`` and ``6 slope`` for
    ``mode="critical"``.
    """

    slope: float
    intercept: float
    c_est: float
    r2: float
    n_points: int
    mode: str = "offcritical"


_C_FACTOR = {"offcritical": 12.0, "critical": 6.0}


def num_threads() -> int:
    """Worker count from GEOENT_NUM_THREADS, defaulting to the CPU count."""
    raw = os.environ.get("GEOENT_NUM_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise InvalidInput(f"GEOENT_NUM_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise InvalidInput("GEOENT_NUM_THREADS must be positive")
        return n
    return os.cpu_count() or 1


def _ordered_map(fn, items, threads=None):
    """``[fn(x) for x in items]``, possibly on a thread pool; output keeps input order."""
    threads = num_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# fits
# --------------------------------------------------------------------------


def fit_loglinear(xs, ys, mode: str = "offcritical") -> FitResult:
    """Ordinary least squares of ``ys`` against ``ln xs``.

    Raises
    ------
    InsufficientPoints
        Fewer than two distinct ``xs``.
    """
    if mode not in _C_FACTOR:
        raise InvalidInput(f"mode must be one of {sorted(_C_FACTOR)}")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InvalidInput("xs and ys must be 1-d arrays of equal length")
    if np.any(xs <= 0) or not np.all(np.isfinite(xs)) or not np.all(np.isfinite(ys)):
        raise InvalidInput("xs must be positive and all values finite")
    if len(np.unique(xs)) < 2:
        raise InsufficientPoints(f"need at least two distinct x values, got {len(np.unique(xs))}")
    X = np.log(xs)
    design = np.column_stack([X, np.ones_like(X)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = ys - (slope * X + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    # constant data (up to rounding in the mean) is fitted exactly by slope 0
    if ss_tot <= 1e-28 * max(float(np.sum(ys**2)), 1e-300):
        r2 = 1.0
    else:
        r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return FitResult(float(slope), float(intercept), _C_FACTOR[mode] * float(slope), r2, len(xs), mode)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


def default_probe_length(xi: float) -> int:
    """Block size well inside the saturated regime, ``max(10, ceil(10 ξ))``."""
    return max(10, int(math.ceil(10.0 * xi)))


def ground_state(model_name: str, h: float, chi: int, seed: int = 0, opts=None, initial=None):
    """iTEBD ground state; a non-converged search is logged and its last iterate used."""
    model = models.make_model(model_name, h)
    opts = opts or models.ITEBDOptions(chi_max=chi)
    try:
        return models.itebd_ground_state(model, opts, seed=seed, initial=initial)
    except IterationLimit as err:
        logger.warning("h=%g: %s; using last iterate", h, err)
        return err.best


def _offcritical_point(model_name, h, chi, seed, L, finite, opts):
    mps = ground_state(model_name, h, chi, seed, opts)
    nu2 = geoent.second_eigenvalue_modulus(mps)
    xi = geoent.correlation_length(mps, nu2)
    E_asym = geoent.geoent_asymptotic(mps, nu2)
    L_probe = L if L is not None else default_probe_length(xi)
    A = geoent.transfer_block(mps, L_probe)
    spectrum = imps.block_spectrum_from_transfer(A.mat, mps.lam, L_probe)
    E1 = geoent.single_copy(mps, L_probe, spectrum)
    E_fin = geoent.geoent_finite(mps, L_probe, seed=seed, transfer=A).E if finite else None
    return SweepRecord(float(h), mps.chi, L_probe, xi, float(mps.lam[0]), E_asym, E_fin, E1, nu2)


def sweep_offcritical(
    model_name: str,
    h_list,
    chi: int,
    seed: int = 0,
    L: Optional[int] = None,
    finite: bool = True,
    opts=None,
    threads: Optional[int] = None,
):
    """Ground states along ``h_list`` and the fit of E_asym against ln ξ.

    Couplings whose state has no spectral gap are skipped with a log
    message. Records keep the order of ``h_list``.

    Returns
    -------
    records : list of SweepRecord
    fit : FitResult
        ``mode="offcritical"``, ``c_est = 12 slope``.

    Raises
    ------
    InsufficientPoints
        Fewer than two usable couplings.
    """
    h_list = [float(h) for h in h_list]

    def run(h):
        try:
            return _offcritical_point(model_name, h, chi, seed, L, finite, opts)
        except CriticalDegeneracy as err:
            logger.warning("h=%g skipped: %s", h, err)
            return None

    records = [r for r in _ordered_map(run, h_list, threads) if r is not None]
    fit = fit_loglinear([r.xi for r in records], [r.E_asym for r in records], "offcritical")
    return records, fit


def _transfer_powers(mps, L_list):
    """A(L) for every L in ``L_list``, reusing squares of earlier blocks."""
    cache = {1: geoent.transfer_matrix(mps)}
    out = {}
    for L in sorted(set(L_list)):
        half = L // 2
        if L % 2 == 0 and half in cache:
            cache[L] = geoent.TransferMatrix(L, cache[half].mat @ cache[half].mat, mps.lam)
        else:
            base = max(k for k in cache if L % k == 0)
            cache[L] = geoent.transfer_block(mps, L, base=cache[base])
        out[L] = cache[L]
    return out


def mark_saturation(L_list, E1_list, xi_eff: float):
    """Flags for points outside the critical window.

    A point is saturated when ``L`` exceeds the effective correlation length
    or once the local slope of E₁ against ln L has dropped below 10% of the
    first slope; every later point is saturated too.
    """
    L_arr = np.asarray(L_list, dtype=float)
    E = np.asarray(E1_list, dtype=float)
    flags = L_arr > xi_eff
    if len(L_arr) >= 3:
        slopes = np.diff(E) / np.diff(np.log(L_arr))
        ref = slopes[0]
        if ref > 0:
            for i, s in enumerate(slopes[1:], start=2):
                if s < SATURATION_FRACTION * ref:
                    flags[i:] = True
                    break
    # once saturated, always saturated
    if flags.any():
        flags[int(np.argmax(flags)):] = True
    return flags


def critical_scan(
    model_name: str,
    L_list,
    chi: int,
    seed: int = 0,
    h: Optional[float] = None,
    finite: bool = True,
    opts=None,
    mps=None,
):
    """E₁(L) and E_finite(L) at the critical coupling, and the E₁ vs ln L fit.

    Returns
    -------
    records : list of SweepRecord
        One per L (ascending); ``saturated`` marks points outside the window.
    fit : FitResult or None
        ``mode="critical"``, ``c_est = 6 slope``; ``None`` when fewer than two
        unsaturated points remain.
    violations : int
        Number of L with ``E_finite > E₁ + 1e-8``.
    """
    if h is None:
        try:
            h = CRITICAL_COUPLING[model_name]
        except KeyError:
            raise InvalidInput(f"no critical coupling known for {model_name!r}") from None
    L_list = sorted({int(L) for L in L_list})
    if not L_list or L_list[0] < 1:
        raise InvalidInput("L_list must contain positive block sizes")
    if mps is None:
        opts = opts or models.ITEBDOptions(chi_max=chi, dt_schedule=CRITICAL_SCHEDULE)
        mps = ground_state(model_name, h, chi, seed, opts, initial=SYMMETRIC_START.get(model_name))
    nu2 = geoent.second_eigenvalue_modulus(mps)
    xi_eff = -1.0 / math.log(nu2) if 0 < nu2 < 1 else math.inf
    E_asym = -2.0 * math.log(mps.lam[0])
    transfers = _transfer_powers(mps, L_list)

    rows = []
    violations = 0
    for L in L_list:
        A = transfers[L]
        spectrum = imps.block_spectrum_from_transfer(A.mat, mps.lam, L)
        E1 = geoent.single_copy(mps, L, spectrum)
        E_fin = geoent.geoent_finite(mps, L, seed=seed, transfer=A).E if finite else None
        if E_fin is not None and E_fin > E1 + BOUND_TOL:
            violations += 1
            logger.warning("L=%d: E_finite %.12f exceeds E1 %.12f", L, E_fin, E1)
        rows.append((L, E1, E_fin))

    flags = mark_saturation([r[0] for r in rows], [r[1] for r in rows], xi_eff)
    records = [
        SweepRecord(float(h), mps.chi, L, xi_eff, float(mps.lam[0]), E_asym, E_fin, E1, nu2, bool(flag))
        for (L, E1, E_fin), flag in zip(rows, flags)
    ]
    window = [r for r in records if not r.saturated]
    try:
        fit = fit_loglinear([r.L for r in window], [r.E1 for r in window], "critical")
    except InsufficientPoints as err:
        logger.info("critical fit refused: %s", err)
        fit = None
    return records, fit, violations


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    return buf.getvalue()


def read_csv(path) -> list:
    """Parse a report CSV back into records (``saturated`` is not stored and reads as False)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as err:
        raise IoError(f"cannot read {path}: {err}") from err
    out = []
    for row in rows:
        out.append(SweepRecord(
            h=float(row["h"]), chi=int(row["chi"]), L=int(row["L"]), xi=float(row["xi"]),
            lambda1=float(row["lambda1"]), E_asym=float(row["E_asym"]),
            E_finite=float(row["E_finite"]) if row["E_finite"] else None,
            E1=float(row["E1"]), nu2_abs=float(row["nu2_abs"]),
        ))
    return out


def _svg_plot(points, fit, xlabel, ylabel, saturated=()):
    """Scatter of (ln x, y) with the fitted line, as a standalone SVG document."""
    W, H, pad = 480, 360, 56
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    mx, my = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
    x0, x1, y0, y1 = x0 - mx, x1 + mx, y0 - my, y1 + my

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (W - 2 * pad)

    def sy(y):
        return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
        f'<text x="{W / 2:.1f}" y="{H - 16}" text-anchor="middle" font-size="14">{xlabel}</text>',
        f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {H / 2:.1f})">{ylabel}</text>',
    ]
    for v in (x0 + mx, x1 - mx):
        parts.append(f'<text x="{sx(v):.1f}" y="{H - pad + 16}" text-anchor="middle" font-size="10">{v:.3g}</text>')
    for v in (y0 + my, y1 - my):
        parts.append(f'<text x="{pad - 4}" y="{sy(v):.1f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    if fit is not None:
        a, b = x0 + mx, x1 - mx
        parts.append(
            f'<line x1="{sx(a):.2f}" y1="{sy(fit.slope * a + fit.intercept):.2f}" '
            f'x2="{sx(b):.2f}" y2="{sy(fit.slope * b + fit.intercept):.2f}" stroke="#c0392b" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{W - pad}" y="{pad - 12}" text-anchor="end" font-size="12">'
            f'c = {fit.c_est:.4f}, r2 = {fit.r2:.4f}</text>'
        )
    for i, (x, y) in enumerate(points):
        fill = "none" if i in saturated else "#2c3e50"
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" fill="{fill}" stroke="#2c3e50"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(records, fit: Optional[FitResult], out_dir, violations: int = 0, mode: Optional[str] = None):
    """Write ``records.csv``, ``summary.json`` and (when there is data) ``plot.svg``.

    Returns
    -------
    dict
        Paths of the files written, keyed by ``"csv"``, ``"json"``, ``"svg"``.

    Raises
    ------
    IoError
        The directory or a file cannot be written.
    """
    out = Path(out_dir)
    records = list(records)
    mode = mode or (fit.mode if fit is not None else "offcritical")
    summary = {
        "c_est": fit.c_est if fit else None,
        "r2": fit.r2 if fit else None,
        "n_points": fit.n_points if fit else 0,
        "violations": int(violations),
        "mode": mode,
        "slope": fit.slope if fit else None,
        "intercept": fit.intercept if fit else None,
        "saturated_L": [r.L for r in records if r.saturated],
    }
    paths = {"csv": out / "records.csv", "json": out / "summary.json"}
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths["csv"].write_text(records_to_csv(records), encoding="utf-8", newline="\n")
        paths["json"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if records:
            if mode == "critical":
                pts = [(math.log(r.L), r.E1) for r in records]
                labels = ("ln L", "E1")
            else:
                pts = [(math.log(r.xi), r.E_asym) for r in records]
                labels = ("ln xi", "E")
            sat = {i for i, r in enumerate(records) if r.saturated}
            paths["svg"] = out / "plot.svg"
            paths["svg"].write_text(_svg_plot(pts, fit, *labels, saturated=sat), encoding="utf-8")
    except OSError as err:
        raise IoError(f"cannot write report to {out}: {err}") from err
    return paths


def record_dict(record: SweepRecord) -> dict:
    return asdict(record)


# --------------------------------------------------------------------------
# invariant corpus
# --------------------------------------------------------------------------


@dataclass
class CheckResult:
    """Outcome of one invariant family over a corpus of states."""

    name: str
    tol: float
    cases: int = 0
    violations: int = 0
    worst: float = 0.0
    details: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, excess: float, label: str):
        """``excess`` > 0 is a violation of that size."""
        self.cases += 1
        self.worst = max(self.worst, excess)
        if excess > 0:
            self.violations += 1
            if len(self.details) < 5:
                self.details.append(f"{label}: exceeds by {excess:.3g}")


def random_corpus(seed: int = 0, n_states: int = 100, d: int = 2, chi: int = 3):
    """Seeded random canonical states, one child seed per state."""
    children = np.random.SeedSequence(seed).spawn(n_states)
    return [imps.random_imps(int(c.generate_state(1)[0]), d, chi) for c in children]


def model_corpus(chi: int = 16, couplings=(1.5, 2.0, 3.0), seed: int = 0):
    """TFIM ground states in the gapped phase, labelled by coupling."""
    return [(f"tfim h={h:g}", ground_state("tfim", h, chi, seed)) for h in couplings]


def check_weyl(states, L_list=(1, 2, 4), tol: float = 1e-10) -> CheckResult:
    res = CheckResult("weyl sandwich", tol)
    for label, mps in states:
        for L in L_list:
            wb = geoent.weyl_bounds(mps, L, check=False)
            excess = max(wb.lambda1 - wb.upper, wb.lower - wb.lambda1) - tol
            res.record(excess, f"{label} L={L}")
    return res


def check_structure(states, tol_power=1e-12, tol_nu1=1e-8, tol_canon=1e-8):
    """Canonical residuals, A(4) = A(2)², ν₁ = 1 and its eigenvector."""
    canon = CheckResult("canonical residuals", tol_canon)
    power = CheckResult("A(4) = A(2)^2", tol_power)
    nu1 = CheckResult("nu1 = 1 with eigenvector lambda delta", tol_nu1)
    for label, mps in states:
        canon.record(max(imps.canonical_residuals(mps)) - tol_canon, label)
        A2 = geoent.transfer_block(mps, 2)
        A4 = geoent.transfer_block(mps, 4)
        power.record(float(np.max(np.abs(A4.mat - A2.mat @ A2.mat))) - tol_power, label)
        eigs = geoent.transfer_spectrum(geoent.transfer_matrix(mps), check=False)
        dev = max(abs(eigs.values[0] - 1.0), 1.0 - geoent.dominant_overlap(A4, geoent.transfer_spectrum(A4, check=False)))
        nu1.record(float(dev) - tol_nu1, label)
    return [canon, power, nu1]


def check_upper_bound(states, L_list=(1, 2, 4), tol: float = BOUND_TOL, seed: int = 0) -> CheckResult:
    """Per-block geometric entanglement never exceeds single-copy entanglement."""
    res = CheckResult("E <= E1", tol)
    for label, mps in states:
        for L in L_list:
            A = geoent.transfer_block(mps, L)
            E1 = geoent.single_copy(mps, L, imps.block_spectrum_from_transfer(A.mat, mps.lam, L))
            E = geoent.geoent_finite(mps, L, seed=seed, transfer=A).E
            res.record(E - E1 - tol, f"{label} L={L}")
    return res


def check_grid_oracle(states, tol: float = 1e-4, seed: int = 0) -> CheckResult:
    """Alternating solver against the Bloch-sphere grid for qubit states at L = 1."""
    from . import oracle

    res = CheckResult("solver vs grid search", tol)
    for label, mps in states:
        E_solver = geoent.geoent_finite(mps, 1, seed=seed).E
        E_grid = oracle.geoent_grid(mps)
        res.record(abs(E_solver - E_grid) - tol, label)
    return res


def check_ed_oracle(tol: float = 1e-10) -> CheckResult:
    """Dense-state references: singlet, W state and the h = 0 Ising ring."""
    from . import oracle

    res = CheckResult("exact-diagonalisation oracle", tol)
    singlet = oracle.DenseState(2, 2, np.array([0, 1, -1, 0]) / math.sqrt(2))
    res.record(abs(oracle.brute_force_ge(singlet, 1).best_overlap_sq - 0.5) - tol, "singlet")
    w = np.zeros(8)
    w[[1, 2, 4]] = 1 / math.sqrt(3)
    res.record(abs(oracle.brute_force_ge(oracle.DenseState(3, 2, w), 1, grid=False).best_overlap_sq - 4 / 9) - 1e-8, "W")
    gs = oracle.ed_ground_state(models.tfim(0.0), 4)
    res.record(abs(gs.energy + 4.0) - tol, "tfim h=0 N=4 energy")
    return res


def run_verify(corpus_seed: int = 0, n_states: int = 100, chi: int = 3, model_chi: int = 16):
    """All invariant families over the random corpus plus model ground states."""
    rand = [(f"random#{i}", m) for i, m in enumerate(random_corpus(corpus_seed, n_states, 2, chi))]
    models_ = model_corpus(model_chi, seed=corpus_seed)
    states = rand + models_
    qubit_chi2 = [(f"random chi=2 #{i}", m) for i, m in enumerate(random_corpus(corpus_seed, 3, 2, 2))]
    checks = check_structure(states)
    checks.append(check_weyl(states))
    checks.append(check_upper_bound(rand[:20] + models_))
    checks.append(check_grid_oracle(qubit_chi2))
    checks.append(check_ed_oracle())
    return checks
