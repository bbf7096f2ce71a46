"""First eigenvalue of the radially reduced linearization and the nonradiality criterion.

The weighted problem

    -w'' - (N-1)/r w' + (1 - (p-1) u_rad^(p-2)) w = (alpha / r^2) w

is assembled in self-adjoint form A w = alpha M w with the radial fluxes of the
2D operator, M = diag(int r^(N-3)) per cell, and solved by shifted inverse
iteration. alpha_1 + 2N < 0 means the direction w(r) (1 - N sin^2 theta)
lowers the second variation at u_rad.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from .cone import check_cone
from .energy import action, h1_norm, nehari_scale, second_variation
from .errors import ConfigError, ConvergenceError, SolverError
from .grid import build_grid
from .models import (AnnulusGrid, CertificateReport, Field, ProblemParams, RadialSolution,
                     SpectralResult, SweepRow, SweepTable)
from .operators import OperatorSet, assemble, inv_r2_mass
from .radial import RadialOperators, lift_radial, solve_radial
from .utils import abs_power

logger = logging.getLogger(__name__)

SWEEP_MODES = ("vary_p", "vary_R")
COMPETITOR_SCALES = (1e-2, -1e-2, 1e-1, -1e-1)


def harmonic_Y(theta: np.ndarray, N: int) -> np.ndarray:
    """Axially symmetric degree-two harmonic, eigenvalue 2N of -Laplace on S^(N-1)."""
    return 1.0 - N * np.sin(theta) ** 2


def _potential_shift(ops: RadialOperators, u: np.ndarray, p: float, with_potential: bool) -> np.ndarray:
    if not with_potential:
        return ops.volumes.copy()
    return ops.volumes * (1.0 - (p - 1.0) * abs_power(u, p - 2.0))


def _start_vectors(x: np.ndarray, u: np.ndarray) -> List[np.ndarray]:
    out = [np.sin(k * np.pi * x) for k in (1, 2, 3, 4)]
    out += [(4.0 * x * (1.0 - x)) ** k for k in (2, 4)]
    if np.any(u > 0):
        out += [u.copy(), u ** 2]
    else:
        out += [(4.0 * x * (1.0 - x)) ** 8, np.sin(np.pi * x) ** 3]
    return out


def _rayleigh(ops: RadialOperators, shift: np.ndarray, w: np.ndarray) -> float:
    return float(w @ (ops.matvec(w) + shift * w)) / float(w @ (ops.inv2_volumes * w))


def _gershgorin_floor(ops: RadialOperators, shift: np.ndarray) -> float:
    d = 1.0 / np.sqrt(ops.inv2_volumes)
    diag = (ops.diag + shift) * d * d
    off = np.abs(ops.off) * d[:-1] * d[1:]
    radius = np.zeros_like(diag)
    radius[:-1] += off
    radius[1:] += off
    return float(np.min(diag - radius))


def _factor(ops: RadialOperators, shift: np.ndarray, sigma: float) -> np.ndarray:
    ab = ops.banded(shift - sigma * ops.inv2_volumes)
    return cholesky_banded(ab[:2], lower=False)


def _inverse_iteration(ops: RadialOperators, shift: np.ndarray, starts: Sequence[np.ndarray],
                       tol: float, max_iter: int) -> Tuple[float, np.ndarray, int]:
    quotients = [_rayleigh(ops, shift, v) for v in starts]
    start = starts[int(np.argmin(quotients))]
    q_min = min(quotients)
    sigma = q_min - max(1.0, 0.05 * abs(q_min))
    try:
        chol = _factor(ops, shift, sigma)
    except LinAlgError:
        sigma = _gershgorin_floor(ops, shift) - 1.0
        chol = _factor(ops, shift, sigma)
    logger.debug("inverse iteration shift %.6g (start minimum %.6g)", sigma, q_min)

    w = start / math.sqrt(float(start @ (ops.inv2_volumes * start)))
    alpha = _rayleigh(ops, shift, w)
    for it in range(1, max_iter + 1):
        y = cho_solve_banded((chol, False), ops.inv2_volumes * w)
        w = y / math.sqrt(float(y @ (ops.inv2_volumes * y)))
        new = _rayleigh(ops, shift, w)
        resid = ops.matvec(w) + shift * w - new * ops.inv2_volumes * w
        rel = float(np.max(np.abs(resid / ops.inv2_volumes))) / max(abs(new), 1.0)
        if abs(new - alpha) <= tol * max(abs(new), 1.0) and rel <= math.sqrt(tol):
            return new, w, it
        alpha = new
    raise ConvergenceError("inverse iteration stagnated", residual=abs(new - alpha), iterations=max_iter)


def alpha1_solve(rad: RadialSolution, n1d: Optional[int] = None, with_potential: bool = True,
                 tol: float = 1e-12, max_iter: int = 20000) -> SpectralResult:
    """alpha_1 and its positive eigenfunction, normalized by sum w^2 int r^(N-3) = 1.

    with_potential=False drops u_rad from the operator (test mode).
    """
    if n1d is not None and n1d != rad.r_nodes.size:
        guess = CubicSpline(rad.r_nodes, rad.values)(
            np.linspace(rad.params.R0, rad.params.R1, int(n1d)))
        rad = solve_radial(rad.params, int(n1d), tol=max(rad.residual_norm, 1e-10), guess=guess)
    params = rad.params
    ops = RadialOperators(rad.r_nodes, params.N)
    u = rad.values[1:-1]
    shift = _potential_shift(ops, u, params.p, with_potential)
    x = (rad.r_nodes[1:-1] - params.R0) / (params.R1 - params.R0)

    alpha1, w, its = _inverse_iteration(ops, shift, _start_vectors(x, u if with_potential else np.zeros_like(u)),
                                        tol, max_iter)
    if w.sum() < 0:
        w = -w
    if np.min(w) <= 0:
        logger.warning("first eigenfunction is not strictly positive (min=%.3e)", float(np.min(w)))
    full = np.concatenate(([0.0], w, [0.0]))
    N = int(params.N)
    logger.info("alpha1=%.12g (criterion %.6g) for N=%d p=%g R=[%g, %g] after %d iterations",
                alpha1, alpha1 + 2 * N, N, params.p, params.R0, params.R1, its)
    return SpectralResult(N=N, alpha1=float(alpha1), r_nodes=np.array(rad.r_nodes), w=full,
                          criterion=float(alpha1 + 2 * N), iterations=its)


def build_instability_direction(grid: AnnulusGrid, rad: RadialSolution, spec: SpectralResult) -> Field:
    """v(r, theta) = w(r) (1 - N sin^2 theta), w interpolated onto the grid radii."""
    if np.array_equal(spec.r_nodes, grid.r_nodes):
        w = np.array(spec.w)
    else:
        w = CubicSpline(spec.r_nodes, spec.w)(grid.r_nodes)
    w[0] = w[-1] = 0.0
    return Field(grid, np.outer(w, harmonic_Y(grid.theta_nodes, grid.params.N)))


def crosscheck(rad: RadialSolution, spec: SpectralResult, ntheta: int = 33) -> SpectralResult:
    """Fill second_variation_value, inv_r2_norm and crosscheck_ratio from a 2D lift.

    The 2D grid reuses the radial nodes, so the ratio differs from 1 only by the
    angular discretization of the harmonic's eigenvalue.
    """
    params = rad.params
    grid = build_grid(params, rad.r_nodes.size, ntheta)
    ops = assemble(grid)
    a = Field(grid, np.ones(grid.shape))
    u = lift_radial(grid, rad)
    v = build_instability_direction(grid, rad, spec)
    ii = second_variation(ops, a, params.p, u, v)
    inv = inv_r2_mass(ops, v, v)
    spec.second_variation_value = float(ii)
    spec.inv_r2_norm = float(inv)
    spec.crosscheck_ratio = float(ii / (spec.criterion * inv)) if spec.criterion != 0 else float("nan")
    return spec


def _require_unit_weight(a: Field) -> None:
    if not np.all(a.values == 1.0):
        raise ConfigError("the nonradiality certificate needs the constant weight a = 1")


def nonradiality_certificate(ops: OperatorSet, a: Field, p: float, rad: RadialSolution,
                             spec: SpectralResult, scales: Iterable[float] = COMPETITOR_SCALES,
                             margin: float = 1e-10) -> CertificateReport:
    """Criterion, second variation along v, and a Nehari-rescaled competitor t (u_rad + s v)."""
    _require_unit_weight(a)
    grid = ops.grid
    u = lift_radial(grid, rad)
    v = build_instability_direction(grid, rad, spec)
    ii = second_variation(ops, a, p, u, v)
    inv = inv_r2_mass(ops, v, v)
    base = action(ops, a, p, u).action
    report = CertificateReport(criterion=spec.criterion, alpha1=spec.alpha1, second_variation=float(ii),
                               inv_r2_norm=float(inv), action_rad=float(base),
                               nonradial_expected=bool(spec.criterion < 0))
    if not report.nonradial_expected:
        logger.info("criterion %.6g >= 0: no competitor search", spec.criterion)
        return report

    ratio = h1_norm(ops, u) / h1_norm(ops, v)
    best = math.inf
    for scale in scales:
        s = scale * ratio
        cand = u + s * v
        trial: Dict = {"s": float(s), "nonnegative": bool(cand.values.min() >= 0.0)}
        tau = 1e-12 * cand.sup_norm()
        trial["in_cone"] = bool(check_cone(grid, ops, cand, tau).in_cone)
        try:
            t = nehari_scale(ops, a, p, cand)
        except ConfigError:
            trial["status"] = "degenerate"
            report.trials.append(trial)
            continue
        value = action(ops, a, p, cand * t).action
        trial.update({"t": float(t), "action": float(value), "status": "ok"})
        report.trials.append(trial)
        if trial["in_cone"] and value < best:
            best = value
            report.competitor_s, report.competitor_t, report.competitor_action = float(s), float(t), float(value)
    report.competitor_found = bool(best < base - margin)
    logger.info("certificate: I(u_rad)=%.12g best competitor %.12g (found=%s)",
                base, report.competitor_action, report.competitor_found)
    return report


# --- sweeps ---

def sweep_params(mode: str, fixed: ProblemParams, value: float) -> ProblemParams:
    if mode == "vary_p":
        return fixed.replace(p=float(value))
    return fixed.replace(R0=float(value), R1=float(value) + 1.0)


def validate_sweep(mode: str, fixed: ProblemParams, lo: float, hi: float, samples: int) -> None:
    problems = []
    if mode not in SWEEP_MODES:
        problems.append(f"sweep mode must be one of {SWEEP_MODES} (got {mode!r})")
    if samples < 1:
        problems.append("sweep needs at least one sample")
    if hi < lo:
        problems.append(f"sweep range is empty ([{lo}, {hi}])")
    if mode == "vary_p" and lo <= 2:
        problems.append(f"vary_p range must lie in p > 2 (got {lo})")
    if mode == "vary_R":
        if lo <= 0:
            problems.append(f"vary_R range must lie in R > 0 (got {lo})")
        if abs((fixed.R1 - fixed.R0) - 1.0) > 1e-12:
            problems.append("vary_R uses annuli of width 1: set R1 = R0 + 1")
    if problems:
        raise ConfigError(problems)


def sweep_sample(mode: str, fixed: ProblemParams, value: float, n1d: int, tol: float,
                 ntheta_check: int = 33) -> SweepRow:
    params = sweep_params(mode, fixed, value)
    try:
        rad = solve_radial(params, n1d, tol=tol)
    except SolverError as exc:
        logger.warning("sweep %s=%g: radial solve failed: %s", mode, value, exc)
        return SweepRow(parameter=float(value), status="radial_failed")
    try:
        spec = crosscheck(rad, alpha1_solve(rad), ntheta_check)
    except SolverError as exc:
        logger.warning("sweep %s=%g: spectral solve failed: %s", mode, value, exc)
        return SweepRow(parameter=float(value), status="spectral_failed")
    return SweepRow(parameter=float(value), alpha1=spec.alpha1, criterion=spec.criterion,
                    second_variation=spec.second_variation_value)


def _criterion_at(mode: str, fixed: ProblemParams, value: float, n1d: int, tol: float) -> float:
    rad = solve_radial(sweep_params(mode, fixed, value), n1d, tol=tol)
    return alpha1_solve(rad).criterion


def locate_threshold(mode: str, fixed: ProblemParams, rows: Sequence[SweepRow], n1d: int,
                     tol: float, digits: int = 3) -> Optional[float]:
    """Bisect the first sign change of the criterion between consecutive good samples."""
    ok = [r for r in rows if r.ok]
    for left, right in zip(ok, ok[1:]):
        if np.sign(left.criterion) == np.sign(right.criterion) or left.criterion == 0:
            continue
        lo, hi, f_lo = left.parameter, right.parameter, left.criterion
        while hi - lo > 10.0 ** (-digits) * max(abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            try:
                f_mid = _criterion_at(mode, fixed, mid, n1d, tol)
            except SolverError as exc:
                logger.warning("threshold bisection stopped at %g: %s", mid, exc)
                break
            if np.sign(f_mid) == np.sign(f_lo):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        return float(0.5 * (lo + hi))
    return None


def fit_exponent(rows: Sequence[SweepRow], lo: float, hi: float) -> Tuple[Optional[float], Tuple[float, float]]:
    """Least-squares slope of log(-alpha_1) against log(parameter) over the top half of the range."""
    window = (lo + 0.5 * (hi - lo), hi)
    pts = [(r.parameter, -r.alpha1) for r in rows
           if r.ok and r.parameter >= window[0] and r.alpha1 < 0]
    if len(pts) < 2:
        return None, window
    x = np.log([pt[0] for pt in pts])
    y = np.log([pt[1] for pt in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope), window


def threshold_sweep(mode: str, fixed: ProblemParams, lo: float, hi: float, samples: int,
                    n1d: int = 257, tol: float = 1e-10, workers: int = 1, ntheta_check: int = 33,
                    done: Optional[Dict[float, SweepRow]] = None,
                    on_row: Optional[Callable[[SweepRow], None]] = None) -> SweepTable:
    """Sample alpha_1 over a parameter range; samples found in `done` are not recomputed."""
    validate_sweep(mode, fixed, lo, hi, samples)
    values = [float(v) for v in np.linspace(lo, hi, int(samples))] if samples > 1 else [float(lo)]
    done = dict(done or {})
    todo = [v for v in values if v not in done]
    logger.info("sweep %s over [%g, %g]: %d samples (%d cached), %d workers",
                mode, lo, hi, len(values), len(values) - len(todo), workers)

    def run(value: float) -> SweepRow:
        row = sweep_sample(mode, fixed, value, n1d, tol, ntheta_check)
        if on_row is not None:
            on_row(row)
        return row

    if workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            fresh = list(pool.map(run, todo))
    else:
        fresh = [run(v) for v in todo]
    done.update({r.parameter: r for r in fresh})
    rows = [done[v] for v in values]

    table = SweepTable(mode=mode, rows=rows)
    ok = [r for r in rows if r.ok]
    table.monotone_violations = sum(1 for x, y in zip(ok, ok[1:]) if y.alpha1 > x.alpha1)
    if table.monotone_violations:
        logger.warning("alpha1 is not nonincreasing along the sweep (%d violations)", table.monotone_violations)
    table.sign_agreement = all(
        np.sign(r.second_variation) == np.sign(r.criterion)
        for r in ok if abs(r.criterion) > 1e-4 * abs(r.alpha1))
    if len(values) > 1:
        table.threshold = locate_threshold(mode, fixed, rows, n1d, tol)
        table.fit_exponent, table.fit_window = fit_exponent(rows, lo, hi)
    return table
