"""Positive radial solution of -u'' - (N-1)/r u' + u = u^(p-1) with Dirichlet ends.

The 1D problem is discretized with exactly the radial fluxes and cell measures
of the 2D operator, so a radial solution lifted onto a 2D grid with the same
radial nodes is a discrete fixed point of T there as well.
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import ConfigError, ConvergenceError, GridMismatchError
from .grid import radial_cell_measures, radial_nodes_for
from .models import AnnulusGrid, Field, ProblemParams, RadialSolution
from .operators import radial_flux_weights
from .utils import abs_power

logger = logging.getLogger(__name__)

BUMP_POWERS = (1.0, 2.0, 4.0)
EPS = float(np.finfo(np.float64).eps)
ROUNDOFF_FACTOR = 16.0


class RadialOperators:
    """Tridiagonal radial stiffness on interior nodes plus the two cell measures."""

    def __init__(self, r_nodes: np.ndarray, N: int):
        self.r = np.asarray(r_nodes, dtype=np.float64)
        self.N = int(N)
        w = radial_flux_weights(self.r, self.N)
        vr, vr_inv2 = radial_cell_measures(self.r, self.N)
        self.volumes = vr[1:-1]
        self.inv2_volumes = vr_inv2[1:-1]
        # interior rows of D^T diag(w) D
        self.diag = w[:-1] + w[1:]
        self.off = -w[1:-1]

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y

    def banded(self, shift: np.ndarray) -> np.ndarray:
        """(K + diag(shift)) in solve_banded's (1, 1) layout."""
        ab = np.zeros((3, self.n))
        ab[0, 1:] = self.off
        ab[1] = self.diag + shift
        ab[2, :-1] = self.off
        return ab

    def dense(self, shift: np.ndarray) -> np.ndarray:
        A = np.diag(self.diag + shift)
        A += np.diag(self.off, 1) + np.diag(self.off, -1)
        return A


def radial_residual(ops: RadialOperators, x: np.ndarray, p: float) -> np.ndarray:
    """Pointwise residual -u'' - (N-1)/r u' + u - u^(p-1) at interior nodes."""
    F = ops.matvec(x) + ops.volumes * x - ops.volumes * abs_power(x, p - 1.0)
    return F / ops.volumes


def residual_scale(ops: RadialOperators, x: np.ndarray, p: float) -> float:
    """Size of the largest term in the equation; residuals are reported relative to it."""
    terms = (np.abs(ops.matvec(x) / ops.volumes), np.abs(x), abs_power(x, p - 1.0))
    return max(max(float(np.max(t)) for t in terms), 1e-300)


def relative_residual(ops: RadialOperators, x: np.ndarray, p: float) -> float:
    return float(np.max(np.abs(radial_residual(ops, x, p)))) / residual_scale(ops, x, p)


def roundoff_floor(ops: RadialOperators, x: np.ndarray, p: float) -> float:
    """Relative residual that evaluating the stencil in floating point can not go below.

    The flux differences cancel terms of size |K||x|, which grows like n1d^2
    against the residual scale.
    """
    ax = np.abs(x)
    terms = ops.diag * ax
    terms[:-1] += np.abs(ops.off) * ax[1:]
    terms[1:] += np.abs(ops.off) * ax[:-1]
    terms += ops.volumes * (ax + abs_power(x, p - 1.0))
    return ROUNDOFF_FACTOR * EPS * float(np.max(terms / ops.volumes)) / residual_scale(ops, x, p)


def effective_tol(ops: RadialOperators, x: np.ndarray, p: float, tol: float) -> float:
    return max(tol, roundoff_floor(ops, x, p))


def _nehari_scaled(ops: RadialOperators, b: np.ndarray, p: float) -> np.ndarray:
    quad = float(b @ (ops.matvec(b) + ops.volumes * b))
    nl = float(ops.volumes @ abs_power(b, p))
    return b * (quad / nl) ** (1.0 / (p - 2.0))


def _petviashvili(ops: RadialOperators, x: np.ndarray, p: float, iters: int) -> np.ndarray:
    """Normalized fixed-point sweeps u <- M^gamma S^-1 (u^(p-1)); settles the amplitude."""
    gamma = (p - 1.0) / (p - 2.0)
    ab = ops.banded(ops.volumes)
    for _ in range(iters):
        rhs = ops.volumes * abs_power(x, p - 1.0)
        num = float(x @ (ops.matvec(x) + ops.volumes * x))
        den = float(x @ rhs)
        if den <= 0:
            break
        x = (num / den) ** gamma * solve_banded((1, 1), ab, rhs)
    return x


def _newton(ops: RadialOperators, x: np.ndarray, p: float, tol: float, max_iter: int) -> Tuple[np.ndarray, float, int]:
    def F(v):
        return ops.matvec(v) + ops.volumes * v - ops.volumes * abs_power(v, p - 1.0)

    fx = F(x)
    res = relative_residual(ops, x, p)
    for it in range(1, max_iter + 1):
        if res <= effective_tol(ops, x, p, tol):
            return x, res, it - 1
        shift = ops.volumes * (1.0 - (p - 1.0) * abs_power(x, p - 2.0))
        s = solve_banded((1, 1), ops.banded(shift), -fx)
        lam, merit = 1.0, 0.5 * float(fx @ fx)
        while lam > 1e-4:
            trial = x + lam * s
            ft = F(trial)
            if 0.5 * float(ft @ ft) <= (1.0 - 1e-4 * lam) * merit:
                break
            lam *= 0.5
        x, fx = trial, ft
        res = relative_residual(ops, x, p)
        logger.debug("radial newton %d: residual=%.3e step=%.3g", it, res, lam)
    return x, res, max_iter


def solve_radial(params: ProblemParams, n1d: int, tol: float = 1e-10, max_iter: int = 50,
                 guess: Optional[np.ndarray] = None) -> RadialSolution:
    """Damped Newton from a Nehari-scaled bump, restarted over three bump widths.

    tol bounds the sup-norm residual relative to residual_scale, since the
    amplitude grows like lambda_1^(1/(p-2)) as p approaches 2. On fine grids
    it is raised to the round-off floor of the stencil (roundoff_floor).

    guess (values on the n1d radial nodes) is tried first when given, which
    lets parameter sweeps continue from the previous sample.
    """
    params.validate()
    if int(n1d) != n1d or n1d < 16:
        raise ConfigError(f"n1d must be an integer >= 16 (got {n1d})")
    r = radial_nodes_for(params.R0, params.R1, int(n1d))
    ops = RadialOperators(r, params.N)
    p = params.p
    x01 = (r[1:-1] - params.R0) / (params.R1 - params.R0)

    starts = []
    if guess is not None:
        g = np.asarray(guess, dtype=np.float64)
        if g.size != r.size:
            raise GridMismatchError(f"radial guess has {g.size} values, grid has {r.size}")
        starts.append(("guess", g[1:-1].copy()))
    for k in BUMP_POWERS:
        b = (4.0 * x01 * (1.0 - x01)) ** k
        starts.append((f"bump^{k:g}", _petviashvili(ops, _nehari_scaled(ops, b, p), p, 40)))

    best = float("inf")
    for label, x0 in starts:
        x, res, its = _newton(ops, x0, p, tol, max_iter)
        best = min(best, res)
        if res <= effective_tol(ops, x, p, tol) and np.all(x > 0):
            values = np.concatenate(([0.0], x, [0.0]))
            logger.info("radial solution N=%d p=%g on [%g, %g]: residual %.3e after %d Newton steps (%s)",
                        params.N, p, params.R0, params.R1, res, its, label)
            return RadialSolution(params=params, r_nodes=r, values=values, residual_norm=res, iterations=its)
        logger.warning("radial Newton from %s failed (residual %.3e, min %.3e)", label, res, float(x.min()))
    raise ConvergenceError("radial Newton failed for every starting bump", residual=best, iterations=max_iter)


def radial_operators(rad: RadialSolution) -> RadialOperators:
    return RadialOperators(rad.r_nodes, rad.params.N)


def lift_radial(grid: AnnulusGrid, rad: RadialSolution) -> Field:
    """theta-constant field from the radial profile (cubic interpolation in r)."""
    r = rad.r_nodes
    scale = max(abs(grid.params.R1), 1.0)
    if abs(r[0] - grid.params.R0) > 1e-12 * scale or abs(r[-1] - grid.params.R1) > 1e-12 * scale:
        raise GridMismatchError("radial solution and grid have different radii")
    if r.size == grid.nr and np.array_equal(r, grid.r_nodes):
        prof = np.array(rad.values)
    else:
        prof = np.maximum(CubicSpline(r, rad.values)(grid.r_nodes), 0.0)
    prof[0] = prof[-1] = 0.0
    return Field(grid, np.repeat(prof[:, None], grid.ntheta, axis=1))
