"""Annulus geometry, the (r, theta) chart and quadrature of axisymmetric fields.

Integrals use the exact axisymmetric measure

    int_A f dx = omega_{N-2} int int f(r, theta) r^(N-1) cos^(N-2)(theta) dtheta dr

with one control cell per node (cells are clipped at R0, R1 and at the poles),
and the cell measures of r^(N-1), r^(N-3) and cos^(N-2) integrated exactly. The
quadrature of a nodal field is therefore a midpoint-type rule: exact for
constants and second order for smooth fields.
"""
from __future__ import annotations

import logging
from typing import Callable, Dict

import numpy as np
from scipy.special import betainc, gamma

from .errors import ConfigError, GridMismatchError
from .models import AnnulusGrid, Field, ProblemParams

logger = logging.getLogger(__name__)


def sphere_measure(dim: int) -> float:
    """Surface measure of the unit dim-sphere S^dim in R^(dim+1)."""
    return float(2.0 * np.pi ** ((dim + 1) / 2.0) / gamma((dim + 1) / 2.0))


def _cos_power_antiderivative(theta: np.ndarray, m: int) -> np.ndarray:
    """F(theta) = int_{-pi/2}^{theta} cos^m(s) ds, via the regularized incomplete beta."""
    a = (m + 1) / 2.0
    total = float(np.sqrt(np.pi) * gamma(a) / gamma(m / 2.0 + 1.0))
    x = np.clip((1.0 + np.sin(theta)) / 2.0, 0.0, 1.0)
    return total * betainc(a, a, x)


def _power_cell_measure(lo: np.ndarray, hi: np.ndarray, k: int) -> np.ndarray:
    """int_lo^hi r^k dr for integer k >= 0."""
    return (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)


def _cell_edges(nodes: np.ndarray, lo: float, hi: float):
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    left = np.concatenate(([lo], mid))
    right = np.concatenate((mid, [hi]))
    return left, right


def theta_nodes_for(ntheta: int) -> np.ndarray:
    """Uniform angles on [-pi/2, pi/2], mirrored so the set is exactly symmetric."""
    half = np.linspace(0.0, np.pi / 2.0, (ntheta + 1) // 2)
    return np.concatenate((-half[::-1][:-1], half))


def radial_nodes_for(R0: float, R1: float, n: int) -> np.ndarray:
    x = np.arange(n, dtype=np.float64) / (n - 1)
    r = R0 + (R1 - R0) * x
    r[0], r[-1] = R0, R1
    return r


def radial_cell_measures(r_nodes: np.ndarray, N: int):
    """Cell measures of r^(N-1) and r^(N-3) for the radial cells around each node."""
    lo, hi = _cell_edges(r_nodes, r_nodes[0], r_nodes[-1])
    return _power_cell_measure(lo, hi, N - 1), _power_cell_measure(lo, hi, N - 3)


def angular_cell_measures(theta_nodes: np.ndarray, N: int) -> np.ndarray:
    lo, hi = _cell_edges(theta_nodes, -np.pi / 2.0, np.pi / 2.0)
    F = lambda t: _cos_power_antiderivative(t, N - 2)
    return F(hi) - F(lo)


def build_grid(params: ProblemParams, nr: int, ntheta: int) -> AnnulusGrid:
    params.validate()
    problems = []
    if int(nr) != nr or nr < 3:
        problems.append(f"nr must be an integer >= 3 (got {nr})")
    if int(ntheta) != ntheta or ntheta < 3 or ntheta % 2 == 0:
        problems.append(f"ntheta must be an odd integer >= 3 (got {ntheta})")
    if problems:
        raise ConfigError(problems)
    nr, ntheta = int(nr), int(ntheta)
    N = int(params.N)

    r = radial_nodes_for(params.R0, params.R1, nr)
    theta = theta_nodes_for(ntheta)
    vr, vr_inv2 = radial_cell_measures(r, N)
    vt = angular_cell_measures(theta, N)
    vt = 0.5 * (vt + vt[::-1])
    omega = sphere_measure(N - 2)
    weights = omega * np.outer(vr, vt)
    for arr in (r, theta, vr, vr_inv2, vt, weights):
        arr.flags.writeable = False

    logger.debug("grid N=%d nr=%d ntheta=%d volume=%.6g", N, nr, ntheta, weights.sum())
    return AnnulusGrid(params=params, nr=nr, ntheta=ntheta, r_nodes=r, theta_nodes=theta,
                       quad_weights=weights, r_volumes=vr, r_inv2_volumes=vr_inv2,
                       theta_volumes=vt, omega=omega)


def annulus_volume(params: ProblemParams) -> float:
    N = params.N
    return sphere_measure(N - 1) * (params.R1 ** N - params.R0 ** N) / N


def _fixed_order_sum(values: np.ndarray) -> float:
    # strict left-to-right accumulation in row-major order
    flat = values.ravel()
    return float(np.cumsum(flat)[-1]) if flat.size else 0.0


def integrate(grid: AnnulusGrid, f: Field) -> float:
    if f.grid is not grid:
        raise GridMismatchError("field does not live on this grid")
    return _fixed_order_sum(grid.quad_weights * f.values)


def weighted_sum(grid: AnnulusGrid, values: np.ndarray) -> float:
    """Quadrature of a raw (nr, ntheta) array with the same summation order as integrate."""
    return _fixed_order_sum(grid.quad_weights * values)


def field_from_function(grid: AnnulusGrid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Field:
    R, TH = np.meshgrid(grid.r_nodes, grid.theta_nodes, indexing="ij")
    return Field(grid, np.broadcast_to(fn(R, TH), grid.shape))


def zeros(grid: AnnulusGrid) -> Field:
    return Field(grid, np.zeros(grid.shape))


def field_from_dict(data: Dict, grid: AnnulusGrid | None = None) -> Field:
    if grid is None:
        grid = build_grid(ProblemParams.from_dict(data["params"]), int(data["nr"]), int(data["ntheta"]))
    elif (grid.nr, grid.ntheta) != (int(data["nr"]), int(data["ntheta"])):
        raise GridMismatchError("serialized field does not match the grid shape")
    return Field(grid, np.asarray(data["values"], dtype=np.float64).reshape(grid.shape))
