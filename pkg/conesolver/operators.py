"""Flux-form discretization of -Laplace + Id on axisymmetric fields.

The Laplacian in the (r, theta) chart is

    u_rr + (N-1)/r u_r + r^-2 cos^(2-N)(theta) d_theta(cos^(N-2)(theta) u_theta)

and is assembled from fluxes across cell faces:

  radial faces   weight  omega * r_{i+1/2}^(N-1) / hr        * theta_volumes[j]
  angular faces  weight  omega * cos^(N-2)(theta_{j+1/2}) / htheta * r_inv2_volumes[i]

so the gradient part K is symmetric by construction, the mass is the diagonal
of quadrature weights and -Laplace_h = mass^-1 K. The polar faces carry no flux.
Dirichlet rows (r = R0, R1) are eliminated; the unknowns are the interior
radii times all angles, ordered row-major.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import BoundaryError, GridMismatchError
from .grid import _fixed_order_sum
from .models import AnnulusGrid, Field

logger = logging.getLogger(__name__)


def radial_flux_weights(r_nodes: np.ndarray, N: int) -> np.ndarray:
    h = np.diff(r_nodes)
    mid = 0.5 * (r_nodes[1:] + r_nodes[:-1])
    return mid ** (N - 1) / h


def angular_flux_weights(theta_nodes: np.ndarray, N: int) -> np.ndarray:
    h = np.diff(theta_nodes)
    mid = 0.5 * (theta_nodes[1:] + theta_nodes[:-1])
    return np.cos(mid) ** (N - 2) / h


def difference_matrix(n: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def flux_stiffness(weights: np.ndarray) -> sp.csr_matrix:
    """D^T diag(weights) D for the forward difference D."""
    D = difference_matrix(weights.size + 1)
    return (D.T @ sp.diags(weights) @ D).tocsr()


def centered_derivative_matrix(nodes: np.ndarray) -> sp.csr_matrix:
    n = nodes.size
    h = nodes[1] - nodes[0]
    D = sp.lil_matrix((n, n))
    for j in range(1, n - 1):
        D[j, j - 1] = -1.0
        D[j, j + 1] = 1.0
    # second-order one-sided at the ends
    D[0, [0, 1, 2]] = [-3.0, 4.0, -1.0]
    D[n - 1, [n - 3, n - 2, n - 1]] = [1.0, -4.0, 3.0]
    return (D.tocsr() / (2.0 * h)).tocsr()


@dataclass(frozen=True, eq=False)
class OperatorSet:
    grid: AnnulusGrid
    angular_sign: float
    radial_weights: np.ndarray      # (nr-1, ntheta) radial face weights
    angular_weights: np.ndarray     # (nr, ntheta-1) angular face weights
    mass: np.ndarray                # (nr, ntheta)
    inv_r2: np.ndarray              # (nr, ntheta)
    gradient_full: sp.csr_matrix    # K on all nodes
    stiffness: sp.csr_matrix        # (K + mass) restricted to interior unknowns
    stiffness_diag: np.ndarray
    dtheta: sp.csr_matrix
    sphere_stiff: sp.csr_matrix     # angular part on the unit sphere (without omega)
    sphere_mass: np.ndarray

    @property
    def n_unknowns(self) -> int:
        return self.stiffness.shape[0]

    @property
    def interior(self) -> slice:
        return slice(1, self.grid.nr - 1)

    def to_unknowns(self, values: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(values[1:-1, :]).ravel()

    def from_unknowns(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        out[1:-1, :] = x.reshape(self.grid.nr - 2, self.grid.ntheta)
        return out


def assemble(grid: AnnulusGrid, angular_sign: float = 1.0) -> OperatorSet:
    """Assemble the forms; angular_sign=-1 flips the angular flux (fault injection only)."""
    N = int(grid.params.N)
    om = grid.omega
    wr = radial_flux_weights(grid.r_nodes, N)
    wt = angular_flux_weights(grid.theta_nodes, N)

    radial_weights = om * np.outer(wr, grid.theta_volumes)
    angular_weights = angular_sign * om * np.outer(grid.r_inv2_volumes, wt)
    mass = np.array(grid.quad_weights)
    inv_r2 = om * np.outer(grid.r_inv2_volumes, grid.theta_volumes)

    Kr = flux_stiffness(wr)
    Kt = flux_stiffness(wt)
    K = om * (sp.kron(Kr, sp.diags(grid.theta_volumes))
              + angular_sign * sp.kron(sp.diags(grid.r_inv2_volumes), Kt))
    K = K.tocsr()
    nt = grid.ntheta
    inner = slice(nt, (grid.nr - 1) * nt)
    S = (K + sp.diags(mass.ravel())).tocsr()[inner, :][:, inner].tocsr()
    S.sort_indices()

    for arr in (radial_weights, angular_weights, mass, inv_r2):
        arr.flags.writeable = False
    logger.debug("assembled %d unknowns, nnz=%d", S.shape[0], S.nnz)
    return OperatorSet(grid=grid, angular_sign=float(angular_sign),
                       radial_weights=radial_weights, angular_weights=angular_weights,
                       mass=mass, inv_r2=inv_r2, gradient_full=K, stiffness=S,
                       stiffness_diag=S.diagonal().copy(),
                       dtheta=centered_derivative_matrix(grid.theta_nodes),
                       sphere_stiff=(angular_sign * Kt).tocsr(),
                       sphere_mass=np.array(grid.theta_volumes))


def _values(ops: OperatorSet, u) -> np.ndarray:
    if isinstance(u, Field):
        if u.grid is not ops.grid:
            raise GridMismatchError("field does not live on the operator grid")
        return u.values
    return np.asarray(u, dtype=np.float64).reshape(ops.grid.shape)


def check_boundary(ops: OperatorSet, u) -> None:
    vals = _values(ops, u)
    if np.any(vals[0] != 0.0) or np.any(vals[-1] != 0.0):
        raise BoundaryError("field must vanish on r = R0 and r = R1")


def stiffness_values(ops: OperatorSet, u: np.ndarray, v: np.ndarray) -> float:
    """int grad u . grad v + u v, summed face by face (exactly symmetric in u, v)."""
    dru, drv = np.diff(u, axis=0), np.diff(v, axis=0)
    dtu, dtv = np.diff(u, axis=1), np.diff(v, axis=1)
    radial = _fixed_order_sum(ops.radial_weights * (dru * drv))
    angular = _fixed_order_sum(ops.angular_weights * (dtu * dtv))
    zeroth = _fixed_order_sum(ops.mass * (u * v))
    return radial + angular + zeroth


def stiffness_form(ops: OperatorSet, u, v) -> float:
    check_boundary(ops, u)
    check_boundary(ops, v)
    return stiffness_values(ops, _values(ops, u), _values(ops, v))


def mass_form(ops: OperatorSet, u, v) -> float:
    a, b = _values(ops, u), _values(ops, v)
    return _fixed_order_sum(ops.mass * (a * b))


def inv_r2_mass(ops: OperatorSet, u, v) -> float:
    a, b = _values(ops, u), _values(ops, v)
    return _fixed_order_sum(ops.inv_r2 * (a * b))


def h1_norm_sq(ops: OperatorSet, u) -> float:
    check_boundary(ops, u)
    vals = _values(ops, u)
    return stiffness_values(ops, vals, vals)


def apply_dtheta(ops: OperatorSet, u: Field) -> Field:
    vals = _values(ops, u)
    return Field(ops.grid, (ops.dtheta @ vals.T).T)


def apply_neg_laplacian(ops: OperatorSet, u: Field) -> Field:
    """-Laplace_h u = mass^-1 K u on interior nodes, zero on the Dirichlet rows."""
    vals = _values(ops, u)
    out = (ops.gradient_full @ vals.ravel()).reshape(ops.grid.shape) / ops.mass
    out[0, :] = 0.0
    out[-1, :] = 0.0
    return Field(ops.grid, out)


def sphere_laplacian(ops: OperatorSet, y: np.ndarray) -> np.ndarray:
    """-Laplace-Beltrami on S^(N-1) applied to a function of theta alone."""
    return (ops.sphere_stiff @ np.asarray(y, dtype=np.float64)) / ops.sphere_mass


def dump_triplets(ops: OperatorSet, path: Path) -> Path:
    coo = ops.stiffness.tocoo()
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {format(float(v), '.17g')}\n")
    return Path(path)
