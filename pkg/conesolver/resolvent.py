"""Dirichlet resolvent (-Laplace + Id)^-1 and the fixed-point map T.

The linear systems are solved with a Jacobi-preconditioned conjugate gradient
on the assembled stiffness matrix. Convergence is measured relative to the
right-hand side in the preconditioned dual norm sqrt(r . D^-1 r), which does
not drift with the mesh the way the Euclidean residual does.
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Tuple

import numpy as np

from .errors import ConvergenceError
from .models import Field
from .operators import OperatorSet
from .utils import signed_power

logger = logging.getLogger(__name__)

CG_TOL = 1e-12


def iteration_cap(n: int, tol: float) -> int:
    return int(math.ceil(10.0 * math.sqrt(max(n, 1)) * math.log(1.0 / tol)))


def pcg(A, b: np.ndarray, diag: np.ndarray, tol: float = CG_TOL, x0: Optional[np.ndarray] = None,
        maxiter: Optional[int] = None, definite: bool = True) -> Tuple[np.ndarray, int, float]:
    """Preconditioned CG for A x = b with preconditioner diag(A).

    Returns (x, iterations, relative residual). With definite=False the
    recurrence is allowed to run through negative curvature (p . A p < 0),
    which keeps CG usable on the mildly indefinite Newton systems; it
    still stops on breakdown (p . A p == 0).
    """
    n = b.size
    maxiter = maxiter or iteration_cap(n, tol)
    inv_d = 1.0 / diag
    bnorm = math.sqrt(float(b @ (inv_d * b)))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x if x0 is not None else b.copy()
    z = inv_d * r
    rz = float(r @ z)
    res = math.sqrt(abs(rz)) / bnorm
    if res <= tol:
        return x, 0, res
    p = z.copy()

    for k in range(1, maxiter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp == 0.0 or (definite and pAp < 0.0):
            raise ConvergenceError("conjugate gradient breakdown", residual=res, iterations=k)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_d * r
        rz_new = float(r @ z)
        res = math.sqrt(abs(rz_new)) / bnorm
        if not math.isfinite(res):
            raise ConvergenceError("conjugate gradient produced a non-finite residual", residual=res, iterations=k)
        if res <= tol:
            logger.debug("pcg converged in %d iterations (res=%.3e)", k, res)
            return x, k, res
        p = z + (rz_new / rz) * p
        rz = rz_new

    raise ConvergenceError("conjugate gradient hit its iteration cap", residual=res, iterations=maxiter)


def resolvent(ops: OperatorSet, h: Field, tol: float = CG_TOL, x0: Optional[Field] = None) -> Field:
    """Solve stiffness_form(v, phi) = mass_form(h, phi) for v vanishing at r = R0, R1."""
    rhs = ops.to_unknowns(ops.mass * h.values)
    guess = ops.to_unknowns(x0.values) if x0 is not None else None
    x, _, _ = pcg(ops.stiffness, rhs, ops.stiffness_diag, tol=tol, x0=guess)
    return Field(ops.grid, ops.from_unknowns(x))


def nonlinearity(a: Field, p: float, u: Field) -> Field:
    """a |u|^(p-2) u"""
    return Field(u.grid, a.values * signed_power(u.values, p - 1.0))


def apply_T(ops: OperatorSet, a: Field, p: float, u: Field, tol: float = CG_TOL,
            x0: Optional[Field] = None) -> Field:
    return resolvent(ops, nonlinearity(a, p, u), tol=tol, x0=x0)


def phi(ops: OperatorSet, a: Field, p: float, u: Field, tol: float = CG_TOL,
        x0: Optional[Field] = None) -> Tuple[Field, Field]:
    """Return (Phi(u), T(u)) with Phi = Id - T."""
    tu = apply_T(ops, a, p, u, tol=tol, x0=x0)
    return u - tu, tu
