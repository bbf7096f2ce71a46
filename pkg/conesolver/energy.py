"""Action functional I(u) = 1/2 ||u||^2 - 1/p int a |u|^p and its variations."""
from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .grid import weighted_sum
from .models import EnergyBreakdown, Field
from .operators import OperatorSet, h1_norm_sq, stiffness_form
from .utils import abs_power, signed_power

logger = logging.getLogger(__name__)


def nonlinear_term(ops: OperatorSet, a: Field, p: float, u: Field) -> float:
    return weighted_sum(ops.grid, a.values * abs_power(u.values, p))


def action(ops: OperatorSet, a: Field, p: float, u: Field) -> EnergyBreakdown:
    h1 = h1_norm_sq(ops, u)
    nl = nonlinear_term(ops, a, p, u)
    return EnergyBreakdown(h1_sq=h1, nonlinear=nl, action=h1 / 2.0 - nl / p, nehari_residual=h1 - nl)


def h1_norm(ops: OperatorSet, u: Field) -> float:
    return math.sqrt(max(h1_norm_sq(ops, u), 0.0))


def nehari_scale(ops: OperatorSet, a: Field, p: float, u: Field) -> float:
    """t_u = (||u||^2 / int a|u|^p)^(1/(p-2)), the unique t with I'(t u) u = 0."""
    h1 = h1_norm_sq(ops, u)
    nl = nonlinear_term(ops, a, p, u)
    if nl <= 0.0 or h1 <= 0.0:
        raise ConfigError("Nehari scaling is undefined for the zero field")
    return float((h1 / nl) ** (1.0 / (p - 2.0)))


def first_variation(ops: OperatorSet, a: Field, p: float, u: Field, v: Field) -> float:
    """I'(u) v = <u, v> - int a |u|^(p-2) u v"""
    return stiffness_form(ops, u, v) - weighted_sum(
        ops.grid, a.values * signed_power(u.values, p - 1.0) * v.values)


def second_variation(ops: OperatorSet, a: Field, p: float, u: Field, v: Field) -> float:
    """I''(u)(v, v) = ||v||^2 - (p-1) int a |u|^(p-2) v^2"""
    return h1_norm_sq(ops, v) - (p - 1.0) * weighted_sum(
        ops.grid, a.values * abs_power(u.values, p - 2.0) * v.values ** 2)


def mountain_pass_geometry(ops: OperatorSet, a: Field, p: float, samples: Sequence[Field],
                           ratio: float = 0.1, safety: float = 0.5) -> Tuple[float, float]:
    """Pick the small-ball radius alpha and the action floor rho_hat on its sphere.

    alpha is the largest radius at which, for every sample direction, the
    p-homogeneous term is at most `ratio` times the quadratic one; rho_hat is
    `safety` times the least action over the samples scaled onto that sphere.
    """
    if not samples:
        raise ConfigError("mountain-pass geometry needs at least one sample")
    worst = 0.0
    for s in samples:
        n = h1_norm(ops, s)
        worst = max(worst, nonlinear_term(ops, a, p, s) / n ** p)
    alpha = float((ratio * p / (2.0 * worst)) ** (1.0 / (p - 2.0)))
    rho_hat = safety * min(energy_on_sphere(ops, a, p, samples, alpha))
    logger.debug("mountain pass: alpha=%.6g rho_hat=%.6g over %d samples", alpha, rho_hat, len(samples))
    return alpha, float(rho_hat)


def energy_on_sphere(ops: OperatorSet, a: Field, p: float, samples: Sequence[Field], alpha: float) -> List[float]:
    out = []
    for s in samples:
        u = s * (alpha / h1_norm(ops, s))
        out.append(action(ops, a, p, u).action)
    return out


def nehari_derivative_profile(ops: OperatorSet, a: Field, p: float, u: Field,
                              ts: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """(I'(t u) u, I(t u)) along the ray through u, from the scaling laws of both terms."""
    ts = np.asarray(ts, dtype=np.float64)
    h1 = h1_norm_sq(ops, u)
    nl = nonlinear_term(ops, a, p, u)
    deriv = ts * h1 - ts ** (p - 1.0) * nl
    values = 0.5 * ts ** 2 * h1 - ts ** p * nl / p
    return deriv, values


def ps_norm_bound(p: float, action_value: float, phi_norm: float) -> float:
    """Upper bound on ||u|| from I(u) >= (1/2 - 1/p)||u||^2 - (1/p)||Phi(u)|| ||u||."""
    c = 0.5 - 1.0 / p
    disc = (phi_norm / p) ** 2 + 4.0 * c * action_value
    if disc < 0:
        return float("nan")
    return float((phi_norm / p + math.sqrt(disc)) / (2.0 * c))


def ground_state_value(actions: Sequence[float]) -> Optional[float]:
    """Least action among converged Nehari fixed points: the recorded upper bound of the ground level."""
    finite = [x for x in actions if math.isfinite(x)]
    return min(finite) if finite else None
