"""Cone membership, weight families and cone sample generators.

A field is in the cone when it is nonnegative, even in theta, nonincreasing in
theta on (0, pi/2) and (for the Dirichlet cone) zero on r = R0 and r = R1.
"""
from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np

from .errors import ConfigError
from .models import AnnulusGrid, ConeReport, Field, WeightFamily
from .operators import OperatorSet, apply_dtheta

logger = logging.getLogger(__name__)


def check_cone(grid: AnnulusGrid, ops: OperatorSet, u: Field, tau: float = 0.0,
               require_boundary: bool = True) -> ConeReport:
    """Measure the four cone defects of u; require_boundary=False checks the cone without
    the Dirichlet condition (used for weights)."""
    if tau < 0:
        raise ConfigError(f"cone tolerance must be >= 0 (got {tau})")
    vals = u.values
    c = grid.center
    min_value = float(vals.min())
    even = float(np.max(np.abs(vals - vals[:, ::-1])))
    dth = apply_dtheta(ops, u).values[:, c + 1:grid.ntheta - 1]
    monotone = float(max(0.0, dth.max())) if dth.size else 0.0
    boundary = float(max(np.abs(vals[0]).max(), np.abs(vals[-1]).max())) if require_boundary else 0.0
    in_cone = max(-min_value, even, monotone, boundary) <= tau
    return ConeReport(min_value=min_value, max_even_defect=even, max_monotone_defect=monotone,
                      boundary_defect=boundary, tau=float(tau), in_cone=bool(in_cone))


def cone_tolerance(u: Field, rel: float) -> float:
    return float(rel) * u.sup_norm()


def slice_defect(u: Field) -> float:
    """max over nodes of u(r, theta) - u(r, 0), clipped at 0."""
    vals = u.values
    return float(max(0.0, np.max(vals - vals[:, u.grid.center][:, None])))


def _unit_radius(grid: AnnulusGrid) -> np.ndarray:
    x = (grid.r_nodes - grid.params.R0) / (grid.params.R1 - grid.params.R0)
    x[0], x[-1] = 0.0, 1.0
    return x


def _cos_power(theta: np.ndarray, k: float) -> np.ndarray:
    return np.clip(np.cos(theta), 0.0, None) ** k


def make_weight(grid: AnnulusGrid, family: Optional[WeightFamily] = None,
                ops: Optional[OperatorSet] = None) -> Field:
    family = family or grid.params.weight
    if family.value <= 0:
        raise ConfigError(f"weight value must be > 0 (got {family.value})")
    R, TH = np.meshgrid(_unit_radius(grid), grid.theta_nodes, indexing="ij")
    if family.kind == "constant":
        vals = np.full(grid.shape, family.value)
    elif family.kind == "radial-profile":
        if family.epsilon <= -1:
            raise ConfigError(f"radial-profile weight needs epsilon > -1 (got {family.epsilon})")
        vals = family.value * (1.0 + family.epsilon * R)
    elif family.kind == "angular-profile":
        if family.k <= 0:
            raise ConfigError(f"angular-profile weight needs k > 0 (got {family.k})")
        vals = family.value * (1.0 + family.epsilon * _cos_power(TH, family.k))
    else:
        raise ConfigError(f"unknown weight kind {family.kind!r}")

    a = Field(grid, vals)
    if a.values.min() <= 0:
        raise ConfigError(f"weight must be strictly positive (min={a.values.min():.3g})")
    if ops is None:
        from .operators import assemble
        ops = assemble(grid)
    report = check_cone(grid, ops, a, 0.0, require_boundary=False)
    if not report.in_cone:
        raise ConfigError(
            f"weight {family.kind} is not even and nonincreasing in theta "
            f"(even defect {report.max_even_defect:.3g}, monotone defect {report.max_monotone_defect:.3g})")
    return a


def cone_bump(grid: AnnulusGrid, angular_power: float = 2.0, radial_power: float = 1.0) -> Field:
    """(4 x (1 - x))^radial_power * cos^angular_power(theta), x the unit radius; peak 1."""
    x = _unit_radius(grid)
    s = (4.0 * x * (1.0 - x)) ** radial_power
    m = _cos_power(grid.theta_nodes, angular_power) if angular_power > 0 else np.ones(grid.ntheta)
    return Field(grid, np.outer(s, m))


def sample_cone(grid: AnnulusGrid, seed: int, count: int) -> List[Field]:
    """Deterministic nonnegative combinations of separable generators s(r) m(theta).

    s(r) = x^a (1 - x)^b vanishes exactly at both radii; m(theta) = cos^(2k)(theta)
    is even and nonincreasing on (0, pi/2), so every sample is in the cone at tau = 0.
    """
    if count < 1:
        raise ConfigError(f"count must be >= 1 (got {count})")
    rng = np.random.default_rng(seed)
    x = _unit_radius(grid)
    out = []
    for _ in range(int(count)):
        vals = np.zeros(grid.shape)
        for _term in range(int(rng.integers(1, 4))):
            a, b = rng.uniform(1.0, 3.0, size=2)
            k = int(rng.integers(0, 4))
            c = rng.uniform(0.1, 2.0)
            s = x ** a * (1.0 - x) ** b
            s = s / s.max()
            vals = vals + c * np.outer(s, _cos_power(grid.theta_nodes, 2 * k))
        out.append(Field(grid, vals))
    logger.debug("sampled %d cone fields (seed=%d)", count, seed)
    return out
