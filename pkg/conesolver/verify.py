"""Invariant suites behind `conesolver verify`.

Every suite takes a VerifyContext and returns (ok, message); it never raises.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from .cone import check_cone, cone_bump, cone_tolerance, make_weight, sample_cone, slice_defect
from .energy import action, first_variation, h1_norm, nehari_scale, second_variation
from .errors import ConfigError
from .flow import dissipation_defect
from .grid import annulus_volume, build_grid, field_from_function, integrate
from .models import AnnulusGrid, Field, ProblemParams, WeightFamily
from .operators import (OperatorSet, apply_neg_laplacian, assemble, mass_form, sphere_laplacian,
                        stiffness_form)
from .radial import RadialOperators, solve_radial
from .resolvent import apply_T, resolvent
from .spectral import alpha1_solve, harmonic_Y

logger = logging.getLogger(__name__)

FAULTS = ("angular-sign",)
SuiteResult = Tuple[bool, str]


@dataclass
class VerifyContext:
    params: ProblemParams
    nr: int = 33
    ntheta: int = 33
    seed: int = 0
    fault_inject: Optional[str] = None
    samples: int = 50
    _cache: Dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.fault_inject is not None and self.fault_inject not in FAULTS:
            raise ConfigError(f"unknown fault {self.fault_inject!r}; choose from {FAULTS}")

    @property
    def angular_sign(self) -> float:
        return -1.0 if self.fault_inject == "angular-sign" else 1.0

    def operators(self, params: Optional[ProblemParams] = None, nr: Optional[int] = None,
                  ntheta: Optional[int] = None) -> OperatorSet:
        key = (params or self.params, nr or self.nr, ntheta or self.ntheta)
        if key not in self._cache:
            grid = build_grid(*key)
            self._cache[key] = assemble(grid, angular_sign=self.angular_sign)
        return self._cache[key]

    @property
    def ops(self) -> OperatorSet:
        return self.operators()

    @property
    def grid(self) -> AnnulusGrid:
        return self.ops.grid

    def unit_weight(self) -> Field:
        return Field(self.grid, np.ones(self.grid.shape))


def suite_quadrature_volume(ctx: VerifyContext) -> SuiteResult:
    one = Field(ctx.grid, np.ones(ctx.grid.shape))
    exact = annulus_volume(ctx.params)
    err = abs(integrate(ctx.grid, one) - exact) / exact
    return err <= 1e-12, f"volume relative error {err:.3e}"


def angular_checkerboard(ops: OperatorSet) -> np.ndarray:
    """sin(pi x) (-1)^j: smooth in r, oscillating in theta."""
    g = ops.grid
    x = (g.r_nodes - g.params.R0) / (g.params.R1 - g.params.R0)
    s = np.sin(np.pi * x)
    s[0] = s[-1] = 0.0
    return np.outer(s, (-1.0) ** np.arange(g.ntheta))


def suite_stiffness_symmetry(ctx: VerifyContext) -> SuiteResult:
    rng = np.random.default_rng(ctx.seed)
    board = angular_checkerboard(ctx.ops)
    worst, least = 0.0, stiffness_form(ctx.ops, board, board)
    for _ in range(20):
        u, v = (ctx.ops.from_unknowns(rng.standard_normal(ctx.ops.n_unknowns)) for _ in range(2))
        worst = max(worst, abs(stiffness_form(ctx.ops, u, v) - stiffness_form(ctx.ops, v, u)))
        least = min(least, stiffness_form(ctx.ops, u, u))
    return worst == 0.0 and least > 0.0, f"max |B(u,v)-B(v,u)|={worst:.3e}, min B(u,u)={least:.3e}"


def suite_green_identity(ctx: VerifyContext) -> SuiteResult:
    rng = np.random.default_rng(ctx.seed + 1)
    worst = 0.0
    for _ in range(10):
        u = Field(ctx.grid, ctx.ops.from_unknowns(rng.standard_normal(ctx.ops.n_unknowns)))
        v = Field(ctx.grid, ctx.ops.from_unknowns(rng.standard_normal(ctx.ops.n_unknowns)))
        lhs = stiffness_form(ctx.ops, u, v)
        rhs = mass_form(ctx.ops, apply_neg_laplacian(ctx.ops, u) + u, v)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1.0))
    return worst <= 1e-10, f"max relative Green defect {worst:.3e}"


def suite_cone_axioms(ctx: VerifyContext) -> SuiteResult:
    samples = sample_cone(ctx.grid, ctx.seed, ctx.samples)
    bad = 0
    for i, u in enumerate(samples):
        v = samples[(i + 1) % len(samples)]
        for w in (u, u * 3.5, u + v):
            if not check_cone(ctx.grid, ctx.ops, w, 0.0).in_cone:
                bad += 1
    return bad == 0, f"{bad} cone-axiom violations over {len(samples)} samples"


def suite_slice_domination(ctx: VerifyContext) -> SuiteResult:
    samples = sample_cone(ctx.grid, ctx.seed + 2, ctx.samples)
    worst = max(slice_defect(u) for u in samples)
    return worst == 0.0, f"max u(r,theta) - u(r,0) = {worst:.3e}"


def suite_T_cone_invariance(ctx: VerifyContext) -> SuiteResult:
    families = [WeightFamily(), WeightFamily(kind="angular-profile", epsilon=0.5, k=2.0),
                WeightFamily(kind="radial-profile", epsilon=1.0)]
    samples = sample_cone(ctx.grid, ctx.seed + 3, ctx.samples)
    failures = 0
    for fam in families:
        a = make_weight(ctx.grid, fam, ctx.ops)
        for u in samples:
            tu = apply_T(ctx.ops, a, ctx.params.p, u)
            if not check_cone(ctx.grid, ctx.ops, tu, cone_tolerance(tu, 1e-8)).in_cone:
                failures += 1
    return failures == 0, f"{failures} of {len(samples) * len(families)} images left the cone"


def _sample_state(ctx: VerifyContext) -> Tuple[Field, Field]:
    a = ctx.unit_weight()
    psi = cone_bump(ctx.grid)
    return a, psi * (0.8 * nehari_scale(ctx.ops, a, ctx.params.p, psi))


def suite_dissipation(ctx: VerifyContext) -> SuiteResult:
    a, eta = _sample_state(ctx)
    dt = 0.5 / 8
    d1 = dissipation_defect(ctx.ops, a, ctx.params.p, eta, dt)
    d2 = dissipation_defect(ctx.ops, a, ctx.params.p, eta, dt / 2)
    ratio = d2 / d1 if d1 != 0 else 0.0
    ok = abs(d1) <= 0.1 and abs(d2) <= 0.1 and 0.4 <= ratio <= 0.6
    return ok, f"defects {d1:.3e} -> {d2:.3e} (ratio {ratio:.3f})"


def suite_gradient_fd(ctx: VerifyContext) -> SuiteResult:
    a, u = _sample_state(ctx)
    p, eps = ctx.params.p, 1e-5
    worst = 0.0
    for phi in sample_cone(ctx.grid, ctx.seed + 4, 3):
        fd = (action(ctx.ops, a, p, u + eps * phi).action - action(ctx.ops, a, p, u - eps * phi).action) / (2 * eps)
        exact = first_variation(ctx.ops, a, p, u, phi)
        t_form = stiffness_form(ctx.ops, u - apply_T(ctx.ops, a, p, u), phi)
        scale = max(abs(exact), 1e-12)
        worst = max(worst, abs(fd - exact) / scale, abs(t_form - exact) / scale)
    return worst <= 1e-5, f"max relative gradient mismatch {worst:.3e}"


def suite_hessian_fd(ctx: VerifyContext) -> SuiteResult:
    a, u = _sample_state(ctx)
    p, eps = ctx.params.p, 1e-3
    worst = 0.0
    for v in sample_cone(ctx.grid, ctx.seed + 5, 3):
        v = v * (h1_norm(ctx.ops, u) / h1_norm(ctx.ops, v))
        f = lambda t: action(ctx.ops, a, p, u + t * v).action
        fd = (f(eps) - 2 * f(0.0) + f(-eps)) / eps ** 2
        exact = second_variation(ctx.ops, a, p, u, v)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-12))
    return worst <= 1e-4, f"max relative Hessian mismatch {worst:.3e}"


def suite_laplace_beltrami(ctx: VerifyContext) -> SuiteResult:
    N = ctx.params.N
    theta = ctx.grid.theta_nodes
    Y = harmonic_Y(theta, N)
    LY = sphere_laplacian(ctx.ops, Y)
    away = np.abs(theta) <= np.pi / 3
    err = float(np.max(np.abs(LY[away] - 2 * N * Y[away])))
    h = ctx.grid.htheta
    rq = float(Y @ (ctx.ops.sphere_stiff @ Y)) / float(Y @ (ctx.ops.sphere_mass * Y))
    ok = err <= 30.0 * h * h and abs(rq - 2 * N) <= 0.02 * 2 * N
    return ok, f"max |L Y - {2 * N} Y| = {err:.3e} (h^2={h * h:.3e}), Rayleigh quotient {rq:.6g}"


def manufactured_errors(params: ProblemParams, levels: Sequence[int], ntheta: int = 9,
                        angular_sign: float = 1.0) -> List[float]:
    """Sup-norm errors of the resolvent against v* = sin(pi (r - R0)/(R1 - R0))."""
    N, R0, R1 = params.N, params.R0, params.R1
    k = np.pi / (R1 - R0)

    def exact(R, TH):
        return np.sin(k * (R - R0)) + 0.0 * TH

    def forcing(R, TH):
        v = np.sin(k * (R - R0))
        dv = k * np.cos(k * (R - R0))
        return k * k * v - (N - 1) / R * dv + v + 0.0 * TH

    errs = []
    for nr in levels:
        grid = build_grid(params, nr, ntheta)
        ops = assemble(grid, angular_sign=angular_sign)
        v = resolvent(ops, field_from_function(grid, forcing))
        errs.append(float(np.max(np.abs(v.values - field_from_function(grid, exact).values))))
    return errs


def suite_manufactured(ctx: VerifyContext) -> SuiteResult:
    errs = manufactured_errors(ctx.params, (17, 33, 65), angular_sign=ctx.angular_sign)
    orders = [math.log2(e0 / e1) for e0, e1 in zip(errs, errs[1:])]
    return min(orders) >= 1.8, "errors " + ", ".join(f"{e:.3e}" for e in errs) + \
        " orders " + ", ".join(f"{o:.2f}" for o in orders)


def dense_alpha1(r_nodes: np.ndarray, N: int, u: np.ndarray, p: float) -> float:
    ops = RadialOperators(r_nodes, N)
    shift = ops.volumes * (1.0 - (p - 1.0) * np.abs(u) ** (p - 2.0))
    return float(eigh(ops.dense(shift), np.diag(ops.inv2_volumes), eigvals_only=True)[0])


def suite_eigen_oracle(ctx: VerifyContext) -> SuiteResult:
    params = ctx.params.replace(weight=WeightFamily())
    rad = solve_radial(params, 65)
    spec = alpha1_solve(rad)
    oracle = dense_alpha1(rad.r_nodes, params.N, rad.values[1:-1], params.p)
    err = abs(spec.alpha1 - oracle)
    return err <= 1e-8 * max(1.0, abs(oracle)), f"alpha1 {spec.alpha1:.12g} vs dense {oracle:.12g}"


SUITES: Dict[str, Callable[[VerifyContext], SuiteResult]] = {
    "quadrature": suite_quadrature_volume,
    "symmetry": suite_stiffness_symmetry,
    "green": suite_green_identity,
    "cone-axioms": suite_cone_axioms,
    "slice": suite_slice_domination,
    "t-cone": suite_T_cone_invariance,
    "dissipation": suite_dissipation,
    "gradient": suite_gradient_fd,
    "hessian": suite_hessian_fd,
    "laplace-beltrami": suite_laplace_beltrami,
    "manufactured": suite_manufactured,
    "eigen-oracle": suite_eigen_oracle,
}


def run_suites(ctx: VerifyContext, names: Optional[Sequence[str]] = None) -> List[Tuple[str, bool, str]]:
    names = list(SUITES) if names is None else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    if not names:
        logger.warning("no verification suites selected")
    results = []
    for name in names:
        try:
            ok, msg = SUITES[name](ctx)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, msg = False, f"{type(exc).__name__}: {exc}"
        logger.info("suite %-16s %s  %s", name, "PASS" if ok else "FAIL", msg)
        results.append((name, bool(ok), msg))
    return results
