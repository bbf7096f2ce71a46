"""Descent flow d eta/dt = -(eta - T(eta)), separatrix bisection and Newton polish.

Explicit Euler steps eta <- (1 - dt) eta + dt T(eta) with dt <= 1 are convex
combinations of two cone members, so the flow never needs a projection. A step
is accepted only when it lowers the action, which makes the action along the
accepted iterates strictly decreasing.
"""
from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, minres

from .cone import check_cone, cone_tolerance, sample_cone
from .energy import action, energy_on_sphere, h1_norm, nehari_scale
from .errors import ConeViolationError, ConfigError, ConvergenceError, FlowError
from .models import Candidate, Field, FlowConfig, FlowTrace, Refinement, StepRecord
from .operators import OperatorSet
from .resolvent import CG_TOL, pcg, phi
from .utils import abs_power, signed_power

logger = logging.getLogger(__name__)

RHO_SAMPLES = 64


def shell_average(u: Field) -> Field:
    """Project onto theta-constant fields using the angular cell measures."""
    w = u.grid.theta_volumes
    avg = (u.values @ w) / w.sum()
    return Field(u.grid, np.repeat(avg[:, None], u.grid.ntheta, axis=1))


def sublevel_floor(ops: OperatorSet, a: Field, p: float, cfg: FlowConfig, seed: int = 0) -> float:
    """rho_hat: the configured value, or half the least action of the cone samples on the alpha sphere."""
    if cfg.rho_hat > 0:
        return cfg.rho_hat
    samples = sample_cone(ops.grid, seed, RHO_SAMPLES)
    return 0.5 * min(energy_on_sphere(ops, a, p, samples, cfg.alpha))


def is_nontrivial(h1: float, action_value: float, alpha: float, rho_hat: float) -> bool:
    """Outside the alpha ball and at or above the pass floor: where nonzero fixed points live."""
    return h1 >= alpha and action_value >= rho_hat


def _trace_failure(message: str, trace: FlowTrace) -> FlowError:
    logger.error("%s after %d steps", message, len(trace.steps))
    return FlowError(message, trace)


def flow(ops: OperatorSet, a: Field, p: float, u0: Field, cfg: Optional[FlowConfig] = None,
         rho_hat: Optional[float] = None, cg_tol: float = CG_TOL, linger_steps: int = 0) -> FlowTrace:
    """Integrate the descent flow from u0 and classify where it goes.

    converged_fixed_point is only reported for nontrivial iterates; the zero
    field and anything that collapses onto it is decayed_to_zero. `best` is the
    smallest-residual nontrivial iterate, or None when there was none.

    linger_steps > 0 keeps stepping after the trajectory first enters the
    small sublevel set and records in `left_sublevel` whether it ever leaves.
    """
    cfg = (cfg or FlowConfig()).validate()
    grid = ops.grid
    report = check_cone(grid, ops, u0, cone_tolerance(u0, cfg.cone_tau_rel))
    if not report.in_cone:
        raise ConeViolationError("initial datum is not in the cone", report)
    if rho_hat is None:
        rho_hat = sublevel_floor(ops, a, p, cfg)

    eta = shell_average(u0) if cfg.radial_only else u0
    trace = FlowTrace()
    dt = cfg.dt0
    time = 0.0
    t_prev: Optional[Field] = None
    entered = -1
    energy = action(ops, a, p, eta)

    while True:
        try:
            Phi, t_eta = phi(ops, a, p, eta, tol=cg_tol, x0=t_prev)
        except (ValueError, ConvergenceError) as exc:
            raise _trace_failure(f"flow step failed: {exc}", trace) from exc
        t_prev = t_eta
        phi_norm = h1_norm(ops, Phi)
        h1 = math.sqrt(max(energy.h1_sq, 0.0))
        trace.samples.append((time, energy.action, phi_norm, h1))
        nontrivial = is_nontrivial(h1, energy.action, cfg.alpha, rho_hat)
        if nontrivial and (trace.best is None or phi_norm < trace.samples[trace.best_index][2]):
            trace.best_index = len(trace.samples) - 1
            trace.best = eta

        # Phi(0) = 0, so the decay test must win over the residual test near zero
        in_sublevel = h1 < cfg.alpha and energy.action < rho_hat
        if in_sublevel and entered < 0:
            entered = len(trace.steps)
        elif entered >= 0 and not in_sublevel:
            trace.left_sublevel = True
        if entered >= 0 and len(trace.steps) - entered >= linger_steps:
            trace.outcome = "decayed_to_zero"
            break
        if nontrivial and phi_norm <= cfg.phi_tol * max(1.0, h1):
            trace.outcome = "converged_fixed_point"
            break
        if energy.action < cfg.decay_action_floor:
            trace.outcome = "escaped_negative"
            break
        if len(trace.steps) >= cfg.max_steps or time >= cfg.t_max_time:
            trace.outcome = "budget_exhausted"
            break

        accepted = False
        while dt >= cfg.dt_min:
            with np.errstate(over="ignore", invalid="ignore"):
                cand = (1.0 - dt) * eta.values + dt * t_eta.values
            if not np.all(np.isfinite(cand)):
                raise _trace_failure("non-finite iterate during stepping", trace)
            nxt = Field(grid, cand)
            if cfg.radial_only:
                nxt = shell_average(nxt)
            with np.errstate(over="ignore", invalid="ignore"):
                e_next = action(ops, a, p, nxt)
            if not math.isfinite(e_next.action):
                raise _trace_failure("action overflowed during stepping", trace)
            if e_next.action < energy.action:
                accepted = True
                break
            trace.rejected += 1
            dt *= 0.5
        if not accepted:
            trace.outcome = "budget_exhausted"
            trace.warning = f"step size fell below dt_min at phi_norm={phi_norm:.3e}"
            logger.warning("flow stalled: %s", trace.warning)
            break

        tau = cone_tolerance(nxt, cfg.cone_tau_rel)
        report = check_cone(grid, ops, nxt, tau)
        if not report.in_cone:
            raise ConeViolationError(f"flow iterate {len(trace.steps) + 1} left the cone", report)

        trace.steps.append(StepRecord(dt=dt, action_before=energy.action,
                                      action_after=e_next.action, phi_sq=phi_norm ** 2))
        time += dt
        eta, energy = nxt, e_next
        dt = min(dt * 1.2, cfg.dt_max)

    trace.final = eta
    logger.debug("flow: %s after %d steps (t=%.4g, action=%.6g)",
                 trace.outcome, len(trace.steps), time, energy.action)
    return trace


def dissipation_defect(ops: OperatorSet, a: Field, p: float, eta: Field, dt: float,
                       cg_tol: float = CG_TOL) -> float:
    """Relative mismatch between (I(eta) - I(eta - dt Phi)) / dt and ||Phi||^2 for one Euler step."""
    Phi, _ = phi(ops, a, p, eta, tol=cg_tol)
    phi_sq = h1_norm(ops, Phi) ** 2
    if phi_sq == 0.0:
        return 0.0
    before = action(ops, a, p, eta).action
    after = action(ops, a, p, eta - dt * Phi).action
    return ((before - after) / dt - phi_sq) / phi_sq


def _side(trace: FlowTrace, ops: OperatorSet, a: Field, p: float) -> Optional[str]:
    if trace.outcome == "decayed_to_zero":
        return "lo"
    if trace.outcome == "escaped_negative":
        return "hi"
    if trace.outcome == "converged_fixed_point":
        return None
    # inconclusive budget: the side of the Nehari set the trajectory ended on decides
    res = action(ops, a, p, trace.final).nehari_residual
    return "lo" if res > 0 else "hi"


def separatrix_scale(ops: OperatorSet, a: Field, p: float, psi: Field, cfg: Optional[FlowConfig] = None,
                     bisect_tol: float = 1e-6, rho_hat: Optional[float] = None,
                     max_bracket: int = 40) -> Tuple[float, FlowTrace]:
    """Bisect t between a decaying and an escaping scale of psi.

    Returns t_star and the flow trace started from t_star * psi. A trial scale only
    ends the bisection early when its flow converges to a nontrivial fixed point.
    """
    cfg = (cfg or FlowConfig()).validate()
    if psi.sup_norm() == 0.0:
        raise ConfigError("separatrix search needs a nonzero direction")
    if rho_hat is None:
        rho_hat = sublevel_floor(ops, a, p, cfg)
    t_u = nehari_scale(ops, a, p, psi)

    hi = t_u
    for _ in range(max_bracket):
        if action(ops, a, p, psi * hi).action < 0:
            break
        hi *= 2.0
    else:
        raise FlowError("no scale with negative action found for the upper bracket")

    lo = 0.5 * t_u
    for _ in range(max_bracket):
        trace = flow(ops, a, p, psi * lo, cfg, rho_hat=rho_hat)
        side = _side(trace, ops, a, p)
        if side == "lo":
            break
        if side is None:
            logger.info("separatrix: lower scale t=%.6g landed on a nontrivial fixed point", lo)
            return lo, trace
        hi = lo
        lo *= 0.5
    else:
        raise FlowError("both bracket ends classify identically; enlarge the flow budget")
    logger.info("separatrix bracket [%.6g, %.6g] (t_u=%.6g)", lo, hi, t_u)

    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        trace = flow(ops, a, p, psi * mid, cfg, rho_hat=rho_hat)
        side = _side(trace, ops, a, p)
        logger.debug("separatrix trial t=%.10g -> %s", mid, trace.outcome)
        if side is None:
            return mid, trace
        if side == "lo":
            lo = mid
        else:
            hi = mid

    t_star = 0.5 * (lo + hi)
    witness = flow(ops, a, p, psi * t_star, cfg, rho_hat=rho_hat)
    logger.info("separatrix t*=%.10g: %s, best phi_norm=%.3e", t_star, witness.outcome,
                witness.samples[witness.best_index][2])
    return t_star, witness


def _newton_system(ops: OperatorSet, a: Field, p: float, u: Field):
    x = ops.to_unknowns(u.values)
    m = ops.to_unknowns(ops.mass * a.values)
    G = ops.stiffness @ x - m * signed_power(x, p - 1.0)
    H = (ops.stiffness - sp.diags((p - 1.0) * m * abs_power(x, p - 2.0))).tocsr()
    return G, H


def _solve_newton(H, rhs: np.ndarray, diag: np.ndarray, tol: float) -> np.ndarray:
    try:
        x, _, _ = pcg(H, rhs, diag, tol=tol, definite=False)
        return x
    except ConvergenceError as exc:
        logger.debug("indefinite CG failed (%s); retrying with MINRES", exc)
    M = LinearOperator(H.shape, matvec=lambda v: v / diag)
    x, info = minres(H, rhs, M=M, rtol=tol, maxiter=10 * rhs.size)
    if info != 0:
        raise ConvergenceError("Newton inner solve did not converge", iterations=10 * rhs.size)
    return x


def refine_fixed_point(ops: OperatorSet, a: Field, p: float, u: Field, tol: float = 1e-10,
                       max_iter: int = 30, cg_tol: float = CG_TOL, cone_tau_rel: float = 1e-8) -> Refinement:
    """Damped Newton on u = T(u); the Jacobian is the second-variation form.

    Converged means ||Phi(u)|| <= tol * max(1, ||u||).
    """
    Phi, _ = phi(ops, a, p, u, tol=cg_tol)
    res = h1_norm(ops, Phi)
    history = [res]
    goal = tol * max(1.0, h1_norm(ops, u))
    if res <= goal:
        return Refinement(field=u, phi_norm=res, converged=True, iterations=0, history=history)

    current = u
    inner_tol = min(1e-6, cg_tol * 1e4)
    for it in range(1, max_iter + 1):
        G, H = _newton_system(ops, a, p, current)
        try:
            delta = _solve_newton(H, -G, ops.stiffness_diag, inner_tol)
        except ConvergenceError as exc:
            logger.warning("Newton polish abandoned: %s", exc)
            return Refinement(field=u, phi_norm=history[0], converged=False, iterations=it,
                              history=history, warning=f"inner solve failed: {exc}")
        step = 1.0
        while step >= 1.0 / 256:
            trial = Field(ops.grid, current.values + step * ops.from_unknowns(delta))
            Phi, _ = phi(ops, a, p, trial, tol=cg_tol)
            trial_res = h1_norm(ops, Phi)
            if trial_res < res:
                break
            step *= 0.5
        else:
            logger.warning("Newton polish diverged at phi_norm=%.3e; keeping the input", res)
            return Refinement(field=u, phi_norm=history[0], converged=False, iterations=it,
                              history=history, warning="Newton iteration diverged")
        current, res = trial, trial_res
        history.append(res)
        inner_tol = max(cg_tol, min(inner_tol, 0.1 * res))
        logger.debug("newton %d: phi_norm=%.3e (step %.3g)", it, res, step)
        if res <= goal:
            break

    warning = ""
    report = check_cone(ops.grid, ops, current, cone_tolerance(current, cone_tau_rel))
    if not report.in_cone:
        warning = "polished field fails the cone check"
        logger.warning("%s: %s", warning, report.to_dict())
    converged = res <= goal
    if not converged and not warning:
        warning = f"Newton stopped at phi_norm={res:.3e}"
    logger.info("Newton polish: phi_norm %.3e -> %.3e in %d iterations", history[0], res, len(history) - 1)
    return Refinement(field=current, phi_norm=res, converged=converged,
                      iterations=len(history) - 1, history=history, warning=warning)


def ground_state_search(ops: OperatorSet, a: Field, p: float, directions: Sequence[Tuple[str, Field]],
                        cfg: Optional[FlowConfig] = None, bisect_tol: float = 1e-6,
                        newton_tol: float = 1e-10) -> List[Candidate]:
    """Separatrix search plus polish from several cone directions, least action first.

    A candidate only counts as converged when the polished field is a
    nontrivial fixed point; collapses onto u = 0 are kept with a warning.
    """
    cfg = (cfg or FlowConfig()).validate()
    rho_hat = sublevel_floor(ops, a, p, cfg)
    out = []
    for label, psi in directions:
        t_star, witness = separatrix_scale(ops, a, p, psi, cfg, bisect_tol, rho_hat=rho_hat)
        if witness.best is None:
            u = witness.final
            Phi, _ = phi(ops, a, p, u)
            ref = Refinement(field=u, phi_norm=h1_norm(ops, Phi), converged=False, iterations=0,
                             warning="flow from t_star never left the small sublevel set")
        else:
            ref = refine_fixed_point(ops, a, p, witness.best, tol=newton_tol, cone_tau_rel=cfg.cone_tau_rel)
        energy = action(ops, a, p, ref.field)
        converged, warning = ref.converged, ref.warning
        if not is_nontrivial(h1_norm(ops, ref.field), energy.action, cfg.alpha, rho_hat):
            converged = False
            warning = warning or "polished field collapsed onto the trivial solution"
            logger.warning("candidate %s: %s", label, warning)
        out.append(Candidate(label=label, t_star=t_star, outcome=witness.outcome, field=ref.field,
                             action=energy.action, phi_norm=ref.phi_norm, converged=converged,
                             trace=witness, warning=warning))
        logger.info("candidate %s: action=%.10g phi_norm=%.3e", label, energy.action, ref.phi_norm)
    out.sort(key=lambda c: (not c.converged, c.action))
    return out
