import numpy as np
import pytest

from tests.compat import BASE, small_problem
from conesolver.cone import check_cone, cone_bump, sample_cone
from conesolver.energy import action, h1_norm, nehari_scale
from conesolver.errors import ConeViolationError, ConfigError
from conesolver.flow import (dissipation_defect, flow, ground_state_search, refine_fixed_point,
                             separatrix_scale, shell_average, sublevel_floor)
from conesolver.grid import field_from_function
from conesolver.models import Field, FlowConfig
from conesolver.radial import lift_radial, solve_radial

P = BASE.p
CFG = FlowConfig(max_steps=2000, t_max_time=100.0)


@pytest.fixture(scope="module")
def problem():
    return small_problem()


@pytest.fixture(scope="module")
def ground_state(problem):
    grid, ops, a = problem
    return ground_state_search(ops, a, P, [("bump", cone_bump(grid))], CFG, bisect_tol=1e-3, newton_tol=1e-8)


def test_small_data_decays(problem):
    grid, ops, a = problem
    psi = cone_bump(grid)
    trace = flow(ops, a, P, psi * (0.3 * nehari_scale(ops, a, P, psi)), CFG)
    assert trace.outcome == "decayed_to_zero"
    assert np.all(np.diff(trace.actions) < 0)
    assert all(s.action_after < s.action_before for s in trace.steps)
    assert trace.h1_norms[-1] < CFG.alpha


def test_negative_action_data_escapes(problem):
    grid, ops, a = problem
    psi = cone_bump(grid)
    u0 = psi * (1.5 * nehari_scale(ops, a, P, psi))
    assert action(ops, a, P, u0).action < 0
    trace = flow(ops, a, P, u0, CFG)
    assert trace.outcome == "escaped_negative"
    assert trace.actions[-1] < CFG.decay_action_floor


def test_iterates_stay_in_cone(problem):
    grid, ops, a = problem
    psi = sample_cone(grid, 3, 1)[0]
    trace = flow(ops, a, P, psi * (0.9 * nehari_scale(ops, a, P, psi)), CFG)
    assert trace.outcome in ("decayed_to_zero", "escaped_negative")
    tau = 1e-8 * trace.final.sup_norm()
    assert check_cone(grid, ops, trace.final, tau).in_cone


def test_flow_refuses_data_outside_cone(problem):
    grid, ops, a = problem
    bad = field_from_function(grid, lambda R, TH: (R - 1) * (2 - R) * (1.0 + np.sin(TH) ** 2))
    with pytest.raises(ConeViolationError) as exc:
        flow(ops, a, P, bad, CFG)
    assert exc.value.report.max_monotone_defect > 0


def test_invalid_flow_config():
    with pytest.raises(ConfigError):
        FlowConfig(dt0=0.5, dt_max=2.0).validate()
    with pytest.raises(ConfigError):
        FlowConfig(dt_min=1.0, dt0=0.5).validate()


def test_dissipation_defect_is_first_order(problem):
    grid, ops, a = problem
    psi = cone_bump(grid)
    eta = psi * (0.8 * nehari_scale(ops, a, P, psi))
    d1 = dissipation_defect(ops, a, P, eta, 1 / 16)
    d2 = dissipation_defect(ops, a, P, eta, 1 / 32)
    assert abs(d1) < 0.1
    assert 0.4 <= d2 / d1 <= 0.6


def test_shell_average_is_radial_and_in_cone(problem):
    grid, ops, _ = problem
    avg = shell_average(cone_bump(grid))
    assert np.all(avg.values == avg.values[:, :1])
    assert check_cone(grid, ops, avg).in_cone


def test_sublevel_floor(problem):
    grid, ops, a = problem
    assert sublevel_floor(ops, a, P, FlowConfig(rho_hat=0.25)) == 0.25
    derived = sublevel_floor(ops, a, P, CFG)
    assert 0 < derived < 0.5 * CFG.alpha ** 2


def test_separatrix_needs_direction(problem):
    grid, ops, a = problem
    with pytest.raises(ConfigError):
        separatrix_scale(ops, a, P, Field(grid, np.zeros(grid.shape)), CFG)


def test_ground_state_is_a_cone_fixed_point(problem, ground_state):
    grid, ops, a = problem
    best = ground_state[0]
    assert best.converged and best.phi_norm <= 1e-8 * h1_norm(ops, best.field)
    assert best.trace is not None and best.trace.outcome in (
        "decayed_to_zero", "escaped_negative", "converged_fixed_point")
    e = action(ops, a, P, best.field)
    assert e.action > 0 and h1_norm(ops, best.field) >= CFG.alpha
    assert abs(e.nehari_residual) <= 1e-8 * e.h1_sq
    assert abs(nehari_scale(ops, a, P, best.field) - 1.0) <= 1e-8
    assert check_cone(grid, ops, best.field, 1e-8 * best.field.sup_norm()).in_cone


def test_ground_state_lies_on_the_separatrix(problem, ground_state):
    grid, ops, a = problem
    best = ground_state[0]
    # the candidate is a fixed point, so flowing from it stops at once
    trace = flow(ops, a, P, best.field, FlowConfig(phi_tol=1e-6))
    assert trace.outcome == "converged_fixed_point" and not trace.steps


def test_newton_polish_is_quadratic(problem, ground_state):
    grid, ops, a = problem
    u = ground_state[0].field
    psi = cone_bump(grid)
    ref = refine_fixed_point(ops, a, P, Field(grid, u.values + 1e-3 * u.sup_norm() * psi.values), tol=1e-8)
    assert ref.converged
    h = ref.history
    assert h[-1] <= 1e-8 * h1_norm(ops, ref.field) and 2 <= len(h) <= 8
    assert h[-1] <= 10 * h[-2] ** 1.5


def test_radial_flow_matches_radial_solution(problem):
    grid, ops, a = problem
    cfg = FlowConfig(max_steps=2000, t_max_time=100.0, radial_only=True)
    cands = ground_state_search(ops, a, P, [("radial", cone_bump(grid))], cfg, bisect_tol=1e-3, newton_tol=1e-8)
    u2d = cands[0].field
    u1d = lift_radial(grid, solve_radial(BASE, grid.nr))
    assert cands[0].converged
    assert np.max(np.abs(u2d.values - u1d.values)) <= 1e-5 * u1d.sup_norm()


def test_search_orders_candidates_by_action(problem):
    grid, ops, a = problem
    rad = lift_radial(grid, solve_radial(BASE, grid.nr))
    cands = ground_state_search(ops, a, P, [("radial", rad), ("bump", cone_bump(grid))], CFG,
                                bisect_tol=1e-3, newton_tol=1e-8)
    conv = [c for c in cands if c.converged]
    assert conv and [c.action for c in conv] == sorted(c.action for c in conv)
    assert cands[0].action <= action(ops, a, P, rad).action + 1e-6


def test_small_sublevel_set_is_positively_invariant(problem):
    grid, ops, a = problem
    psi = cone_bump(grid)
    trace = flow(ops, a, P, psi * (0.3 * nehari_scale(ops, a, P, psi)), CFG, linger_steps=5)
    assert trace.outcome == "decayed_to_zero"
    assert not trace.left_sublevel
    assert np.all(np.diff(trace.h1_norms[-6:]) < 0)


@pytest.fixture(scope="module")
def radial_fixed_point(problem):
    grid, _, _ = problem
    return lift_radial(grid, solve_radial(BASE, grid.nr))


def test_zero_datum_counts_as_decayed(problem):
    grid, ops, a = problem
    trace = flow(ops, a, P, Field(grid, np.zeros(grid.shape)), CFG)
    assert trace.outcome == "decayed_to_zero" and not trace.steps
    assert trace.best is None


def test_collapse_onto_zero_is_not_a_fixed_point(problem, radial_fixed_point):
    grid, ops, a = problem
    # one full Euler step maps s u to s^3 u, straight past the alpha ball
    cfg = FlowConfig(dt0=1.0, phi_tol=1e-2, max_steps=50)
    trace = flow(ops, a, P, radial_fixed_point * 0.05, cfg)
    assert trace.outcome == "decayed_to_zero"
    assert trace.h1_norms[-1] < cfg.alpha
    assert trace.best_index == 0 and trace.best is not None
    assert trace.h1_norms[trace.best_index] >= cfg.alpha


def test_best_iterate_is_nontrivial(problem):
    grid, ops, a = problem
    psi = cone_bump(grid)
    rho_hat = sublevel_floor(ops, a, P, CFG)
    trace = flow(ops, a, P, psi * (0.3 * nehari_scale(ops, a, P, psi)), CFG)
    assert trace.outcome == "decayed_to_zero"
    _, value, _, h1 = trace.samples[trace.best_index]
    assert h1 >= CFG.alpha and value >= rho_hat


def test_separatrix_of_a_fixed_point_is_the_unit_scale(problem, radial_fixed_point):
    grid, ops, a = problem
    t_star, witness = separatrix_scale(ops, a, P, radial_fixed_point, CFG, bisect_tol=1e-4)
    assert abs(t_star - 1.0) <= 2e-4
    assert witness.best is not None
    assert action(ops, a, P, witness.best).action >= 0.5 * action(ops, a, P, radial_fixed_point).action


@pytest.mark.parametrize("factor", [0.5, 0.7, 0.85, 0.93, 0.97, 1.03, 1.07, 1.15, 1.3, 1.6])
def test_classification_is_monotone_around_the_separatrix(problem, ground_state, factor):
    grid, ops, a = problem
    t_star = ground_state[0].t_star
    trace = flow(ops, a, P, cone_bump(grid) * (factor * t_star), CFG)
    expected = "decayed_to_zero" if factor < 1 else "escaped_negative"
    assert trace.outcome == expected


def test_ground_state_at_higher_power():
    grid, ops, a = small_problem(params=BASE.replace(p=6.0))
    cands = ground_state_search(ops, a, 6.0, [("bump", cone_bump(grid))], CFG, bisect_tol=1e-3, newton_tol=1e-8)
    best = cands[0]
    assert best.converged
    assert h1_norm(ops, best.field) >= CFG.alpha
    assert abs(nehari_scale(ops, a, 6.0, best.field) - 1.0) <= 1e-8
    assert check_cone(grid, ops, best.field, 1e-8 * best.field.sup_norm()).in_cone


def test_radial_flow_limit_converges_at_second_order():
    fine = solve_radial(BASE, 1025)
    cfg = FlowConfig(max_steps=2000, t_max_time=100.0, radial_only=True)
    errs = []
    for nr in (17, 33, 65):
        grid, ops, a = small_problem(nr, 9)
        cands = ground_state_search(ops, a, P, [("radial", cone_bump(grid))], cfg, bisect_tol=1e-3,
                                    newton_tol=1e-8)
        assert cands[0].converged
        stride = (fine.r_nodes.size - 1) // (nr - 1)
        errs.append(np.max(np.abs(cands[0].field.values[:, 0] - fine.values[::stride])))
    orders = [np.log2(e0 / e1) for e0, e1 in zip(errs, errs[1:])]
    assert min(orders) >= 1.6
    assert np.log2(errs[0] / errs[2]) / 2 >= 1.8
