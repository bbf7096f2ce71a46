import math

import numpy as np
import pytest

from tests.compat import small_problem
from conesolver.cone import cone_bump, sample_cone
from conesolver.energy import (action, energy_on_sphere, first_variation, ground_state_value, h1_norm,
                               mountain_pass_geometry, nehari_derivative_profile, nehari_scale,
                               ps_norm_bound, second_variation)
from conesolver.errors import ConfigError
from conesolver.models import Field
from conesolver.operators import stiffness_form
from conesolver.resolvent import phi

P = 4.0


def test_action_breakdown_is_consistent():
    grid, ops, a = small_problem()
    e = action(ops, a, P, cone_bump(grid) * 2.0)
    assert e.action == pytest.approx(e.h1_sq / 2 - e.nonlinear / P)
    assert e.nehari_residual == pytest.approx(e.h1_sq - e.nonlinear)


@pytest.mark.parametrize("p", [2.5, 4.0, 7.0])
def test_nehari_scale_lands_on_nehari_set(p):
    grid, ops, a = small_problem()
    for u in sample_cone(grid, 2, 4):
        t = nehari_scale(ops, a, p, u)
        e = action(ops, a, p, u * t)
        assert abs(e.nehari_residual) <= 1e-10 * e.h1_sq
        # t u maximizes the action along the ray
        assert e.action >= action(ops, a, p, u * (1.01 * t)).action
        assert e.action >= action(ops, a, p, u * (0.99 * t)).action


def test_nehari_scale_of_zero_field():
    grid, ops, a = small_problem()
    with pytest.raises(ConfigError):
        nehari_scale(ops, a, P, Field(grid, np.zeros(grid.shape)))


def test_gradient_matches_finite_differences():
    grid, ops, a = small_problem()
    u = cone_bump(grid) * (0.8 * nehari_scale(ops, a, P, cone_bump(grid)))
    eps = 1e-5
    for v in sample_cone(grid, 4, 3):
        fd = (action(ops, a, P, u + eps * v).action - action(ops, a, P, u - eps * v).action) / (2 * eps)
        exact = first_variation(ops, a, P, u, v)
        assert fd == pytest.approx(exact, rel=1e-6)
        Phi, _ = phi(ops, a, P, u)
        assert stiffness_form(ops, Phi, v) == pytest.approx(exact, rel=1e-8)


def test_hessian_matches_finite_differences():
    grid, ops, a = small_problem()
    u = cone_bump(grid) * nehari_scale(ops, a, P, cone_bump(grid))
    eps = 1e-3
    for v in sample_cone(grid, 5, 3):
        v = v * (h1_norm(ops, u) / h1_norm(ops, v))
        f = lambda t: action(ops, a, P, u + t * v).action
        fd = (f(eps) - 2 * f(0.0) + f(-eps)) / eps ** 2
        assert fd == pytest.approx(second_variation(ops, a, P, u, v), rel=1e-4)


def test_mountain_pass_geometry():
    grid, ops, a = small_problem()
    samples = sample_cone(grid, 0, 16)
    alpha, rho_hat = mountain_pass_geometry(ops, a, P, samples)
    assert alpha > 0 and rho_hat > 0
    # on the alpha sphere the action sits well above rho_hat and the quadratic part dominates
    values = energy_on_sphere(ops, a, P, samples, alpha)
    assert min(values) >= 2 * rho_hat - 1e-15
    assert all(v >= 0.45 * alpha ** 2 * (1 - 1e-9) for v in values)


def test_nehari_profile_changes_sign_once():
    grid, ops, a = small_problem()
    u = cone_bump(grid)
    t_u = nehari_scale(ops, a, P, u)
    ts = np.linspace(0.05, 3.0, 61) * t_u
    deriv, values = nehari_derivative_profile(ops, a, P, u, ts)
    signs = np.sign(deriv)
    assert signs[0] > 0 and signs[-1] < 0
    assert np.count_nonzero(np.diff(signs)) == 1
    assert np.argmax(values) == np.argmin(np.abs(ts - t_u))


def test_ps_norm_bound():
    # on the Nehari set with Phi = 0: I = (1/2 - 1/p) ||u||^2 exactly
    grid, ops, a = small_problem()
    u = cone_bump(grid) * nehari_scale(ops, a, P, cone_bump(grid))
    e = action(ops, a, P, u)
    assert ps_norm_bound(P, e.action, 0.0) == pytest.approx(math.sqrt(e.h1_sq))
    assert ps_norm_bound(P, e.action, 1.0) > math.sqrt(e.h1_sq)
    assert math.isnan(ps_norm_bound(P, -10.0, 0.0))


def test_ground_state_value():
    assert ground_state_value([3.0, 1.5, float("nan"), 2.0]) == 1.5
    assert ground_state_value([]) is None


def test_second_variation_at_zero_is_the_norm():
    grid, ops, a = small_problem()
    zero = Field(grid, np.zeros(grid.shape))
    for v in sample_cone(grid, 8, 3):
        assert second_variation(ops, a, P, zero, v) == pytest.approx(h1_norm(ops, v) ** 2, rel=1e-14)


@pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
def test_second_variation_along_a_nehari_ray(p):
    grid, ops, a = small_problem()
    psi = cone_bump(grid)
    u = psi * nehari_scale(ops, a, p, psi)
    assert second_variation(ops, a, p, u, u) == pytest.approx((2 - p) * h1_norm(ops, u) ** 2, rel=1e-10)
