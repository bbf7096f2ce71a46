import numpy as np
import pytest

from tests.compat import BASE, random_interior, small_problem
from conesolver.errors import BoundaryError
from conesolver.grid import build_grid, field_from_function
from conesolver.models import Field, ProblemParams
from conesolver.operators import (apply_dtheta, apply_neg_laplacian, assemble, dump_triplets, h1_norm_sq, mass_form,
                                  sphere_laplacian, stiffness_form)
from conesolver.spectral import harmonic_Y
from conesolver.verify import angular_checkerboard, manufactured_errors


def test_stiffness_matrix_is_symmetric_and_definite():
    _, ops, _ = small_problem()
    S = ops.stiffness
    assert abs(S - S.T).max() == 0.0
    assert np.all(ops.stiffness_diag > 0)
    assert ops.n_unknowns == 15 * 17


def test_stiffness_form_exactly_symmetric():
    _, ops, _ = small_problem()
    for seed in range(5):
        u, v = random_interior(ops, seed), random_interior(ops, seed + 100)
        assert stiffness_form(ops, u, v) == stiffness_form(ops, v, u)
        assert h1_norm_sq(ops, u) > 0


def test_form_matches_matrix():
    _, ops, _ = small_problem()
    u, v = random_interior(ops, 1), random_interior(ops, 2)
    via_matrix = ops.to_unknowns(u.values) @ (ops.stiffness @ ops.to_unknowns(v.values))
    assert stiffness_form(ops, u, v) == pytest.approx(via_matrix, rel=1e-12)


def test_green_identity():
    _, ops, _ = small_problem()
    u, v = random_interior(ops, 3), random_interior(ops, 4)
    lhs = stiffness_form(ops, u, v)
    rhs = mass_form(ops, apply_neg_laplacian(ops, u) + u, v)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_boundary_is_enforced():
    grid, ops, _ = small_problem()
    with pytest.raises(BoundaryError):
        stiffness_form(ops, Field(grid, np.ones(grid.shape)), random_interior(ops))


@pytest.mark.parametrize("N", [3, 4, 5])
def test_sphere_harmonic_eigenvalue(N):
    params = ProblemParams(N=N, p=4.0, R0=1.0, R1=2.0)
    ops = assemble(build_grid(params, 5, 65))
    theta = ops.grid.theta_nodes
    Y = harmonic_Y(theta, N)
    LY = sphere_laplacian(ops, Y)
    away = np.abs(theta) <= np.pi / 3
    h = ops.grid.htheta
    assert np.max(np.abs(LY[away] - 2 * N * Y[away])) <= 30 * h * h


def test_neg_laplacian_of_radial_power():
    # -Laplace r^2 = -2N in R^N
    grid, ops, _ = small_problem(33, 9)
    u = field_from_function(grid, lambda R, TH: R ** 2)
    lap = apply_neg_laplacian(ops, u).values[1:-1]
    assert np.allclose(lap, -2 * BASE.N, rtol=0, atol=1e-8)


def test_manufactured_solution_second_order():
    errs = manufactured_errors(BASE, (17, 33, 65))
    orders = [np.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.8


def test_fault_injection_breaks_definiteness():
    _, good, _ = small_problem()
    _, bad, _ = small_problem(angular_sign=-1.0)
    assert h1_norm_sq(good, angular_checkerboard(good)) > 0
    assert h1_norm_sq(bad, angular_checkerboard(bad)) < 0


def test_dump_triplets(tmp_path):
    _, ops, _ = small_problem(5, 5)
    path = dump_triplets(ops, tmp_path / "ops.txt")
    lines = path.read_text().splitlines()
    assert len(lines) == ops.stiffness.nnz
    i, j, v = lines[0].split()
    assert ops.stiffness[int(i), int(j)] == float(v)


@pytest.mark.parametrize("ntheta", [33, 65])
def test_dtheta_of_cosine_and_harmonic(ntheta):
    grid = build_grid(BASE, 5, ntheta)
    ops = assemble(grid)
    h = grid.htheta
    TH = grid.theta_nodes[None, :]
    d_cos = apply_dtheta(ops, field_from_function(grid, lambda R, T: np.cos(T)))
    assert np.max(np.abs(d_cos.values + np.sin(TH))) <= h * h
    Y = field_from_function(grid, lambda R, T: harmonic_Y(T, BASE.N) * np.ones_like(R))
    d_Y = apply_dtheta(ops, Y)
    assert np.max(np.abs(d_Y.values + BASE.N * np.sin(2 * TH))) <= 10 * BASE.N * h * h


def test_dtheta_of_shell_constant_vanishes():
    grid, ops, _ = small_problem(9, 17)
    u = field_from_function(grid, lambda R, T: 1.5 * R + 0 * T)
    assert np.allclose(apply_dtheta(ops, u).values, 0.0, rtol=0, atol=1e-12)
