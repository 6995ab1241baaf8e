"""Kernel families, operator application, testing condition, norms."""

import numpy as np
import pytest

from czkit.errors import NonFiniteKernelValue, OmegaIsWholeSpace
from czkit.kernels import (adjoint_apply, apply, bergman_kernel, bilinear,
                           check_d_domination, check_size_and_smoothness,
                           check_T1, constant_kernel, dense_operator,
                           explicit_kernel, indicator, kernel_from_json,
                           kernel_to_json, operator_norm, operator_norm_dense,
                           power_kernel, zero_kernel)
from czkit.lattice import build_lattice, classify_terminal_transit
from czkit.examples import generate_example
from conftest import grid_space, line_space


@pytest.fixture(scope="module")
def bergman_setup():
    space, info = generate_example("bergman_disc_model")
    kern = bergman_kernel(space, m=info["m"], tau=info["tau"])
    return space, kern


# ---------------------------------------------------------------------------
# application


def test_averaging_kernel_on_ones():
    space = line_space(8)
    kern = constant_kernel(space, 1.0)
    out = apply(kern, space, np.ones(8))
    # diagonal omitted: Tf(x) = 1 - mu({x})
    assert np.allclose(out, 1.0 - space.mu)


def test_zero_function_maps_to_zero(line8):
    kern = power_kernel(line8, m=1.0)
    assert np.abs(apply(kern, line8, np.zeros(8))).max() == 0.0


def test_apply_matches_dense_oracle():
    space = line_space(8)
    kern = power_kernel(space, m=1.0)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(8)
    dense = np.zeros((8, 8))
    for x in range(8):
        for y in range(8):
            if x != y:
                dense[x, y] = 1.0 / space.rho[x, y]
    expect = dense @ (f * space.mu)
    assert np.allclose(apply(kern, space, f), expect)


def test_adjoint_of_symmetric_kernel(line8):
    kern = power_kernel(line8, m=1.0)
    f = np.random.default_rng(1).standard_normal(8)
    assert np.allclose(apply(kern, line8, f), adjoint_apply(kern, line8, f))


def test_bilinear_adjoint_identity():
    space = grid_space(4)
    rng = np.random.default_rng(2)
    mat = rng.standard_normal((16, 16))
    kern = explicit_kernel(space, mat, m=1.0, tau=1.0)
    f, g = rng.standard_normal((2, 16))
    lhs = space.inner(apply(kern, space, f), g)
    rhs = space.inner(f, adjoint_apply(kern, space, g))
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert bilinear(kern, space, f, g) == pytest.approx(lhs, abs=1e-12)


def test_non_finite_kernel_rejected(line8):
    mat = np.ones((8, 8))
    mat[0, 1] = np.inf
    with pytest.raises(NonFiniteKernelValue):
        explicit_kernel(line8, mat, m=1.0, tau=1.0)


# ---------------------------------------------------------------------------
# size and smoothness


def test_power_kernel_size_constant_is_one(line8):
    kern = power_kernel(line8, m=1.0)
    rep = check_size_and_smoothness(kern, line8)
    assert rep.c_size == pytest.approx(1.0)
    assert rep.passed


def test_zero_kernel_constants_vanish(line8):
    rep = check_size_and_smoothness(zero_kernel(line8), line8)
    assert rep.c_size == 0.0
    assert rep.c_smooth == 0.0


def test_smoothness_fit_brute_force():
    space = line_space(6)
    kern = power_kernel(space, m=1.0, tau=1.0)
    rep = check_size_and_smoothness(kern, space)
    # independent triple loop over the admissible smoothness regime
    best = 0.0
    rho = space.rho
    k = kern.matrix
    for x in range(6):
        for xp in range(6):
            for y in range(6):
                if x == y or xp == y or x == xp:
                    continue
                if rho[x, xp] <= kern.delta_CZ * rho[x, y]:
                    diff = abs(k[x, y] - k[xp, y])
                    best = max(best,
                               diff * rho[x, y] ** 2 / rho[x, xp])
    assert rep.c_smooth == pytest.approx(best)


# ---------------------------------------------------------------------------
# Bergman domination


def test_bergman_model_kernel_dominates(bergman_setup):
    space, kern = bergman_setup
    rep = check_d_domination(kern, space)
    assert rep.pairwise_ok


def test_zero_kernel_dominates(bergman_setup):
    space, _ = bergman_setup
    kern = zero_kernel(space)
    kern.dominated_by_d = True
    assert check_d_domination(kern, space).pairwise_ok


def test_domination_needs_proper_omega(line8):
    space = line_space(8, omega=range(8))
    kern = power_kernel(space, m=1.0)
    with pytest.raises(OmegaIsWholeSpace):
        check_d_domination(kern, space)


# ---------------------------------------------------------------------------
# T1 testing condition


def _lattice(space, m=1.0):
    lat = build_lattice(space, kappa=0.5, seed=1)
    classify_terminal_transit(lat, m=m)
    return lat


def test_t1_zero_kernel(grid8):
    lat = _lattice(grid8)
    assert check_T1(zero_kernel(grid8), grid8, lat).A == 0.0


def test_t1_averaging_kernel_bounded_by_one(grid8):
    lat = _lattice(grid8)
    rep = check_T1(constant_kernel(grid8, 1.0), grid8, lat)
    assert rep.A <= 1.0 + 1e-12


def test_t1_exhaustive_oracle():
    space = line_space(8)
    lat = _lattice(space)
    kern = power_kernel(space, m=1.0)
    rep = check_T1(kern, space, lat, dilations=())
    best = 0.0
    for cube in lat.cubes.values():
        mass = space.mu_mass(cube.members)
        if mass <= 0:
            continue
        chi = indicator(space, cube.members)
        direct = space.l2_norm(apply(kern, space, chi)) ** 2 / mass
        adj = space.l2_norm(adjoint_apply(kern, space, chi)) ** 2 / mass
        best = max(best, direct, adj)
    assert rep.A == pytest.approx(best)


def test_t1_monotone_in_test_family(grid8):
    lat = _lattice(grid8)
    kern = power_kernel(grid8, m=2.0, tau=1.0)
    small = check_T1(kern, grid8, lat, dilations=())
    big = check_T1(kern, grid8, lat, dilations=(1.2, 1.4, 1.5))
    assert small.A <= big.A + 1e-12


# ---------------------------------------------------------------------------
# operator norm


def test_norm_rank_one_averaging():
    space = line_space(8)
    kern = constant_kernel(space, 1.0, diagonal_policy="truncate")
    norm, converged = operator_norm(kern, space, tol=1e-10, seed=3)
    assert converged
    assert norm == pytest.approx(1.0, abs=1e-8)


def test_norm_zero_kernel(line8):
    norm, _ = operator_norm(zero_kernel(line8), line8, seed=1)
    assert norm == 0.0


def test_norm_matches_dense_svd():
    space = grid_space(4)
    rng = np.random.default_rng(6)
    kern = explicit_kernel(space, rng.standard_normal((16, 16)),
                           m=1.0, tau=1.0)
    norm, converged = operator_norm(kern, space, tol=1e-12, seed=2)
    assert converged
    assert norm == pytest.approx(operator_norm_dense(kern, space), rel=1e-8)


def test_norm_scaling():
    space = line_space(8)
    k1 = power_kernel(space, m=1.0)
    k3 = explicit_kernel(space, 3.0 * k1.matrix, m=1.0, tau=1.0)
    n1, _ = operator_norm(k1, space, tol=1e-10, seed=5)
    n3, _ = operator_norm(k3, space, tol=1e-10, seed=5)
    assert n3 == pytest.approx(3.0 * n1, rel=1e-6)


def test_t1_necessity(grid8):
    # ||T chi_Q||^2 <= ||T||^2 mu(Q) for every cube and kernel
    lat = _lattice(grid8)
    for kern in [power_kernel(grid8, m=2.0), constant_kernel(grid8, 1.0)]:
        norm = operator_norm_dense(kern, grid8)
        for cube in lat.cubes.values():
            chi = indicator(grid8, cube.members)
            lhs = grid8.l2_norm(apply(kern, grid8, chi)) ** 2
            assert lhs <= norm ** 2 * grid8.mu_mass(cube.members) + 1e-9


# ---------------------------------------------------------------------------
# serialization


def test_kernel_json_round_trip(line8):
    for kern in [power_kernel(line8, m=1.0), constant_kernel(line8, 2.0),
                 zero_kernel(line8)]:
        doc = kernel_to_json(kern)
        back = kernel_from_json(doc, line8)
        assert np.allclose(back.matrix, kern.matrix)
        assert back.m == kern.m and back.tau == kern.tau


def test_dense_operator_shape(line8):
    kern = power_kernel(line8, m=1.0)
    mat = dense_operator(kern, line8)
    f = np.random.default_rng(4).standard_normal(8)
    assert np.allclose(mat @ f, apply(kern, line8, f))
