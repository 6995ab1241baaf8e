"""Martingale decomposition: reconstruction, orthogonality, good/bad split."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czkit.errors import ZeroMass
from czkit.lattice import (build_lattice, classify_all_good_bad,
                           classify_terminal_transit)
from czkit.projections import (MartingaleDecomposition, average, decompose,
                               delta_proj, expected_bad_norm,
                               properties_check, split_good_bad)
from conftest import grid_space, line_space

ALPHA_11 = 0.25


def _classified(space, seed=1):
    lat = build_lattice(space, kappa=0.5, seed=seed)
    classify_terminal_transit(lat)
    return lat


# ---------------------------------------------------------------------------
# averages and single projections


def test_average_constant(line8):
    lat = _classified(line8)
    phi = np.full(8, 3.5)
    assert average(line8, phi, lat.root.members) == pytest.approx(3.5)


def test_average_two_points():
    space = line_space(2, mu=[0.5, 0.5])
    assert average(space, np.array([0.0, 2.0]),
                   np.array([0, 1])) == pytest.approx(1.0)


def test_average_matches_weighted_sum_oracle():
    rng = np.random.default_rng(3)
    space = line_space(16, mu=rng.dirichlet(np.ones(16)))
    phi = rng.standard_normal(16)
    members = np.array([2, 5, 6, 11])
    expect = (phi[members] * space.mu[members]).sum() / space.mu[members].sum()
    assert average(space, phi, members) == pytest.approx(expect)


def test_average_zero_mass_raises():
    mu = np.zeros(4)
    mu[0] = 1.0
    space = line_space(4, mu=mu)
    with pytest.raises(ZeroMass):
        average(space, np.ones(4), np.array([2, 3]))


def test_delta_constant_vanishes(grid8):
    lat = _classified(grid8)
    d = delta_proj(lat, np.full(grid8.n_points, 2.0), lat.root)
    assert np.abs(d).max() < 1e-12


def test_delta_zero_mean_and_support(line_example, line_lattice):
    space, _ = line_example
    rng = np.random.default_rng(0)
    phi = rng.standard_normal(space.n_points)
    for cid in line_lattice.transit_ids():
        cube = line_lattice.cubes[cid]
        if cube.is_leaf:
            continue
        d = delta_proj(line_lattice, phi, cube)
        assert abs(np.sum(d * space.mu)) < 1e-12
        off = np.setdiff1d(np.arange(space.n_points), cube.members)
        if off.size:
            assert np.abs(d[off]).max() == 0.0


def test_delta_equal_mass_oscillation():
    space = line_space(2, mu=[0.5, 0.5])
    lat = _classified(space)
    phi = np.array([1.0, -1.0])
    # the root average is zero, so the root projection returns phi on the root
    d = delta_proj(lat, phi, lat.root)
    assert np.allclose(d, phi)


# ---------------------------------------------------------------------------
# full decomposition


def test_constant_function_decomposition(grid8):
    lat = _classified(grid8)
    dec = decompose(lat, np.ones(grid8.n_points))
    assert dec.lambda_part == pytest.approx(1.0)
    assert all(np.abs(v).max() < 1e-12 for _, v in dec.components.values())


def test_reconstruction_and_pythagoras_random():
    space = grid_space(8)
    lat = _classified(space)
    rng = np.random.default_rng(5)
    for _ in range(5):
        phi = rng.standard_normal(space.n_points)
        dec = decompose(lat, phi)
        assert np.abs(dec.reconstruct() - phi).max() <= 1e-10
        total = space.l2_norm(phi) ** 2
        parts = dec.lambda_part ** 2 + sum(dec.norms_sq().values())
        assert abs(total - parts) <= 1e-10 * total


def test_decomposition_linearity():
    space = line_space(8)
    lat = _classified(space)
    rng = np.random.default_rng(9)
    phi, psi = rng.standard_normal((2, 8))
    a, b = 2.0, -0.5
    dec = decompose(lat, a * phi + b * psi)
    dp, ds = decompose(lat, phi), decompose(lat, psi)
    assert dec.lambda_part == pytest.approx(a * dp.lambda_part
                                            + b * ds.lambda_part)
    for cid in dec.components:
        combo = a * dp.component_vector(cid) + b * ds.component_vector(cid)
        assert np.allclose(dec.component_vector(cid), combo, atol=1e-12)


def test_components_only_on_transit_cubes(line_lattice):
    space = line_lattice.space
    phi = np.random.default_rng(1).standard_normal(space.n_points)
    dec = decompose(line_lattice, phi)
    for cid in dec.components:
        assert not line_lattice.cubes[cid].terminal


def test_properties_check_random(grid8):
    lat = _classified(grid8)
    rng = np.random.default_rng(2)
    for _ in range(3):
        phi = rng.standard_normal(grid8.n_points)
        rep = properties_check(decompose(lat, phi), phi)
        assert rep.passed
        assert rep.idempotence_err <= 1e-10
        assert rep.mutual_orthogonality_err <= 1e-10
        assert rep.lambda_orthogonality_err <= 1e-10


@given(st.integers(0, 10))
@settings(max_examples=20, deadline=None)
def test_reconstruction_property(seed):
    space = line_space(12)
    lat = _classified(space)
    phi = np.random.default_rng(seed).standard_normal(12)
    dec = decompose(lat, phi)
    assert np.abs(dec.reconstruct() - phi).max() <= 1e-10


# ---------------------------------------------------------------------------
# good/bad split


def _good_bad_setup(space, s_param=1):
    lat1 = build_lattice(space, kappa=0.5, seed=1)
    lat2 = build_lattice(space, kappa=0.5, seed=2)
    classify_terminal_transit(lat1)
    classify_all_good_bad(lat1, lat2, ALPHA_11, 0.25, s_param)
    return lat1


def test_all_good_gives_zero_bad_part(grid8):
    lat = _good_bad_setup(grid8, s_param=40)    # huge gap: everything good
    phi = np.random.default_rng(4).standard_normal(grid8.n_points)
    f_good, f_bad = split_good_bad(decompose(lat, phi))
    assert np.abs(f_bad).max() == 0.0
    assert np.allclose(f_good, phi, atol=1e-10)


def test_all_bad_leaves_lambda_only(grid8):
    lat = _good_bad_setup(grid8)
    for cube in lat.cubes.values():
        cube.good = False
    phi = np.random.default_rng(4).standard_normal(grid8.n_points)
    dec = decompose(lat, phi)
    f_good, f_bad = split_good_bad(dec)
    assert np.allclose(f_good, dec.lambda_part)
    assert np.allclose(f_bad, phi - dec.reconstruct() + dec.reconstruct()
                       - dec.lambda_part, atol=1e-10)


def test_split_is_exact_and_orthogonal(grid8):
    lat = _good_bad_setup(grid8)
    rng = np.random.default_rng(8)
    phi = rng.standard_normal(grid8.n_points)
    f_good, f_bad = split_good_bad(decompose(lat, phi))
    assert np.abs((f_good + f_bad) - phi).max() <= 1e-10
    total = grid8.l2_norm(phi) ** 2
    parts = grid8.l2_norm(f_good) ** 2 + grid8.l2_norm(f_bad) ** 2
    assert abs(total - parts) <= 1e-10 * total


def test_expected_bad_norm_constant_function():
    space = line_space(8)
    mean, stderr, check = expected_bad_norm(
        space, np.ones(8), kappa=0.5, alpha=ALPHA_11, delta_bad=0.25,
        s_param=1, ensemble=5)
    assert mean == pytest.approx(0.0, abs=1e-12)
    assert check
