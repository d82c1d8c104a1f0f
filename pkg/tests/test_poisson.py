import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodal_nehari.grid import RadialField, lp_norm, make_grid, split_signs
from nodal_nehari.invariants import (ball_potential, ball_source, gaussian_potential,
                                     gaussian_source, random_field)
from nodal_nehari.model import sobolev_constant_bound
from nodal_nehari.poisson import (injected_sign_flip, nonlocal_coupling, potential_energy_sq,
                                  solve_poisson)


@pytest.mark.parametrize("N", [513, 2049, 4096])
def test_ball_potential_closed_form(N):
    g = make_grid(30.0, N)
    err = np.max(np.abs(solve_poisson(ball_source(g)).phi.values - ball_potential(g.nodes)))
    assert err <= 5.0 * g.h**2


@pytest.mark.parametrize("N", [513, 2049, 4096])
def test_gaussian_potential_closed_form(N):
    g = make_grid(30.0, N)
    err = np.max(np.abs(solve_poisson(gaussian_source(g)).phi.values
                        - gaussian_potential(g.nodes)))
    assert err <= 5.0 * g.h**2


def test_gaussian_potential_at_origin():
    # limit of sqrt(pi) erf(r) / (4 r) at r = 0 is 1/2
    assert gaussian_potential(np.array([1e-12]))[0] == pytest.approx(0.5)


def test_ball_self_coupling():
    for N in (2049, 4097):
        g = make_grid(4.0, N)
        u = ball_source(g)
        assert nonlocal_coupling(u, u) == pytest.approx(8 * math.pi / 15, abs=10 * g.h**2)


def test_exterior_potential_is_coulomb():
    g = make_grid(10.0, 2001)
    sol = solve_poisson(ball_source(g))
    rho = np.array([3.0, 10.0, 25.0, 400.0])
    np.testing.assert_allclose(sol.at(rho), sol.charge / rho, rtol=1e-12)
    # charge is int u^2 s^2 ds = 1/3 for the unit ball
    assert sol.charge == pytest.approx(1.0 / 3.0, abs=g.h**2)


def test_potential_energy_matches_coupling(rng):
    # summation by parts makes the discrete identity exact up to round-off
    g = make_grid(30.0, 2048)
    for u in (gaussian_source(g), random_field(g, rng), random_field(g, rng)):
        sol = solve_poisson(u)
        assert potential_energy_sq(sol) == pytest.approx(nonlocal_coupling(u, u, sol), rel=1e-12)


def test_monotone_decreasing(rng):
    g = make_grid(30.0, 2048)
    for _ in range(100):
        phi = solve_poisson(random_field(g, rng)).phi.values
        assert np.max(np.diff(phi)) <= 1e-12 * np.max(phi)


def test_symmetry_and_additivity(rng):
    g = make_grid(30.0, 2048)
    for _ in range(10):
        u, v = random_field(g, rng), random_field(g, rng)
        assert nonlocal_coupling(u, v) == pytest.approx(nonlocal_coupling(v, u), rel=1e-12)
        up, um = split_signs(u)
        np.testing.assert_allclose(solve_poisson(u).phi.values,
                                   solve_poisson(up).phi.values + solve_poisson(um).phi.values,
                                   rtol=1e-12, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.01, 100.0), seed=st.integers(0, 2**31))
def test_quartic_scaling(t, seed):
    g = make_grid(20.0, 512)
    u = random_field(g, np.random.default_rng(seed))
    assert nonlocal_coupling(u * t, u * t) == pytest.approx(t**4 * nonlocal_coupling(u, u),
                                                            rel=1e-12)


def test_coupling_bounded_by_sobolev_constant(rng):
    # int phi u^2 <= |phi|_6 |u^2|_{6/5} <= S^2 |u|_{12/5}^4
    s2 = sobolev_constant_bound(6.0) ** 2
    ratios = []
    for N in (1024, 2047):
        g = make_grid(30.0, N)
        local = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            u = random_field(g, local, bumps=int(local.integers(1, 5)))
            worst = max(worst, nonlocal_coupling(u, u) / lp_norm(u, 2.4) ** 4)
        ratios.append(worst)
    assert max(ratios) < s2
    assert ratios[0] == pytest.approx(ratios[1], rel=1e-2)


def test_sign_flip_fault_breaks_monotonicity(rng):
    g = make_grid(30.0, 1024)
    u = random_field(g, rng, signed=False)
    with injected_sign_flip():
        phi = solve_poisson(u).phi.values
    assert np.max(np.diff(phi)) > 0
    assert np.max(np.diff(solve_poisson(u).phi.values)) <= 1e-12 * np.max(phi)


def test_runtime_at_4096():
    g = make_grid(30.0, 4096)
    u = gaussian_source(g)
    t = time.perf_counter()
    for _ in range(10):
        solve_poisson(u)
    assert (time.perf_counter() - t) / 10 < 0.1


def test_zero_source_has_zero_potential():
    g = make_grid(5.0, 64)
    sol = solve_poisson(g.zeros())
    assert not np.any(sol.phi.values) and sol.charge == 0.0


def test_field_on_grid_is_sampled_not_interpolated():
    g = make_grid(2.0, 21)
    u = RadialField(g, np.linspace(1.0, 0.0, 21))
    sol = solve_poisson(u)
    assert sol.phi.grid == g
