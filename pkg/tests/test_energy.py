import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodal_nehari.constraint import nehari_project
from nodal_nehari.energy import (ComponentFiber, directional_derivative, energy,
                                 energy_gradient_vector, fiber_argmax, fiber_scan, functional,
                                 gamma, gradient_field, quarter_gap)
from nodal_nehari.errors import NoProjection
from nodal_nehari.grid import RadialField, h1_norm_sq, lp_norm, make_grid, split_signs
from nodal_nehari.invariants import random_field, sign_changing_field
from nodal_nehari.model import check_hypotheses, from_name, nehari_lower_bound
from nodal_nehari.poisson import nonlocal_coupling

LAM = 0.1


def separated(grid, a=1.0, b=1.0):
    """Positive core on [0, 2] and negative shell on [3, 6] with a zero gap between."""
    r = grid.nodes
    core = np.where(r < 2.0, np.cos(np.pi * r / 4.0) ** 2, 0.0)
    shell = np.where((r > 3.0) & (r < 6.0), -np.sin(np.pi * (r - 3.0) / 3.0) ** 2, 0.0)
    return RadialField(grid, a * core + b * shell)


@pytest.fixture(scope="module")
def g():
    return make_grid(30.0, 2048)


def test_zero_field(g, asym):
    rep = energy(g.zeros(), asym, LAM)
    assert rep.I == rep.gamma == rep.gamma_plus == rep.gamma_minus == 0.0
    assert not np.any(gradient_field(g.zeros(), asym, LAM).values)


def test_reassembly(g, asym, rng):
    u = random_field(g, rng)
    rep = energy(u, asym, LAM)
    assert rep.I == 0.5 * rep.norm_sq + 0.25 * LAM * rep.nonlocal_ - rep.potential
    assert rep.I == pytest.approx(functional(u, asym, LAM), rel=1e-14)
    assert rep.gamma == pytest.approx(gamma(u, asym, LAM), rel=1e-14)


def test_split_exact_for_separated_supports(g, asym):
    u = separated(g, 2.0, 1.5)
    up, um = split_signs(u)
    rep = energy(u, asym, LAM)
    assert rep.straddle == 0.0
    assert rep.gamma == pytest.approx(rep.gamma_plus + rep.gamma_minus, rel=1e-13)
    cross = nonlocal_coupling(um, up)
    split = functional(up, asym, LAM) + functional(um, asym, LAM) + 0.5 * LAM * cross
    assert rep.I == pytest.approx(split, rel=1e-10)


def test_split_with_straddle_for_random_fields(g, asym, rng):
    for _ in range(10):
        u = sign_changing_field(g, rng)
        up, um = split_signs(u)
        rep = energy(u, asym, LAM)
        split = (functional(up, asym, LAM) + functional(um, asym, LAM)
                 + 0.5 * LAM * rep.cross + rep.straddle)
        assert rep.I == pytest.approx(split, rel=1e-10)
        assert rep.gamma == pytest.approx(rep.gamma_plus + rep.gamma_minus, rel=1e-10)
        # at the interface cell both parts decrease, so the cross term is non-negative
        assert rep.straddle >= 0.0


def test_derivative_decomposition(g, asym, rng):
    u = separated(g, 1.7, 0.8)
    up, um = split_signs(u)
    cross = nonlocal_coupling(up, um)
    for _ in range(10):
        a, b = rng.uniform(0.3, 3.0, size=2)
        lhs = directional_derivative(up * a + um * b, up * a, asym, LAM)
        rhs = directional_derivative(up * a, up * a, asym, LAM) + a * a * b * b * LAM * cross
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_directional_derivative_special_directions(g, asym, rng):
    u = random_field(g, rng)
    assert directional_derivative(u, g.zeros(), asym, LAM) == 0.0
    assert directional_derivative(u, u, asym, LAM) == pytest.approx(energy(u, asym, LAM).gamma,
                                                                   rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_central_differences(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(30.0, 1024)
    nl_lam = [(n, lam) for n in ("asymcubic", "power:4") for lam in (0.0, 0.1, 1.0)]
    name, lam = nl_lam[rng.integers(len(nl_lam))]
    nl = from_name(name)
    u, v = random_field(g, rng), random_field(g, rng)
    h = 1e-5
    fd = (functional(u + v * h, nl, lam) - functional(u - v * h, nl, lam)) / (2 * h)
    exact = directional_derivative(u, v, nl, lam)
    scale = max(abs(exact), math.sqrt(h1_norm_sq(u) * h1_norm_sq(v)))
    assert abs(fd - exact) <= 1e-6 * scale


def test_gradient_field_inner_product(g, asym, rng):
    u = random_field(g, rng)
    grad = gradient_field(u, asym, LAM)
    for _ in range(20):
        v = random_field(g, rng)
        pairing = float(g.volume_weights @ (grad.values * v.values))
        exact = directional_derivative(u, v, asym, LAM)
        assert pairing == pytest.approx(exact, rel=1e-8, abs=1e-8 * abs(exact) + 1e-12)


def test_gradient_vector_is_nodal_derivative(g, asym, rng):
    u = random_field(g, rng)
    vec = energy_gradient_vector(u, asym, LAM)
    for i in (1, 200, 900):
        e = np.zeros(g.N)
        e[i] = 1.0
        h = 1e-3
        fd = (functional(u + e * h, asym, LAM) - functional(u - e * h, asym, LAM)) / (2 * h)
        assert vec[i] == pytest.approx(fd, rel=1e-6, abs=1e-10)


def test_projected_bump_is_on_nehari_set(g, power4):
    u = g.sample(lambda r: np.exp(-r**2))
    t = nehari_project(u, power4, 0.0)
    assert abs(gamma(u * t, power4, 0.0)) <= 1e-9 * h1_norm_sq(u * t)


def nehari_members(g, nl, lam, rng, count):
    out = []
    while len(out) < count:
        raw = random_field(g, rng, signed=False)
        try:
            out.append(raw * nehari_project(raw, nl, lam))
        except NoProjection:
            continue
    return out


def test_fiber_scan_pattern(g, asym, rng):
    ts = np.linspace(0.25, 3.0, 12).tolist() + [1.0]
    for u in nehari_members(g, asym, LAM, rng, 5):
        u = -u if rng.random() < 0.5 else u
        rows = {row["t"]: row for row in fiber_scan(u, asym, LAM, ts)}
        scale = h1_norm_sq(u)
        assert abs(rows[1.0]["gamma"]) <= 1e-9 * scale
        assert rows[0.5]["gamma"] > 0 > rows[2.0]["gamma"]
        best = max(rows.values(), key=lambda row: row["I"])
        assert best["t"] == 1.0
        assert fiber_argmax(u, asym, LAM, ts) == pytest.approx(1.0, abs=1e-6)


def test_energy_floor_on_nehari_set(g, asym, rng):
    for u in nehari_members(g, asym, LAM, rng, 5):
        gap = quarter_gap(u, asym)
        assert gap >= -1e-10
        assert functional(u, asym, LAM) > gap


def test_nehari_lower_bound(g, asym, rng):
    hyp = check_hypotheses(asym)
    L = nehari_lower_bound(hyp.c_epsilon, asym.q)
    assert L > 0
    for u in nehari_members(g, asym, LAM, rng, 5):
        assert lp_norm(u, asym.q) > L
        assert math.sqrt(h1_norm_sq(u)) > L


def test_component_fiber_matches_direct_evaluation(g, asym):
    u = separated(g, 2.0, 1.0)
    fiber = ComponentFiber.nodal(u, asym, LAM)
    up, um = split_signs(u)
    for s, t in ((1.0, 1.0), (0.5, 2.0), (3.0, 0.7)):
        w = up * s + um * t
        rep = energy(w, asym, LAM)
        assert fiber.energy([s, t]) == pytest.approx(rep.I, rel=1e-12)
        parts = fiber.partials([s, t])
        assert parts[0] == pytest.approx(rep.gamma_plus, rel=1e-12)
        assert parts[1] == pytest.approx(rep.gamma_minus, rel=1e-12)


def test_negative_lambda_rejected(g, asym):
    with pytest.raises(ValueError, match="lambda"):
        energy(g.zeros(), asym, -0.1)
