import dataclasses
import json

import numpy as np
import pytest

from nodal_nehari.constraint import decomposition_of
from nodal_nehari.errors import CertificationFailed, MaxIterExceeded
from nodal_nehari.grid import RadialField, make_grid
from nodal_nehari.solver import (certify, count_sign_changes, decoupled_two_bump,
                                 fiber_maximality, minimize_on_M, nodal_domains,
                                 three_component_check)


def test_sign_changes_simple():
    g = make_grid(2.0, 201)
    assert count_sign_changes(g.sample(lambda r: np.exp(-r))) == 0
    assert count_sign_changes(g.sample(lambda r: 1.0 - r)) == 1
    assert count_sign_changes(g.sample(lambda r: np.cos(3 * np.pi * r / 2))) == 3
    assert count_sign_changes(g.zeros()) == 0


def test_sign_changes_bridge_zero_gaps_and_ignore_roundoff():
    g = make_grid(5.0, 16)
    v = np.array([1, 1, 0, 0, 0, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0, 0], dtype=float)
    assert count_sign_changes(RadialField(g, v)) == 1
    v[10] = 1e-12
    assert count_sign_changes(RadialField(g, v)) == 1
    v[10] = 1e-3
    assert count_sign_changes(RadialField(g, v)) == 2


def test_nodal_domains_partition():
    g = make_grid(2.0, 201)
    u = g.sample(lambda r: np.cos(3 * np.pi * r / 2))
    pieces = nodal_domains(u)
    assert len(pieces) == 4
    np.testing.assert_allclose(sum(p.values for p in pieces), u.values, atol=1e-8)


def test_seed_and_minimiser_change_sign_once(pipeline):
    assert count_sign_changes(pipeline.art.base_element.u) == 1
    assert count_sign_changes(pipeline.report.minimizer.u) == 1


def test_descent_history(pipeline):
    rep = pipeline.report
    energies = [row[1] for row in rep.history]
    assert rep.iterations == len(rep.history) - 1 > 0
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(energies, energies[1:]))
    assert energies[-1] == pytest.approx(rep.c_nodal, rel=1e-10)
    assert rep.history[0][1] == pytest.approx(pipeline.art.base_element.energy, rel=1e-12)


def test_converged_seed_returns_immediately(pipeline, asym):
    d = decomposition_of(pipeline.report.minimizer.u, asym, 0.1)
    again = minimize_on_M(d, asym, 0.1, tol=1e-7)
    assert again.iterations == 0 and again.converged
    assert again.c_nodal == pytest.approx(pipeline.report.c_nodal, rel=1e-14)


def test_seed_must_be_member(pipeline, asym):
    off = decomposition_of(pipeline.report.minimizer.u * 1.2, asym, 0.1)
    with pytest.raises(ValueError):
        minimize_on_M(off, asym, 0.1)


def test_max_iter_reports_partial_run(pipeline, asym):
    with pytest.raises(MaxIterExceeded) as info:
        minimize_on_M(pipeline.art.base_element, asym, 0.1, tol=1e-7, max_iter=2)
    rep = info.value.report
    assert not rep.converged and rep.iterations == 2
    assert rep.c_nodal <= pipeline.art.base_element.energy
    rep = minimize_on_M(pipeline.art.base_element, asym, 0.1, max_iter=2,
                        raise_on_max_iter=False)
    assert not rep.converged


def test_certificate_passes(pipeline, asym):
    cert = certify(pipeline.report, asym, 0.1)
    assert cert["passed"]
    assert set(cert["clauses"]) >= {"sign_changes", "converged", "in_M", "residual",
                                    "fiber_maximality", "lambda_ratio", "levels",
                                    "energy_floor", "lower_bound_L"}
    assert cert["details"]["fiber_maximality"]["margin"] > 0


def test_certificate_rejects_positive_field(pipeline, asym):
    u = pipeline.report.minimizer.u
    positive = RadialField(u.grid, np.abs(u.values))
    rep = dataclasses.replace(pipeline.report, minimizer=decomposition_of(positive, asym, 0.1))
    with pytest.raises(CertificationFailed) as info:
        certify(rep, asym, 0.1)
    assert info.value.clause == "sign_changes"


def test_fiber_maximality_of_minimiser(pipeline, asym):
    fm = fiber_maximality(pipeline.report.minimizer, asym, 0.1)
    assert fm["holds"] and fm["max_other"] < fm["I"]


def three_annuli(grid):
    r = grid.nodes
    spans = ((0.0, 1.5), (2.0, 3.0), (3.5, 4.5))
    out = []
    for k, (a, b) in enumerate(spans):
        if a == 0.0:
            bump = np.where(r < b, np.cos(0.5 * np.pi * r / b) ** 2, 0.0)
        else:
            bump = np.where((r > a) & (r < b), np.sin(np.pi * (r - a) / (b - a)) ** 2, 0.0)
        out.append(RadialField(grid, (-1.0) ** k * bump))
    return out


def test_three_component_exclusion(asym):
    g = make_grid(30.0, 2048)
    res = three_component_check(three_annuli(g), asym, 0.1)
    assert max(abs(p) for p in res["partials"]) <= 1e-9 * res["I"]
    assert res["n_lower"] > 0
    assert res["exclusion"]["lower"]
    assert res["exclusion"]["I_pair"] < res["exclusion"]["I_three"]


def test_three_component_needs_three(asym):
    g = make_grid(30.0, 256)
    with pytest.raises(ValueError):
        three_component_check(three_annuli(g)[:2], asym, 0.1)


def test_decoupled_oracle_is_consistent(power4):
    g = make_grid(20.0, 1024)
    res = decoupled_two_bump(power4, g, tol=1e-8)
    assert res["c_nodal"] == pytest.approx(res["c_ball"] + res["c_shell"])
    assert res["c_ball"] > 0 and res["c_shell"] > 0
    k = res["k"]
    assert 15 <= k < g.N - 16
    assert res["rho"] == g.nodes[k]


def test_report_is_json_ready(pipeline):
    d = pipeline.report.to_dict()
    text = json.dumps(d)
    assert json.loads(text)["sign_changes"] == 1
