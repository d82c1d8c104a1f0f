import math

import numpy as np
import pytest
from scipy.integrate import quad

from nodal_nehari.model import (Nonlinearity, builtin_asymcubic, builtin_power, check_hypotheses,
                                cubic_test_instance, fit_c_epsilon, from_name,
                                nehari_lower_bound, small_ball_radius, sobolev_constant_bound)


def test_asymcubic_values():
    nl = builtin_asymcubic()
    assert nl.f(1.0) == pytest.approx(0.5, rel=1e-15)
    assert nl.f(10.0) / 1000.0 == pytest.approx(100.0 / 101.0, rel=1e-14)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0, 10.0])
def test_asymcubic_primitive_matches_quadrature(t):
    nl = builtin_asymcubic()
    ref, _ = quad(lambda s: float(nl.f(s)), 0.0, t, epsabs=1e-14, epsrel=1e-13)
    assert float(nl.F(t)) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_asymcubic_primitive_small_argument_is_accurate():
    # the series branch: F ~ t^6/6 for tiny t
    nl = builtin_asymcubic()
    for t in (1e-3, 0.1, 0.3):
        ref, _ = quad(lambda s: float(nl.f(s)), 0.0, t, epsabs=0, epsrel=1e-13)
        assert float(nl.F(t)) == pytest.approx(ref, rel=1e-11)
    # continuity across the series cut at t^2 = 0.1
    c = math.sqrt(0.1)
    assert float(nl.F(c * (1 - 1e-12))) == pytest.approx(float(nl.F(c * (1 + 1e-12))), rel=1e-10)


def test_power_values():
    nl = builtin_power(4.0)
    assert float(nl.f(2.0)) == pytest.approx(16.0)
    assert float(nl.F(2.0)) == pytest.approx(32.0 / 5.0)
    assert float(nl.f(-2.0)) == pytest.approx(-16.0)
    assert nl.name == "power:4"
    with pytest.raises(ValueError):
        builtin_power(5.5)


@pytest.mark.parametrize("nl", [builtin_asymcubic(), builtin_power(4.0), builtin_power(3.5)],
                         ids=lambda n: n.name)
def test_primitive_derivative_and_parity(nl):
    t = np.geomspace(0.1, 100.0, 50)
    eps = 1e-5 * t
    fd = (nl.F(t + eps) - nl.F(t - eps)) / (2 * eps)
    np.testing.assert_allclose(fd, nl.f(t), rtol=1e-8)
    np.testing.assert_array_equal(nl.f(-t), -nl.f(t))
    np.testing.assert_array_equal(nl.F(-t), nl.F(t))
    assert float(nl.F(0.0)) == 0.0


def test_from_name():
    assert from_name("asymcubic").name == "asymcubic"
    assert from_name("power:4.5").params == (4.5,)
    for bad in ("cubic", "power", "asymcubic:2", "power:x"):
        with pytest.raises(ValueError):
            from_name(bad)


def test_asymcubic_hypotheses_pass():
    rep = check_hypotheses(builtin_asymcubic())
    assert rep.passed()
    assert rep.max_f_over_t3 < 1.0
    t = 1e6
    closed = t**2 + t**2 / (1 + t**2) - 2 * math.log1p(t**2)
    # f t and 4F are both ~t^4 there, so the sampled difference keeps only ~5 digits
    assert rep.ft_4F_at_top == pytest.approx(closed, rel=1e-3)


def test_power_fails_only_f4():
    rep = check_hypotheses(builtin_power(4.0))
    assert rep.failures() == ["f4"]
    assert rep.limit_f_over_t3_at_inf > 1e5


def test_cubic_fails_f5_and_f6():
    rep = check_hypotheses(cubic_test_instance())
    assert not rep.f5 and not rep.f6
    assert rep.f5_violations > 0


def test_hypothesis_report_is_deterministic():
    a = check_hypotheses(builtin_asymcubic()).to_dict()
    b = check_hypotheses(builtin_asymcubic()).to_dict()
    assert a == b


def test_check_hypotheses_rejects_short_schedule():
    with pytest.raises(ValueError):
        check_hypotheses(builtin_asymcubic(), samples=np.linspace(1, 2, 10))


def test_fit_c_epsilon_zero_nonlinearity():
    zero = Nonlinearity.from_f("zero", lambda t: 0.0 * t)
    assert fit_c_epsilon(zero, 0.5, 5.0) == 0.0


def test_fit_c_epsilon_asymcubic_holds_on_fresh_samples():
    nl = builtin_asymcubic()
    c = fit_c_epsilon(nl, 0.5, 5.0)
    assert 0 < c < math.inf
    fresh = np.random.default_rng(3).uniform(0.0, 50.0, 20000)
    assert np.all(np.abs(nl.f(fresh)) <= 0.5 * fresh + c * fresh**4 * (1 + 1e-12))


def test_fit_c_epsilon_power():
    assert math.isfinite(fit_c_epsilon(builtin_power(4.5), 0.5, 5.5))
    # |t|^3 t outgrows eps t + C t^3 for q = 4.5
    assert fit_c_epsilon(builtin_power(4.0), 0.5, 4.5) == math.inf


def test_from_f_builds_primitive_by_quadrature():
    nl = Nonlinearity.from_f("sine", np.sin)
    t = np.array([0.3, 1.0, 2.5])
    np.testing.assert_allclose(nl.F(t), 1.0 - np.cos(t), rtol=1e-13)


def test_constants():
    # sharp Sobolev constant for |u|_6 <= S |grad u|_2
    assert sobolev_constant_bound(6.0) ** 2 == pytest.approx(1.0 / (3.0 * (math.pi / 2) ** (4 / 3)))
    assert sobolev_constant_bound(2.0) == pytest.approx(1.0)
    assert small_ball_radius(0.0, 5.0) == math.inf
    assert small_ball_radius(1.0 / 4.0, 5.0) == pytest.approx(1.0)
    c, q = 0.7, 5.0
    sq = sobolev_constant_bound(q) ** q
    # ||u||^2 / 2 < c S^q ||u||^q on the Nehari set forces ||u|| > l_norm
    l_norm = (2 * c * sq) ** (-1 / (q - 2))
    assert 0.5 * l_norm**2 == pytest.approx(c * sq * l_norm**q)
    l_q = (l_norm**2 / (2 * c)) ** (1 / q)
    assert nehari_lower_bound(c, q) == pytest.approx(min(l_norm, l_q))
