"""Nonlinearities ``f`` with primitive ``F`` and sampled checks of (f1)-(f6).

Hypotheses are verified by sampling ``t`` log-uniformly over
``[1e-6, 1e6]``: a user-supplied nonlinearity may only offer point
evaluation, so nothing here is symbolic.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

Array = np.ndarray

# Gauss-Legendre rule on (0, 1) for primitives of user-supplied f.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class Nonlinearity:
    """The pair ``(f, F)`` plus growth metadata."""

    id: str
    eval_f: Callable[[Array], Array] = field(repr=False, compare=False)
    eval_F: Callable[[Array], Array] = field(repr=False, compare=False)
    q: float = 5.0
    asymptotically_cubic: bool = True
    params: tuple = ()

    def f(self, t):
        return self.eval_f(np.asarray(t, dtype=float))

    def F(self, t):
        return self.eval_F(np.asarray(t, dtype=float))

    @property
    def name(self) -> str:
        if not self.params:
            return self.id
        return self.id + ":" + ",".join(f"{p:g}" for p in self.params)

    @classmethod
    def from_f(cls, name: str, f: Callable[[Array], Array], q: float = 5.0,
               asymptotically_cubic: bool = False) -> "Nonlinearity":
        """Wrap a point-evaluable ``f``; ``F`` comes from 64-point Gauss-Legendre."""

        def F(t):
            t = np.asarray(t, dtype=float)
            return t * (f(np.multiply.outer(t, _GL_X)) @ _GL_W)

        return cls(name, f, F, q=q, asymptotically_cubic=asymptotically_cubic)


def _asym_f(t):
    t2 = t * t
    return t2 * t2 * t / (1.0 + t2)


_SERIES_CUT = 0.1
# alternating series coefficients (-1)^(k+1)/k for x^k, k = 3..18
_SERIES = np.array([(-1.0) ** (k + 1) / k for k in range(18, 2, -1)])


def _asym_F(t):
    # F = (x^2/2 - x + log(1+x))/2 with x = t^2; the closed form cancels
    # for small x, where the alternating series is used instead.
    t = np.asarray(t, dtype=float)
    x = np.atleast_1d(t * t)
    small = x < _SERIES_CUT
    xl = np.where(small, 1.0, x)
    out = 0.5 * (0.5 * xl * xl - xl + np.log1p(xl))
    if np.any(small):
        xs = x[small]
        acc = np.zeros_like(xs)
        for c in _SERIES:
            acc = acc * xs + c
        out[small] = 0.5 * acc * xs**3
    return out.reshape(t.shape)


def builtin_asymcubic() -> Nonlinearity:
    """``f(t) = t^5/(1+t^2)``: asymptotically cubic, ``f(t)/t^3 < 1``."""
    return Nonlinearity("asymcubic", _asym_f, _asym_F, q=5.0, asymptotically_cubic=True)


def builtin_power(p: float) -> Nonlinearity:
    """``f(t) = |t|^{p-1} t`` for ``3 < p < 5`` (supercubic, violates (f4))."""
    if not 3.0 < p < 5.0:
        raise ValueError(f"power exponent must lie in (3, 5), got {p}")

    def f(t):
        return np.abs(t) ** (p - 1.0) * t

    def F(t):
        return np.abs(t) ** (p + 1.0) / (p + 1.0)

    q = 0.5 * (p + 1.0 + 6.0) if p + 1.0 > 5.0 else 5.0
    return Nonlinearity("power", f, F, q=q, asymptotically_cubic=False, params=(float(p),))


def cubic_test_instance() -> Nonlinearity:
    """``f(t) = t^3`` exactly: the borderline case that (f4)-(f6) exclude."""
    return Nonlinearity("cubic", lambda t: t**3, lambda t: t**4 / 4.0, q=5.0,
                        asymptotically_cubic=False)


def from_name(spec: str) -> Nonlinearity:
    """Parse ``asymcubic`` or ``power:<p>``."""
    name, _, arg = spec.partition(":")
    if name == "asymcubic" and not arg:
        return builtin_asymcubic()
    if name == "power" and arg:
        return builtin_power(float(arg))
    raise ValueError(f"unknown nonlinearity {spec!r}; expected 'asymcubic' or 'power:<p>'")


def default_samples(n: int = 2001) -> Array:
    return np.geomspace(1e-6, 1e6, n)


@dataclass(frozen=True)
class HypothesisReport:
    """Pass flags for (f1)-(f6) with the witnesses that decided them."""

    name: str
    f1: bool
    f2: bool
    f3: bool
    f4: bool
    f5: bool
    f6: bool
    ft_4F_monotone: bool
    ft_4F_nonnegative: bool
    limit_f_over_t_at_0: float
    limit_f_over_t3_at_inf: float
    max_f_over_t3: float
    f5_violations: int
    ft_4F_at_top: float
    epsilon: float
    c_epsilon: float
    q: float

    def passed(self, *names: str) -> bool:
        names = names or ("f1", "f2", "f3", "f4", "f5", "f6")
        return all(getattr(self, n) for n in names)

    def failures(self) -> list[str]:
        return [n for n in ("f1", "f2", "f3", "f4", "f5", "f6") if not getattr(self, n)]

    def to_dict(self) -> dict:
        return asdict(self)


def check_hypotheses(nl: Nonlinearity, samples: Array | None = None,
                     epsilon: float = 0.5) -> HypothesisReport:
    """Decide (f1)-(f6) on a log-uniform sample schedule.

    The limits in (f3), (f4) and (f6) are read off the ends of the
    schedule, so the verdicts are sampling heuristics rather than proofs.
    """
    t = default_samples() if samples is None else np.sort(np.asarray(samples, dtype=float))
    if t.size < 1000 or t[0] > 1e-6 * (1 + 1e-9) or t[-1] < 1e6 * (1 - 1e-9):
        raise ValueError("samples must cover [1e-6, 1e6] with at least 1000 points")
    with np.errstate(all="ignore"):
        ft = nl.f(t)
        fneg = nl.f(-t)
        Ft = nl.F(t)
    f1 = bool(np.all(np.isfinite(ft)) and np.all(np.isfinite(fneg)) and np.all(np.isfinite(Ft))
              and abs(float(nl.f(0.0))) == 0.0)
    f2 = bool(np.all(np.abs(ft + fneg) <= 1e-12 * np.maximum(np.abs(ft), 1e-300)))

    ratio0 = np.abs(ft / t)
    k10 = int(np.searchsorted(t, 10 * t[0]))
    f3 = bool(ratio0[0] <= 1e-3 and ratio0[0] <= ratio0[k10])

    ratio3 = ft / t**3
    f4 = bool(np.all(ratio3 < 1.0) and abs(ratio3[-1] - 1.0) <= 1e-3)

    d = np.diff(ratio3)
    violations = int(np.sum(d <= 0.0))
    f5 = violations == 0

    g = ft * t - 4.0 * Ft
    gscale = np.maximum(np.abs(g), 1e-300)
    monotone = bool(np.all(np.diff(g) >= -1e-12 * gscale[1:]))
    nonneg = bool(np.all(g >= -1e-12))
    k_dec = int(np.searchsorted(t, t[-1] / 10))
    f6 = bool(monotone and nonneg and g[-1] >= 1e3 and g[-1] > g[k_dec])

    c_eps = fit_c_epsilon(nl, epsilon, nl.q if 4 < nl.q < 6 else 5.0, t)
    return HypothesisReport(
        name=nl.name, f1=f1, f2=f2, f3=f3, f4=f4, f5=f5, f6=f6,
        ft_4F_monotone=monotone, ft_4F_nonnegative=nonneg,
        limit_f_over_t_at_0=float(ratio0[0]), limit_f_over_t3_at_inf=float(ratio3[-1]),
        max_f_over_t3=float(np.max(ratio3)), f5_violations=violations,
        ft_4F_at_top=float(g[-1]), epsilon=float(epsilon), c_epsilon=float(c_eps),
        q=float(nl.q),
    )


def fit_c_epsilon(nl: Nonlinearity, eps: float, q: float, samples: Array | None = None) -> float:
    """Smallest sampled ``C`` with ``|f(t)| <= eps |t| + C |t|^{q-1}``.

    Returns ``inf`` when the supremum is still growing at the top of the
    schedule, i.e. ``f`` grows faster than ``|t|^{q-1}``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 4.0 < q < 6.0:
        raise ValueError(f"q must lie in (4, 6), got {q}")
    t = default_samples() if samples is None else np.sort(np.asarray(samples, dtype=float))
    with np.errstate(all="ignore"):
        excess = np.maximum(np.maximum(np.abs(nl.f(t)), np.abs(nl.f(-t))) - eps * t, 0.0)
    vals = excess / t ** (q - 1.0)
    if not np.all(np.isfinite(vals)):
        return math.inf
    k_dec = int(np.searchsorted(t, t[-1] / 10))
    if vals[-1] > vals[k_dec] * (1.0 + 1e-6) and vals[-1] >= vals.max():
        return math.inf
    k = int(np.argmax(vals))
    best = float(vals[k])
    if best > 0 and 0 < k < t.size - 1:
        # the sampled maximum sits between schedule points; polish it
        def neg(x):
            fx = max(abs(float(nl.f(x))), abs(float(nl.f(-x))))
            return -max(fx - eps * x, 0.0) / x ** (q - 1.0)

        res = minimize_scalar(neg, bounds=(t[k - 1], t[k + 1]), method="bounded",
                              options={"xatol": 1e-12 * t[k]})
        best = max(best, -float(res.fun))
    return best


def sobolev_constant_bound(q: float) -> float:
    """Upper bound for ``sup |u|_q / ||u||`` on ``H^1(R^3)``, ``2 <= q <= 6``.

    Sharp Aubin-Talenti constant for ``|u|_6 <= K |grad u|_2`` combined
    with Hoelder interpolation between ``L^2`` and ``L^6``.
    """
    if not 2.0 <= q <= 6.0:
        raise ValueError("q must lie in [2, 6]")
    k6 = (3.0 * (math.pi / 2.0) ** (4.0 / 3.0)) ** -0.5
    theta = 0.5 * (6.0 / q - 1.0)
    return k6 ** (1.0 - theta)


def small_ball_radius(c_eps: float, q: float) -> float:
    """``delta = (4 C_eps)^{-1/(q-2)}``: below it ``gamma_pm(w) >= ||w_pm||^2/4``."""
    if c_eps <= 0:
        return math.inf
    return (4.0 * c_eps) ** (-1.0 / (q - 2.0))


def nehari_lower_bound(c_half: float, q: float) -> float:
    """Constant ``L`` with ``L < |u|_q`` and ``L < ||u||`` on the Nehari set.

    From ``||u||^2/2 < C_{1/2} |u|_q^q <= C_{1/2} S_q^q ||u||^q``.
    """
    s = sobolev_constant_bound(q)
    l_norm = (2.0 * c_half * s**q) ** (-1.0 / (q - 2.0))
    l_q = (l_norm**2 / (2.0 * c_half)) ** (1.0 / q)
    return min(l_norm, l_q)
