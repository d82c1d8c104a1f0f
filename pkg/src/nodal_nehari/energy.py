"""The energy ``I``, its derivative, and the constraint maps gamma, gamma_pm.

    I(u) = 1/2 ||u||^2 + lambda/4 int phi_u u^2 - int F(u)

Everything is evaluated with the discrete operators of :mod:`grid` and
:mod:`poisson`, and ``directional_derivative`` is the exact derivative of
the discrete ``I``.  The constraint maps are ``gamma(u) = I'(u)[u]`` and
``gamma_pm(u) = I'(u)[u_pm]``.  At the discrete level a cell whose two ends
have opposite signs couples ``u_plus`` and ``u_minus`` through the gradient
term; that (non-negative) contribution is reported as ``straddle`` so that
``gamma = gamma_plus + gamma_minus`` holds exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import (RadialField, dirichlet_form, h1_norm_sq, split_signs, stiffness_apply,
                   volume_integral)
from .model import Nonlinearity
from .poisson import PoissonSolution, solve_poisson


@dataclass(frozen=True)
class EnergyReport:
    norm_sq: float
    nonlocal_: float
    potential: float
    I: float
    gamma: float
    gamma_plus: float
    gamma_minus: float
    lam: float
    cross: float = 0.0
    straddle: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["nonlocal"] = d.pop("nonlocal_")
        d["lambda"] = d.pop("lam")
        return d


def _check_lambda(lam: float) -> None:
    if not lam >= 0:
        raise ValueError(f"lambda must be non-negative, got {lam!r}")


def _self_terms(u: RadialField, nl: Nonlinearity, lam: float, sol: PoissonSolution | None = None):
    """(norm_sq, D(u,u), int F(u), int f(u) u, phi)"""
    sol = solve_poisson(u) if sol is None else sol
    W = u.grid.volume_weights
    v = u.values
    norm = h1_norm_sq(u)
    D = float(W @ (sol.phi.values * v * v))
    pot = float(W @ nl.F(v))
    fu = float(W @ (nl.f(v) * v))
    return norm, D, pot, fu, sol


def functional(u: RadialField, nl: Nonlinearity, lam: float) -> float:
    """``I(u)`` alone."""
    _check_lambda(lam)
    norm, D, pot, _, _ = _self_terms(u, nl, lam)
    return 0.5 * norm + 0.25 * lam * D - pot


def gamma(u: RadialField, nl: Nonlinearity, lam: float) -> float:
    """``I'(u)[u]``."""
    _check_lambda(lam)
    norm, D, _, fu, _ = _self_terms(u, nl, lam)
    return norm + lam * D - fu


def energy(u: RadialField, nl: Nonlinearity, lam: float) -> EnergyReport:
    """Full report; gamma_pm via the decomposition through ``u_plus``, ``u_minus``."""
    _check_lambda(lam)
    norm, D, pot, fu, sol = _self_terms(u, nl, lam)
    up, um = split_signs(u)
    np_, Dpp, _, fpp, sol_p = _self_terms(up, nl, lam)
    nm_, Dmm, _, fmm, _ = _self_terms(um, nl, lam)
    cross = volume_integral(sol_p.phi * (um * um))
    straddle = dirichlet_form(up, um)
    g_plus = (np_ + lam * Dpp - fpp) + lam * cross + straddle
    g_minus = (nm_ + lam * Dmm - fmm) + lam * cross + straddle
    return EnergyReport(
        norm_sq=norm, nonlocal_=D, potential=pot,
        I=0.5 * norm + 0.25 * lam * D - pot,
        gamma=norm + lam * D - fu,
        gamma_plus=g_plus, gamma_minus=g_minus, lam=lam,
        cross=cross, straddle=straddle,
    )


def directional_derivative(u: RadialField, v: RadialField, nl: Nonlinearity, lam: float,
                           sol: PoissonSolution | None = None) -> float:
    """``I'(u)[v] = int (grad u.grad v + u v) + lambda int phi_u u v - int f(u) v``."""
    _check_lambda(lam)
    sol = solve_poisson(u) if sol is None else sol
    W = u.grid.volume_weights
    uu, vv = u.values, v.values
    return (dirichlet_form(u, v)
            + float(W @ ((uu + lam * sol.phi.values * uu - nl.f(uu)) * vv)))


def energy_gradient_vector(u: RadialField, nl: Nonlinearity, lam: float,
                           sol: PoissonSolution | None = None) -> np.ndarray:
    """Partial derivatives ``dI/du_i`` of the discrete energy (outer node pinned)."""
    sol = solve_poisson(u) if sol is None else sol
    W = u.grid.volume_weights
    uu = u.values
    out = stiffness_apply(u) + W * (uu + lam * sol.phi.values * uu - nl.f(uu))
    out[0] = 0.0
    out[-1] = 0.0
    return out


def gradient_field(u: RadialField, nl: Nonlinearity, lam: float,
                   sol: PoissonSolution | None = None) -> RadialField:
    """L^2 Riesz representative ``-Delta_h u + u + lambda phi_u u - f(u)``.

    ``<g, v>`` reproduces ``I'(u)[v]`` exactly for every ``v`` vanishing at
    ``R_max``; the origin sample is an even extrapolation for display.
    """
    _check_lambda(lam)
    W = u.grid.volume_weights
    vec = energy_gradient_vector(u, nl, lam, sol)
    g = np.zeros(u.grid.N)
    g[1:-1] = vec[1:-1] / W[1:-1]
    g[0] = (4.0 * g[1] - g[2]) / 3.0
    return RadialField(u.grid, g)


def residual_norm(u: RadialField, nl: Nonlinearity, lam: float,
                  sol: PoissonSolution | None = None) -> float:
    """Weighted-l2 norm of :func:`gradient_field` (stand-in for the dual norm)."""
    g = gradient_field(u, nl, lam, sol)
    return float(np.sqrt(u.grid.volume_weights @ (g.values**2)))


class ComponentFiber:
    """The map ``t -> I(sum_i t_i u_i)`` for components with disjoint node supports.

    Only Gram data enters: ``quad[i, j] = <u_i, u_j>_{H^1}`` (off-diagonal
    entries are the straddle terms) and ``coupling[i, j] = int phi_{u_i} u_j^2``.
    The nonlinear integrals are evaluated on each component's support.
    """

    def __init__(self, quad, coupling, samples: Sequence[tuple[np.ndarray, np.ndarray]],
                 nl: Nonlinearity, lam: float):
        _check_lambda(lam)
        self.quad = np.asarray(quad, dtype=float)
        self.coupling = np.asarray(coupling, dtype=float)
        self.samples = [(np.asarray(v, float), np.asarray(w, float)) for v, w in samples]
        self.nl = nl
        self.lam = float(lam)
        self.k = len(self.samples)
        self.evaluations = 0

    @classmethod
    def from_fields(cls, fields: Sequence[RadialField], nl: Nonlinearity, lam: float) -> "ComponentFiber":
        k = len(fields)
        quad = np.empty((k, k))
        coupling = np.empty((k, k))
        sols = [solve_poisson(f) for f in fields]
        W = fields[0].grid.volume_weights
        for i, fi in enumerate(fields):
            for j, fj in enumerate(fields):
                if j < i:
                    quad[i, j] = quad[j, i]
                    continue
                quad[i, j] = dirichlet_form(fi, fj) + float(W @ (fi.values * fj.values))
            for j, fj in enumerate(fields):
                coupling[i, j] = float(W @ (sols[i].phi.values * fj.values**2))
        coupling = 0.5 * (coupling + coupling.T)
        samples = []
        for f in fields:
            idx = np.nonzero(f.values * (W > 0))[0]
            samples.append((f.values[idx], W[idx]))
        return cls(quad, coupling, samples, nl, lam)

    @classmethod
    def nodal(cls, u: RadialField, nl: Nonlinearity, lam: float) -> "ComponentFiber":
        """Fiber ``(s, t) -> I(s u_plus + t u_minus)``."""
        return cls.from_fields(list(split_signs(u)), nl, lam)

    def _primitive(self, t):
        return np.array([w @ self.nl.F(t[i] * v) for i, (v, w) in enumerate(self.samples)])

    def _pairing(self, t):
        out = np.empty(self.k)
        for i, (v, w) in enumerate(self.samples):
            x = t[i] * v
            out[i] = w @ (self.nl.f(x) * x)
        return out

    def energy(self, t) -> float:
        t = np.asarray(t, dtype=float)
        t2 = t * t
        return float(0.5 * t @ self.quad @ t + 0.25 * self.lam * t2 @ self.coupling @ t2
                     - self._primitive(t).sum())

    def partials(self, t) -> np.ndarray:
        """Vector of ``I'(sum t_j u_j)[t_i u_i]``."""
        t = np.asarray(t, dtype=float)
        self.evaluations += 1
        t2 = t * t
        return t * (self.quad @ t) + self.lam * t2 * (self.coupling @ t2) - self._pairing(t)

    def gamma(self, t) -> float:
        return float(self.partials(t).sum())

    def scale_fiber(self, t_values) -> list[tuple[float, float, np.ndarray]]:
        """Rows ``(t, I(t u), partials(t u))`` along the ray through ``(1, ..., 1)``."""
        rows = []
        for s in t_values:
            tt = np.full(self.k, float(s))
            rows.append((float(s), self.energy(tt), self.partials(tt)))
        return rows


def fiber_scan(u: RadialField, nl: Nonlinearity, lam: float, t_values) -> list[dict]:
    """Tabulate ``t -> (I(tu), gamma(tu), gamma_plus(tu), gamma_minus(tu))``."""
    fiber = ComponentFiber.nodal(u, nl, lam)
    rows = []
    for t, I_t, parts in fiber.scale_fiber(t_values):
        rows.append({"t": t, "I": I_t, "gamma": float(parts.sum()),
                     "gamma_plus": float(parts[0]), "gamma_minus": float(parts[1])})
    return rows


def fiber_argmax(u: RadialField, nl: Nonlinearity, lam: float, t_values, tol: float = 1e-8) -> float:
    """Maximiser of ``t -> I(tu)``: coarse scan, then bounded scalar refinement."""
    fiber = ComponentFiber.nodal(u, nl, lam)
    t_values = np.asarray(sorted(t_values), dtype=float)
    vals = [fiber.energy(np.full(2, t)) for t in t_values]
    k = int(np.argmax(vals))
    a = t_values[max(k - 1, 0)]
    b = t_values[min(k + 1, len(t_values) - 1)]
    if b - a <= tol:
        return float(t_values[k])
    res = minimize_scalar(lambda t: -fiber.energy(np.full(2, t)), bounds=(a, b),
                          method="bounded", options={"xatol": tol})
    return float(res.x)


def quarter_gap(u: RadialField, nl: Nonlinearity) -> float:
    """``int [f(u) u / 4 - F(u)]``, the lower bound for ``I`` on the Nehari set."""
    W = u.grid.volume_weights
    v = u.values
    return float(W @ (0.25 * nl.f(v) * v - nl.F(v)))

