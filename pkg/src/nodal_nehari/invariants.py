"""Property suites run by ``nodal-nehari verify``.

Each suite returns a :class:`SuiteResult` with a measured margin.  Suites
marked ``structural=False`` only measure (refinement constants) and never
fail the command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .constraint import nehari_project, nodal_project
from .errors import NodalNehariError, NoProjection
from .energy import ComponentFiber, directional_derivative, energy, functional
from .grid import RadialField, RadialGrid, h1_norm_sq, make_grid, split_signs, volume_integral
from .model import (Nonlinearity, builtin_asymcubic, builtin_power, check_hypotheses,
                    fit_c_epsilon, small_ball_radius)
from .poisson import nonlocal_coupling, solve_poisson


@dataclass
class SuiteResult:
    name: str
    passed: bool
    margin: float
    detail: dict = field(default_factory=dict)
    structural: bool = True

    def line(self) -> str:
        tag = "PASS" if self.passed else ("FAIL" if self.structural else "DEGRADED")
        return f"{tag:8s} {self.name:24s} margin={self.margin:.6g}"


# ------------------------------------------------------------ test fields


def random_field(grid: RadialGrid, rng: np.random.Generator, signed: bool = True,
                 bumps: int = 3, scale: float = 1.0) -> RadialField:
    """Sum of Gaussian bumps (random centre, width, sign) vanishing at ``R_max``."""
    r = grid.nodes
    reach = min(6.0, 0.5 * grid.R_max)
    v = np.zeros(grid.N)
    for _ in range(bumps):
        c = rng.uniform(0.0, reach)
        w = rng.uniform(0.2, 1.5)
        a = rng.uniform(0.3, 2.0) * (rng.choice([-1.0, 1.0]) if signed else 1.0)
        v += a * np.exp(-0.5 * ((r - c) / w) ** 2)
    v *= 1.0 - r / grid.R_max
    return RadialField(grid, scale * v)


def sign_changing_field(grid: RadialGrid, rng: np.random.Generator) -> RadialField:
    """Positive core and negative shell with random radii and amplitudes."""
    r = grid.nodes
    a = rng.uniform(0.5, 2.0)
    b = a + rng.uniform(0.5, 2.0)
    core = rng.uniform(0.5, 3.0) * np.exp(-0.5 * (r / (0.5 * a)) ** 2)
    shell = rng.uniform(0.5, 3.0) * np.exp(-0.5 * ((r - b) / rng.uniform(0.3, 1.0)) ** 2)
    return RadialField(grid, (core - shell) * (1.0 - r / grid.R_max))


def ball_source(grid: RadialGrid) -> RadialField:
    """``u`` with ``u^2`` the indicator of the unit ball, sampled as dual-cell fractions."""
    r = grid.nodes
    return RadialField(grid, np.sqrt(np.clip((1.0 - r) / grid.h + 0.5, 0.0, 1.0)))


def ball_potential(r):
    r = np.asarray(r, dtype=float)
    return np.where(r <= 1.0, 0.5 - r**2 / 6.0, 1.0 / (3.0 * np.maximum(r, 1e-300)))


def gaussian_source(grid: RadialGrid) -> RadialField:
    """``u`` with ``u^2 = exp(-r^2)``."""
    return RadialField(grid, np.exp(-0.5 * grid.nodes**2))


def gaussian_potential(r):
    r = np.asarray(r, dtype=float)
    safe = np.maximum(r, 1e-300)
    return np.where(r > 0, math.sqrt(math.pi) * erf(safe) / (4.0 * safe), 0.5)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


# ------------------------------------------------------------------ suites


def poisson_closed_forms(grid: RadialGrid) -> SuiteResult:
    h2 = grid.h**2
    e_ball = float(np.max(np.abs(solve_poisson(ball_source(grid)).phi.values
                                 - ball_potential(grid.nodes))))
    e_gauss = float(np.max(np.abs(solve_poisson(gaussian_source(grid)).phi.values
                                  - gaussian_potential(grid.nodes))))
    worst = max(e_ball, e_gauss)
    return SuiteResult("poisson_closed_forms", worst <= 5.0 * h2, 5.0 * h2 - worst,
                       {"ball_over_h2": e_ball / h2, "gauss_over_h2": e_gauss / h2})


def phi_monotone(grid: RadialGrid, rng: np.random.Generator, count: int = 100) -> SuiteResult:
    worst = -math.inf
    violations = 0
    for _ in range(count):
        phi = solve_poisson(random_field(grid, rng)).phi.values
        rise = float(np.max(np.diff(phi))) / float(np.max(np.abs(phi)))
        worst = max(worst, rise)
        violations += int(rise > 1e-12)
    return SuiteResult("phi_monotone", violations == 0, 1e-12 - worst,
                       {"violations": violations, "max_relative_rise": worst})


def identities(grid: RadialGrid, nl: Nonlinearity, lam: float, rng: np.random.Generator,
               count: int = 10) -> SuiteResult:
    errs = {"phi_split": 0.0, "D_symmetry": 0.0, "I_split": 0.0, "gamma_split": 0.0,
            "derivative_split": 0.0, "D_quartic": 0.0}
    for _ in range(count):
        u = random_field(grid, rng)
        v = random_field(grid, rng)
        up, um = split_signs(u)
        phi = solve_poisson(u).phi.values
        parts = solve_poisson(up).phi.values + solve_poisson(um).phi.values
        errs["phi_split"] = max(errs["phi_split"],
                                float(np.max(np.abs(phi - parts)) / np.max(np.abs(phi))))
        errs["D_symmetry"] = max(errs["D_symmetry"],
                                 _rel(nonlocal_coupling(u, v), nonlocal_coupling(v, u)))
        rep = energy(u, nl, lam)
        split = (functional(up, nl, lam) + functional(um, nl, lam)
                 + 0.5 * lam * rep.cross + rep.straddle)
        errs["I_split"] = max(errs["I_split"], _rel(rep.I, split))
        errs["gamma_split"] = max(errs["gamma_split"],
                                  _rel(rep.gamma, rep.gamma_plus + rep.gamma_minus))
        # I'(a u+ + b u-)[a u+] = I'(a u+)[a u+] + a^2 b^2 lam D(u+, u-) + a b straddle
        a, b = rng.uniform(0.3, 3.0, size=2)
        lhs = directional_derivative(up * a + um * b, up * a, nl, lam)
        rhs = (directional_derivative(up * a, up * a, nl, lam)
               + (a * b) ** 2 * lam * rep.cross + a * b * rep.straddle)
        errs["derivative_split"] = max(errs["derivative_split"], float(_rel(lhs, rhs)))
        t = rng.uniform(0.3, 3.0)
        errs["D_quartic"] = max(errs["D_quartic"],
                                _rel(nonlocal_coupling(u * t, u * t),
                                     t**4 * nonlocal_coupling(u, u)))
    worst = max(errs.values())
    return SuiteResult("identities", worst <= 1e-10, 1e-10 - worst, errs)


def gradient_check(grid: RadialGrid, nl: Nonlinearity, lam: float, rng: np.random.Generator,
                   count: int = 20, eps: float = 1e-5) -> SuiteResult:
    worst = 0.0
    for _ in range(count):
        u = random_field(grid, rng)
        v = random_field(grid, rng)
        fd = (functional(u + v * eps, nl, lam) - functional(u - v * eps, nl, lam)) / (2 * eps)
        exact = directional_derivative(u, v, nl, lam)
        scale = max(abs(exact), math.sqrt(h1_norm_sq(u) * h1_norm_sq(v)))
        worst = max(worst, abs(fd - exact) / scale)
    return SuiteResult("gradient_check", worst <= 1e-6, 1e-6 - worst, {"max_rel_error": worst})


FIBER_T = (0.5, 0.9, 1.1, 2.0)


def nehari_fiber(grid: RadialGrid, nl: Nonlinearity, lam: float, rng: np.random.Generator,
                 count: int = 10) -> SuiteResult:
    """Strict maximum at ``t = 1`` and the sign of ``gamma(tu)`` for Nehari members."""
    margin = math.inf
    done = skipped = 0
    while done < count:
        raw = random_field(grid, rng, signed=False)
        try:
            u = raw * nehari_project(raw, nl, lam)
        except NoProjection:
            # not every random field has a ray through the Nehari set
            skipped += 1
            if skipped > 20 * count:
                raise
            continue
        fiber = ComponentFiber.from_fields([u], nl, lam)
        I1 = fiber.energy([1.0])
        for t in FIBER_T:
            drop = (I1 - fiber.energy([t])) / abs(I1)
            g = fiber.partials([t])[0] / t
            sign = (g if t < 1 else -g) / fiber.quad[0, 0]
            margin = min(margin, drop, sign)
        done += 1
    return SuiteResult("nehari_fiber", margin >= 1e-12, margin,
                       {"members": count, "skipped": skipped})


def nodal_fiber(grid: RadialGrid, nl: Nonlinearity, lam: float, rng: np.random.Generator,
                count: int = 5) -> SuiteResult:
    """Strict maximum at ``(1, 1)`` and the signs of ``gamma_pm`` along both axes."""
    margin = math.inf
    done = skipped = 0
    while done < count:
        try:
            d = nodal_project(sign_changing_field(grid, rng), nl, lam)
        except NodalNehariError:
            skipped += 1
            if skipped > 20 * count:
                raise
            continue
        done += 1
        fiber = ComponentFiber.from_fields([d.u_plus, d.u_minus], nl, lam)
        I1 = fiber.energy([1.0, 1.0])
        pts = (0.5, 0.9, 1.0, 1.1, 2.0)
        for s in pts:
            for t in pts:
                if s == 1.0 and t == 1.0:
                    continue
                margin = min(margin, (I1 - fiber.energy([s, t])) / abs(I1))
        for t in FIBER_T:
            gp = fiber.partials([t, 1.0])[0] / t / fiber.quad[0, 0]
            gm = fiber.partials([1.0, t])[1] / t / fiber.quad[1, 1]
            margin = min(margin, gp if t < 1 else -gp, gm if t < 1 else -gm)
    return SuiteResult("nodal_fiber", margin >= 1e-12, margin,
                       {"members": count, "skipped": skipped})


def small_ball(grid: RadialGrid, nl: Nonlinearity, lam: float, rng: np.random.Generator,
               count: int = 50, eps: float = 0.4) -> SuiteResult:
    """``gamma_pm(w) >= ||w_pm||^2 / 4`` for ``||w|| <= delta``."""
    q = nl.q
    c_eps = fit_c_epsilon(nl, eps, q)
    delta = small_ball_radius(c_eps, q)
    margin = math.inf
    violations = 0
    for _ in range(count):
        w = random_field(grid, rng)
        w = w * (delta * rng.uniform(0.05, 1.0) / math.sqrt(h1_norm_sq(w)))
        wp, wm = split_signs(w)
        rep = energy(w, nl, lam)
        for g, part in ((rep.gamma_plus, wp), (rep.gamma_minus, wm)):
            n2 = h1_norm_sq(part)
            if n2 == 0:
                continue
            m = (g - 0.25 * n2) / n2
            margin = min(margin, m)
            violations += int(m < 0)
    return SuiteResult("small_ball", violations == 0, margin,
                       {"delta": delta, "c_eps": c_eps, "violations": violations})


def hypotheses() -> SuiteResult:
    """The asymptotically cubic builtin passes (f1)-(f6); power(4) fails only (f4)."""
    a = check_hypotheses(builtin_asymcubic())
    p = check_hypotheses(builtin_power(4.0))
    ok = a.passed() and p.failures() == ["f4"]
    return SuiteResult("hypotheses", ok, 0.0 if ok else -1.0,
                       {"asymcubic": a.failures(), "power4": p.failures()})


def refinement(grid: RadialGrid) -> SuiteResult:
    """Observed order of the Poisson error and of the Gaussian self-coupling under N -> 2N."""
    grids = [grid, make_grid(grid.R_max, 2 * (grid.N - 1) + 1),
             make_grid(grid.R_max, 4 * (grid.N - 1) + 1)]
    errs = []
    Ds = []
    for g in grids:
        u = gaussian_source(g)
        errs.append(float(np.max(np.abs(solve_poisson(u).phi.values
                                        - gaussian_potential(g.nodes)))))
        Ds.append(volume_integral(solve_poisson(u).phi * (u * u)))
    order = math.log2(errs[0] / errs[1]) if errs[1] > 0 else math.inf
    d1, d2 = abs(Ds[0] - Ds[1]), abs(Ds[1] - Ds[2])
    order_D = math.log2(d1 / d2) if d2 > 0 else math.inf
    constants = [e / g.h**2 for e, g in zip(errs, grids)]
    ok = abs(order - 2.0) < 0.3 and abs(order_D - 2.0) < 0.3
    return SuiteResult("refinement", ok, min(order, order_D) - 1.7,
                       {"poisson_order": order, "coupling_order": order_D,
                        "h2_constants": constants}, structural=False)


def run_all(grid: RadialGrid, nl: Nonlinearity, lam: float, seed: int = 0) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    return [
        poisson_closed_forms(grid),
        phi_monotone(grid, rng),
        identities(grid, nl, lam, rng),
        gradient_check(grid, nl, lam, rng),
        nehari_fiber(grid, nl, lam, rng),
        nodal_fiber(grid, nl, lam, rng),
        small_ball(grid, nl, lam, rng),
        hypotheses(),
        refinement(grid),
    ]
