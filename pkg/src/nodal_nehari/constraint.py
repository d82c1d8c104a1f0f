"""Projections onto the Nehari set and the nodal Nehari set.

``nehari_project`` finds the scale ``t`` with ``gamma(tu) = 0``;
``nodal_project`` finds ``(alpha, beta)`` with
``gamma_pm(alpha u_plus + beta u_minus) = 0`` through a Poincare-Miranda
search (``miranda_solve``) on a box of fiber scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, fsolve

from .energy import ComponentFiber
from .errors import (BracketFailure, DegenerateSign, EdgeConditionViolated, NoConvergence,
                     NoProjection)
from .grid import RadialField, lp_norm, split_signs
from .model import Nonlinearity
from .poisson import solve_poisson

EDGE_SAMPLES = 17
NEWTON_SWITCH = 1e-3
MAX_EVALS = 10_000
DEFAULT_REL_TOL = 1e-9


@dataclass(frozen=True)
class MirandaBox:
    s_lo: float
    s_hi: float
    t_lo: float
    t_hi: float

    def __post_init__(self):
        if not (0 < self.s_lo < self.s_hi and 0 < self.t_lo < self.t_hi):
            raise ValueError(f"invalid box {self}: need 0 < lo < hi on both axes")

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.s_lo + self.s_hi), 0.5 * (self.t_lo + self.t_hi)

    @property
    def diameter(self) -> float:
        return math.hypot(self.s_hi - self.s_lo, self.t_hi - self.t_lo)

    def contains(self, s: float, t: float) -> bool:
        return self.s_lo <= s <= self.s_hi and self.t_lo <= t <= self.t_hi

    def quadrants(self) -> list["MirandaBox"]:
        sc, tc = self.center
        return [MirandaBox(self.s_lo, sc, self.t_lo, tc), MirandaBox(self.s_lo, sc, tc, self.t_hi),
                MirandaBox(sc, self.s_hi, self.t_lo, tc), MirandaBox(sc, self.s_hi, tc, self.t_hi)]

    def centred_half(self, s: float, t: float) -> "MirandaBox":
        """Half-size box around ``(s, t)``, shifted to stay inside ``self``."""
        hs = 0.25 * (self.s_hi - self.s_lo)
        ht = 0.25 * (self.t_hi - self.t_lo)
        s = min(max(s, self.s_lo + hs), self.s_hi - hs)
        t = min(max(t, self.t_lo + ht), self.t_hi - ht)
        return MirandaBox(s - hs, s + hs, t - ht, t + ht)

    def widened(self, factor: float) -> "MirandaBox":
        return MirandaBox(self.s_lo / factor, self.s_hi * factor, self.t_lo / factor, self.t_hi * factor)

    def key(self) -> tuple:
        return (self.s_lo, self.s_hi, self.t_lo, self.t_hi)


@dataclass
class MirandaResult:
    s: float
    t: float
    residual: float
    evaluations: int
    orientation: tuple[int, int] = (1, 1)
    trace: list = field(default_factory=list)


class _Counted:
    def __init__(self, fn, signs=(1, 1), budget=MAX_EVALS):
        self.fn = fn
        self.signs = np.asarray(signs, dtype=float)
        self.count = 0
        self.budget = budget

    def __call__(self, s, t):
        self.count += 1
        if self.count > self.budget:
            raise NoConvergence(f"Miranda search exceeded {self.budget} evaluations",
                                evaluations=self.count)
        return self.signs * np.asarray(self.fn(s, t), dtype=float)


def _edge_failure(phi, box: MirandaBox, n: int = EDGE_SAMPLES):
    """First failing ``(edge, sample, value)`` or ``None``."""
    ts = np.linspace(box.t_lo, box.t_hi, n)
    ss = np.linspace(box.s_lo, box.s_hi, n)
    for t in ts:
        v = phi(box.s_lo, t)[0]
        if not v > 0:
            return "s_lo", (box.s_lo, float(t)), float(v)
    for t in ts:
        v = phi(box.s_hi, t)[0]
        if not v < 0:
            return "s_hi", (box.s_hi, float(t)), float(v)
    for s in ss:
        v = phi(s, box.t_lo)[1]
        if not v > 0:
            return "t_lo", (float(s), box.t_lo), float(v)
    for s in ss:
        v = phi(s, box.t_hi)[1]
        if not v < 0:
            return "t_hi", (float(s), box.t_hi), float(v)
    return None


def check_edges(fn, box: MirandaBox, n: int = EDGE_SAMPLES):
    """Sampled Miranda edge conditions; returns the first failure or ``None``."""
    return _edge_failure(lambda s, t: np.asarray(fn(s, t), dtype=float), box, n)


def _fd_jacobian(phi, s, t, f0):
    hs = 1e-7 * max(abs(s), 1e-3)
    ht = 1e-7 * max(abs(t), 1e-3)
    J = np.empty((2, 2))
    J[:, 0] = (phi(s + hs, t) - phi(s - hs, t)) / (2 * hs)
    J[:, 1] = (phi(s, t + ht) - phi(s, t - ht)) / (2 * ht)
    return J


def _newton(phi, s, t, tol, bounds: MirandaBox, trace, max_steps=100):
    x = np.array([s, t], dtype=float)
    f = phi(*x)
    for _ in range(max_steps):
        res = float(np.max(np.abs(f)))
        trace.append({"stage": "newton", "s": float(x[0]), "t": float(x[1]), "residual": res})
        if res <= tol:
            return x, res
        J = _fd_jacobian(phi, x[0], x[1], f)
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        while step > 1e-10:
            y = x + step * dx
            y[0] = min(max(y[0], bounds.s_lo), bounds.s_hi)
            y[1] = min(max(y[1], bounds.t_lo), bounds.t_hi)
            fy = phi(*y)
            if np.max(np.abs(fy)) < res:
                break
            step *= 0.5
        else:
            break
        x, f = y, fy
    res = float(np.max(np.abs(f)))
    return x, res


def miranda_solve(fn: Callable[[float, float], Sequence[float]], box: MirandaBox, tol: float,
                  max_evals: int = MAX_EVALS) -> MirandaResult:
    """Zero of a 2D map with Miranda sign conditions on ``box``.

    Expected orientation: first component positive on the ``s_lo`` edge and
    negative on ``s_hi``; second positive on ``t_lo`` and negative on
    ``t_hi``.  Maps that satisfy the conditions only after negating one or
    both components are accepted and solved in that orientation.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    first_failure = None
    phi = None
    for signs in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        cand = _Counted(fn, signs, max_evals)
        failure = _edge_failure(cand, box)
        if failure is None:
            phi = cand
            break
        if first_failure is None:
            first_failure = failure
        max_evals -= cand.count
    if phi is None:
        edge, sample, value = first_failure
        raise EdgeConditionViolated(
            f"Miranda condition fails on edge {edge} at {sample} (value {value:.6g})",
            edge=edge, sample=sample, value=value)

    trace: list = []
    current = box
    level = 0
    while current.diameter >= NEWTON_SWITCH:
        sc, tc = current.center
        fc = phi(sc, tc)
        trace.append({"stage": "box", "level": level, "box": current.key(),
                      "residual": float(np.max(np.abs(fc)))})
        candidates = list(current.quadrants()) + [current.centred_half(sc, tc)]
        try:
            J = _fd_jacobian(phi, sc, tc, fc)
            sn, tn = np.array([sc, tc]) + np.linalg.solve(J, -fc)
            if np.isfinite(sn) and np.isfinite(tn):
                candidates.append(current.centred_half(float(sn), float(tn)))
        except np.linalg.LinAlgError:
            pass
        scored = []
        for cb in candidates:
            c = cb.center
            scored.append((float(np.max(np.abs(phi(*c)))), cb.key(), cb))
        scored.sort(key=lambda x: (x[0], x[1]))
        chosen = None
        for _, _, cb in scored:
            if _edge_failure(phi, cb) is None:
                chosen = cb
                break
        if chosen is None:
            trace.append({"stage": "no-subbox", "level": level})
            break
        current = chosen
        level += 1
    x, res = _newton(phi, *current.center, tol, box, trace)
    if res > tol or not box.contains(*x):
        raise NoConvergence(f"Miranda/Newton stalled at residual {res:.3e} > {tol:.3e}",
                            evaluations=phi.count, trace=trace)
    return MirandaResult(float(x[0]), float(x[1]), res, phi.count, tuple(signs), trace)


# ---------------------------------------------------------------- Nehari set


def nehari_existence(u: RadialField, nl: Nonlinearity, lam: float) -> float:
    """Asymptotic ``t^4`` slope ``lambda D(u,u) - |u|_4^4`` of ``gamma(tu)``."""
    sol = solve_poisson(u)
    W = u.grid.volume_weights
    return float(lam * (W @ (sol.phi.values * u.values**2)) - W @ u.values**4)


def nehari_project(u: RadialField, nl: Nonlinearity, lam: float, tol: float = DEFAULT_REL_TOL,
                   trace: list | None = None) -> float:
    """Scale ``t_star`` with ``|gamma(t_star u)| <= tol ||u||^2``."""
    if u.is_zero():
        raise NoProjection("cannot project the zero field")
    if nl.asymptotically_cubic:
        a_inf = nehari_existence(u, nl, lam)
        if a_inf >= 0:
            raise NoProjection(f"asymptotic slope a_inf = {a_inf:.6g} >= 0: the nonlocal term "
                               "dominates and gamma(tu) > 0 for all large t", a_inf=a_inf)
    fiber = ComponentFiber.from_fields([u], nl, lam)
    norm = fiber.quad[0, 0]

    def g(t):
        return float(fiber.partials([t])[0])

    scan = []
    lo = hi = 1.0
    g_lo = g_hi = g(1.0)
    scan.append((1.0, g_lo))
    while g_hi >= 0:
        hi *= 2.0
        if hi > 1e6:
            raise BracketFailure("gamma(tu) stays non-negative up to t = 1e6", scan=scan)
        g_hi = g(hi)
        scan.append((hi, g_hi))
        if g_hi >= 0:
            lo, g_lo = hi, g_hi
    while g_lo <= 0:
        lo *= 0.5
        if lo < 1e-6:
            raise BracketFailure("gamma(tu) stays non-positive down to t = 1e-6", scan=scan)
        g_lo = g(lo)
        scan.append((lo, g_lo))
        if g_lo <= 0:
            hi, g_hi = lo, g_lo
    t = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    # secant polish
    t_prev, g_prev = (lo, g_lo) if abs(lo - t) > abs(hi - t) else (hi, g_hi)
    gt = g(t)
    for _ in range(10):
        if abs(gt) <= 0.01 * tol * norm or gt == g_prev:
            break
        t_new = t - gt * (t - t_prev) / (gt - g_prev)
        if not lo <= t_new <= hi:
            break
        t_prev, g_prev, t = t, gt, t_new
        gt = g(t)
    if trace is not None:
        trace.extend(scan)
    if abs(gt) > tol * norm * t * t and abs(gt) > tol * norm:
        raise BracketFailure(f"projection residual {gt:.3e} above tolerance", scan=scan)
    return float(t)


# ------------------------------------------------------------ nodal Nehari set


@dataclass(frozen=True)
class NodalDecomposition:
    """A candidate element of the nodal Nehari set and its membership data.

    ``u_plus`` and ``u_minus`` normally share a grid, in which case
    ``u = u_plus + u_minus`` node-wise.  Two-scale elements (components on
    different grids) are also representable; their ``u`` is ``None``.
    """

    u_plus: RadialField
    u_minus: RadialField
    residual_gamma_plus: float
    residual_gamma_minus: float
    in_M: bool
    tol: float
    alpha: float = 1.0
    beta: float = 1.0
    energy: float = float("nan")
    roots: tuple = ()

    @property
    def u(self) -> RadialField | None:
        if self.u_plus.grid != self.u_minus.grid:
            return None
        return self.u_plus + self.u_minus

    @property
    def two_scale(self) -> bool:
        return self.u_plus.grid != self.u_minus.grid

    def to_dict(self) -> dict:
        return {"residual_gamma_plus": self.residual_gamma_plus,
                "residual_gamma_minus": self.residual_gamma_minus,
                "in_M": self.in_M, "tol": self.tol, "alpha": self.alpha, "beta": self.beta,
                "energy": self.energy, "roots": [list(r) for r in self.roots],
                "two_scale": self.two_scale}


def membership_scale(fiber: ComponentFiber, s: float, t: float) -> float:
    return s * s * fiber.quad[0, 0] + t * t * fiber.quad[1, 1]


def default_nodal_tol(fiber: ComponentFiber, s: float = 1.0, t: float = 1.0) -> float:
    """``1e-9 (||v_plus||^2 + ||v_minus||^2)`` for ``v = s u_plus + t u_minus``."""
    return DEFAULT_REL_TOL * membership_scale(fiber, s, t)


def _scalar_scale(fiber: ComponentFiber, i: int) -> float:
    """1D Nehari scale of component ``i`` alone (ignoring the others)."""
    def g(t):
        tt = np.zeros(fiber.k)
        tt[i] = t
        return float(fiber.partials(tt)[i])
    lo, hi = 1.0, 1.0
    for _ in range(60):
        if g(lo) > 0:
            break
        lo *= 0.5
    for _ in range(60):
        if g(hi) < 0:
            break
        hi *= 2.0
    if not (g(lo) > 0 > g(hi)):
        raise NoProjection(f"component {i} has no Nehari scale")
    return brentq(g, lo, hi, xtol=1e-14, rtol=1e-14)


def auto_box(fiber: ComponentFiber, max_widen: int = 6) -> MirandaBox:
    """Box around the decoupled 1D scales, widened until the edge conditions hold."""
    s1 = _scalar_scale(fiber, 0)
    t1 = _scalar_scale(fiber, 1)
    box = MirandaBox(0.5 * s1, 2.0 * s1, 0.5 * t1, 2.0 * t1)
    fn = lambda s, t: fiber.partials([s, t])
    for _ in range(max_widen):
        if _edge_failure(lambda s, t: np.asarray(fn(s, t)), box) is None:
            return box
        box = MirandaBox(box.s_lo, box.s_hi * 2.0, box.t_lo, box.t_hi * 2.0)
    return box


def _prescan_roots(fiber: ComponentFiber, box: MirandaBox, tol: float, n: int = 9) -> list:
    """Roots reached by Newton from every coarse cell where both components change sign."""
    ss = np.linspace(box.s_lo, box.s_hi, n)
    ts = np.linspace(box.t_lo, box.t_hi, n)
    vals = np.array([[fiber.partials([s, t]) for t in ts] for s in ss])
    phi = lambda s, t: fiber.partials([s, t])
    roots = []
    for i in range(n - 1):
        for j in range(n - 1):
            cell = vals[i:i + 2, j:j + 2]
            if np.ptp(np.sign(cell[..., 0])) > 0 and np.ptp(np.sign(cell[..., 1])) > 0:
                x, res = _newton(phi, 0.5 * (ss[i] + ss[i + 1]), 0.5 * (ts[j] + ts[j + 1]),
                                 tol, box, [])
                if res <= tol and not any(abs(x[0] - r[0]) + abs(x[1] - r[1]) < 1e-6 * (1 + abs(x[0]))
                                          for r in roots):
                    roots.append((float(x[0]), float(x[1])))
    return roots


def project_fiber(fiber: ComponentFiber, box: MirandaBox | None = None, tol: float | None = None,
                  prescan: bool = True, trace: list | None = None):
    """Miranda projection on a prepared 2-component fiber.

    Returns ``(alpha, beta, residuals, tol, roots)``.
    """
    if box is None:
        box = auto_box(fiber)
    fn = lambda s, t: fiber.partials([s, t])
    # the projected element is not known yet; aim below the smallest element in the box
    tol_abs = tol if tol is not None else 0.1 * default_nodal_tol(fiber, box.s_lo, box.t_lo)
    res = miranda_solve(fn, box, tol_abs)
    if trace is not None:
        trace.extend(res.trace)
    alpha, beta = res.s, res.t
    roots = [(alpha, beta)]
    if prescan:
        for r in _prescan_roots(fiber, box, tol_abs):
            if not any(abs(r[0] - q[0]) + abs(r[1] - q[1]) < 1e-6 * (1 + abs(r[0])) for q in roots):
                roots.append(r)
        if len(roots) > 1:
            energies = [fiber.energy(r) for r in roots]
            alpha, beta = roots[int(np.argmin(energies))]
    parts = fiber.partials([alpha, beta])
    tol_final = tol if tol is not None else default_nodal_tol(fiber, alpha, beta)
    return alpha, beta, parts, tol_final, tuple(roots)


def nodal_project(u: RadialField, nl: Nonlinearity, lam: float, box: MirandaBox | None = None,
                  tol: float | None = None, trace: list | None = None) -> NodalDecomposition:
    """Project a sign-changing field onto the nodal Nehari set along its fiber."""
    up, um = split_signs(u)
    if lp_norm(up, 4) == 0 or lp_norm(um, 4) == 0:
        raise DegenerateSign("field does not change sign; no nodal projection")
    fiber = ComponentFiber.from_fields([up, um], nl, lam)
    alpha, beta, parts, tol_final, roots = project_fiber(fiber, box, tol, trace=trace)
    in_M = bool(abs(parts[0]) <= tol_final and abs(parts[1]) <= tol_final)
    return NodalDecomposition(up * alpha, um * beta, float(parts[0]), float(parts[1]), in_M,
                              tol_final, float(alpha), float(beta),
                              float(fiber.energy([alpha, beta])), roots)


def decomposition_of(u: RadialField, nl: Nonlinearity, lam: float,
                     tol: float | None = None) -> NodalDecomposition:
    """Membership data for ``u`` as it stands (no projection)."""
    up, um = split_signs(u)
    fiber = ComponentFiber.from_fields([up, um], nl, lam)
    parts = fiber.partials([1.0, 1.0])
    tol = default_nodal_tol(fiber) if tol is None else tol
    nonzero = lp_norm(up, 4) > 0 and lp_norm(um, 4) > 0
    in_M = bool(nonzero and abs(parts[0]) <= tol and abs(parts[1]) <= tol)
    return NodalDecomposition(up, um, float(parts[0]), float(parts[1]), in_M, tol,
                              energy=float(fiber.energy([1.0, 1.0])))


def multi_project(fields: Sequence[RadialField], nl: Nonlinearity, lam: float,
                  tol: float | None = None) -> tuple[np.ndarray, ComponentFiber]:
    """Scales ``t`` with ``I'(sum t_j u_j)[t_i u_i] = 0`` for every component ``i``."""
    fiber = ComponentFiber.from_fields(list(fields), nl, lam)
    t0 = np.array([_scalar_scale(fiber, i) for i in range(fiber.k)])
    # solve in log-scales so the iterates stay positive
    sol, info, ier, msg = fsolve(lambda x: fiber.partials(np.exp(x)) / np.exp(2 * x),
                                 np.log(t0), full_output=True, xtol=1e-14)
    t = np.exp(sol)
    parts = fiber.partials(t)
    scale = float(np.sum(t * t * np.diag(fiber.quad)))
    tol = DEFAULT_REL_TOL * scale if tol is None else tol
    if ier != 1 and np.max(np.abs(parts)) > tol:
        raise NoConvergence(f"multi-component projection failed: {msg}")
    return t, fiber
