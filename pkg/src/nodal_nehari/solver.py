"""Least-energy nodal solution: projected descent on the nodal Nehari set.

The descent direction is the H^1 Riesz representative of ``-I'(u)``; after
each step the iterate is split by sign and projected back onto the nodal
set along its ``(s, t)`` fiber.  Steps are accepted by an Armijo test on the
projected energy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constraint import (MirandaBox, NodalDecomposition, decomposition_of, miranda_solve,
                         multi_project, nodal_project)
from .energy import ComponentFiber, energy, energy_gradient_vector, functional, quarter_gap
from .errors import (CertificationFailed, DegenerateSign, EdgeConditionViolated, MaxIterExceeded,
                     NoConvergence, NoProjection, ProjectionLost)
from .grid import MIN_NODES, RadialField, RadialGrid, h1_norm_sq, h1_riesz, lp_norm, make_grid
from .model import Nonlinearity, check_hypotheses, nehari_lower_bound
from .seed import (admissibility_ratio, appendix_seed, positive_ground_state, scaled_residual,
                   transfer)

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
AMPLITUDE_FLOOR = 1e-8
REPROJECTION_BOXES = ((0.5, 1.5), (0.25, 3.0), (0.125, 6.0), (0.1, 10.0))


@dataclass
class SolveReport:
    minimizer: NodalDecomposition
    c_nodal: float
    c_ground: float
    residual: float
    sign_changes: int
    iterations: int
    lambda_ratio: float
    converged: bool
    lam: float
    nodal_ratio: float = float("nan")
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "c_nodal": self.c_nodal, "c_ground": self.c_ground, "residual": self.residual,
            "sign_changes": self.sign_changes, "iterations": self.iterations,
            "lambda_ratio": self.lambda_ratio, "nodal_ratio": self.nodal_ratio,
            "converged": self.converged, "lambda": self.lam,
            "minimizer": self.minimizer.to_dict(),
        }


def count_sign_changes(u: RadialField, floor: float = AMPLITUDE_FLOOR) -> int:
    """Sign alternations after zeroing ``|u| < floor max|u|``.

    Zero plateaus between opposite signs count as one interface.
    """
    v = u.values
    amp = float(np.max(np.abs(v))) if v.size else 0.0
    if amp == 0:
        return 0
    s = np.sign(np.where(np.abs(v) < floor * amp, 0.0, v))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _reproject(trial: RadialField, nl, lam):
    """Projection with the widening box ladder; ``None`` when every box fails."""
    for lo, hi in REPROJECTION_BOXES:
        try:
            d = nodal_project(trial, nl, lam, box=MirandaBox(lo, hi, lo, hi))
        except (EdgeConditionViolated, NoConvergence, NoProjection):
            continue
        if d.in_M:
            return d
    return None


def minimize_on_M(seed: NodalDecomposition, nl: Nonlinearity, lam: float, tol: float = 1e-7,
                  max_iter: int = 500, c_ground: float = float("nan"),
                  lambda_ratio: float = float("nan"), raise_on_max_iter: bool = True) -> SolveReport:
    """Minimise ``I`` over the nodal Nehari set starting from ``seed``.

    Converged when ``|g|_2 / ||u|| <= tol`` for the gradient field ``g``.
    """
    if seed.u is None:
        raise ValueError("seed must live on a single grid; transfer it first")
    if not seed.in_M:
        raise ValueError("seed is not on the nodal Nehari set within its tolerance")
    current = seed
    u = seed.u
    grid = u.grid
    I0 = current.energy if math.isfinite(current.energy) else energy(u, nl, lam).I
    res = scaled_residual(u, nl, lam)
    history = [(0, I0, res, 1.0, 1.0)]
    step = 1.0
    it = 0
    while res > tol and it < max_iter:
        gv = energy_gradient_vector(u, nl, lam)
        p = h1_riesz(grid, gv)
        slope = float(gv @ p)
        while True:
            trial = RadialField(grid, u.values - step * p)
            try:
                cand = _reproject(trial, nl, lam)
            except DegenerateSign:
                cand = None
            if cand is not None:
                if cand.energy <= I0 - ARMIJO_C * step * slope:
                    break
                if step * slope < 1e-12 * abs(I0):
                    r1 = scaled_residual(cand.u, nl, lam)
                    if r1 < res:
                        break
            step *= 0.5
            if step < 1e-14:
                if cand is None:
                    raise ProjectionLost("re-projection failed for every step size",
                                         last=current, iterations=it)
                break
        if step < 1e-14:
            log.warning("line search stalled at residual %.3e", res)
            break
        it += 1
        current, u = cand, cand.u
        I0 = cand.energy
        res = scaled_residual(u, nl, lam)
        history.append((it, I0, res, cand.alpha, cand.beta))
        step = min(2.0 * step, 1.0)
        if it % 25 == 0:
            log.info("iter %d  I=%.12g  residual=%.3e", it, I0, res)
    # membership data of the final iterate itself
    final = decomposition_of(u, nl, lam)
    report = SolveReport(
        minimizer=final, c_nodal=final.energy, c_ground=c_ground, residual=res,
        sign_changes=count_sign_changes(u), iterations=it, lambda_ratio=lambda_ratio,
        converged=res <= tol, lam=lam, nodal_ratio=admissibility_ratio(u), history=history)
    if not report.converged and raise_on_max_iter:
        raise MaxIterExceeded(f"residual {res:.3e} > {tol:.3e} after {it} iterations",
                              report=report)
    return report


def warm_start(report: SolveReport, grid: RadialGrid, nl: Nonlinearity, lam: float,
               tol: float = 1e-7, max_iter: int = 500) -> SolveReport:
    """Interpolate a minimiser onto ``grid``, re-project and minimise again."""
    trial = transfer(report.minimizer.u, grid)
    d = _reproject(trial, nl, lam)
    if d is None:
        raise ProjectionLost("transferred minimiser could not be projected")
    return minimize_on_M(d, nl, lam, tol, max_iter, c_ground=report.c_ground,
                         lambda_ratio=report.lambda_ratio)


# ------------------------------------------------------------- exclusion tests


def nodal_domains(u: RadialField, floor: float = AMPLITUDE_FLOOR) -> list[RadialField]:
    """Split ``u`` into its sign-constant pieces (zero plateaus dropped)."""
    v = u.values
    amp = float(np.max(np.abs(v)))
    s = np.sign(np.where(np.abs(v) < floor * amp, 0.0, v))
    pieces = []
    i = 0
    n = v.size
    while i < n:
        if s[i] == 0:
            i += 1
            continue
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        vals = np.zeros(n)
        vals[i:j + 1] = v[i:j + 1]
        pieces.append(RadialField(u.grid, vals))
        i = j + 1
    return pieces


def three_component_check(components, nl: Nonlinearity, lam: float, n: int = 5,
                          lo: float = 0.5, hi: float = 1.5):
    """Project three disjoint pieces so ``I'(u)[u_i] = 0``, then scan the 3D fiber.

    Returns a dict with the scales, the projected energy, the maximum of
    ``I(t1 u1 + t2 u2 + t3 u3)`` over the grid minus (1,1,1), and the
    two-component exclusion energy.
    """
    if len(components) != 3:
        raise ValueError("need exactly three components")
    scales, fiber = multi_project(components, nl, lam)
    parts = fiber.partials(scales)
    I_u = fiber.energy(scales)
    ts = np.linspace(lo, hi, n)
    best = -math.inf
    worst_point = None
    lower = []
    for a in ts:
        for b in ts:
            for c in ts:
                if a == 1.0 and b == 1.0 and c == 1.0:
                    continue
                val = fiber.energy(scales * np.array([a, b, c]))
                if val < I_u:
                    lower.append((float(a), float(b), float(c)))
                if val > best:
                    best, worst_point = val, (float(a), float(b), float(c))
    excl = exclusion_step(fiber, scales, nl, lam)
    return {"scales": scales.tolist(), "partials": parts.tolist(), "I": I_u,
            "max_other": best, "argmax_other": worst_point, "n_lower": len(lower),
            "n_points": n**3 - 1, "exclusion": excl}


def exclusion_step(fiber: ComponentFiber, scales, nl: Nonlinearity, lam: float) -> dict:
    """Drop the third component and project the remaining pair onto the nodal set.

    The pair fiber is the restriction of the three-component fiber; its
    Miranda box is ``[zeta, 1]^2`` in units of the current scales.
    """
    s3 = np.asarray(scales, dtype=float)

    def phi(s, t):
        return fiber.partials([s * s3[0], t * s3[1], 0.0])[:2]

    zeta = 0.5
    while zeta > 1e-6:
        p = phi(zeta, zeta)
        if p[0] > 0 and p[1] > 0 and phi(zeta, 1.0)[0] > 0 and phi(1.0, zeta)[1] > 0:
            break
        zeta *= 0.5
    box = MirandaBox(zeta, 1.0, zeta, 1.0)
    res = miranda_solve(phi, box, 1e-10 * float(fiber.quad[0, 0] * s3[0] ** 2))
    I_pair = fiber.energy([res.s * s3[0], res.t * s3[1], 0.0])
    return {"alpha": res.s, "beta": res.t, "zeta": zeta, "I_pair": I_pair,
            "I_three": fiber.energy(s3), "lower": bool(I_pair < fiber.energy(s3))}


def fiber_maximality(d: NodalDecomposition, nl: Nonlinearity, lam: float, n: int = 21,
                     lo: float = 0.5, hi: float = 1.5) -> dict:
    """``max I(s u_plus + t u_minus)`` over an ``n x n`` grid minus (1, 1)."""
    fiber = ComponentFiber.from_fields([d.u_plus, d.u_minus], nl, lam)
    I1 = fiber.energy([1.0, 1.0])
    ts = np.linspace(lo, hi, n)
    best = -math.inf
    for s in ts:
        for t in ts:
            if s == 1.0 and t == 1.0:
                continue
            best = max(best, fiber.energy([s, t]))
    margin = I1 - best
    return {"I": I1, "max_other": best, "margin": margin,
            "holds": bool(margin > 1e-12 * abs(I1))}


def certify(report: SolveReport, nl: Nonlinearity, lam: float, tol: float = 1e-7) -> dict:
    """Re-verify the conclusions for a converged run; raise on the first failure."""
    clauses = {}
    d = report.minimizer
    u = d.u
    sc = count_sign_changes(u)
    clauses["sign_changes"] = sc == 1
    clauses["converged"] = bool(report.converged)
    clauses["in_M"] = bool(d.in_M)
    res = scaled_residual(u, nl, lam)
    clauses["residual"] = bool(res <= tol)
    details = {"residual": res, "sign_changes": sc}
    if sc > 1:
        pieces = nodal_domains(u)
        if len(pieces) >= 3:
            merged = pieces[:2] + [sum(pieces[2:], u.grid.zeros())]
            details["three_component"] = three_component_check(merged, nl, lam)
    if u is not None and sc >= 1:
        fm = fiber_maximality(d, nl, lam)
        details["fiber_maximality"] = fm
        clauses["fiber_maximality"] = fm["holds"]
    ratio = report.lambda_ratio if math.isfinite(report.lambda_ratio) else admissibility_ratio(u)
    details["lambda_ratio"] = ratio
    clauses["lambda_ratio"] = bool(ratio > lam)
    clauses["levels"] = bool(report.c_nodal > report.c_ground > 0)
    gap = quarter_gap(u, nl)
    details["quarter_gap"] = gap
    clauses["energy_floor"] = bool(report.c_nodal > gap >= -1e-10)
    hyp = check_hypotheses(nl)
    if hyp.passed():
        L = nehari_lower_bound(hyp.c_epsilon, nl.q)
        details["L"] = L
        details["Lq_plus"] = lp_norm(d.u_plus, nl.q)
        details["Lq_minus"] = lp_norm(d.u_minus, nl.q)
        clauses["lower_bound_L"] = bool(details["Lq_plus"] > L and details["Lq_minus"] > L
                                        and math.sqrt(h1_norm_sq(d.u_plus)) > L
                                        and math.sqrt(h1_norm_sq(d.u_minus)) > L)
    cert = {"clauses": clauses, "details": details, "passed": all(clauses.values())}
    for name, ok in clauses.items():
        if not ok:
            raise CertificationFailed(f"certificate clause '{name}' failed", clause=name,
                                      certificate=cert)
    return cert


# ------------------------------------------------------- decoupled baseline


def decoupled_two_bump(nl: Nonlinearity, grid: RadialGrid, tol: float = 1e-9,
                       k_range: tuple[int, int] | None = None) -> dict:
    """Nodal level at ``lambda = 0`` from independent Dirichlet problems.

    Without the nonlocal term ``I(u_plus + u_minus) = I(u_plus) + I(u_minus)``,
    so the least nodal level with one interface at node ``k`` is the ball
    ground level on ``[0, r_k]`` plus the shell ground level on
    ``[r_k, R_max]``.  The interface node is chosen by integer ternary search.
    """
    cache: dict[int, tuple[float, float]] = {}

    def level(k: int) -> float:
        if k not in cache:
            ball = positive_ground_state(nl, 0.0, make_grid(grid.nodes[k], k + 1), tol)
            shell = positive_ground_state(nl, 0.0, grid, tol, first_free=k + 1)
            cache[k] = (functional(ball, nl, 0.0), functional(shell, nl, 0.0))
        return sum(cache[k])

    if k_range is None:
        k_range = (MIN_NODES - 1, min(grid.N - MIN_NODES, int(8.0 / grid.h)))
    lo, hi = k_range
    while hi - lo > 2:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        if level(m1) <= level(m2):
            hi = m2
        else:
            lo = m1
    k = min(range(lo, hi + 1), key=level)
    return {"c_nodal": level(k), "k": k, "rho": float(grid.nodes[k]),
            "c_ball": cache[k][0], "c_shell": cache[k][1], "evaluations": len(cache)}


# ----------------------------------------------------------------- pipeline


def perturbed_seed(seed: NodalDecomposition, nl: Nonlinearity, lam: float,
                   rng: np.random.Generator, size: float = 0.05) -> NodalDecomposition:
    """Re-projected copy of ``seed`` with a smooth random relative perturbation."""
    u = seed.u
    r = u.grid.nodes
    modes = np.arange(1, 6)
    coef = rng.normal(size=modes.size) / modes
    bump = np.cos(np.outer(r / u.grid.R_max * np.pi, modes)) @ coef
    trial = RadialField(u.grid, u.values * (1.0 + size * bump))
    d = _reproject(trial, nl, lam)
    if d is None:
        raise ProjectionLost("perturbed seed could not be projected")
    return d


def solve(nl: Nonlinearity, lam: float, grid: RadialGrid, tol: float = 1e-7,
          max_iter: int = 500, starts: int = 1, seed_rng: int = 0, artifacts=None):
    """Seed, minimise and report the best level over ``starts`` runs.

    Returns ``(report, artifacts)``; the first start is the unperturbed seed.
    """
    if artifacts is None:
        artifacts = appendix_seed(nl, lam, grid)
    if artifacts.base_element is None:
        raise ProjectionLost("seed element could not be transferred to the base grid",
                             detail=artifacts.diagnostics.get("base_transfer_error"))
    u_frak = artifacts.u_frak_base
    c_ground = functional(u_frak, nl, lam)
    ratio = admissibility_ratio(u_frak)
    rng = np.random.default_rng(seed_rng)
    best = None
    for i in range(max(1, starts)):
        seed = artifacts.base_element if i == 0 else perturbed_seed(
            artifacts.base_element, nl, lam, rng)
        rep = minimize_on_M(seed, nl, lam, tol, max_iter, c_ground=c_ground, lambda_ratio=ratio)
        log.info("start %d: c_nodal=%.12g residual=%.3e", i, rep.c_nodal, rep.residual)
        if best is None or rep.c_nodal < best.c_nodal:
            best = rep
    return best, artifacts
