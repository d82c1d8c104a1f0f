"""Radial Poisson solve ``-Delta phi = u^2`` through the Newton kernel.

For radial ``u`` the potential is

    phi_u(r) = (1/r) int_0^inf u(s)^2 s min(s, r) ds
             = (1/r) int_0^r u^2 s^2 ds + int_r^inf u^2 s ds,

i.e. the convolution with ``1/(4 pi |x|)``.  Both pieces are prefix sums
over the grid's trapezoid weights.  Because every node uses the same
weights, the discrete coupling ``D(u, v) = int phi_u v^2`` is the double
sum ``4 pi sum_ij w_i w_j u_j^2 v_i^2 r_i r_j min(r_i, r_j)``, which is
symmetric in ``(u, v)`` to round-off.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from .grid import FOUR_PI, RadialField, volume_integral

_fault = {"sign_flip": False}


@contextlib.contextmanager
def injected_sign_flip():
    """Test hook: flip the sign of the outer prefix sum while active."""
    _fault["sign_flip"] = True
    try:
        yield
    finally:
        _fault["sign_flip"] = False


@dataclass(frozen=True)
class PoissonSolution:
    """Potential of a radial source together with its prefix sums.

    ``charge`` is ``int_0^R u^2 s^2 ds`` (total charge over ``4 pi``);
    outside the support of the source ``phi(r) = charge / r`` exactly.
    """

    phi: RadialField
    source_l2: float
    charge: float
    support_end: float

    def at(self, rho):
        """Evaluate the potential at arbitrary radii (exact Coulomb tail)."""
        rho = np.asarray(rho, dtype=float)
        grid = self.phi.grid
        inside = np.interp(rho, grid.nodes, self.phi.values)
        tail = self.charge / np.maximum(rho, 1e-300)
        return np.where(rho >= self.support_end, tail, inside)


def _potential_values(grid, sq) -> tuple[np.ndarray, float]:
    r = grid.nodes
    w = grid.quad_weights
    inner = np.cumsum(w * sq * r * r)
    outer_terms = w * sq * r
    outer = np.cumsum(outer_terms[::-1])[::-1] - outer_terms
    if _fault["sign_flip"]:
        outer = -outer
    phi = np.empty(grid.N)
    phi[1:] = inner[1:] / r[1:] + outer[1:]
    phi[0] = outer[0]
    return phi, float(inner[-1])


def solve_poisson(u: RadialField) -> PoissonSolution:
    """Newton-kernel potential of the density ``u**2``."""
    sq = u.values * u.values
    phi, charge = _potential_values(u.grid, sq)
    nz = np.nonzero(sq)[0]
    support_end = float(u.grid.nodes[nz[-1]]) if nz.size else 0.0
    source_l2 = float(np.sqrt(u.grid.volume_weights @ (sq * sq)))
    return PoissonSolution(RadialField(u.grid, phi), source_l2, charge, support_end)


def nonlocal_coupling(u: RadialField, v: RadialField, phi_u: PoissonSolution | None = None) -> float:
    """``D(u, v) = int phi_u v^2 dx``."""
    if phi_u is None:
        phi_u = solve_poisson(u)
    return volume_integral(phi_u.phi * (v * v))


def potential_energy_sq(sol: PoissonSolution) -> float:
    """``int |grad phi|^2 dx`` including the exact Coulomb tail beyond ``R_max``.

    Uses the same cell discretization as :func:`grid.gradient_sq`; only
    meaningful when the source vanishes near ``R_max``.
    """
    phi = sol.phi
    dphi = np.diff(phi.values)
    interior = float(phi.grid.cell_weights @ (dphi * dphi))
    return interior + FOUR_PI * sol.charge**2 / phi.grid.R_max
