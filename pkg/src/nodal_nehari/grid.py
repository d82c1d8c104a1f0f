"""Radial discretization of radially symmetric functions on R^3.

A radial function ``u(|x|)`` is sampled on the uniform grid
``r_i = i*h``, ``h = R_max/(N-1)``.  Volume integrals use the composite
trapezoid rule in ``r`` with the Jacobian ``4*pi*r**2``; the gradient
energy uses a cell-centred form

    int |grad u|^2 dx  ~=  sum_i 4*pi * r_i * r_{i+1} * (u_{i+1} - u_i)**2 / h

whose variational derivative is the familiar ``(1/r) (r u)''`` radial
Laplacian.  The first cell carries zero weight, so the value stored at the
origin never enters any integral; it is kept only for display and is
filled by even extrapolation (``u'(0) = 0``).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_banded

FOUR_PI = 4.0 * np.pi
MIN_NODES = 16


def _frozen(a: NDArray) -> NDArray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid on ``[0, R_max]`` with trapezoid weights.

    Attributes
    ----------
    R_max : float
        Truncation radius.
    N : int
        Number of nodes, including both endpoints.
    nodes, quad_weights : ndarray
        Node positions and trapezoid weights for ``int_0^R_max (.) dr``.
    """

    R_max: float
    N: int
    nodes: NDArray = field(init=False, repr=False, compare=False)
    quad_weights: NDArray = field(init=False, repr=False, compare=False)
    volume_weights: NDArray = field(init=False, repr=False, compare=False)
    cell_weights: NDArray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        r = np.linspace(0.0, self.R_max, self.N)
        h = self.R_max / (self.N - 1)
        w = np.full(self.N, h)
        w[0] = w[-1] = 0.5 * h
        object.__setattr__(self, "nodes", _frozen(r))
        object.__setattr__(self, "quad_weights", _frozen(w))
        object.__setattr__(self, "volume_weights", _frozen(FOUR_PI * w * r**2))
        object.__setattr__(self, "cell_weights", _frozen(FOUR_PI * r[:-1] * r[1:] / h))

    @property
    def h(self) -> float:
        return self.R_max / (self.N - 1)

    def scaled(self, factor: float) -> "RadialGrid":
        """Companion grid with every node multiplied by ``factor``."""
        return RadialGrid(self.R_max * factor, self.N)

    def from_values(self, values) -> "RadialField":
        return RadialField(self, values)

    def sample(self, fn) -> "RadialField":
        """Evaluate ``fn(r)`` at the nodes."""
        return RadialField(self, fn(self.nodes))

    def zeros(self) -> "RadialField":
        return RadialField(self, np.zeros(self.N))

    def index_of(self, r: float) -> int:
        """Index of the node nearest to ``r``."""
        return int(np.clip(np.rint(r / self.h), 0, self.N - 1))


def make_grid(R_max: float, N: int) -> RadialGrid:
    """Build a uniform grid, rejecting grids too coarse to resolve anything."""
    if not np.isfinite(R_max) or R_max <= 0:
        raise ValueError(f"R_max must be positive, got {R_max!r}")
    if int(N) != N or N < MIN_NODES:
        raise ValueError(f"N must be an integer >= {MIN_NODES}, got {N!r}")
    return RadialGrid(float(R_max), int(N))


@dataclass(frozen=True)
class RadialField:
    """Samples of a radial function at the nodes of a :class:`RadialGrid`."""

    grid: RadialGrid
    values: NDArray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite samples")
        object.__setattr__(self, "values", _frozen(v))

    # arithmetic on a shared grid
    def _other(self, other):
        if isinstance(other, RadialField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return RadialField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RadialField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return RadialField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return RadialField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return RadialField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return RadialField(self.grid, -self.values)

    def map(self, fn) -> "RadialField":
        return RadialField(self.grid, fn(self.values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_zero(self) -> bool:
        return not np.any(self.values[1:])

    def with_even_origin(self) -> "RadialField":
        """Replace the (energy-inert) origin sample by even extrapolation."""
        v = self.values.copy()
        v[0] = (4.0 * v[1] - v[2]) / 3.0
        return RadialField(self.grid, v)

    def at(self, r) -> NDArray:
        """Piecewise-linear interpolation; zero beyond ``R_max``."""
        return np.interp(r, self.grid.nodes, self.values, right=0.0)

    # serialization
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("r,value\n")
        for r, v in zip(self.grid.nodes, self.values):
            buf.write(f"{r:.17g},{v:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "RadialField":
        return cls.from_csv_text(Path(path).read_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "RadialField":
        rows = list(csv.DictReader(io.StringIO(text)))
        r = np.array([float(row["r"]) for row in rows])
        v = np.array([float(row["value"]) for row in rows])
        grid = make_grid(r[-1], len(r))
        if not np.allclose(grid.nodes, r, rtol=0, atol=1e-12 * r[-1]):
            raise ValueError("CSV nodes are not a uniform grid starting at 0")
        return cls(grid, v)


def volume_integral(g: RadialField) -> float:
    """``int_{R^3} g(|x|) dx`` by the trapezoid rule in ``r``."""
    return float(g.grid.volume_weights @ g.values)


def weighted_inner(u: RadialField, v: RadialField) -> float:
    """L^2(R^3) inner product of two fields on the same grid."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return float(u.grid.volume_weights @ (u.values * v.values))


def dirichlet_form(u: RadialField, v: RadialField) -> float:
    """Discrete ``int grad u . grad v dx``."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return float(u.grid.cell_weights @ (np.diff(u.values) * np.diff(v.values)))


def gradient_sq(u: RadialField) -> float:
    """Discrete ``|grad u|_2^2``."""
    du = np.diff(u.values)
    return float(u.grid.cell_weights @ (du * du))


def _check_boundary(u: RadialField) -> None:
    scale = max(u.max_abs(), 1.0)
    if abs(u.values[-1]) > 1e-8 * scale:
        raise ValueError(
            f"H^1 field must vanish at R_max (u(R_max) = {u.values[-1]:.3e}); "
            "enlarge R_max or multiply by a cutoff"
        )


def h1_norm_sq(u: RadialField) -> float:
    """``||u||^2 = |grad u|_2^2 + |u|_2^2`` for a field vanishing at ``R_max``."""
    _check_boundary(u)
    return gradient_sq(u) + float(u.grid.volume_weights @ (u.values * u.values))


def h1_inner(u: RadialField, v: RadialField) -> float:
    return dirichlet_form(u, v) + weighted_inner(u, v)


def lp_norm(u: RadialField, p: float) -> float:
    if not 1.0 <= p <= 6.0:
        raise ValueError(f"exponent p must lie in [1, 6], got {p}")
    return float(u.grid.volume_weights @ np.abs(u.values) ** p) ** (1.0 / p)


def split_signs(u: RadialField) -> tuple[RadialField, RadialField]:
    """Node-wise positive and negative parts, ``u = u_plus + u_minus``."""
    v = u.values
    return RadialField(u.grid, np.maximum(v, 0.0)), RadialField(u.grid, np.minimum(v, 0.0))


def stiffness_apply(u: RadialField) -> NDArray:
    """Partial derivatives of ``gradient_sq(u)/2`` w.r.t. each node value."""
    c = u.grid.cell_weights
    flux = c * np.diff(u.values)
    out = np.zeros(u.grid.N)
    out[:-1] -= flux
    out[1:] += flux
    return out


def neg_laplacian(u: RadialField) -> NDArray:
    """``-Delta_h u`` at nodes ``1..N-2``; origin and outer node are set to 0."""
    W = u.grid.volume_weights
    out = np.zeros(u.grid.N)
    out[1:-1] = stiffness_apply(u)[1:-1] / W[1:-1]
    return out


@lru_cache(maxsize=16)
def _h1_banded(grid: RadialGrid) -> NDArray:
    c = grid.cell_weights
    W = grid.volume_weights
    n = grid.N - 2
    ab = np.zeros((3, n))
    ab[1] = c[:-1] + c[1:] + W[1:-1]
    ab[0, 1:] = -c[1:n]
    ab[2, :-1] = -c[1:n]
    return ab


def h1_riesz(grid: RadialGrid, covector: NDArray, first_free: int = 1) -> NDArray:
    """Solve ``(K + M) p = covector`` on the free nodes ``first_free..N-2``.

    ``K`` and ``M`` are the stiffness and lumped mass matrices of
    ``h1_norm_sq``; the result is the H^1 representative of a linear
    functional given by its nodal partial derivatives.  The outer node is
    pinned to 0.  With ``first_free = 1`` the origin copies its neighbour;
    otherwise every node below ``first_free`` is pinned to 0 as well.
    """
    if not 1 <= first_free <= grid.N - 2:
        raise ValueError(f"first_free must lie in [1, {grid.N - 2}]")
    out = np.zeros(grid.N)
    ab = _h1_banded(grid)[:, first_free - 1:]
    out[first_free:-1] = solve_banded((1, 1), ab, np.asarray(covector)[first_free:-1])
    if first_free == 1:
        out[0] = out[1]
    return out
