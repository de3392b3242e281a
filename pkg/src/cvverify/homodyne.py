"""Homodyne detection on truncated single-mode states.

Measuring the rotated quadrature x_theta = cos(theta) x + sin(theta) p is
implemented by pre-rotating the state with exp(-i theta n) and reading the
position distribution.  Outcome densities are evaluated through the
normalized Hermite functions and sampled by inverse-CDF lookup on a fixed
grid, which makes sampling deterministic under a seeded generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DimensionError, TruncationError
from .fock import DensityMatrix, FockState

__all__ = [
    "QuadratureGrid",
    "hermite_functions",
    "rotate_state",
    "quadrature_density",
    "HomodyneSampler",
    "sample_quadrature",
    "sample_observable",
]

GRID_POINTS = 2**14
GRID_MARGIN = 5.0


@dataclass(frozen=True)
class QuadratureGrid:
    """Position grid with quadrature weights.

    x_max = sqrt(2 dim) + margin covers the classical turning point of
    every retained Fock level plus a safety margin.
    """

    points: np.ndarray
    weights: np.ndarray
    x_max: float
    resolution: float

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.points.shape != self.weights.shape:
            raise DimensionError("points and weights must have equal length")

    @classmethod
    def for_dim(cls, dim: int, points: int = GRID_POINTS, margin: float = GRID_MARGIN) -> "QuadratureGrid":
        """Composite Gauss-Legendre grid, used for state-construction integrals."""
        x_max = math.sqrt(2.0 * dim) + margin
        nodes_per_panel = 16
        panels = max(1, points // nodes_per_panel)
        base_x, base_w = np.polynomial.legendre.leggauss(nodes_per_panel)
        edges = np.linspace(-x_max, x_max, panels + 1)
        half = np.diff(edges) / 2.0
        mid = (edges[:-1] + edges[1:]) / 2.0
        xs = (mid[:, None] + half[:, None] * base_x[None, :]).reshape(-1)
        ws = (half[:, None] * base_w[None, :]).reshape(-1)
        return cls(xs, ws, x_max, 2.0 * x_max / (panels * nodes_per_panel))

    @classmethod
    def uniform(cls, dim: int, points: int = GRID_POINTS, margin: float = GRID_MARGIN) -> "QuadratureGrid":
        """Uniform grid with trapezoid weights, used for CDF inversion."""
        x_max = math.sqrt(2.0 * dim) + margin
        xs = np.linspace(-x_max, x_max, points)
        dx = xs[1] - xs[0]
        ws = np.full(points, dx)
        ws[0] = ws[-1] = dx / 2.0
        return cls(xs, ws, x_max, dx)

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))


def hermite_functions(levels: int, x: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions phi_0..phi_{levels-1} evaluated at x.

    Recurrence: phi_0 = pi^(-1/4) exp(-x^2/2),
    phi_{n+1} = sqrt(2/(n+1)) x phi_n - sqrt(n/(n+1)) phi_{n-1}.
    Returns an array of shape (levels, len(x)).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    out = np.empty((levels, x.size))
    out[0] = math.pi ** (-0.25) * np.exp(-0.5 * x * x)
    if levels > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, levels - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def rotate_state(obj, theta: float):
    """Apply the phase-space rotation exp(-i theta n) to a single-mode object.

    Measuring x on the rotated object equals measuring
    x_theta = cos(theta) x + sin(theta) p on the original.
    """
    if isinstance(obj, FockState):
        if obj.modes != 1:
            raise DimensionError("rotation is defined per single mode")
        phases = np.exp(-1j * theta * np.arange(obj.dim))
        return FockState(obj.amplitudes * phases, 1)
    if isinstance(obj, DensityMatrix):
        if obj.modes != 1:
            raise DimensionError("rotation is defined per single mode")
        phases = np.exp(-1j * theta * np.arange(obj.dim))
        return DensityMatrix(phases[:, None] * obj.matrix * phases.conj()[None, :], 1)
    raise DimensionError(f"cannot rotate a {type(obj).__name__}")


def quadrature_density(obj, grid: QuadratureGrid) -> np.ndarray:
    """Position-outcome density <x|rho|x> on the grid points.

    Raises TruncationError when the grid cannot resolve the state (turning
    point outside the grid, or the density fails to integrate to 1 within
    1e-6).
    """
    if isinstance(obj, FockState):
        dim = obj.dim
        if obj.modes != 1:
            raise DimensionError("density is defined per single mode")
        phi = hermite_functions(dim, grid.points)
        values = obj.normalized().amplitudes @ phi
        dens = np.abs(values) ** 2
    elif isinstance(obj, DensityMatrix):
        dim = obj.dim
        if obj.modes != 1:
            raise DimensionError("density is defined per single mode")
        phi = hermite_functions(dim, grid.points)
        dens = np.real(np.einsum("mx,mn,nx->x", phi, obj.matrix, phi, optimize=True))
    else:
        raise DimensionError(f"cannot evaluate density of a {type(obj).__name__}")
    if grid.x_max < math.sqrt(2.0 * dim):
        raise TruncationError(
            f"grid x_max={grid.x_max:.2f} below the turning point for dim={dim}"
        )
    if dens.min() < -1e-12:
        raise TruncationError(f"density dips to {dens.min():.3e}")
    dens = np.clip(dens, 0.0, None)
    total = grid.integrate(dens)
    if abs(total - 1.0) > 1e-6:
        raise TruncationError(f"density integrates to {total}, grid too small for dim={dim}")
    return dens


class HomodyneSampler:
    """Per-state cache of rotated outcome distributions.

    The density and CDF for each measurement angle are built once and are
    immutable afterwards; sampling draws from a caller-supplied generator,
    so there is no hidden shared mutable state.
    """

    def __init__(self, state, grid: QuadratureGrid | None = None):
        if isinstance(state, FockState):
            state = state.normalized()
        self._state = state
        dim = state.dim
        self.grid = grid if grid is not None else QuadratureGrid.uniform(dim)
        self._tables: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _table(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        table = self._tables.get(theta)
        if table is None:
            dens = quadrature_density(rotate_state(self._state, theta), self.grid)
            pts = self.grid.points
            cdf = np.concatenate(
                ([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(pts)))
            )
            cdf /= cdf[-1]
            table = (dens, cdf)
            self._tables[theta] = table
        return table

    def density(self, theta: float = 0.0) -> np.ndarray:
        return self._table(theta)[0]

    def _inverse_cdf(self, theta: float, u: np.ndarray) -> np.ndarray:
        """Map uniforms in (0, 1) to outcomes, linear interpolation between grid points."""
        _, cdf = self._table(theta)
        pts = self.grid.points
        hi = np.clip(np.searchsorted(cdf, u, side="right"), 1, pts.size - 1)
        lo = hi - 1
        span = cdf[hi] - cdf[lo]
        frac = np.where(span > 0, (u - cdf[lo]) / np.where(span > 0, span, 1.0), 0.0)
        return pts[lo] + frac * (pts[hi] - pts[lo])

    def sample(self, theta: float, size: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF samples of x_theta drawn from a caller-supplied generator."""
        return self._inverse_cdf(theta, rng.random(size))

    def sample_observable(self, descriptor, size: int, rng: np.random.Generator) -> np.ndarray:
        """Eigenvalue samples of scale * x_theta**power for one witness term."""
        xs = self.sample(descriptor.angle, size, rng)
        return descriptor.scale * xs**descriptor.power


def sample_quadrature(state, theta: float, rng: np.random.Generator, size: int | None = None):
    """Draw homodyne outcomes of x_theta from a state or density matrix."""
    sampler = HomodyneSampler(state)
    out = sampler.sample(theta, size or 1, rng)
    return out if size is not None else float(out[0])


def sample_observable(state, descriptor, rng: np.random.Generator, size: int | None = None):
    """Draw eigenvalue samples of one witness observable."""
    sampler = HomodyneSampler(state)
    out = sampler.sample_observable(descriptor, size or 1, rng)
    return out if size is not None else float(out[0])
