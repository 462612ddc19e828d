"""Curves of bounded variation on [0, 1] with values in a manifold.

Two concrete representations are used throughout the package:

* :class:`PiecewiseConstantCurve` — finitely many plateaus, jumps carry all
  of the variation;
* :class:`SampledCurve` — values on a uniform grid, variation measured by
  chord sums.

Total variation of a manifold-valued curve is the diffuse part plus the sum
of geodesic jump sizes.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BeyondInjectivityRadius,
    ConfigError,
    RampTooWide,
)
from .manifolds import CONSTRAINT_TOL, Manifold

# Plateaus closer than this are treated as equal and merged away.
_SPURIOUS_TOL = 1e-14


@dataclass(frozen=True)
class PiecewiseConstantCurve:
    """Right-continuous step curve: value ``values[i]`` on ``[x_{i-1}, x_i)``.

    ``breakpoints`` are strictly increasing interior points of (0, 1);
    ``values`` has one more row than there are breakpoints.  Constructed
    curves are normalized: equal neighbouring plateaus are merged so every
    breakpoint is an actual jump.
    """

    manifold: Manifold
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != self.manifold.ambient_dim:
            raise ConfigError(
                f"plateau values must have shape (m+1, {self.manifold.ambient_dim})"
            )
        if bp.size + 1 != vals.shape[0]:
            raise ConfigError("need exactly one more plateau than breakpoints")
        if bp.size and (np.any(bp <= 0.0) or np.any(bp >= 1.0) or np.any(np.diff(bp) <= 0)):
            raise ConfigError("breakpoints must be strictly increasing inside (0, 1)")
        residual = self.manifold.constraint_residual(vals)
        if residual > 1e-9:
            raise ConfigError(f"plateau values are off the manifold by {residual:.3g}")
        if residual > CONSTRAINT_TOL:
            vals = self.manifold.project_point(vals)
        # drop spurious breakpoints (equal neighbouring plateaus)
        if bp.size:
            keep = self.manifold.dist(vals[:-1], vals[1:]) > _SPURIOUS_TOL
            if not np.all(keep):
                bp = bp[keep]
                vals = vals[np.concatenate([[True], keep])]
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    # -- basic queries ------------------------------------------------------

    @property
    def num_jumps(self) -> int:
        return int(self.breakpoints.size)

    def plateau_lengths(self) -> np.ndarray:
        edges = np.concatenate([[0.0], self.breakpoints, [1.0]])
        return np.diff(edges)

    def jump_sizes(self) -> np.ndarray:
        if not self.num_jumps:
            return np.zeros(0)
        return np.atleast_1d(self.manifold.dist(self.values[:-1], self.values[1:]))

    def value_at(self, x: float) -> np.ndarray:
        idx = bisect.bisect_right(self.breakpoints.tolist(), float(x))
        return self.values[idx]

    def eval_grid(self, xs: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, np.asarray(xs, float), side="right")
        return self.values[idx]

    def mean(self) -> np.ndarray:
        """Length-weighted ambient average of the plateau values."""
        return self.plateau_lengths() @ self.values


@dataclass(frozen=True)
class SampledCurve:
    """Curve sampled on the uniform grid ``x_i = i / (n - 1)``."""

    manifold: Manifold
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != self.manifold.ambient_dim:
            raise ConfigError(
                f"sampled values must have shape (n, {self.manifold.ambient_dim})"
            )
        if vals.shape[0] < 2:
            raise ConfigError("a sampled curve needs at least two nodes")
        residual = self.manifold.constraint_residual(vals)
        if residual > 1e-9:
            raise ConfigError(f"sampled values are off the manifold by {residual:.3g}")
        if residual > CONSTRAINT_TOL:
            vals = self.manifold.project_point(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def grid_n(self) -> int:
        return int(self.values.shape[0])

    @property
    def h(self) -> float:
        return 1.0 / (self.grid_n - 1)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_n)


@dataclass(frozen=True)
class TVBreakdown:
    """Total variation split into diffuse part and individual jumps."""

    diffuse: float
    jump_locations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def total(self) -> float:
        return float(self.diffuse + np.sum(self.jump_sizes))

    @property
    def max_jump(self) -> float:
        return float(np.max(self.jump_sizes, initial=0.0))


def tv_measure(curve) -> TVBreakdown:
    """Total variation of a curve, split into diffuse and jump parts.

    Piecewise-constant curves carry only jumps (geodesic sizes); sampled
    curves carry only a diffuse chord-sum part, which converges to the
    geodesic length from below under grid refinement.
    """
    if isinstance(curve, PiecewiseConstantCurve):
        if curve.num_jumps:
            # a jump across the cut locus has no unique geodesic: reject it
            curve.manifold.log(curve.values[:-1], curve.values[1:])
        return TVBreakdown(
            0.0, np.array(curve.breakpoints, copy=True), curve.jump_sizes()
        )
    if isinstance(curve, SampledCurve):
        d = curve.manifold.dist(curve.values[:-1], curve.values[1:])
        return TVBreakdown(float(np.sum(d)))
    raise ConfigError(f"cannot measure variation of {type(curve).__name__}")


def jump_admissibility(curve) -> tuple[bool, float, float]:
    """Check every jump against twice the manifold's convexity radius.

    Returns ``(ok, worst_size, worst_location)``; for sampled curves the
    consecutive chords play the role of jumps.
    """
    bound = 2.0 * curve.manifold.convexity_radius
    if isinstance(curve, PiecewiseConstantCurve):
        sizes = curve.jump_sizes()
        locs = curve.breakpoints
    else:
        sizes = curve.manifold.dist(curve.values[:-1], curve.values[1:])
        locs = curve.xs[:-1]
    if sizes.size == 0:
        return True, 0.0, 0.0
    worst = int(np.argmax(sizes))
    return bool(sizes[worst] < bound), float(sizes[worst]), float(locs[worst])


def mollify(curve: PiecewiseConstantCurve, grid_n: int, ramp_width: float) -> SampledCurve:
    """Sample a step curve with each jump replaced by a geodesic ramp.

    The ramp at breakpoint ``x_j`` spans ``[x_j - w/2, x_j + w/2]`` and
    interpolates the two plateau values along their geodesic; elsewhere the
    plateau value is used.  Total variation is preserved up to the chord-sum
    discretization error.
    """
    if grid_n < 2:
        raise ConfigError("grid_n must be at least 2")
    w = float(ramp_width)
    if w <= 0:
        raise ConfigError("ramp width must be positive")
    edges = np.concatenate([[0.0], curve.breakpoints, [1.0]])
    min_gap = float(np.min(np.diff(edges))) if curve.num_jumps else 1.0
    if w >= 0.5 * min_gap:
        raise RampTooWide(
            f"ramp width {w} does not fit: half the smallest plateau is {0.5 * min_gap}"
        )
    xs = np.linspace(0.0, 1.0, grid_n)
    vals = curve.eval_grid(xs)
    for j, bp in enumerate(curve.breakpoints):
        inside = np.abs(xs - bp) <= 0.5 * w
        if not np.any(inside):
            continue
        s = (xs[inside] - (bp - 0.5 * w)) / w
        vals[inside] = curve.manifold.geodesic_point(
            curve.values[j], curve.values[j + 1], np.clip(s, 0.0, 1.0)
        )
    return SampledCurve(curve.manifold, vals)


def auto_ramp(curve: PiecewiseConstantCurve, grid_n: int, ramp_cells: int = 8) -> float:
    """Widest safe mollification ramp: ``ramp_cells`` grid cells, capped so
    it always fits inside the narrowest plateau."""
    h = 1.0 / (grid_n - 1)
    edges = np.concatenate([[0.0], curve.breakpoints, [1.0]])
    min_gap = float(np.min(np.diff(edges))) if curve.num_jumps else 1.0
    return min(ramp_cells * h, 0.45 * min_gap)


def compose_with_geodesic(
    manifold: Manifold, p: np.ndarray, q: np.ndarray, sigma: PiecewiseConstantCurve
) -> PiecewiseConstantCurve:
    """Map a scalar step curve through the geodesic from p to q.

    ``sigma`` must take values in [0, 1]; plateau value ``s`` becomes the
    geodesic point at parameter ``s``.  The composed curve has total
    variation ``dist(p, q) * TV(sigma)`` as long as sigma is monotone.
    """
    svals = sigma.values[:, 0]
    if np.any(svals < -1e-12) or np.any(svals > 1.0 + 1e-12):
        raise ConfigError("geodesic parameters must lie in [0, 1]")
    direction = manifold.log(p, q)
    new_vals = manifold.exp(p, np.clip(svals, 0.0, 1.0)[:, None] * direction)
    # keep the endpoints bit-exact
    new_vals[svals == 0.0] = np.asarray(p, float)
    new_vals[svals == 1.0] = np.asarray(q, float)
    return PiecewiseConstantCurve(manifold, np.array(sigma.breakpoints, copy=True), new_vals)


def l2_distance(a, b, grid_n: int = 2049) -> float:
    """L2(0,1) distance between two curves using geodesic pointwise distance.

    Piecewise-constant pairs are integrated exactly on their merged
    breakpoint partition; any pair involving a sampled curve is integrated
    with the trapezoid rule on ``grid_n`` nodes (or the sampled grid if
    finer).
    """
    if a.manifold != b.manifold:
        raise ConfigError("curves live on different manifolds")
    man = a.manifold
    if isinstance(a, PiecewiseConstantCurve) and isinstance(b, PiecewiseConstantCurve):
        edges = np.unique(np.concatenate([[0.0], a.breakpoints, b.breakpoints, [1.0]]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        d = man.dist(a.eval_grid(mids), b.eval_grid(mids))
        return float(np.sqrt(np.sum(d * d * np.diff(edges))))
    for c in (a, b):
        if isinstance(c, SampledCurve):
            grid_n = max(grid_n, c.grid_n)
    xs = np.linspace(0.0, 1.0, grid_n)
    va = a.eval_grid(xs) if isinstance(a, PiecewiseConstantCurve) else _resample(a, xs)
    vb = b.eval_grid(xs) if isinstance(b, PiecewiseConstantCurve) else _resample(b, xs)
    d2 = man.dist(va, vb) ** 2
    return float(np.sqrt(np.trapezoid(d2, xs)))


def _resample(curve: SampledCurve, xs: np.ndarray) -> np.ndarray:
    """Evaluate a sampled curve at arbitrary abscissae via geodesic interpolation."""
    n = curve.grid_n
    pos = np.clip(np.asarray(xs, float), 0.0, 1.0) * (n - 1)
    i0 = np.clip(np.floor(pos).astype(int), 0, n - 2)
    frac = pos - i0
    left = curve.values[i0]
    right = curve.values[i0 + 1]
    out = np.empty((len(xs), curve.manifold.ambient_dim))
    exact = frac <= 1e-12
    if np.any(exact):
        out[exact] = left[exact]
    rest = ~exact
    if np.any(rest):
        out[rest] = curve.manifold.geodesic_point(left[rest], right[rest], frac[rest])
    return out
