"""Closed-form spherical geometry experiments.

Numeric companions to the library's comparison-geometry guarantees: the
geodesic-square midpoint construction that defeats semiconvexity of
constrained variation on the sphere, Hessian lower bounds for half the
squared distance, Alexandrov angle comparison, and empirical stability
constants for geodesics under endpoint perturbation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import SampledCurve, tv_measure
from .errors import (
    BeyondInjectivityRadius,
    DegenerateTriangle,
    OutOfComparisonRange,
    WindowTooLong,
)
from .manifolds import Manifold, Sphere

#: Empirical constant for one_harmonic_residual_bound, frozen from the first
#: refinement sweep (mollified two-jump sphere data at n = 101/201/401 plus
#: low-noise fields): the observed sup/integral ratio peaked at 0.11 and was
#: stable under refinement, so 0.5 leaves a 4x margin.
ONE_HARMONIC_C = 0.5

_SPHERE3 = Sphere(3)


def _unit_tangent(manifold: Manifold, p, rng: np.random.Generator) -> np.ndarray:
    while True:
        v = manifold.random_tangent(rng, p)
        n = float(np.linalg.norm(v))
        if n > 1e-8:
            return v / n


def _hav(theta):
    s = np.sin(0.5 * np.asarray(theta))
    return s * s


def haversine_side(a: float, b: float, gamma: float) -> float:
    """Third side of a spherical triangle from two sides and the included angle.

    Solves hav c = hav(a-b) + sin a sin b hav gamma on the unit sphere.
    """
    h = _hav(a - b) + np.sin(a) * np.sin(b) * _hav(gamma)
    return float(2.0 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))))


@dataclass(frozen=True)
class SphericalTriangle:
    """Geodesic triangle on the unit sphere, stored by its side lengths."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        sides = (self.a, self.b, self.c)
        if min(sides) <= 0.0 or max(sides) >= np.pi:
            raise DegenerateTriangle(f"sides out of (0, pi): {sides}")
        if sum(sides) >= 2.0 * np.pi:
            raise DegenerateTriangle("perimeter reaches 2*pi")
        a, b, c = sides
        if a >= b + c or b >= a + c or c >= a + b:
            raise DegenerateTriangle(f"triangle inequality fails: {sides}")

    @classmethod
    def from_points(cls, p, q, r, manifold: Manifold = _SPHERE3) -> "SphericalTriangle":
        return cls(
            float(manifold.dist(q, r)),
            float(manifold.dist(p, r)),
            float(manifold.dist(p, q)),
        )

    def angles(self) -> tuple[float, float, float]:
        """Interior angles (opposite a, b, c) via the spherical law of cosines."""
        out = []
        for x, y, z in ((self.a, self.b, self.c), (self.b, self.c, self.a), (self.c, self.a, self.b)):
            cosang = (np.cos(x) - np.cos(y) * np.cos(z)) / (np.sin(y) * np.sin(z))
            out.append(float(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return tuple(out)

    def planar_angles(self) -> tuple[float, float, float]:
        """Angles of the flat triangle with the same side lengths."""
        out = []
        for x, y, z in ((self.a, self.b, self.c), (self.b, self.c, self.a), (self.c, self.a, self.b)):
            cosang = (y * y + z * z - x * x) / (2.0 * y * z)
            out.append(float(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return tuple(out)


def midpoint_separation(a: float) -> float:
    """Distance between geodesic midpoints of opposite sides of a geodesic
    square of side ``a`` on the unit sphere.

    Equals 2*arcsin(tan(a/2)), which strictly exceeds ``a`` on (0, pi/2) —
    midpoint curves can gain length, the mechanism behind the semiconvexity
    counterexample.
    """
    if not 0.0 < a <= 0.5 * np.pi:
        raise OutOfComparisonRange(f"side {a} outside (0, pi/2]")
    t = np.tan(0.5 * a)
    if t > 1.0:
        raise OutOfComparisonRange(f"tan(a/2) = {t} > 1")
    return float(2.0 * np.arcsin(t))


def square_vertices(a: float) -> np.ndarray:
    """Vertices (p0, p1, q0, q1) of a geodesic square of side ``a`` on the
    unit sphere centered at (1,0,0).

    p0/q0 and p1/q1 are mirror pairs across the xz-plane; p0/p1 and q0/q1
    across the xy-plane.  The circumradius rho satisfies cos a = cos^2 rho.
    """
    if not 0.0 < a < 0.5 * np.pi:
        raise OutOfComparisonRange(f"side {a} outside (0, pi/2)")
    rho = np.arccos(np.sqrt(np.cos(a)))
    s = np.sin(rho) / np.sqrt(2.0)
    cr = np.cos(rho)
    return np.array(
        [
            [cr, s, s],    # p0
            [cr, s, -s],   # p1
            [cr, -s, s],   # q0
            [cr, -s, -s],  # q1
        ]
    )


def lambda_convexity_violation(lam: float, a: float) -> float:
    """Largest eps in (0, 1/2] witnessing failure of lambda-convexity for
    the side-``a`` square configuration.

    The midpoint curve between the one-jump and three-jump square data
    gains at least separation - a of variation; eps below
    4*(separation - a)/(lambda*a) defeats any lambda > 0, and for
    lambda <= 0 every eps works (capped at 1/2).
    """
    sep = midpoint_separation(a)
    if lam <= 0.0:
        return 0.5
    return float(min(0.5, 4.0 * (sep - a) / (lam * a)))


def semiconvexity_gap(n: int) -> float:
    """Margin of the strict midpoint-length inequality for the n-th member
    of the shrinking-square family (side 1/(4n(n+1))).

    Positive gap = the obstruction survives the correction term; negative
    at small n, eventually positive.
    """
    if n < 1 or int(n) != n:
        raise OutOfComparisonRange("n must be a positive integer")
    n = int(n)
    x = 1.0 / (8.0 * n * (n + 1))
    lhs = 2.0 * np.arcsin(np.tan(x))
    rhs = 1.0 / (4.0 * n * (n + 1)) + 3.0 / (2.0 ** (n + 5) * n * (n + 1) ** 2)
    return float(lhs - rhs)


def first_positive_gap(n_max: int = 100) -> int | None:
    """Smallest n <= n_max with a positive semiconvexity gap (brute force)."""
    for n in range(1, n_max + 1):
        if semiconvexity_gap(n) > 0.0:
            return n
    return None


# ---------------------------------------------------------------------------
# Hessian comparison
# ---------------------------------------------------------------------------


def second_difference(manifold: Manifold, p0, p, direction, step: float = 1e-4) -> float:
    """Richardson-extrapolated second difference of s -> 0.5*dist(exp_p(s X), p0)^2
    along a unit tangent direction X at p."""
    p0 = np.asarray(p0, dtype=float)
    p = np.asarray(p, dtype=float)
    x = np.asarray(direction, dtype=float)

    def phi(s: float) -> float:
        d = manifold.dist(manifold.exp(p, s * x), p0)
        return 0.5 * float(d) ** 2

    base = phi(0.0)

    def dd(h: float) -> float:
        return (phi(h) - 2.0 * base + phi(-h)) / (h * h)

    return float((4.0 * dd(0.5 * step) - dd(step)) / 3.0)


@dataclass(frozen=True)
class HessianComparison:
    distance: float
    min_estimate: float
    bound: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.min_estimate >= self.bound - self.tolerance


def hessian_comparison_check(
    manifold: Manifold,
    p0,
    p,
    n_dirs: int = 16,
    rng: np.random.Generator | None = None,
    step: float = 1e-4,
    tolerance: float = 1e-4,
) -> HessianComparison:
    """Directional second derivatives of half the squared distance to p0,
    sampled over random unit tangent directions at p, against the curvature
    comparison lower bound.
    """
    if rng is None:
        rng = np.random.Generator(np.random.Philox(0))
    r = float(manifold.dist(p, p0))
    bound = manifold.hessian_comparison_bound(r)
    best = np.inf
    for _ in range(n_dirs):
        x = _unit_tangent(manifold, p, rng)
        best = min(best, second_difference(manifold, p0, p, x, step))
    return HessianComparison(r, float(best), float(bound), tolerance)


# ---------------------------------------------------------------------------
# Alexandrov angles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AngleComparison:
    sides: tuple[float, float, float]
    spherical: tuple[float, float, float]
    planar: tuple[float, float, float]
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance


def alexandrov_angle_check(p, q, r, manifold: Manifold = _SPHERE3,
                           tolerance: float = 1e-9) -> AngleComparison:
    """Each vertex angle of a spherical geodesic triangle dominates the
    corresponding angle of the flat triangle with equal side lengths.
    """
    pts = [np.asarray(v, dtype=float) for v in (p, q, r)]
    tri = SphericalTriangle.from_points(*pts, manifold=manifold)
    sph = []
    for i in range(3):
        at = pts[i]
        others = [pts[j] for j in range(3) if j != i]
        tans = []
        for o in others:
            t, _ = manifold.unit_tangent_pair(at, o)
            tans.append(t)
        sph.append(float(np.arccos(np.clip(np.dot(tans[0], tans[1]), -1.0, 1.0))))
    sph = tuple(sph)
    # SphericalTriangle orders angles opposite (a, b, c) = (d(q,r), d(p,r), d(p,q));
    # the vertex loop above produces exactly that order (p, q, r)
    planar = tri.planar_angles()
    worst = float(max(pl - s for s, pl in zip(sph, planar)))
    return AngleComparison((tri.a, tri.b, tri.c), sph, planar, worst, tolerance)


# ---------------------------------------------------------------------------
# geodesic endpoint stability
# ---------------------------------------------------------------------------


def distance_to_geodesic(manifold: Manifold, x, p, q, samples: int = 257) -> float:
    """Distance from a point to the geodesic segment joining p and q."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if manifold.kind == "euclidean":
        seg = q - p
        denom = float(np.dot(seg, seg))
        t = 0.0 if denom == 0.0 else np.clip(np.dot(x - p, seg) / denom, 0.0, 1.0)
        return float(np.linalg.norm(x - (p + t * seg)))
    if manifold.kind == "sphere" and manifold.ambient_dim == 3:
        nvec = np.cross(p, q)
        nn = np.linalg.norm(nvec)
        if nn > 1e-14:
            nhat = nvec / nn
            foot = x - np.dot(x, nhat) * nhat
            fn = np.linalg.norm(foot)
            if fn > 1e-14:
                w = foot / fn
                arc = manifold.dist(p, q)
                if manifold.dist(p, w) <= arc + 1e-12 and manifold.dist(w, q) <= arc + 1e-12:
                    return float(abs(np.arcsin(np.clip(np.dot(x, nhat), -1.0, 1.0))))
        return float(min(manifold.dist(x, p), manifold.dist(x, q)))
    svals = np.linspace(0.0, 1.0, samples)
    pts = manifold.geodesic_point(p, q, svals)
    return float(np.min(manifold.dist(pts, x)))


def hausdorff_one_sided(manifold: Manifold, p1, q1, p2, q2, samples: int = 33) -> float:
    """sup over the first segment of the distance to the second segment,
    the first segment sampled densely."""
    svals = np.linspace(0.0, 1.0, samples)
    pts = manifold.geodesic_point(np.asarray(p1, float), np.asarray(q1, float), svals)
    return max(distance_to_geodesic(manifold, x, p2, q2) for x in pts)


def endpoint_stability_ratio(manifold: Manifold, p1, q1, p2, q2,
                             samples: int = 33) -> float:
    """One-sided Hausdorff distance between two geodesic segments divided by
    the larger endpoint displacement; 0 when the endpoints coincide."""
    denom = max(float(manifold.dist(p1, p2)), float(manifold.dist(q1, q2)))
    if denom == 0.0:
        return 0.0
    return hausdorff_one_sided(manifold, p1, q1, p2, q2, samples) / denom


@dataclass(frozen=True)
class StabilityScan:
    radius: float
    n_samples: int
    seed: int
    max_ratio: float
    ratios: np.ndarray


def geodesic_endpoint_stability(
    n_samples: int,
    radius: float = 1.0,
    seed: int = 0,
    manifold: Manifold = _SPHERE3,
    samples: int = 33,
) -> StabilityScan:
    """Empirical stability constant: max ratio of segment Hausdorff distance
    to endpoint displacement over random quadruples in a geodesic ball.

    Uses a counter-based generator so sweeps are reproducible and
    parallelizable.
    """
    if radius >= manifold.convexity_radius:
        raise BeyondInjectivityRadius(
            f"ball radius {radius} reaches the convexity radius"
        )
    rng = np.random.Generator(np.random.Philox(seed))
    center = manifold.project_point(
        np.concatenate([[1.0], np.zeros(manifold.ambient_dim - 1)])
    )

    def ball_point():
        v = _unit_tangent(manifold, center, rng)
        return manifold.exp(center, (radius * rng.uniform() ** 0.5) * v)

    ratios = np.empty(n_samples)
    for k in range(n_samples):
        p1, q1, p2, q2 = (ball_point() for _ in range(4))
        ratios[k] = endpoint_stability_ratio(manifold, p1, q1, p2, q2, samples)
    ratios.flags.writeable = False
    return StabilityScan(radius, n_samples, seed, float(np.max(ratios)), ratios)


# ---------------------------------------------------------------------------
# near-geodesic slice estimate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SliceResidual:
    sup_distance: float
    rhs_integral: float
    constant: float

    @property
    def passed(self) -> bool:
        return self.sup_distance <= self.constant * self.rhs_integral + 1e-12


def one_harmonic_residual_bound(
    w: SampledCurve, f: np.ndarray, constant: float = ONE_HARMONIC_C
) -> SliceResidual:
    """Sup distance from a sampled window to the geodesic joining its
    endpoint values, against the window integral of the driving term.

    The window must carry less variation than twice the convexity radius.
    """
    man = w.manifold
    if tv_measure(w).total >= 2.0 * man.convexity_radius:
        raise WindowTooLong("window variation reaches twice the convexity radius")
    f = np.asarray(f, dtype=float)
    if f.shape != w.values.shape:
        raise ValueError("driving term must match the sampled values in shape")
    p, q = w.values[0], w.values[-1]
    sup = max(
        distance_to_geodesic(man, x, p, q) for x in w.values
    )
    rhs = float(np.sum(np.linalg.norm(f, axis=1)) * w.h)
    return SliceResidual(float(sup), rhs, float(constant))
