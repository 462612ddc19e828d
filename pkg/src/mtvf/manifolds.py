"""Closed-form geometry kernels for the built-in constraint manifolds.

Points are ambient-coordinate arrays of shape ``(..., ambient_dim)``; every
operation broadcasts over leading axes.  Composite operations renormalize
their results so the constraint residual stays at the 1e-12 level.

Built-in geometries: ``euclidean:<N>``, ``sphere:<N>`` (unit sphere in R^N,
N >= 2), ``circle`` (unit circle in R^2) and ``cylinder`` (S^1 x R in R^3).
"""
from __future__ import annotations

import math

import numpy as np

from .errors import (
    BeyondInjectivityRadius,
    ConfigError,
    DegenerateJump,
    OutOfComparisonRange,
    SingularProjection,
)

CONSTRAINT_TOL = 1e-12

# Two points are considered coincident (no jump direction) below this.
_COINCIDENT_TOL = 1e-15


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


class Manifold:
    """Geometry of an isometrically embedded manifold with closed-form maps.

    Subclasses provide ``project_point``, ``tangent_projection``, ``dist``,
    ``exp``, ``log`` and ``second_fundamental_form``; derived helpers
    (geodesic interpolation, unit tangents of a jump, comparison bounds)
    live here.
    """

    kind: str
    ambient_dim: int
    curvature_bound: float       # sup of sectional curvatures
    injectivity_radius: float

    # -- identity ---------------------------------------------------------

    @property
    def spec_id(self) -> str:
        if self.kind in ("circle", "cylinder"):
            return self.kind
        return f"{self.kind}:{self.ambient_dim}"

    def __repr__(self) -> str:
        return f"<manifold {self.spec_id}>"

    def __eq__(self, other) -> bool:
        return isinstance(other, Manifold) and self.spec_id == other.spec_id

    def __hash__(self) -> int:
        return hash(self.spec_id)

    # -- curvature-dependent constants -------------------------------------

    @property
    def convexity_radius(self) -> float:
        """Radius bound under which jump endpoints admit stable geodesics.

        Half the injectivity radius, additionally capped by the curvature
        scale pi/sqrt(K) when the curvature bound K is positive.
        """
        if self.curvature_bound > 0:
            return 0.5 * min(
                self.injectivity_radius, math.pi / math.sqrt(self.curvature_bound)
            )
        return 0.5 * self.injectivity_radius

    def hessian_comparison_bound(self, sigma):
        """Lower bound for eigenvalues of Hess(dist^2/2) at distance sigma.

        Equals 1 for nonpositively curved geometries and
        sqrt(K)*sigma*cot(sqrt(K)*sigma) when the curvature bound K is
        positive.  Valid for 0 <= sigma < 2 * convexity_radius.
        """
        arr = np.asarray(sigma, dtype=float)
        if np.any(arr < 0) or np.any(arr >= 2.0 * self.convexity_radius):
            raise OutOfComparisonRange(
                f"distance out of comparison range [0, {2 * self.convexity_radius})"
            )
        if self.curvature_bound <= 0:
            out = np.ones_like(arr)
        else:
            x = math.sqrt(self.curvature_bound) * arr
            small = np.abs(x) < 1e-6
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.where(small, 1.0 - x * x / 3.0, x / np.tan(np.where(small, 1.0, x)))
        return float(out) if np.isscalar(sigma) or arr.ndim == 0 else out

    # -- abstract kernels ---------------------------------------------------

    def project_point(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tangent_projection(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dist(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exp(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def second_fundamental_form(
        self, p: np.ndarray, x: np.ndarray, y: np.ndarray
    ) -> np.ndarray:
        """Normal-valued correction term A_p(X, Y) of the ambient derivative.

        Defined so that the tangential part of the ambient x-derivative of a
        tangent field W along a curve u satisfies
        ``pi_u(W_x) = W_x + A_u(W, u_x)``.
        """
        raise NotImplementedError

    # -- derived helpers ----------------------------------------------------

    def constraint_residual(self, p: np.ndarray) -> float:
        """Largest deviation of the given points from the manifold."""
        return float(np.max(_norm(np.asarray(p, float) - self.project_point(p)), initial=0.0))

    def geodesic_point(self, p: np.ndarray, q: np.ndarray, s) -> np.ndarray:
        """Point at parameter ``s`` of the constant-speed geodesic p -> q."""
        s_arr = np.asarray(s, dtype=float)
        v = self.log(p, q)
        out = self.exp(p, s_arr[..., None] * v if s_arr.ndim else s_arr * v)
        # pin the endpoints exactly
        if s_arr.ndim == 0:
            if s_arr == 0.0:
                return np.array(p, dtype=float, copy=True)
            if s_arr == 1.0:
                return np.array(q, dtype=float, copy=True)
            return out
        p_b, q_b = np.broadcast_arrays(p, out)[0], np.broadcast_arrays(q, out)[0]
        out = np.where((s_arr == 0.0)[..., None], p_b, out)
        out = np.where((s_arr == 1.0)[..., None], q_b, out)
        return out

    def unit_tangent_pair(self, p: np.ndarray, q: np.ndarray):
        """Unit tangents of the jump p -> q at each endpoint.

        Returns ``(t_minus, t_plus)``: ``t_minus`` sits in T_p and points
        toward q, ``t_plus`` sits in T_q and points away from p; both have
        unit length.
        """
        d = self.dist(p, q)
        if np.any(np.asarray(d) < _COINCIDENT_TOL):
            raise DegenerateJump("unit tangents undefined for coincident points")
        d = np.asarray(d)[..., None] if np.asarray(d).ndim else d
        # re-project and renormalize: dividing a short chord by its length
        # amplifies the O(eps) non-tangency of log to O(eps/d)
        t_minus = self._unitize(p, self.log(p, q) / d)
        t_plus = self._unitize(q, -self.log(q, p) / d)
        return t_minus, t_plus

    def _unitize(self, base: np.ndarray, v: np.ndarray) -> np.ndarray:
        w = self.tangent_projection(base, v)
        return w / np.linalg.norm(w, axis=-1, keepdims=True)

    # -- sampling helpers (used by tests and synthetic data) ----------------

    def random_point(self, rng: np.random.Generator, size=()) -> np.ndarray:
        raise NotImplementedError

    def random_tangent(self, rng: np.random.Generator, p: np.ndarray) -> np.ndarray:
        v = rng.standard_normal(np.shape(p))
        return self.tangent_projection(p, v)


class Euclidean(Manifold):
    """Flat ambient space R^N; every map is linear."""

    kind = "euclidean"
    curvature_bound = 0.0
    injectivity_radius = math.inf

    def __init__(self, ambient_dim: int):
        if ambient_dim < 1:
            raise ConfigError("euclidean manifold needs ambient dimension >= 1")
        self.ambient_dim = int(ambient_dim)

    def project_point(self, x):
        return np.asarray(x, dtype=float)

    def tangent_projection(self, p, v):
        return np.asarray(v, dtype=float)

    def dist(self, p, q):
        return _norm(np.asarray(q, float) - np.asarray(p, float))

    def exp(self, p, v):
        return np.asarray(p, float) + np.asarray(v, float)

    def log(self, p, q):
        return np.asarray(q, float) - np.asarray(p, float)

    def second_fundamental_form(self, p, x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    def random_point(self, rng, size=()):
        return rng.standard_normal(tuple(np.atleast_1d(size)) + (self.ambient_dim,)) \
            if size != () else rng.standard_normal(self.ambient_dim)


class Sphere(Manifold):
    """Unit sphere S^{N-1} embedded in R^N (N >= 2)."""

    kind = "sphere"
    curvature_bound = 1.0
    injectivity_radius = math.pi

    def __init__(self, ambient_dim: int):
        if ambient_dim < 2:
            raise ConfigError("sphere needs ambient dimension >= 2")
        self.ambient_dim = int(ambient_dim)

    def project_point(self, x):
        x = np.asarray(x, dtype=float)
        r = _norm(x)
        if np.any(r < 1e-14):
            raise SingularProjection("cannot project the origin onto the sphere")
        return x / r[..., None]

    def tangent_projection(self, p, v):
        p = np.asarray(p, float)
        v = np.asarray(v, float)
        return v - np.sum(v * p, axis=-1, keepdims=True) * p

    def dist(self, p, q):
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        c = np.sum(p * q, axis=-1)
        w = q - c[..., None] * p
        return np.arctan2(_norm(w), c)

    def exp(self, p, v):
        p = np.asarray(p, float)
        v = np.asarray(v, float)
        t = _norm(v)
        # sinc is sin(pi x)/(pi x): exact and smooth at 0
        out = np.cos(t)[..., None] * p + np.sinc(t / math.pi)[..., None] * v
        return self.project_point(out)

    def log(self, p, q):
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        c = np.sum(p * q, axis=-1)
        w = q - c[..., None] * p
        s = _norm(w)
        theta = np.arctan2(s, c)
        if np.any(theta >= math.pi * (1.0 - 1e-12)):
            raise BeyondInjectivityRadius("antipodal points have no unique geodesic")
        scale = np.where(s < 1e-300, 1.0, theta / np.where(s < 1e-300, 1.0, s))
        return scale[..., None] * w

    def second_fundamental_form(self, p, x, y):
        p = np.asarray(p, float)
        return np.sum(np.asarray(x, float) * np.asarray(y, float), axis=-1)[..., None] * p

    def random_point(self, rng, size=()):
        shape = (tuple(np.atleast_1d(size)) if size != () else ()) + (self.ambient_dim,)
        return self.project_point(rng.standard_normal(shape))


class Circle(Sphere):
    """Unit circle: the 2-dimensional-ambient specialization of the sphere."""

    kind = "circle"

    def __init__(self):
        super().__init__(2)


class Cylinder(Manifold):
    """Unit cylinder S^1 x R embedded in R^3: (cos a, sin a, z)."""

    kind = "cylinder"
    ambient_dim = 3
    curvature_bound = 0.0
    injectivity_radius = math.pi

    def project_point(self, x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        if np.any(r < 1e-14):
            raise SingularProjection("cannot project the axis onto the cylinder")
        return np.stack([x[..., 0] / r, x[..., 1] / r, x[..., 2]], axis=-1)

    def _radial(self, p):
        return np.stack([p[..., 0], p[..., 1], np.zeros_like(p[..., 2])], axis=-1)

    def _circ_tangent(self, p):
        return np.stack([-p[..., 1], p[..., 0], np.zeros_like(p[..., 2])], axis=-1)

    def tangent_projection(self, p, v):
        p = np.asarray(p, float)
        v = np.asarray(v, float)
        n = self._radial(p)
        return v - np.sum(v * n, axis=-1, keepdims=True) * n

    def _wrap_angle(self, p, q):
        # signed circular angle from p to q in (-pi, pi]
        s = p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]
        c = p[..., 0] * q[..., 0] + p[..., 1] * q[..., 1]
        return np.arctan2(s, c)

    def dist(self, p, q):
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        return np.hypot(self._wrap_angle(p, q), q[..., 2] - p[..., 2])

    def exp(self, p, v):
        p = np.asarray(p, float)
        v = np.asarray(v, float)
        tau = self._circ_tangent(p)
        a = np.sum(v * tau, axis=-1)
        ca, sa = np.cos(a), np.sin(a)
        x = ca * p[..., 0] - sa * p[..., 1]
        y = sa * p[..., 0] + ca * p[..., 1]
        z = p[..., 2] + v[..., 2]
        return self.project_point(np.stack([x, y, z], axis=-1))

    def log(self, p, q):
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        a = self._wrap_angle(p, q)
        if np.any(np.abs(a) >= math.pi * (1.0 - 1e-12)):
            raise BeyondInjectivityRadius(
                "opposite cylinder rulings have no unique geodesic"
            )
        return a[..., None] * self._circ_tangent(p) + np.stack(
            [np.zeros_like(a), np.zeros_like(a), q[..., 2] - p[..., 2]], axis=-1
        )

    def second_fundamental_form(self, p, x, y):
        p = np.asarray(p, float)
        tau = self._circ_tangent(p)
        coeff = np.sum(np.asarray(x, float) * tau, axis=-1) * np.sum(
            np.asarray(y, float) * tau, axis=-1
        )
        return coeff[..., None] * self._radial(p)

    def random_point(self, rng, size=()):
        shape = tuple(np.atleast_1d(size)) if size != () else ()
        a = rng.uniform(-math.pi, math.pi, shape)
        z = rng.standard_normal(shape)
        return np.stack([np.cos(a), np.sin(a), z], axis=-1)


def parse_manifold(text: str) -> Manifold:
    """Build a manifold from its config identifier, e.g. ``sphere:3``."""
    token = text.strip().lower()
    if token == "circle":
        return Circle()
    if token == "cylinder":
        return Cylinder()
    if ":" in token:
        kind, _, dim_text = token.partition(":")
        try:
            dim = int(dim_text)
        except ValueError as exc:
            raise ConfigError(f"bad manifold dimension in {text!r}") from exc
        if kind == "euclidean":
            return Euclidean(dim)
        if kind == "sphere":
            return Sphere(dim)
    raise ConfigError(f"unknown manifold identifier {text!r}")
