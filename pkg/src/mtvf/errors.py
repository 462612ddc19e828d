"""Exception taxonomy shared across the package.

Geometry errors signal bad inputs to closed-form kernels; solver errors
signal integrator breakdown; verification errors signal misuse of a check.
The CLI maps these onto exit codes (config 2, geometry 3, failed check 4).
"""


class MtvfError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MtvfError):
    """Malformed or inconsistent configuration / input file."""


class GeometryError(MtvfError):
    """Base class for errors raised by geometric kernels."""


class SingularProjection(GeometryError):
    """Closest-point projection undefined (e.g. the origin for a sphere)."""


class BeyondInjectivityRadius(GeometryError):
    """No unique minimizing geodesic between the two points."""


class DegenerateJump(GeometryError):
    """Unit tangents of a jump requested for two equal points."""


class OutOfComparisonRange(GeometryError):
    """Comparison-theorem quantity evaluated outside its valid range."""


class RampTooWide(GeometryError):
    """Mollification ramp does not fit between neighbouring breakpoints."""


class ConvexityRadiusExceeded(GeometryError):
    """A jump reaches twice the convexity radius (flow not well posed)."""


class DegenerateTriangle(GeometryError):
    """Triangle comparison requested for (nearly) collinear vertices."""


class WindowTooLong(GeometryError):
    """Variation over an estimation window exceeds the allowed bound."""


class SolverError(MtvfError):
    """Base class for time-stepping failures."""


class CflViolation(SolverError):
    """Total variation increased during a step (unstable step size)."""


class StepUnderflow(SolverError):
    """Adaptive step shrank below the representable resolution."""


class VerificationError(MtvfError):
    """Base class for invalid verifier invocations (not failed checks)."""


class IncompatibleSnapshots(VerificationError):
    """Trajectory snapshots do not share a grid / jump set as required."""


class NotNPC(VerificationError):
    """Check requires a complete manifold of nonpositive curvature."""


class WrongManifold(VerificationError):
    """Check applied to a trajectory on an unsupported manifold."""
