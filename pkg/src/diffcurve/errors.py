"""Exception types shared across the package."""


class DiffCurveError(Exception):
    """Base class for all package errors."""


class OutOfDomain(DiffCurveError):
    """Query point lies outside the field's bounding box."""


class DegenerateSegment(DiffCurveError):
    """A polyline segment is shorter than the geometric tolerance."""


class CollisionUnresolvable(DiffCurveError):
    """No collision-free time step could be found; treat as converged."""


class ArrangementFailure(DiffCurveError):
    """Boundary curves do not form a simple planar arrangement."""


class MeshingFailure(DiffCurveError):
    """Constrained triangulation failed on degenerate input."""


class SingularSystem(DiffCurveError):
    """The FEM system is singular (signals a meshing bug)."""


class SideUnavailable(DiffCurveError):
    """Requested one-sided quantity does not exist (outer boundary)."""


class InsufficientSamples(DiffCurveError):
    """Too few residual samples for the requested piecewise fit."""


class NoCurvesFound(DiffCurveError):
    """Residual below tolerance everywhere; nothing to initialize."""


class UnrenderableDoc(DiffCurveError):
    """Document geometry cannot be meshed or rendered."""


class DimensionMismatch(DiffCurveError):
    """Image dimensions do not agree."""
