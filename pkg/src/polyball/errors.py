"""Exception types shared across the package."""


class PolyballError(Exception):
    """Base class for all package errors."""


class GenericityFailure(PolyballError):
    """The lattice has a (near-)degenerate cospherical configuration."""


class DegenerateLattice(PolyballError):
    """Empty-ball margin is zero or below tolerance."""


class DomainError(PolyballError):
    """Argument outside the mathematical domain of the operation."""


class SingularSystem(PolyballError):
    """Linear system for the lifted circumsphere is singular."""


class NoPositiveOmega(PolyballError):
    """No positive Lipschitz bound certifies the lift tolerance."""


class ConvexityViolation(PolyballError):
    """A lifted facet fails the supporting-halfspace test.

    Carries the offending facet index and vertex index when known.
    """

    def __init__(self, msg, facet=None, vertex=None, margin=None):
        super().__init__(msg)
        self.facet = facet
        self.vertex = vertex
        self.margin = margin


class Unbounded(PolyballError):
    """Halfspace intersection is unbounded."""


class EmptyInterior(PolyballError):
    """Halfspace intersection does not contain the origin in its interior."""


class NotOnBoundary(PolyballError):
    """Query point is not on the polytope boundary."""


class ThetaTooLarge(PolyballError):
    """The deep region of every facet is empty for the given width."""


class NetTooCoarse(PolyballError):
    """Spherical net fails its covering verification."""


class ShellViolation(PolyballError):
    """Shell polytope nesting or facet identification check failed."""


class SweepFailure(PolyballError):
    """No sweep direction / offsets empty the skeleton intersection."""


class ResolutionExhausted(PolyballError):
    """Grid certificate for the separation constant stayed nonpositive."""


class CoverFailure(PolyballError):
    """Rotation family fails to cover the boundary sphere."""


class ScheduleInfeasible(PolyballError):
    """First block scale does not fit under the scale ceiling."""


class PathTooShort(PolyballError):
    """Path never exits the first polytope."""


class DegreeCapExceeded(PolyballError):
    """Two-region polynomial did not verify below the degree cap."""

    def __init__(self, msg, degree=None, errors=None):
        super().__init__(msg)
        self.degree = degree
        self.errors = errors


class MarginFailure(PolyballError):
    """Facet-margin precondition failed while building a boundary-sum term."""


class CertificateFailure(PolyballError):
    """A series certificate failed on its verification samples."""


class OddDimension(PolyballError):
    """Complex identification requires an even real dimension."""


class OutsideBall(PolyballError):
    """Evaluation point lies outside the open unit ball."""


class ConfigError(PolyballError):
    """Invalid run configuration."""


class ManifestMismatch(PolyballError):
    """Artifact directory manifest is missing, stale, or corrupted."""
