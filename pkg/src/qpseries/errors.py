"""Exception hierarchy shared by all modules."""


class QpSeriesError(Exception):
    """Base class for all library errors."""


class SingularArgument(QpSeriesError):
    """Potential evaluated too close to a pole or branch endpoint."""

    def __init__(self, x, distance, tol):
        super().__init__(f"argument {x!r} is {distance:.3e} from a singularity (tol {tol:.1e})")
        self.x = x
        self.distance = distance
        self.tol = tol


class SingularSite(QpSeriesError):
    """A lattice site of a truncated box falls on a potential singularity."""

    def __init__(self, site):
        super().__init__(f"site {site} is too close to a potential singularity")
        self.site = site


class ResonantSite(QpSeriesError):
    """|V_n - V_0| below the resonance cutoff at a reachable site."""

    def __init__(self, site, gap):
        super().__init__(f"resonant site {site}: |V_n - V_0| = {gap:.3e}")
        self.site = site
        self.gap = gap


class NotOneToOne(QpSeriesError):
    """Grid probe detected non-injectivity on the preimage interval."""


class MalformedString(QpSeriesError):
    """Path string does not follow the grammar."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class RangeViolation(QpSeriesError):
    """A path jump exceeds the hopping range of its edge order."""


class BadPosition(QpSeriesError):
    """Attachment position does not index a visit of the base path."""


class LevelShift(QpSeriesError):
    """A translated coordinate changed its level: denominator data inconsistent."""


class NotCanonical(QpSeriesError):
    """Operation requires a translation-canonical path (T(P) = P)."""


class NoConvergence(QpSeriesError):
    """Iterative eigensolver failed to converge within the sweep cap."""


class DegeneratePair(QpSeriesError):
    """Elimination pair with vanishing mixing denominator D."""


class InterpolationSingular(QpSeriesError):
    """Collar interpolation produced a non-invertible polar factor."""


class PreconditionViolated(QpSeriesError):
    """A documented precondition of a numerical check does not hold."""


class ConfigError(QpSeriesError):
    """Invalid or unparsable run configuration."""


class ComputeError(QpSeriesError):
    """Computation failed; carries the originating module name."""

    def __init__(self, module, message):
        super().__init__(f"[{module}] {message}")
        self.module = module
