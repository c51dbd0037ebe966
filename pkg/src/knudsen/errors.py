"""Exception types shared across the package."""


class KnudsenError(Exception):
    """Base class for all package errors."""


class NonPositiveSpeed(KnudsenError):
    """A hitting-time query was made with a zero velocity."""


class RootNotBracketed(KnudsenError):
    """The boundary root search failed; the level-set is misconfigured."""


class PatchSearchFailed(KnudsenError):
    """No verified pair of communicating boundary patches within the budget."""


class QuadratureNotConverged(KnudsenError):
    """A numerical integral did not reach the requested accuracy."""


class NotInward(KnudsenError):
    """Angle reconstruction requires a direction with positive normal component."""


class ExplosionGuardTripped(KnudsenError):
    """A particle exceeded the per-run collision cap."""


class ResidualRejectionBudgetExceeded(KnudsenError):
    """The residual sampler of the maximal coupling hit its proposal cap."""


class LagTooLarge(KnudsenError):
    """Coupling attempted with a remaining flight time above the domain diameter."""


class TooFewSamples(KnudsenError):
    """An estimator was called with fewer samples than it supports."""


class DegenerateWindow(KnudsenError):
    """The tail-fit window contains too few usable grid points."""


class MomentDiverges(KnudsenError):
    """A moment integral required by the rate hypothesis is infinite."""


class ConfigError(KnudsenError):
    """A scenario configuration failed validation."""
