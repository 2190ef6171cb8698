"""Exception types shared by the analytic model, solvers, simulator and oracles."""


class CsmaAoiError(Exception):
    """Base class for all model errors raised by this package."""


class ParameterError(CsmaAoiError, ValueError):
    """An argument lies outside the domain of the formula or protocol."""


class DivergenceError(CsmaAoiError):
    """Collision probability >= 1/2: the window-doubling series diverges and
    the closed-form model is no longer valid."""


class SaturationError(CsmaAoiError):
    """The offered load exceeds what the backoff process can serve
    (idle probability <= 0, or a derived rate exceeds 1)."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class OverCapacityError(CsmaAoiError):
    """The fixed-point equation has no real root: the requested packet rate
    is above the network's attainable throughput."""


class InstabilityError(CsmaAoiError):
    """Packet rate >= service rate: queues grow without bound and the
    average age of information is unbounded."""


class TruncationError(CsmaAoiError):
    """A truncated-chain oracle was called with a state-space cut-off that
    redirects too much probability mass for the requested accuracy."""

    def __init__(self, message, boundary_flux=None):
        super().__init__(message)
        self.boundary_flux = boundary_flux
