"""Exception types shared across the package."""


class HydroInertiaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HydroInertiaError):
    """Bad scenario, waterway or characteristic input.

    Carries a human-readable message that names the offending key or
    section and, where the source text is available, the line number.
    """

    def __init__(self, message: str, *, location: str | None = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class EnvelopeError(HydroInertiaError):
    """Requested operating point lies outside tabulated characteristic data."""


class InfeasibleSetpointError(HydroInertiaError):
    """No steady state exists for the requested power at the given head."""


class SimulationError(HydroInertiaError):
    """Numerical failure during time integration (non-finite state, bad step)."""
