"""Exception hierarchy shared by the simulation modules and the CLI."""


class DTCError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DTCError, ValueError):
    """Invalid parameters or configuration (CLI exit code 2)."""


class DimensionCapError(ConfigError):
    """Requested Hilbert or Liouville space exceeds the configured cap."""

    def __init__(self, L: int, cap: int, what: str = "pure-state"):
        self.L = L
        self.cap = cap
        super().__init__(
            f"L={L} exceeds the {what} cap of L<={cap}; "
            f"raise max_atoms explicitly if the memory is available"
        )


class NumericalError(DTCError, RuntimeError):
    """Numerical failure during evolution (CLI exit code 3)."""


class EigensolverError(NumericalError):
    """Dense eigendecomposition failed to converge."""


class NormDriftError(NumericalError):
    def __init__(self, cycle: int, drift: float, limit: float):
        self.cycle = cycle
        self.drift = drift
        self.limit = limit
        super().__init__(
            f"state norm drifted by {drift:.3e} (> {limit:.1e}) at cycle {cycle}"
        )


class TraceDriftError(NumericalError):
    def __init__(self, cycle: int, drift: float, limit: float):
        self.cycle = cycle
        self.drift = drift
        self.limit = limit
        super().__init__(
            f"density-matrix trace drifted by {drift:.3e} (> {limit:.1e}) at cycle {cycle}"
        )


class NoSignalError(NumericalError):
    """Envelope too small or too short for an exponential fit."""
