"""Stroboscopic simulation of a periodically driven Rydberg-atom ring.

Exact diagonalization of the two-stage Floquet drive, time-crystal
observables, Lindblad decay, closed-form few-atom checks and parameter sweeps.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DimensionCapError,
    DTCError,
    EigensolverError,
    NoSignalError,
    NormDriftError,
    NumericalError,
    TraceDriftError,
)
from .model import (  # noqa: E402
    BasisDescriptor,
    Boundary,
    ModelParams,
    Stage,
    StageHamiltonian,
    Variant,
    build_hamiltonian,
    population_difference_diagonal,
    vdw_coupling,
)
from .observables import (  # noqa: E402
    Spectrum,
    Trajectory,
    beating_period_detuning,
    beating_period_epsilon,
    critical_cycle_number,
    fourier_spectrum,
    order_parameter,
    population_imbalance,
)
from .floquet import (  # noqa: E402
    FloquetPropagator,
    Mode,
    compile_cycle,
    evolve,
    initial_state,
    simulate,
    stroboscopic_state,
)
from .dissipative import (  # noqa: E402
    DensityState,
    build_liouvillian,
    evolve_density,
    fit_decay,
)
from .units import parse_frequency  # noqa: E402
