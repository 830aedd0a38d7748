"""Extended-dynamics observer toolkit.

Synthesis and fixed-step simulation of observers that estimate the state
and the input disturbance of SISO canonical-form plants: an internal
model of the known disturbance dynamics cancels what it can represent,
and a bandwidth-scheduled high-gain injection absorbs the rest.
"""

from .disturbance import (
    Constant,
    Decomposition,
    Exosystem,
    ExpThenHold,
    Harmonic,
    Polynomial,
    Signal,
    Sum,
    decompose,
    evaluate,
    exosystem_from_spectrum,
    s_norm,
)
from .errors import EdoError
from .plant import (
    GeneralPlant,
    Plant,
    canonical_plant,
    controllability_canonical_transform,
    is_observable_for_S,
    is_observable_for_omega,
    transmission_zero_holds,
)
from .sim import ErrorMetrics, SimConfig, Trajectory, high_gain_probe, metrics, simulate
from .synthesis import (
    GainBase,
    ObserverRealization,
    RegulatorSolution,
    ScheduledGains,
    StabilizerGain,
    assemble_edo,
    assemble_known_dynamics_observer,
    closed_loop,
    error_system,
    schedule_gains,
    solve_regulator,
    solve_regulator_spectral,
    stabilizer_gain,
)

__version__ = "0.1.0"
