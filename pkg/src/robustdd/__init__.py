"""Robust dynamical decoupling: sequence compilation and spin-1/2 simulation."""

__version__ = "0.1.0"

from robustdd.su2 import (
    IDENTITY,
    compose,
    dagger,
    distance,
    error_angle,
    evolve_static,
    fidelity,
    HamiltonianParams,
    rotation,
    z_rotation,
)
from robustdd.sequences import (
    DelayEvent,
    Family,
    PulseEvent,
    PulseProgram,
    SequenceSpec,
    cdd_recurse,
    duty_cycle,
    expand_sequence,
    knill_expand,
    udd_times,
)
from robustdd.noise import (
    ControlError,
    GaussianEnsemble,
    NoiseProcess,
    ou_trajectory,
    sample_ensemble,
)
from robustdd.simulator import (
    InitialState,
    NoisePath,
    TraceResult,
    cycle_propagator,
    ensemble_average,
    magnetization_trace,
    pulse_propagator,
)
from robustdd.analysis import (
    DecayFit,
    FidelityCurve,
    MapResult,
    SweepRow,
    decay_time,
    duty_cycle_sweep,
    fidelity_map,
    fidelity_vs_pulses,
)
