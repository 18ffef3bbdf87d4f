"""Fidelity curves, robustness maps, 1/e decay times and duty-cycle sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Optional, Sequence, Union

import numpy as np

from robustdd.noise import GaussianEnsemble, NoiseProcess, ensemble_epsilons
from robustdd.parallel import parallel_map
from robustdd.sequences import DelayEvent, PulseProgram, SequenceSpec, duty_cycle, expand_sequence
from robustdd.simulator import InitialState, TraceResult, accumulated_propagators, ensemble_average
from robustdd.su2 import IDENTITY, fidelity

MEAN_FIDELITY = "mean_fidelity"
MEAN_PROPAGATOR = "mean_propagator"
RECIPES = (MEAN_FIDELITY, MEAN_PROPAGATOR)

# Map geometry defaults: delay between base pulses in units of the pulse length.
MAP_TAU_OVER_TP = 2.0
MAP_T_P = 10.6
DECAY_HORIZON = 400
DECAY_STOP = 0.2


def _program(seq: Union[SequenceSpec, PulseProgram]) -> PulseProgram:
    return expand_sequence(seq) if isinstance(seq, SequenceSpec) else seq


@dataclass
class FidelityCurve:
    pulse_count: np.ndarray
    fidelity: np.ndarray
    stderr: np.ndarray
    recipe: str
    label: str = ""


@dataclass
class MapResult:
    epsilon_axis: np.ndarray
    offset_axis: np.ndarray
    fidelity_grid: np.ndarray
    pulses_applied: int = 100
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.epsilon_axis = np.asarray(self.epsilon_axis, dtype=float)
        self.offset_axis = np.asarray(self.offset_axis, dtype=float)
        self.fidelity_grid = np.asarray(self.fidelity_grid, dtype=float)
        if self.fidelity_grid.shape != (len(self.epsilon_axis), len(self.offset_axis)):
            raise ValueError("fidelity_grid shape does not match the axes")

    def robust_fraction(self, threshold: float = 0.95) -> float:
        return float(np.mean(self.fidelity_grid > threshold))


@dataclass(frozen=True)
class DecayFit:
    t_1e: float
    method: str = "interpolated_crossing"
    valid: bool = True
    stderr: float = 0.0

    @property
    def censored(self) -> bool:
        return not self.valid


@dataclass(frozen=True)
class SweepRow:
    sequence: str
    tau_d_us: float
    duty_cycle: float
    t1e_us: float
    censored: bool
    t1e_stderr: float = 0.0


def fidelity_vs_pulses(seq, ensemble: GaussianEnsemble, max_pulses: int, recipe: str = MEAN_FIDELITY,
                       delta_pulses: bool = False) -> FidelityCurve:
    """Fidelity against identity after each of the first ``max_pulses`` pulse slots.

    ``mean_fidelity`` averages the per-draw fidelities; ``mean_propagator``
    scores the ensemble-averaged propagator.
    """
    if max_pulses < 1:
        raise ValueError("max_pulses must be >= 1")
    if recipe not in RECIPES:
        raise ValueError(f"recipe must be one of {RECIPES}")
    program = _program(seq)
    eps = ensemble_epsilons(ensemble)
    u = accumulated_propagators(program, max_pulses, eps, ensemble.offset, delta_pulses)
    counts = np.arange(1, max_pulses + 1)
    if recipe == MEAN_FIDELITY:
        f = fidelity(IDENTITY, u)
        mean = f.mean(axis=0)
        err = f.std(axis=0, ddof=1) / math.sqrt(len(eps)) if len(eps) > 1 else np.zeros(max_pulses)
    else:
        mean = fidelity(IDENTITY, u.mean(axis=0))
        err = np.zeros(max_pulses)
    return FidelityCurve(counts, mean, err, recipe, program.label)


def _map_row(offset: float, program: PulseProgram, eps_axis: np.ndarray, pulses: int, delta: bool) -> np.ndarray:
    u = accumulated_propagators(program, pulses, eps_axis, offset, delta, every=False)
    return fidelity(IDENTITY, u)


def default_map_program(seq: SequenceSpec) -> PulseProgram:
    """Compile ``seq`` with the default map geometry (``tau_d = 2 t_p``)."""
    return expand_sequence(replace(seq, t_p=MAP_T_P, tau_d=MAP_TAU_OVER_TP * MAP_T_P))


def fidelity_map(seq, epsilon_axis: Sequence[float], offset_axis: Sequence[float], pulses: int = 100,
                 delta_pulses: bool = False, workers: int = 1) -> MapResult:
    """Fidelity against identity after ``pulses`` base slots on a static-error grid.

    Rows (one offset each) are independent work items; every row is evaluated
    by the same call whatever the worker count.
    """
    eps_axis = np.asarray(epsilon_axis, dtype=float)
    off_axis = np.asarray(offset_axis, dtype=float)
    if eps_axis.size == 0 or off_axis.size == 0:
        raise ValueError("grid axes must be non-empty")
    program = _program(seq)
    rows = parallel_map(partial(_map_row, program=program, eps_axis=eps_axis, pulses=pulses, delta=delta_pulses),
                        [float(o) for o in off_axis], workers)
    grid = np.clip(np.array(rows).T, 0.0, 1.0)
    meta = {"tau_d_us": _tau_of(program), "t_p_us": program.t_p, "delta_pulses": delta_pulses}
    return MapResult(eps_axis, off_axis, grid, pulses, program.label, meta)


def _tau_of(program: PulseProgram) -> float:
    delays = [e.duration for e in program.events if isinstance(e, DelayEvent)]
    return float(max(delays)) if delays else 0.0


def decay_time(trace: TraceResult, method: str = "interpolated_crossing") -> DecayFit:
    """Time at which the normalized magnetization first drops below 1/e.

    Without a crossing the last sample time is returned as a censored lower
    bound.  ``exponential_fit`` instead fits ``exp(-t/T)`` to the samples
    above 0.2 and reports ``T``.
    """
    m = np.asarray(trace.magnetization, dtype=float)
    t = np.asarray(trace.times, dtype=float)
    if m.size == 0:
        raise ValueError("empty trace")
    if np.all(np.isnan(m)):
        raise ValueError("trace is all NaN")
    scale = m[0] if m[0] != 0 and not np.isnan(m[0]) else np.nanmax(np.abs(m))
    m = m / scale
    se = np.asarray(trace.stderr, dtype=float) / abs(scale) if trace.stderr is not None else np.zeros_like(m)
    level = math.exp(-1)
    if method == "exponential_fit":
        keep = (m > DECAY_STOP) & (t > 0) & ~np.isnan(m)
        if not np.any(keep):
            return DecayFit(float(t[-1]), method, False)
        slope = np.sum(t[keep] * np.log(m[keep])) / np.sum(t[keep] ** 2)
        if slope >= 0:
            return DecayFit(float(t[-1]), method, False)
        return DecayFit(float(-1.0 / slope), method, True)
    if method != "interpolated_crossing":
        raise ValueError(f"unknown method {method!r}")
    below = np.nonzero(m < level)[0]
    below = below[below > 0]
    if below.size == 0:
        return DecayFit(float(t[-1]), method, False)
    i = int(below[0])
    t0, t1, m0, m1 = t[i - 1], t[i], m[i - 1], m[i]
    frac = (m0 - level) / (m0 - m1)
    t_cross = float(t0 + frac * (t1 - t0))
    slope = abs((m1 - m0) / (t1 - t0)) if t1 > t0 else math.inf
    s = (1 - frac) * se[i - 1] + frac * se[i]
    return DecayFit(t_cross, method, True, float(s / slope) if slope > 0 else math.inf)


@dataclass(frozen=True)
class SweepCell:
    spec: SequenceSpec
    init: str
    ensemble: GaussianEnsemble
    bath: Optional[NoiseProcess]
    trajectory_count: int
    horizon: int = DECAY_HORIZON
    stop_below: Optional[float] = DECAY_STOP
    delta_pulses: bool = False


def run_sweep_cell(cell: SweepCell) -> SweepRow:
    program = expand_sequence(cell.spec)
    trace = ensemble_average(program, cell.horizon, InitialState(cell.init), cell.ensemble, cell.bath,
                             cell.trajectory_count, cell.delta_pulses, cell.stop_below)
    fit = decay_time(trace)
    return SweepRow(program.label, cell.spec.tau_d, duty_cycle(program), fit.t_1e, fit.censored, fit.stderr)


def sweep_cells(specs: Sequence[SequenceSpec], tau_d: Sequence[float], bath: Optional[NoiseProcess],
                ensemble: GaussianEnsemble, trajectory_count: int = 1, init: str = "x",
                horizon: int = DECAY_HORIZON, stop_below: Optional[float] = DECAY_STOP,
                delta_pulses: bool = False) -> list:
    """Work items in canonical (sequence-major, then tau_d) order.

    All cells share the ensemble and bath seeds, so every sequence sees the
    same flip-angle draws and bath paths.
    """
    return [SweepCell(replace(s, tau_d=float(td)), init, ensemble, bath, trajectory_count, horizon, stop_below,
                      delta_pulses)
            for s in specs for td in tau_d]


def duty_cycle_sweep(specs: Sequence[SequenceSpec], tau_d: Sequence[float], bath: Optional[NoiseProcess],
                     ensemble: GaussianEnsemble, trajectory_count: int = 1, init: str = "x",
                     horizon: int = DECAY_HORIZON, stop_below: Optional[float] = DECAY_STOP,
                     delta_pulses: bool = False, workers: int = 1) -> list:
    """1/e decay time versus duty cycle for every sequence and delay."""
    cells = sweep_cells(specs, tau_d, bath, ensemble, trajectory_count, init, horizon, stop_below, delta_pulses)
    return parallel_map(run_sweep_cell, cells, workers)
