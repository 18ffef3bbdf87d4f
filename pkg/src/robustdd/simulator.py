"""Propagation of pulse programs under control errors and classical dephasing.

The engine vectorises over ensemble members.  Without a bath the cycle
propagator of every member is computed once and applied repeatedly.  With a
bath each cycle is cut into pieces on which the noise is constant (pulses are
split at grid boundaries, delays are reduced to a single z rotation by the
integrated phase), all piece propagators of a block of cycles are evaluated in
one call, and the time-ordered product is formed by pairwise reduction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from robustdd.noise import (
    ControlError,
    GaussianEnsemble,
    NoiseProcess,
    OUBatch,
    ensemble_epsilons,
    grid_size,
)
from robustdd.sequences import DelayEvent, PulseEvent, PulseProgram
from robustdd.su2 import HamiltonianParams, bloch_vector, evolve_static, rotation, spinor_along

AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}

_EPS_T = 1e-9


@dataclass(frozen=True)
class InitialState:
    axis: str = "x"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"initial axis must be one of {sorted(AXES)}")

    @property
    def vector(self) -> np.ndarray:
        return np.array(AXES[self.axis])


@dataclass(frozen=True)
class NoisePath:
    """Sampled dephasing frequency, constant on ``[k dt, (k+1) dt)``."""

    values: np.ndarray
    dt: float

    @property
    def span(self) -> float:
        return len(self.values) * self.dt


@dataclass
class TraceResult:
    times: np.ndarray
    pulse_count: np.ndarray
    magnetization: np.ndarray
    stderr: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.pulse_count = np.asarray(self.pulse_count, dtype=int)
        self.magnetization = np.asarray(self.magnetization, dtype=float)
        if self.stderr is None:
            self.stderr = np.zeros_like(self.magnetization)
        self.stderr = np.asarray(self.stderr, dtype=float)


def _apply(u: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Left-multiply a stack of spinors ``(M, 2)`` or matrices ``(M, 2, 2)``."""
    if state.ndim == u.ndim - 1:
        return np.einsum("...ij,...j->...i", u, state)
    return np.matmul(u, state)


def ordered_product(u: np.ndarray, axis: int = -3) -> np.ndarray:
    """Time-ordered product along ``axis`` (earliest first) by pairwise reduction."""
    u = np.moveaxis(u, axis, -3)
    while u.shape[-3] > 1:
        if u.shape[-3] % 2:
            pad = np.broadcast_to(np.eye(2, dtype=complex), u.shape[:-3] + (1, 2, 2))
            u = np.concatenate([u, pad], axis=-3)
        u = np.matmul(u[..., 1::2, :, :], u[..., 0::2, :, :])
    return u[..., 0, :, :]


def reference_rabi(program: PulseProgram) -> float:
    return math.pi / program.t_p


def pulse_propagator(ev: PulseEvent, err: ControlError, omega_bath=0.0, delta_pulse: bool = False) -> np.ndarray:
    """Propagator of one rectangular pulse with static errors and bath frequency.

    ``delta_pulse`` applies the erroneous rotation instantaneously (no offset
    or bath acts during the pulse).
    """
    eps = np.asarray(err.epsilon, dtype=float)
    if delta_pulse:
        return rotation(ev.nominal_flip * (1 + eps), ev.phase)
    rabi = ev.rabi
    h = HamiltonianParams(rabi * (1 + eps), ev.phase, err.offset * rabi + np.asarray(omega_bath, dtype=float))
    return evolve_static(h, ev.duration)


def _static_event_props(program: PulseProgram, eps: np.ndarray, offset: float, delta: bool) -> list:
    """Per-event propagators ``(M, 2, 2)`` without a bath."""
    ref = reference_rabi(program)
    out = []
    for ev in program.events:
        if isinstance(ev, PulseEvent):
            out.append(_pulse_stack(ev, eps, offset, delta))
        else:
            zero = np.zeros_like(eps)
            out.append(evolve_static(HamiltonianParams(zero, 0.0, offset * ref + zero), ev.duration))
    return out


def _pulse_stack(ev: PulseEvent, eps: np.ndarray, offset: float, delta: bool) -> np.ndarray:
    if delta:
        return rotation(ev.nominal_flip * (1 + eps), ev.phase)
    rabi = ev.rabi
    return evolve_static(HamiltonianParams(rabi * (1 + eps), ev.phase, offset * rabi + 0 * eps), ev.duration)


def event_duration(ev, delta: bool) -> float:
    return 0.0 if (delta and isinstance(ev, PulseEvent)) else ev.duration


def effective_cycle_time(program: PulseProgram, delta: bool = False) -> float:
    return float(sum(event_duration(e, delta) for e in program.events))


def _grid_pieces(t0: float, t1: float, dt: float) -> list:
    """Split ``[t0, t1)`` at multiples of ``dt``; returns ``(grid index, length)`` pairs."""
    pieces = []
    t = t0
    while t1 - t > _EPS_T:
        k = int(math.floor(t / dt + _EPS_T))
        edge = min((k + 1) * dt, t1)
        if edge - t > _EPS_T:
            pieces.append((k, edge - t))
        t = edge
    return pieces


def slot_groups(program: PulseProgram) -> list:
    """Event lists of the pulse slots of one cycle, in time order.

    A slot runs from the start of its first pulse to the start of the next
    slot's first pulse; leading delays belong to the first slot and trailing
    delays to the last.
    """
    groups = []
    current = []
    seen = None
    for ev in program.events:
        if isinstance(ev, PulseEvent):
            if seen is not None and ev.slot != seen:
                groups.append(current)
                current = []
            seen = ev.slot
        current.append(ev)
    groups.append(current)
    return groups


class _SlotLayout:
    """Piece tables for consecutive slots ("units") of ``program`` on a noise grid."""

    def __init__(self, program: PulseProgram, delta: bool, dt: float):
        self.program = program
        self.delta = delta
        self.dt = dt
        self.groups = slot_groups(program)
        self.slots = len(self.groups)
        durations = [sum(event_duration(e, delta) for e in g) for g in self.groups]
        self.starts = np.concatenate([[0.0], np.cumsum(durations)[:-1]])
        self.ends = np.cumsum(durations)
        self.period = float(self.ends[-1])

    def unit_end(self, u: np.ndarray) -> np.ndarray:
        c, s = np.divmod(u, self.slots)
        return c * self.period + self.ends[s]

    def unit(self, u: int):
        """Piece rows ``(rabi, phase, length, detuned, [(k, w), ...])`` for unit ``u``."""
        c, s = divmod(u, self.slots)
        rows = []
        t = c * self.period + self.starts[s]
        for ev in self.groups[s]:
            d = event_duration(ev, self.delta)
            if isinstance(ev, PulseEvent):
                if self.delta:
                    rows.append((ev.rabi, ev.phase, ev.duration, False, []))
                else:
                    for k, w in _grid_pieces(t, t + d, self.dt):
                        rows.append((ev.rabi, ev.phase, w, True, [(k, w)]))
            elif d > 0:
                rows.append((0.0, 0.0, d, True, _grid_pieces(t, t + d, self.dt)))
            t += d
        return rows

    def block(self, u0: int, count: int):
        units = [self.unit(u) for u in range(u0, u0 + count)]
        width = max(len(r) for r in units)
        shape = (count, width)
        rabi = np.zeros(shape)
        phase = np.zeros(shape)
        length = np.zeros(shape)
        detuned = np.zeros(shape)
        ri, ci, wv = [], [], []
        ks = [k for rows in units for row in rows for k, _ in row[4]]
        k_lo = min(ks) if ks else 0
        k_hi = max(ks) if ks else 0
        for i, rows in enumerate(units):
            for j, (r, ph, ln, det, ws) in enumerate(rows):
                rabi[i, j], phase[i, j], length[i, j], detuned[i, j] = r, ph, ln, det
                for k, w in ws:
                    ri.append(i * width + j)
                    ci.append(k - k_lo)
                    wv.append(w)
        weights = sparse.csr_matrix((wv, (ri, ci)), shape=(count * width, k_hi - k_lo + 1))
        return rabi, phase, length, detuned, weights, k_lo, k_hi


class _NoiseBuffer:
    """Rolling window over OU paths, extended on demand."""

    def __init__(self, p: NoiseProcess, indices: Sequence[int]):
        self.batch = OUBatch(p, indices)
        self.start = 0
        self.values = np.empty((len(indices), 0))

    def window(self, k_lo: int, k_hi: int) -> np.ndarray:
        end = self.start + self.values.shape[1]
        if k_hi >= end:
            fresh = self.batch.take(max(k_hi + 1 - end, 256))
            self.values = np.concatenate([self.values, fresh], axis=1)
        drop = k_lo - self.start
        if drop > 0:
            self.values = self.values[:, drop:]
            self.start = k_lo
        return self.values[:, k_lo - self.start: k_hi + 1 - self.start]


class _PathBuffer:
    """Window over explicitly supplied paths ``(M, K)``."""

    def __init__(self, values: np.ndarray):
        self.values = np.atleast_2d(values)

    def window(self, k_lo: int, k_hi: int) -> np.ndarray:
        if k_hi >= self.values.shape[1]:
            raise ValueError("noise path shorter than program")
        return self.values[:, k_lo: k_hi + 1]


def _block_propagators(layout: _SlotLayout, u0: int, count: int, eps: np.ndarray, offset, noise,
                       member_path: Optional[np.ndarray] = None) -> np.ndarray:
    """Unit propagators ``(M, count, 2, 2)`` for units ``u0 .. u0+count-1``."""
    rabi, phase, length, detuned, weights, k_lo, k_hi = layout.block(u0, count)
    ref = reference_rabi(layout.program)
    window = noise.window(k_lo, k_hi)
    if member_path is not None:
        window = window[member_path]
    m = eps.shape[0]
    integrated = (weights @ window.T).T.reshape(m, count, -1)
    bath = integrated / np.where(length > 0, length, 1.0)
    offset = np.asarray(offset, dtype=float).reshape(-1, 1, 1) if np.ndim(offset) else offset
    detuning = detuned * (offset * ref + bath)
    drive = rabi * (1.0 + eps[:, None, None])
    u = evolve_static(HamiltonianParams(drive, phase, detuning), np.broadcast_to(length, drive.shape))
    return ordered_product(u, axis=-3)


def cycle_propagator(program: PulseProgram, err: ControlError = ControlError(), noise: Optional[NoisePath] = None,
                     delta_pulses: bool = False, cycle_index: int = 0) -> np.ndarray:
    """Propagator of one cycle; ``cycle_index`` selects the stretch of ``noise`` used.

    ``err.epsilon`` may be an array, in which case a stack is returned.
    """
    eps = np.atleast_1d(np.asarray(err.epsilon, dtype=float))
    if noise is None:
        props = _static_event_props(program, eps, err.offset, delta_pulses)
        u = ordered_product(np.stack(props, axis=-3), axis=-3)
    else:
        layout = _SlotLayout(program, delta_pulses, noise.dt)
        us = _block_propagators(layout, cycle_index * layout.slots, layout.slots, eps, err.offset,
                                _PathBuffer(noise.values))
        u = ordered_product(us, axis=-3)
    return u[0] if np.ndim(err.epsilon) == 0 else u


def slot_propagators(program: PulseProgram, eps, offset=0.0, delta_pulses: bool = False) -> np.ndarray:
    """Static-error propagators ``(M, S, 2, 2)`` of the pulse slots of one cycle."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    out = []
    for group in slot_groups(program):
        sub = PulseProgram(tuple(group), program.t_p, program.label)
        props = _static_event_props(sub, eps, offset, delta_pulses)
        out.append(ordered_product(np.stack(props, axis=-3), axis=-3))
    return np.stack(out, axis=-3)


# Units (pulse slots) evaluated per vectorised block when a bath is present.
# Fixed so that the floating-point reduction order never depends on run
# partitioning.
UNIT_BLOCK = 32

SAMPLING = ("cycle", "pulse")


def _propagate(program: PulseProgram, cycles: int, eps: np.ndarray, offset, init: InitialState, delta: bool,
               noise=None, member_path=None, dt: float = 1.0, stop_below: Optional[float] = None,
               sample: str = "cycle"):
    """Per-member projections on the error-free trajectory.

    Returns ``(proj, units)``: projections ``(M, n + 1)`` including the
    initial sample, and the index of the last slot covered by each of the
    ``n`` later samples.
    """
    if sample not in SAMPLING:
        raise ValueError(f"sample must be one of {SAMPLING}")
    layout = _SlotLayout(program, delta, dt)
    nslots = layout.slots
    ideal = slot_propagators(program, 0.0)[0]
    m = eps.shape[0]
    psi = np.broadcast_to(spinor_along(init.vector), (m, 2)).copy()
    ref = spinor_along(init.vector)
    proj = [np.ones(m)]
    units = []
    static = None if noise is not None else slot_propagators(program, eps, offset, delta)
    total = cycles * nslots
    u = 0
    while u < total:
        count = min(UNIT_BLOCK, total - u)
        if static is None:
            block = _block_propagators(layout, u, count, eps, offset, noise, member_path)
        for j in range(count):
            s = (u + j) % nslots
            step = static[:, s] if static is not None else block[:, j]
            psi = _apply(step, psi)
            ref = ideal[s] @ ref
            if sample == "pulse" or s == nslots - 1:
                proj.append(bloch_vector(psi) @ bloch_vector(ref))
                units.append(u + j)
                if stop_below is not None and proj[-1].mean() < stop_below:
                    return np.array(proj).T, np.array(units)
        u += count
    return np.array(proj).T, np.array(units, dtype=int)


def _axes(layout: _SlotLayout, units: np.ndarray):
    units = np.asarray(units, dtype=int)
    times = np.concatenate([[0.0], layout.unit_end(units)]) if units.size else np.zeros(1)
    counts = np.concatenate([[0], units + 1])
    return times, counts


def magnetization_trace(program: PulseProgram, cycles: int, err: ControlError = ControlError(),
                        noise: Optional[NoisePath] = None, init: InitialState = InitialState("x"),
                        delta_pulses: bool = False, sample: str = "cycle") -> TraceResult:
    """Stroboscopic magnetization of one pure-state trajectory.

    The projection is taken on the error-free Bloch vector at each sample,
    which at cycle boundaries of an identity cycle is the initial axis.
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    eps = np.atleast_1d(float(err.epsilon))
    if noise is None:
        proj, units = _propagate(program, cycles, eps, err.offset, init, delta_pulses, sample=sample)
        dt = 1.0
    else:
        need = effective_cycle_time(program, delta_pulses) * cycles
        if noise.span < need - _EPS_T:
            raise ValueError("noise path shorter than program")
        proj, units = _propagate(program, cycles, eps, err.offset, init, delta_pulses,
                                 noise=_PathBuffer(noise.values), dt=noise.dt, sample=sample)
        dt = noise.dt
    times, counts = _axes(_SlotLayout(program, delta_pulses, dt), units)
    return TraceResult(times, counts, proj[0], metadata={"label": program.label, "init": init.axis,
                                                        "epsilon": float(err.epsilon), "offset": float(err.offset),
                                                        "delta_pulses": delta_pulses, "sample": sample})


def ensemble_average(program: PulseProgram, cycles: int, init: InitialState = InitialState("x"),
                     ensemble: GaussianEnsemble = GaussianEnsemble(), bath: Optional[NoiseProcess] = None,
                     trajectory_count: int = 1, delta_pulses: bool = False,
                     stop_below: Optional[float] = None, sample: str = "cycle") -> TraceResult:
    """Mean trace over every pairing of a flip-angle draw with a bath path.

    ``stop_below`` ends the run at the first sample whose ensemble mean falls
    below the threshold.  The standard error uses the spread over members.
    """
    if trajectory_count < 1:
        raise ValueError("trajectory_count must be >= 1")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    eps_draws = ensemble_epsilons(ensemble)
    noisy = bath is not None and bath.sigma_b > 0
    dt = bath.dt if bath is not None else 1.0
    if noisy:
        eps = np.repeat(eps_draws, trajectory_count)
        member_path = np.tile(np.arange(trajectory_count), len(eps_draws))
        proj, units = _propagate(program, cycles, eps, ensemble.offset, init, delta_pulses,
                                 noise=_NoiseBuffer(bath, range(trajectory_count)), member_path=member_path,
                                 dt=dt, stop_below=stop_below, sample=sample)
    else:
        proj, units = _propagate(program, cycles, eps_draws, ensemble.offset, init, delta_pulses,
                                 stop_below=stop_below, sample=sample)
    times, counts = _axes(_SlotLayout(program, delta_pulses, dt), units)
    members = proj.shape[0]
    mean = proj.mean(axis=0)
    stderr = proj.std(axis=0, ddof=1) / math.sqrt(members) if members > 1 else np.zeros_like(mean)
    meta = {
        "label": program.label,
        "init": init.axis,
        "members": members,
        "ensemble": {"sigma": ensemble.sigma, "size": ensemble.size, "seed": ensemble.seed,
                     "offset": ensemble.offset},
        "bath": None if bath is None else {"tau_e": bath.tau_e, "sigma_b": bath.sigma_b, "dt": bath.dt,
                                           "seed": bath.seed},
        "trajectory_count": trajectory_count if noisy else 1,
        "delta_pulses": delta_pulses,
        "sample": sample,
    }
    return TraceResult(times, counts, mean, stderr, meta)


def accumulated_propagators(program: PulseProgram, pulses: int, eps, offset=0.0,
                            delta_pulses: bool = False, every: bool = True) -> np.ndarray:
    """Propagator after each of the first ``pulses`` slots (``(M, pulses, 2, 2)``).

    With ``every=False`` only the final propagator ``(M, 2, 2)`` is returned.
    """
    slots = slot_propagators(program, eps, offset, delta_pulses)
    s = slots.shape[-3]
    eye = np.broadcast_to(np.eye(2, dtype=complex), slots.shape[:-3] + (2, 2))
    if not every:
        full, rest = divmod(pulses, s)
        cyc = ordered_product(slots, axis=-3)
        u = eye.copy()
        for _ in range(full):
            u = np.matmul(cyc, u)
        if rest:
            u = np.matmul(ordered_product(slots[..., :rest, :, :], axis=-3), u)
        return u
    out = np.empty(slots.shape[:-3] + (pulses, 2, 2), dtype=complex)
    u = eye.copy()
    for n in range(pulses):
        u = np.matmul(slots[..., n % s, :, :], u)
        out[..., n, :, :] = u
    return out
