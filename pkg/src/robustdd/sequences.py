"""Named dynamical-decoupling sequences compiled into flat, timed programs.

One cycle of a sequence is a tuple of :class:`PulseEvent` and
:class:`DelayEvent`.  ``X`` denotes a pi pulse at phase 0, ``Y`` a pi pulse at
phase pi/2.  Every base pulse carries a ``slot`` index; the five sub-pulses of
a Knill composite share the slot of the pulse they replace.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Union

import numpy as np

PI = np.pi
KNILL_PHASES = (PI / 6, 0.0, PI / 2, 0.0, PI / 6)


class Family(str, enum.Enum):
    CPMG = "cpmg"
    UDD = "udd"
    XY4 = "xy4"
    XY8 = "xy8"
    XY16 = "xy16"
    CDD = "cdd"
    KDD = "kdd"
    KNILL_WRAPPED = "knill_wrapped"


@dataclass(frozen=True)
class PulseEvent:
    nominal_flip: float
    phase: float
    duration: float
    slot: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")
        if not self.nominal_flip > 0:
            raise ValueError("nominal flip angle must be positive")

    @property
    def rabi(self) -> float:
        return self.nominal_flip / self.duration


@dataclass(frozen=True)
class DelayEvent:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("delay duration must be non-negative")


Event = Union[PulseEvent, DelayEvent]


@dataclass(frozen=True)
class PulseProgram:
    """One cycle of a pulse sequence.

    ``t_p`` is the nominal pi-pulse length; it fixes the reference Rabi
    frequency ``pi / t_p`` in which offsets are expressed.
    """

    events: tuple
    t_p: float
    label: str = ""

    @property
    def cycle_time(self) -> float:
        return float(sum(e.duration for e in self.events))

    @property
    def pulses(self) -> list:
        return [e for e in self.events if isinstance(e, PulseEvent)]

    @property
    def pulse_count(self) -> int:
        return len(self.pulses)

    @property
    def slot_count(self) -> int:
        """Number of base pi-pulse slots (a composite pulse counts once)."""
        return len({e.slot for e in self.pulses})

    @property
    def irradiation_time(self) -> float:
        return float(sum(e.duration for e in self.pulses))

    @property
    def phases(self) -> list:
        return [e.phase for e in self.pulses]

    def reversed(self, label: str = "") -> "PulseProgram":
        return _program(self.events[::-1], self.t_p, label or self.label)

    def __add__(self, other: "PulseProgram") -> "PulseProgram":
        return _program(self.events + other.events, self.t_p, self.label)


@dataclass(frozen=True)
class SequenceSpec:
    family: Family
    tau_d: float
    t_p: float
    symmetric: bool = False
    concatenation_level: int = 1
    pulse_count: int = 1
    robust_pulses: bool = False
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.tau_d < 0:
            raise ValueError("tau_d must be non-negative")
        if not self.t_p > 0:
            raise ValueError("t_p must be positive")
        if self.concatenation_level < 1:
            raise ValueError("concatenation_level must be >= 1")
        if self.pulse_count < 1:
            raise ValueError("pulse_count must be >= 1")

    @property
    def label(self) -> str:
        name = self.family.value.upper()
        if self.family is Family.CDD:
            name += str(self.concatenation_level)
        elif self.family in (Family.CPMG, Family.UDD) and self.pulse_count != 1:
            name += f"-{self.pulse_count}"
        if self.symmetric:
            name += "-sym"
        if self.robust_pulses:
            name += "-knill"
        return name


def _program(events: Iterable[Event], t_p: float, label: str) -> PulseProgram:
    """Renumber slots in time order and drop zero-length delays.

    Consecutive pulses carrying the same slot id form one slot.
    """
    out = []
    slot = -1
    last = None
    for ev in events:
        if isinstance(ev, DelayEvent):
            if ev.duration > 0:
                out.append(ev)
            continue
        if ev.slot != last:
            slot += 1
            last = ev.slot
        out.append(replace(ev, slot=slot))
    return PulseProgram(tuple(out), float(t_p), label)


def _tag(events: list, prefix: int) -> list:
    """Offset slot ids so that concatenated blocks never collide."""
    return [replace(e, slot=e.slot + prefix) if isinstance(e, PulseEvent) else e for e in events]


def _pulse(phase: float, t_p: float, slot: int) -> PulseEvent:
    return PulseEvent(PI, float(phase), float(t_p), slot)


def _block(pattern: Iterable, t_p: float) -> list:
    """Turn a pattern of delay lengths (floats) and phases (tuples) into events."""
    events = []
    slot = 0
    for item in pattern:
        if isinstance(item, tuple):
            events.append(_pulse(item[0], t_p, slot))
            slot += 1
        else:
            events.append(DelayEvent(float(item)))
    return events


def _concat(*blocks: list) -> list:
    """Concatenate event lists keeping every pulse in its own slot."""
    out = []
    offset = 0
    for block in blocks:
        ids = [e.slot for e in block if isinstance(e, PulseEvent)]
        out.extend(_tag(block, offset))
        if ids:
            offset += max(ids) + 1
    return out


X = (0.0,)
Y = (PI / 2,)


def xy4_events(tau_d: float, t_p: float, symmetric: bool) -> list:
    if symmetric:
        half = [tau_d / 2, X, tau_d, Y, tau_d / 2]
    else:
        half = [tau_d, X, tau_d, Y]
    return _block(half * 2, t_p)


def _time_reverse(events: list) -> list:
    return list(events[::-1])


def _shift_phases(events: list, shift: float) -> list:
    return [replace(e, phase=e.phase + shift) if isinstance(e, PulseEvent) else e for e in events]


def xy8_events(tau_d: float, t_p: float, symmetric: bool) -> list:
    if symmetric:
        base = xy4_events(tau_d, t_p, True)
        return _concat(base, _time_reverse(base))
    # Delay-then-pulse timing is kept; only the pulse order is reversed.
    return _block([item for p in (X, Y, X, Y, Y, X, Y, X) for item in (tau_d, p)], t_p)


def xy16_events(tau_d: float, t_p: float, symmetric: bool) -> list:
    base = xy8_events(tau_d, t_p, symmetric)
    return _concat(base, _shift_phases(base, PI))


def knill_expand(phi: float, t_p: float, intra_delay: float = 0.0) -> PulseProgram:
    """Five pi pulses at phases ``(pi/6, 0, pi/2, 0, pi/6) + phi``.

    With ``intra_delay = 0`` the pulses form one composite pi pulse and share
    a single slot.  With a positive delay they are independent pulses of a
    KDD block (edge delays excluded).
    """
    if not t_p > 0:
        raise ValueError("t_p must be positive")
    if intra_delay < 0:
        raise ValueError("intra_delay must be non-negative")
    events = []
    for k, offset in enumerate(KNILL_PHASES):
        if k and intra_delay > 0:
            events.append(DelayEvent(intra_delay))
        slot = 0 if intra_delay == 0 else k
        events.append(_pulse(phi + offset, t_p, slot))
    return _program(events, t_p, f"knill({phi:.6g})")


def kdd_events(tau_d: float, t_p: float, phi: float = 0.0) -> list:
    blocks = []
    for shift in (0.0, PI / 2, 0.0, PI / 2):
        core = list(knill_expand(phi + shift, t_p, tau_d).events) if tau_d > 0 else _block(
            [(phi + shift + o,) for o in KNILL_PHASES], t_p
        )
        blocks.append([DelayEvent(tau_d / 2)] + core + [DelayEvent(tau_d / 2)])
    return _concat(*blocks)


def udd_times(pulse_count: int, total_time: float) -> list:
    """Uhrig pulse centres ``T sin^2(pi j / (2N + 2))`` for ``j = 1..N``."""
    n = int(pulse_count)
    if n < 1 or not total_time > 0:
        raise ValueError("need pulse_count >= 1 and total_time > 0")
    j = np.arange(1, n + 1)
    return list(total_time * np.sin(PI * j / (2 * n + 2)) ** 2)


def udd_events(pulse_count: int, tau_d: float, t_p: float) -> list:
    total = pulse_count * (tau_d + t_p)
    centres = udd_times(pulse_count, total)
    edges = [0.0]
    for c in centres:
        edges += [c - t_p / 2, c + t_p / 2]
    edges.append(total)
    gaps = np.diff(edges)[::2]
    if np.any(gaps < -1e-12):
        raise ValueError("UDD pulses overlap: increase tau_d or reduce pulse_count")
    pattern = []
    for k, gap in enumerate(gaps):
        pattern.append(max(float(gap), 0.0))
        if k < pulse_count:
            pattern.append(X)
    return _block(pattern, t_p)


def cpmg_events(pulse_count: int, tau_d: float, t_p: float) -> list:
    return _block([tau_d / 2, X, tau_d / 2] * pulse_count, t_p)


def _first_half(events: list) -> list:
    """Events of the first half (in time) of a cycle, splitting a delay if needed."""
    total = sum(e.duration for e in events)
    half = total / 2
    out = []
    t = 0.0
    for ev in events:
        end = t + ev.duration
        if end <= half + 1e-12:
            out.append(ev)
        elif isinstance(ev, DelayEvent):
            if half - t > 0:
                out.append(DelayEvent(half - t))
            break
        else:
            if t < half - 1e-12:
                raise ValueError("cycle midpoint falls inside a pulse")
            break
        t = end
    return out


def _cdd_events(n: int, symmetric: bool, tau_d: float, t_p: float) -> list:
    if n == 1:
        return xy4_events(tau_d, t_p, symmetric)
    inner = _cdd_events(n - 1, symmetric, tau_d, t_p)
    x = _block([X], t_p)
    y = _block([Y], t_p)
    if symmetric:
        root = _first_half(inner)
        half = _concat(root, x, inner, y, root)
    else:
        half = _concat(inner, x, inner, y)
    return _concat(half, half)


def cdd_recurse(n: int, symmetric: bool, tau_d: float, t_p: float) -> PulseProgram:
    """Concatenated decoupling of level ``n``; level 1 is XY-4."""
    if n < 1:
        raise ValueError("concatenation level must be >= 1")
    label = f"CDD{n}" + ("-sym" if symmetric else "")
    return _program(_cdd_events(n, symmetric, tau_d, t_p), t_p, label)


def _robust(events: list, t_p: float) -> list:
    """Replace every pi pulse in place by a back-to-back Knill composite."""
    out = []
    for ev in events:
        if isinstance(ev, PulseEvent):
            out.extend(
                replace(ev, phase=ev.phase + o) for o in KNILL_PHASES
            )
        else:
            out.append(ev)
    return out


def expand_sequence(spec: SequenceSpec) -> PulseProgram:
    """Compile one cycle of ``spec`` into a flat :class:`PulseProgram`."""
    f = spec.family
    if f is Family.KDD and (spec.robust_pulses or spec.symmetric):
        raise ValueError("KDD has no symmetric or robust-pulse variant")
    if f in (Family.CPMG, Family.UDD, Family.KNILL_WRAPPED) and spec.symmetric:
        raise ValueError(f"{f.value} has no symmetric variant")
    if f is Family.CPMG:
        events = cpmg_events(spec.pulse_count, spec.tau_d, spec.t_p)
    elif f is Family.UDD:
        events = udd_events(spec.pulse_count, spec.tau_d, spec.t_p)
    elif f is Family.XY4:
        events = xy4_events(spec.tau_d, spec.t_p, spec.symmetric)
    elif f is Family.XY8:
        events = xy8_events(spec.tau_d, spec.t_p, spec.symmetric)
    elif f is Family.XY16:
        events = xy16_events(spec.tau_d, spec.t_p, spec.symmetric)
    elif f is Family.CDD:
        events = _cdd_events(spec.concatenation_level, spec.symmetric, spec.tau_d, spec.t_p)
    elif f is Family.KDD:
        events = kdd_events(spec.tau_d, spec.t_p, spec.phase)
    elif f is Family.KNILL_WRAPPED:
        if spec.robust_pulses:
            raise ValueError("knill_wrapped is already a composite pulse")
        events = [DelayEvent(spec.tau_d / 2)] + _robust([_pulse(spec.phase, spec.t_p, 0)], spec.t_p) + [
            DelayEvent(spec.tau_d / 2)
        ]
    else:  # pragma: no cover
        raise ValueError(f"unsupported family {f!r}")
    if spec.robust_pulses:
        events = _robust(events, spec.t_p)
    return _program(events, spec.t_p, spec.label)


def duty_cycle(program: PulseProgram) -> float:
    """Irradiation time divided by cycle time."""
    total = program.cycle_time
    if not total > 0:
        raise ValueError("cycle_time must be positive")
    return program.irradiation_time / total
