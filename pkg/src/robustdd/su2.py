"""Closed-form algebra of spin-1/2 propagators.

All functions broadcast over leading axes: a stack of propagators has shape
``(..., 2, 2)``.  Angles are in radians, times in microseconds and
frequencies in rad/us.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class HamiltonianParams:
    """Drive and detuning of ``H = (rabi/2)(cos(phase) sx + sin(phase) sy) + (detuning/2) sz``."""

    rabi: float
    phase: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.rabi) < 0):
            raise ValueError("rabi must be non-negative")


def _from_vector(c, hx, hy, hz) -> np.ndarray:
    """Build ``c*I - i*(hx sx + hy sy + hz sz)`` with broadcasting."""
    c, hx, hy, hz = np.broadcast_arrays(
        np.asarray(c, dtype=float),
        np.asarray(hx, dtype=float),
        np.asarray(hy, dtype=float),
        np.asarray(hz, dtype=float),
    )
    out = np.empty(c.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * hz
    out[..., 0, 1] = -hy - 1j * hx
    out[..., 1, 0] = hy - 1j * hx
    out[..., 1, 1] = c + 1j * hz
    return out


def rotation(theta, phi) -> np.ndarray:
    """Rotation by ``theta`` about the in-plane axis at azimuth ``phi``.

    Returns ``exp(-i theta (cos(phi) sx + sin(phi) sy) / 2)``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    s = np.sin(theta / 2)
    return _from_vector(np.cos(theta / 2), s * np.cos(phi), s * np.sin(phi), 0.0)


def z_rotation(theta) -> np.ndarray:
    """``diag(exp(-i theta/2), exp(+i theta/2))``."""
    theta = np.asarray(theta, dtype=float)
    return _from_vector(np.cos(theta / 2), 0.0, 0.0, np.sin(theta / 2))


def evolve_static(h: HamiltonianParams, t) -> np.ndarray:
    """Exact propagator of a time-independent drive for duration ``t``.

    Uses the axis-angle form ``cos(a) I - i t/2 sinc(a) (h . sigma)`` with
    ``a = t |h| / 2``; the sinc form keeps ``|h| = 0`` regular.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("duration must be non-negative")
    rabi = np.asarray(h.rabi, dtype=float)
    hx = rabi * np.cos(h.phase)
    hy = rabi * np.sin(h.phase)
    hz = np.asarray(h.detuning, dtype=float)
    half = 0.5 * t * np.sqrt(hx * hx + hy * hy + hz * hz)
    k = 0.5 * t * np.sinc(half / np.pi)
    return _from_vector(np.cos(half), k * hx, k * hy, k * hz)


def dagger(u: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(u, -1, -2))


def compose(sequence_of: Sequence[np.ndarray]) -> np.ndarray:
    """Time-ordered product; the first element acts first.

    ``compose([A, B, C])`` returns ``C @ B @ A``.
    """
    if len(sequence_of) == 0:
        raise ValueError("cannot compose an empty sequence")
    return reduce(lambda acc, u: np.matmul(u, acc), sequence_of[1:], np.asarray(sequence_of[0]))


def fidelity(target: np.ndarray, actual: np.ndarray) -> np.ndarray:
    """Normalized overlap ``|Tr(A B^+)| / sqrt(Tr(A A^+) Tr(B B^+))``."""
    a = np.asarray(target, dtype=complex)
    b = np.asarray(actual, dtype=complex)
    overlap = np.abs(np.einsum("...ij,...ij->...", a, np.conj(b)))
    na = np.einsum("...ij,...ij->...", a, np.conj(a)).real
    nb = np.einsum("...ij,...ij->...", b, np.conj(b)).real
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("fidelity is undefined for a zero matrix")
    return overlap / np.sqrt(na * nb)


def distance(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Phase-insensitive distance ``1 - |Tr(U^+ V)| / 2`` between unitaries."""
    overlap = np.abs(np.einsum("...ij,...ij->...", np.conj(u), v))
    return 1.0 - overlap / 2.0


def error_angle(u: np.ndarray) -> np.ndarray:
    """Rotation angle in ``[0, pi]`` of ``u`` modulo global phase.

    Computed with ``atan2`` on the Pauli components, which stays accurate for
    angles far below ``sqrt(machine epsilon)``.
    """
    u = np.asarray(u, dtype=complex)
    det = u[..., 0, 0] * u[..., 1, 1] - u[..., 0, 1] * u[..., 1, 0]
    u = u / np.sqrt(det)[..., None, None]
    c = 0.5 * (u[..., 0, 0] + u[..., 1, 1])
    vx = 0.5 * (u[..., 0, 1] + u[..., 1, 0])
    vy = 0.5 * (u[..., 0, 1] - u[..., 1, 0])
    vz = 0.5 * (u[..., 0, 0] - u[..., 1, 1])
    s = np.sqrt(np.abs(vx) ** 2 + np.abs(vy) ** 2 + np.abs(vz) ** 2)
    return 2.0 * np.arctan2(s, np.abs(c))


def bloch_vector(psi: np.ndarray) -> np.ndarray:
    """Bloch vector ``(<sx>, <sy>, <sz>)`` of normalized spinors ``(..., 2)``."""
    a = psi[..., 0]
    b = psi[..., 1]
    cross = np.conj(a) * b
    return np.stack([2 * cross.real, 2 * cross.imag, np.abs(a) ** 2 - np.abs(b) ** 2], axis=-1)


def spinor_along(axis) -> np.ndarray:
    """Pure state whose Bloch vector is the unit vector ``axis``."""
    x, y, z = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)
