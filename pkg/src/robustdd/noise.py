"""Static control errors, flip-angle ensembles and Ornstein-Uhlenbeck dephasing.

Random streams are keyed by ``(seed, stream, index)`` through
:class:`numpy.random.SeedSequence`, so a trajectory's samples depend only on
its own index and never on how a run is partitioned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

DEFAULT_SEED = 20100614
DEFAULT_TAU_E = 100.0
DEFAULT_DT = 1.0

_EPSILON_STREAM = 1
_BATH_STREAM = 2


def rng_for(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream, int(index))))


@dataclass(frozen=True)
class ControlError:
    """Flip-angle fraction (actual flip = nominal * (1 + epsilon)) and offset in units of the Rabi frequency."""

    epsilon: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.epsilon)) and np.all(np.isfinite(self.offset))):
            raise ValueError("control errors must be finite")


@dataclass(frozen=True)
class GaussianEnsemble:
    sigma: float = 0.0
    size: int = 1
    seed: int = DEFAULT_SEED
    offset: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.size < 1:
            raise ValueError("size must be >= 1")


@dataclass(frozen=True)
class NoiseProcess:
    """OU dephasing frequency with correlation time ``tau_e`` (us) and stationary std ``sigma_b`` (rad/us)."""

    tau_e: float = DEFAULT_TAU_E
    sigma_b: float = 0.0
    dt: float = DEFAULT_DT
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not self.tau_e > 0:
            raise ValueError("tau_e must be positive")
        if self.sigma_b < 0:
            raise ValueError("sigma_b must be non-negative")
        if not (0 < self.dt <= self.tau_e / 10 * (1 + 1e-12)):
            raise ValueError("dt must satisfy 0 < dt <= tau_e / 10")

    @property
    def decay(self) -> float:
        return math.exp(-self.dt / self.tau_e)

    @property
    def kick(self) -> float:
        return self.sigma_b * math.sqrt(-math.expm1(-2 * self.dt / self.tau_e))


def sigma_b_for_free_decay(t_1e: float = 70.0, tau_e: float = DEFAULT_TAU_E) -> float:
    """Bath strength whose free-induction decay reaches 1/e at ``t_1e``.

    Inverts ``sigma_b^2 tau_e^2 (exp(-t/tau_e) - 1 + t/tau_e) = 1``.
    """
    x = t_1e / tau_e
    return 1.0 / (tau_e * math.sqrt(math.expm1(-x) + x))


DEFAULT_SIGMA_B = sigma_b_for_free_decay()


def ensemble_epsilons(e: GaussianEnsemble) -> np.ndarray:
    if e.sigma == 0:
        return np.zeros(e.size)
    return e.sigma * rng_for(e.seed, _EPSILON_STREAM).standard_normal(e.size)


def sample_ensemble(e: GaussianEnsemble) -> list:
    """``size`` static errors with ``epsilon ~ N(0, sigma^2)``."""
    return [ControlError(float(eps), e.offset) for eps in ensemble_epsilons(e)]


class OUBatch:
    """Block-wise generator of OU paths for a set of trajectory indices.

    Successive calls to :meth:`take` continue every path, so a path cut into
    blocks is bit-identical to the same path drawn in one call.
    """

    def __init__(self, p: NoiseProcess, indices: Sequence[int]):
        self.p = p
        self.indices = list(indices)
        self._rngs = [rng_for(p.seed, _BATH_STREAM, i) for i in self.indices]
        self._last = None

    def take(self, n: int) -> np.ndarray:
        m = len(self.indices)
        if n <= 0:
            return np.empty((m, 0))
        if self.p.sigma_b == 0:
            return np.zeros((m, n))
        xi = np.stack([g.standard_normal(n) for g in self._rngs])
        a, b = self.p.decay, self.p.kick
        if self._last is None:
            first = self.p.sigma_b * xi[:, :1]
            rest = lfilter([b], [1.0, -a], xi[:, 1:], axis=1, zi=a * first)[0]
            out = np.concatenate([first, rest], axis=1)
        else:
            out = lfilter([b], [1.0, -a], xi, axis=1, zi=a * self._last[:, None])[0]
        self._last = out[:, -1].copy()
        return out


def grid_size(p: NoiseProcess, total_time: float) -> int:
    """Number of grid values needed to cover ``[0, total_time]``."""
    return int(math.floor(total_time / p.dt + 1e-9)) + 1


def ou_trajectory(p: NoiseProcess, total_time: float, index: int = 0) -> np.ndarray:
    """Dephasing frequency ``omega(k dt)`` on the grid covering ``[0, total_time]``.

    The value at grid point ``k`` holds on ``[k dt, (k+1) dt)``.
    """
    if not total_time > 0:
        raise ValueError("total_time must be positive")
    return OUBatch(p, [index]).take(grid_size(p, total_time))[0]
