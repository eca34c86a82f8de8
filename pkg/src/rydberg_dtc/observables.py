"""Stroboscopic observables: P(n), its Fourier spectrum S(nu), the order
parameter Q(n) and the critical cycle number n_c."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import ModelParams

# |P| below this counts as zero for the sign of the order parameter
SIGN_DEADBAND = 1e-12


def population_imbalance(state: np.ndarray, diag: np.ndarray) -> float:
    state = np.asarray(state)
    if state.shape[-1] != diag.shape[0]:
        raise ConfigError(
            f"state dimension {state.shape[-1]} does not match diagonal {diag.shape[0]}"
        )
    return float(np.dot(diag, np.abs(state) ** 2))


def order_parameter(p, deadband: float = SIGN_DEADBAND) -> np.ndarray:
    """Q(n) = sgn[(-1)^n P(n)] for n = 1..n_f.

    ``p`` holds P(0)..P(n_f); P(0) is not used.  Values with |P| <= deadband
    repeat the previous Q, starting from Q(0) = -1.
    """
    p = np.asarray(p, dtype=float)
    n = np.arange(1, len(p))
    s = np.where(n % 2 == 0, 1.0, -1.0) * p[1:]
    q = np.sign(s).astype(np.int8)
    dead = np.abs(p[1:]) <= deadband
    if dead.any():
        prev = -1
        for k in range(len(q)):
            if dead[k]:
                q[k] = prev
            prev = q[k]
    return q


@dataclass(frozen=True)
class CriticalCycle:
    n_c: int
    censored: bool


def critical_cycle_number(q) -> CriticalCycle:
    """Number of cycles before Q first turns +1.

    ``q[k]`` is Q(k+1).  With no flip, n_c is the horizon and is censored.
    """
    q = np.asarray(q)
    if q.size == 0:
        raise ConfigError("order-parameter sequence is empty")
    hits = np.flatnonzero(q > 0)
    if hits.size == 0:
        return CriticalCycle(int(q.size), True)
    return CriticalCycle(int(hits[0]), False)


def flip_cycles(q) -> np.ndarray:
    """Cycles n at which Q(n) differs from Q(n-1) (with Q(0) = -1)."""
    q = np.concatenate([[-1], np.asarray(q)])
    return np.flatnonzero(np.diff(q) != 0) + 1


@dataclass(frozen=True)
class Spectrum:
    nu: np.ndarray
    values: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def peaks(self, k: int = 3) -> list[tuple[float, float]]:
        """Top-k local maxima of |S| as (nu, |S|), strongest first."""
        mag = self.magnitude
        m = mag.size
        left = np.roll(mag, 1)
        right = np.roll(mag, -1)
        cand = np.flatnonzero((mag >= left) & (mag >= right) & (mag > 0))
        cand = cand[np.argsort(-mag[cand], kind="stable")][:k]
        if m == 1:
            cand = np.array([0])
        return [(float(self.nu[i]), float(mag[i])) for i in cand]


def fourier_spectrum(p, grid_size: int | None = None) -> Spectrum:
    """S(nu_k) = (1/n_f) sum_{n=1}^{n_f} P(n) exp(2 pi i n nu_k), nu_k = k/grid_size.

    ``p`` holds P(1)..P(n_f).  ``grid_size`` defaults to n_f (plain DFT); larger
    values zero-pad.
    """
    p = np.asarray(p, dtype=float)
    n_f = p.size
    if n_f == 0:
        raise ConfigError("cannot take the spectrum of an empty sequence")
    if n_f < 2:
        raise ConfigError("need at least two cycles for a spectrum")
    m = n_f if grid_size is None else int(grid_size)
    if m < n_f:
        raise ConfigError(f"grid_size {m} must be >= n_f {n_f}")
    k = np.arange(m)
    # ifft carries exp(+2 pi i m k / M) / M with m starting at 0; shift to n = m + 1
    values = np.fft.ifft(p, m) * (m / n_f) * np.exp(2j * np.pi * k / m)
    return Spectrum(k / m, values)


def beating_period_epsilon(epsilon: float, t1: float = 1.0) -> float:
    """Beat period pi/(2|epsilon| t1) of uncoupled atoms with a Rabi error."""
    if epsilon == 0:
        raise ConfigError("beating period is undefined for epsilon = 0")
    return math.pi / (2.0 * abs(epsilon) * t1)


def beating_period_detuning(params: ModelParams) -> float:
    """Beat period 2 pi / ((Omega_e - Omega) t1), Omega_e = sqrt(Omega^2 + Delta^2)."""
    if params.delta == 0:
        raise ConfigError("beating period is undefined for delta = 0")
    omega = params.omega
    omega_e = math.hypot(omega, params.delta)
    return 2.0 * math.pi / ((omega_e - omega) * params.t1)


@dataclass
class Trajectory:
    """Stroboscopic record of one run; ``p[n]`` is P(n) for n = 0..n_f."""

    params: ModelParams | None
    p: np.ndarray
    norm: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)

    @property
    def n_f(self) -> int:
        return self.p.size - 1

    @property
    def q(self) -> np.ndarray:
        return order_parameter(self.p)

    @property
    def critical(self) -> CriticalCycle:
        return critical_cycle_number(self.q)

    @property
    def n_c(self) -> int:
        return self.critical.n_c

    @property
    def censored(self) -> bool:
        return self.critical.censored

    def spectrum(self, grid_size: int | None = None) -> Spectrum:
        return fourier_spectrum(self.p[1:], grid_size)
