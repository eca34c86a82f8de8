"""Per-cycle propagators and stroboscopic evolution.

U1 = exp(-i H1 T1) comes from a full eigendecomposition of the real-symmetric
stage-one Hamiltonian; U2 = exp(-i H2 T2) is a vector of phases.  For long
horizons the Floquet operator U_F = U2 U1 is brought to Schur form (diagonal
for a unitary) so that U_F^n psi0 is evaluated directly at any n.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, EigensolverError, NormDriftError
from .model import (
    DEFAULT_MAX_ATOMS,
    BasisDescriptor,
    ModelParams,
    Stage,
    build_hamiltonian,
    population_difference_diagonal,
)
from .observables import SIGN_DEADBAND, Trajectory

log = logging.getLogger(__name__)

DEFAULT_CYCLE_BUDGET = 1_000_000
NORM_ABORT = 1e-6
SPECTRAL_RESIDUAL = 1e-8
# complex elements per spectral evaluation block
_BLOCK_ELEMENTS = 1 << 21


class Mode(str, enum.Enum):
    ITERATE = "iterate"
    SPECTRAL = "spectral"


@dataclass(frozen=True)
class FloquetPropagator:
    params: ModelParams
    u1: np.ndarray
    u2_phases: np.ndarray
    eigphases: np.ndarray | None = None
    eigvecs: np.ndarray | None = None
    spectral_failed: bool = False

    @property
    def dim(self) -> int:
        return self.u2_phases.size

    @property
    def has_spectral(self) -> bool:
        return self.eigvecs is not None

    def floquet_matrix(self) -> np.ndarray:
        return self.u2_phases[:, None] * self.u1

    def step(self, psi: np.ndarray) -> np.ndarray:
        return self.u2_phases * (self.u1 @ psi)


def stage_one_unitary(params: ModelParams, max_atoms: int = DEFAULT_MAX_ATOMS) -> np.ndarray:
    h1 = build_hamiltonian(params, Stage.ONE, max_atoms).matrix
    try:
        lam, vecs = np.linalg.eigh(h1)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"stage-one eigendecomposition failed: {exc}") from exc
    return (vecs * np.exp(-1j * lam * params.t1)) @ vecs.T


def stage_two_phases(params: ModelParams, max_atoms: int = DEFAULT_MAX_ATOMS) -> np.ndarray:
    h2 = build_hamiltonian(params, Stage.TWO, max_atoms).matrix
    return np.exp(-1j * h2 * params.t2)


def _unitary_spectrum(uf: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    try:
        t, z = sla.schur(uf, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        log.warning("Schur decomposition failed: %s", exc)
        return None
    d = np.diag(t)
    d = d / np.abs(d)
    residual = np.max(np.abs((z * d) @ z.conj().T - uf))
    if not residual < SPECTRAL_RESIDUAL:
        log.warning("spectral residual %.2e exceeds %.0e", residual, SPECTRAL_RESIDUAL)
        return None
    return np.angle(d), z


def compile_cycle(
    params: ModelParams, spectral: bool = False, max_atoms: int = DEFAULT_MAX_ATOMS
) -> FloquetPropagator:
    """Build U1 and the U2 phases; optionally the eigen-form of U_F = U2 U1.

    If the unitary decomposition does not pass its residual check the
    propagator is returned without it and ``spectral_failed`` is set; evolution
    then falls back to iterated multiplication.
    """
    u1 = stage_one_unitary(params, max_atoms)
    u2 = stage_two_phases(params, max_atoms)
    if not spectral:
        return FloquetPropagator(params, u1, u2)
    result = _unitary_spectrum(u2[:, None] * u1)
    if result is None:
        warnings.warn(
            "unitary decomposition of U_F failed its residual check; "
            "falling back to iterated multiplication",
            RuntimeWarning,
            stacklevel=2,
        )
        return FloquetPropagator(params, u1, u2, spectral_failed=True)
    phases, vecs = result
    return FloquetPropagator(params, u1, u2, phases, vecs)


def initial_state(L: int, bitstring: str | None = None) -> np.ndarray:
    """Product state; defaults to all atoms in the ground state."""
    basis = BasisDescriptor(L)
    psi = np.zeros(basis.dim, dtype=complex)
    psi[0 if bitstring is None else basis.index_of(bitstring)] = 1.0
    return psi


def _check_budget(n_f: int, budget: int) -> None:
    if n_f < 1:
        raise ConfigError(f"n_f must be >= 1, got {n_f}")
    if n_f > budget:
        raise ConfigError(f"n_f={n_f} exceeds the cycle budget {budget}")


def _flip_index(p_block: np.ndarray, n_block: np.ndarray) -> int | None:
    """Position in the block of the first cycle with (-1)^n P(n) > 0."""
    s = np.where(n_block % 2 == 0, 1.0, -1.0) * p_block
    hit = np.flatnonzero(s > SIGN_DEADBAND)
    return int(hit[0]) if hit.size else None


def _evolve_iterate(prop, psi0, n_f, diag, stop_at_flip, record_norm):
    p = np.empty(n_f + 1)
    norms = np.empty(n_f + 1) if record_norm else None
    psi = psi0.astype(complex, copy=True)
    p[0] = float(diag @ (psi.real**2 + psi.imag**2))
    if record_norm:
        norms[0] = np.linalg.norm(psi)
    n0 = np.linalg.norm(psi)
    last = n_f
    for n in range(1, n_f + 1):
        psi = prop.step(psi)
        prob = psi.real**2 + psi.imag**2
        norm = np.sqrt(prob.sum())
        if abs(norm - n0) > NORM_ABORT:
            raise NormDriftError(n, abs(norm - n0), NORM_ABORT)
        if record_norm:
            norms[n] = norm
        p[n] = float(diag @ prob)
        if stop_at_flip and (-1) ** n * p[n] > SIGN_DEADBAND:
            last = n
            break
    p = p[: last + 1]
    return p, (norms[: last + 1] if record_norm else None)


def _evolve_spectral(prop, psi0, n_f, diag, stop_at_flip, record_norm):
    w = prop.eigvecs
    c = w.conj().T @ psi0
    max_block = max(1, _BLOCK_ELEMENTS // prop.dim)
    # early flips are common in scans, so grow the block geometrically
    block = min(64, max_block) if stop_at_flip else max_block
    p_parts, norm_parts = [], []
    start = 0
    while start <= n_f:
        n = np.arange(start, min(start + block, n_f + 1))
        block = min(2 * block, max_block)
        amp = w @ (c[:, None] * np.exp(1j * np.outer(prop.eigphases, n)))
        prob = amp.real**2 + amp.imag**2
        pb = diag @ prob
        if record_norm:
            norm_parts.append(np.sqrt(prob.sum(axis=0)))
        if stop_at_flip:
            k = _flip_index(pb[n > 0], n[n > 0])
            if k is not None:
                cut = k + 1 + int(n[0] == 0)
                p_parts.append(pb[:cut])
                if record_norm:
                    norm_parts[-1] = norm_parts[-1][:cut]
                break
        p_parts.append(pb)
        start = int(n[-1]) + 1
    p = np.concatenate(p_parts)
    return p, (np.concatenate(norm_parts) if record_norm else None)


def evolve(
    prop: FloquetPropagator,
    n_f: int,
    psi0: np.ndarray | None = None,
    mode: Mode | str = Mode.ITERATE,
    *,
    stop_at_flip: bool = False,
    record_norm: bool = False,
    budget: int = DEFAULT_CYCLE_BUDGET,
) -> Trajectory:
    """Stroboscopic P(n) for n = 0..n_f.

    With ``stop_at_flip`` the record ends at the first cycle where the order
    parameter turns +1 (enough to determine n_c).  Spectral mode needs a
    propagator compiled with ``spectral=True``; if that decomposition failed,
    iteration is used instead and ``meta['fallback']`` is set.
    """
    _check_budget(n_f, budget)
    mode = Mode(mode)
    if psi0 is None:
        psi0 = initial_state(prop.params.L)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (prop.dim,):
        raise ConfigError(f"initial state has shape {psi0.shape}, expected ({prop.dim},)")
    diag = population_difference_diagonal(BasisDescriptor(prop.params.L))

    meta = {"mode": mode.value}
    if mode is Mode.SPECTRAL and not prop.has_spectral:
        if not prop.spectral_failed:
            raise ConfigError("spectral mode needs compile_cycle(..., spectral=True)")
        meta["fallback"] = Mode.ITERATE.value
        mode = Mode.ITERATE
    runner = _evolve_spectral if mode is Mode.SPECTRAL else _evolve_iterate
    p, norms = runner(prop, psi0, n_f, diag, stop_at_flip, record_norm)
    return Trajectory(prop.params, p, norms, meta)


def stroboscopic_state(prop: FloquetPropagator, psi0: np.ndarray, n: int) -> np.ndarray:
    """U_F(n) psi0, via the eigen-form when available."""
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    psi0 = np.asarray(psi0, dtype=complex)
    if n == 0:
        return psi0.copy()
    if prop.has_spectral:
        w = prop.eigvecs
        return w @ (np.exp(1j * n * prop.eigphases) * (w.conj().T @ psi0))
    psi = psi0
    for _ in range(n):
        psi = prop.step(psi)
    return psi


def simulate(
    params: ModelParams,
    n_f: int,
    mode: Mode | str = Mode.ITERATE,
    psi0: np.ndarray | None = None,
    **kwargs,
) -> Trajectory:
    """Compile and evolve in one call."""
    prop = compile_cycle(params, spectral=Mode(mode) is Mode.SPECTRAL)
    return evolve(prop, n_f, psi0, mode, **kwargs)
