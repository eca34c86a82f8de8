"""Lindblad dynamics with Rydberg decay on vectorized density matrices.

Vectorization is row-major: rho_ij -> |i> (x) |j>, i.e. ``rho.ravel()``.  Under
this map A rho B becomes (A (x) B^T) |rho>>, which fixes the Liouvillian

    L = -i (H (x) 1 - 1 (x) H^T)
        + Gamma sum_j [ s_j (x) s_j^* - 1/2 (n_j (x) 1 + 1 (x) n_j^T) ]

with s_j the lowering operator of atom j and n_j = s_j^+ s_j.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConfigError, DimensionCapError, NoSignalError, TraceDriftError
from .model import (
    BasisDescriptor,
    ModelParams,
    Stage,
    build_hamiltonian,
    population_difference_diagonal,
)
from .observables import Trajectory

log = logging.getLogger(__name__)

DEFAULT_MAX_ATOMS = 7
TRACE_ABORT = 1e-6
NEGATIVITY_WARN = 1e-6
EIG_COND_LIMIT = 1e8
EIG_RESIDUAL = 1e-8


def _check_cap(L: int, max_atoms: int) -> None:
    if L > max_atoms:
        raise DimensionCapError(L, max_atoms, what="dissipative (4^L Liouville space)")


@dataclass
class DensityState:
    """Vectorized density matrix with bookkeeping helpers."""

    rho_vec: np.ndarray

    def __post_init__(self):
        self.rho_vec = np.asarray(self.rho_vec, dtype=complex)
        dim = int(round(np.sqrt(self.rho_vec.size)))
        if dim * dim != self.rho_vec.size:
            raise ConfigError(f"vector of length {self.rho_vec.size} is not a vectorized square matrix")

    @classmethod
    def from_matrix(cls, rho: np.ndarray) -> "DensityState":
        return cls(np.asarray(rho, dtype=complex).ravel())

    @classmethod
    def pure(cls, psi: np.ndarray) -> "DensityState":
        psi = np.asarray(psi, dtype=complex)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @classmethod
    def ground(cls, L: int) -> "DensityState":
        dim = 2**L
        vec = np.zeros(dim * dim, dtype=complex)
        vec[0] = 1.0
        return cls(vec)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.rho_vec.size)))

    def matrix(self) -> np.ndarray:
        return self.rho_vec.reshape(self.dim, self.dim)

    def populations(self) -> np.ndarray:
        return self.rho_vec[:: self.dim + 1].real

    def trace(self) -> complex:
        return complex(self.rho_vec[:: self.dim + 1].sum())

    def hermiticity_error(self) -> float:
        m = self.matrix()
        return float(np.max(np.abs(m - m.conj().T)))

    def min_eigenvalue(self) -> float:
        m = self.matrix()
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def _lowering(L: int, j: int) -> sp.csr_matrix:
    """sigma_j^- = |g><r| on atom j in the full 2^L space."""
    dim = 2**L
    idx = np.arange(dim)
    excited = (idx >> j) & 1 == 1
    cols = idx[excited]
    rows = cols ^ (1 << j)
    return sp.csr_matrix((np.ones(cols.size), (rows, cols)), shape=(dim, dim))


def build_liouvillian(
    params: ModelParams, stage: Stage | int, max_atoms: int = DEFAULT_MAX_ATOMS
) -> np.ndarray:
    """Dense Liouvillian of one stage, size 4^L x 4^L."""
    _check_cap(params.L, max_atoms)
    gamma = params.gamma or 0.0
    ham = build_hamiltonian(params, stage)
    dim = params.dim
    eye = sp.identity(dim, format="csr")
    h = sp.diags(ham.matrix) if ham.is_diagonal else sp.csr_matrix(ham.matrix)
    liou = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
    if gamma > 0:
        for j in range(params.L):
            s = _lowering(params.L, j)
            n = (s.T @ s).tocsr()
            liou = liou + gamma * (
                sp.kron(s, s.conj()) - 0.5 * (sp.kron(n, eye) + sp.kron(eye, n.T))
            )
    return liou.toarray()


@dataclass(frozen=True)
class StagePropagatorSuper:
    """exp(L T) for one stage; ``method`` records how it was obtained."""

    stage: Stage
    matrix: np.ndarray
    method: str
    eigenvalues: np.ndarray | None = field(default=None, repr=False)


def stage_propagator(
    liouvillian: np.ndarray, duration: float, stage: Stage = Stage.ONE
) -> StagePropagatorSuper:
    """exp(L T) from the eigendecomposition of L, or scaling-and-squaring when
    the eigenvectors are ill-conditioned or the residual check fails."""
    if duration == 0:
        return StagePropagatorSuper(stage, np.eye(liouvillian.shape[0], dtype=complex), "identity")
    try:
        w, s = np.linalg.eig(liouvillian)
        cond = np.linalg.cond(s)
        if cond <= EIG_COND_LIMIT:
            s_inv = np.linalg.inv(s)
            residual = np.max(np.abs((s * w) @ s_inv - liouvillian))
            if residual < EIG_RESIDUAL:
                prop = (s * np.exp(w * duration)) @ s_inv
                return StagePropagatorSuper(stage, prop, "eig", w)
            log.debug("Liouvillian eigen-residual %.2e, using expm", residual)
        else:
            log.debug("Liouvillian eigenvector condition %.2e, using expm", cond)
    except np.linalg.LinAlgError as exc:
        log.debug("Liouvillian eigendecomposition failed (%s), using expm", exc)
    return StagePropagatorSuper(stage, sla.expm(liouvillian * duration), "expm")


@dataclass
class DissipativeResult:
    trajectory: Trajectory
    final_state: DensityState
    max_trace_drift: float
    max_hermiticity_error: float
    min_eigenvalue: float
    warnings: list[str] = field(default_factory=list)


def compile_stages(
    params: ModelParams, max_atoms: int = DEFAULT_MAX_ATOMS
) -> tuple[StagePropagatorSuper, StagePropagatorSuper]:
    one = stage_propagator(build_liouvillian(params, Stage.ONE, max_atoms), params.t1, Stage.ONE)
    two = stage_propagator(build_liouvillian(params, Stage.TWO, max_atoms), params.t2, Stage.TWO)
    return one, two


def evolve_density(
    params: ModelParams,
    n_f: int,
    rho0: DensityState | None = None,
    *,
    max_atoms: int = DEFAULT_MAX_ATOMS,
    stages: tuple[StagePropagatorSuper, StagePropagatorSuper] | None = None,
    check_every: int = 0,
) -> DissipativeResult:
    """Stroboscopic P(n) of the open chain, starting by default from |g...g>.

    Trace drift beyond ``TRACE_ABORT`` raises.  Positivity is checked at the end
    (and every ``check_every`` cycles if > 0); violations only warn.
    """
    if n_f < 1:
        raise ConfigError(f"n_f must be >= 1, got {n_f}")
    _check_cap(params.L, max_atoms)
    rho = DensityState.ground(params.L) if rho0 is None else rho0
    dim = params.dim
    if rho.dim != dim:
        raise ConfigError(f"initial state has dimension {rho.dim}, expected {dim}")
    one, two = stages if stages is not None else compile_stages(params, max_atoms)
    cycle = two.matrix @ one.matrix

    diag = population_difference_diagonal(BasisDescriptor(params.L))
    p = np.empty(n_f + 1)
    vec = rho.rho_vec.copy()
    tr0 = vec[:: dim + 1].sum().real
    p[0] = float(diag @ vec[:: dim + 1].real)
    worst_trace = 0.0
    worst_herm = 0.0
    min_eig = DensityState(vec).min_eigenvalue()
    notes: list[str] = []
    for n in range(1, n_f + 1):
        vec = cycle @ vec
        pops = vec[:: dim + 1]
        drift = abs(pops.sum() - tr0)
        worst_trace = max(worst_trace, drift)
        if drift > TRACE_ABORT:
            raise TraceDriftError(n, drift, TRACE_ABORT)
        m = vec.reshape(dim, dim)
        worst_herm = max(worst_herm, float(np.max(np.abs(m - m.conj().T))))
        p[n] = float(diag @ pops.real)
        if check_every and n % check_every == 0:
            min_eig = min(min_eig, DensityState(vec).min_eigenvalue())
    final = DensityState(vec)
    min_eig = min(min_eig, final.min_eigenvalue())
    if min_eig < -NEGATIVITY_WARN:
        msg = f"density matrix eigenvalue {min_eig:.3e} below -{NEGATIVITY_WARN:.0e}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    traj = Trajectory(params, p, meta={"mode": "lindblad", "methods": [one.method, two.method]})
    return DissipativeResult(traj, final, worst_trace, worst_herm, min_eig, notes)


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    log_amplitude: float
    window: tuple[int, int]
    residual: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "log_amplitude": self.log_amplitude,
            "window": list(self.window),
            "residual": self.residual,
            "n_points": self.n_points,
        }


def envelope(p, window: tuple[int, int | None] = (10, None), block: int = 2):
    """Maxima of |P(n)| over consecutive blocks of ``block`` cycles.

    Returns (cycles, values) of the block maxima inside ``window``.
    """
    p = np.asarray(p, dtype=float)
    start, end = window
    end = p.size - 1 if end is None else end
    if not 0 <= start < end <= p.size - 1:
        raise ConfigError(f"window {window} outside 0..{p.size - 1}")
    a = np.abs(p[start : end + 1])
    m = (a.size // block) * block
    if m == 0:
        return np.array([], dtype=int), np.array([])
    blocks = a[:m].reshape(-1, block)
    k = np.argmax(blocks, axis=1)
    cycles = start + np.arange(0, m, block) + k
    return cycles, blocks[np.arange(blocks.shape[0]), k]


def fit_decay(
    p,
    window: tuple[int, int | None] = (10, None),
    block: int = 2,
    floor: float = 1e-10,
    min_points: int = 5,
) -> DecayFit:
    """Fit |P(n)| ~ A exp(-alpha n) by least squares on the log of the envelope."""
    cycles, values = envelope(p, window, block)
    keep = values > floor
    if keep.sum() < min_points:
        raise NoSignalError(
            f"only {int(keep.sum())} envelope points above {floor:g} in window {window}"
        )
    x = cycles[keep].astype(float)
    y = np.log(values[keep])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    end = window[1] if window[1] is not None else len(p) - 1
    return DecayFit(float(-slope), float(intercept), (int(window[0]), int(end)), residual, int(keep.sum()))
