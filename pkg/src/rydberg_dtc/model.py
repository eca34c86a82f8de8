"""Model parameters, computational basis and stage Hamiltonians.

Basis convention: bit ``j`` of a basis index is 1 iff atom ``j`` sits in the
Rydberg state |r>, so index 0 is |g...g> and index ``2**L - 1`` is |r...r>.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DimensionCapError

DEFAULT_MAX_ATOMS = 16


class Variant(str, enum.Enum):
    ORIGINAL = "original"
    IMPROVED = "improved"
    SIMPLIFIED = "simplified"


class Boundary(str, enum.Enum):
    RING = "ring"
    OPEN = "open"


class Stage(enum.IntEnum):
    ONE = 1
    TWO = 2


@dataclass(frozen=True)
class ModelParams:
    """One Floquet system.  Frequencies in rad/us, times in us.

    ``epsilon`` perturbs the Rabi frequency: ``omega = pi/(2 t1) + epsilon``.
    """

    L: int
    epsilon: float = 0.0
    delta: float = 0.0
    v: float = 0.0
    t1: float = 1.0
    t2: float = 10.0
    variant: Variant = Variant.ORIGINAL
    boundary: Boundary = Boundary.RING
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if isinstance(self.L, bool) or int(self.L) != self.L or self.L < 1:
            raise ConfigError(f"L must be an integer >= 1, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))
        for name in ("epsilon", "delta", "v", "t1", "t2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.t1 <= 0:
            raise ConfigError(f"t1 must be > 0, got {self.t1}")
        if self.t2 < 0:
            raise ConfigError(f"t2 must be >= 0, got {self.t2}")
        if self.gamma is not None:
            gamma = float(self.gamma)
            if not math.isfinite(gamma) or gamma < 0:
                raise ConfigError(f"gamma must be >= 0, got {self.gamma!r}")
            object.__setattr__(self, "gamma", gamma)

    @property
    def omega(self) -> float:
        return math.pi / (2.0 * self.t1) + self.epsilon

    @property
    def dim(self) -> int:
        return 2**self.L

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def mirrored(self) -> "ModelParams":
        """Same system with the signs of delta and v flipped."""
        return self.replace(delta=-self.delta, v=-self.v)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["variant"] = self.variant.value
        d["boundary"] = self.boundary.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class BasisDescriptor:
    L: int

    @property
    def dim(self) -> int:
        return 2**self.L

    @cached_property
    def occupations(self) -> np.ndarray:
        """``(dim, L)`` array of 0/1 Rydberg occupations."""
        idx = np.arange(self.dim)
        return ((idx[:, None] >> np.arange(self.L)[None, :]) & 1).astype(np.int8)

    def index_of(self, bitstring: str) -> int:
        """Index of a product state given as ``'grr...'`` or ``'011...'`` (atom 0 first)."""
        if len(bitstring) != self.L:
            raise ConfigError(f"bitstring {bitstring!r} does not have length L={self.L}")
        index = 0
        for j, ch in enumerate(bitstring):
            if ch in "r1":
                index |= 1 << j
            elif ch not in "g0":
                raise ConfigError(f"bad character {ch!r} in bitstring {bitstring!r}")
        return index


def check_dimension(L: int, max_atoms: int = DEFAULT_MAX_ATOMS) -> None:
    if L > max_atoms:
        raise DimensionCapError(L, max_atoms)


def bonds(L: int, boundary: Boundary = Boundary.RING) -> list[tuple[int, int]]:
    """Nearest-neighbour pairs.  A two-atom ring has a single bond."""
    if L < 2:
        return []
    if Boundary(boundary) is Boundary.OPEN or L == 2:
        return [(j, j + 1) for j in range(L - 1)]
    return [(j, (j + 1) % L) for j in range(L)]


def excitation_count(basis: BasisDescriptor) -> np.ndarray:
    return basis.occupations.sum(axis=1).astype(float)


def bond_count(basis: BasisDescriptor, boundary: Boundary = Boundary.RING) -> np.ndarray:
    """Number of excited nearest-neighbour pairs in every basis state."""
    occ = basis.occupations
    out = np.zeros(basis.dim)
    for a, b in bonds(basis.L, boundary):
        out += occ[:, a] * occ[:, b]
    return out


def population_difference_diagonal(basis: BasisDescriptor) -> np.ndarray:
    """Diagonal of (1/L) sum_j (N_j^r - N_j^g): entry i is (2 popcount(i) - L)/L."""
    return (2.0 * excitation_count(basis) - basis.L) / basis.L


@dataclass(frozen=True)
class StageHamiltonian:
    """Stage one is a dense real-symmetric matrix; stage two is its diagonal."""

    stage: Stage
    matrix: np.ndarray

    @property
    def is_diagonal(self) -> bool:
        return self.matrix.ndim == 1

    def dense(self) -> np.ndarray:
        return np.diag(self.matrix) if self.is_diagonal else self.matrix


def _stage_terms(params: ModelParams, stage: Stage) -> tuple[float, float, bool]:
    """(detuning, interaction, drive on) for a variant/stage pair."""
    variant = params.variant
    if stage is Stage.ONE:
        if variant is Variant.SIMPLIFIED:
            return params.delta, 0.0, True
        return params.delta, params.v, True
    if stage is Stage.TWO:
        if variant is Variant.IMPROVED:
            return 0.0, params.v, False
        return params.delta, params.v, False
    raise ConfigError(f"unknown stage {stage!r}")


def build_hamiltonian(
    params: ModelParams, stage: Stage | int, max_atoms: int = DEFAULT_MAX_ATOMS
) -> StageHamiltonian:
    try:
        stage = Stage(stage)
    except ValueError:
        raise ConfigError(f"unknown stage {stage!r}") from None
    check_dimension(params.L, max_atoms)
    basis = BasisDescriptor(params.L)
    delta, v, driven = _stage_terms(params, stage)
    diag = delta * excitation_count(basis) + v * bond_count(basis, params.boundary)
    if not driven:
        return StageHamiltonian(stage, diag)

    dim = basis.dim
    h = np.zeros((dim, dim))
    h[np.diag_indices(dim)] = diag
    idx = np.arange(dim)
    for j in range(params.L):
        h[idx, idx ^ (1 << j)] = params.omega
    return StageHamiltonian(stage, h)


def vdw_coupling(c6: float, r: float) -> float:
    """Van der Waals coupling C6 / R**6."""
    if not r > 0:
        raise ConfigError(f"interatomic distance must be > 0, got {r!r}")
    return c6 / r**6
