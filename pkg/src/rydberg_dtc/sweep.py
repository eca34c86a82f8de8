"""Parameter sweeps: n_c(Delta) curves, n_c(L) scaling, delta-n_c phase
diagrams and the (Delta, V) -> (-Delta, -V) symmetry audit.

Every grid point compiles its own propagator and runs single-threaded, so
results do not depend on worker count or scheduling order.  Results are
always returned sorted by grid key.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigError, DTCError
from .floquet import Mode, compile_cycle, evolve
from .model import ModelParams

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 20_000
AXIS_NAMES = ("L", "epsilon", "delta", "v", "t1", "t2", "gamma")
THREADS_ENV = "RYDBERG_DTC_THREADS"


def parse_grid(text: str) -> tuple[float, ...]:
    """``"a:b:step"`` (inclusive of b), ``"a:b"`` for unit steps, or ``"x,y,z"``."""
    text = text.strip()
    if not text:
        raise ConfigError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"bad grid {text!r}; use start:stop[:step]")
        try:
            start, stop = float(parts[0]), float(parts[1])
            step = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise ConfigError(f"bad grid {text!r}") from None
        if step <= 0 or not all(map(math.isfinite, (start, stop, step))):
            raise ConfigError(f"grid step must be finite and > 0 in {text!r}")
        if stop < start:
            raise ConfigError(f"grid stop below start in {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        # round to suppress accumulation noise like 0.30000000000000004
        return tuple(round(start + k * step, 12) for k in range(count))
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None
    if not all(map(math.isfinite, values)):
        raise ConfigError(f"grid {text!r} has non-finite values")
    return values


@dataclass(frozen=True)
class Axis:
    name: str
    grid: tuple[float, ...]

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ConfigError(f"unknown axis {self.name!r}; use one of {AXIS_NAMES}")
        grid = tuple(float(x) for x in self.grid)
        if not grid:
            raise ConfigError(f"axis {self.name!r} has an empty grid")
        if not all(map(math.isfinite, grid)):
            raise ConfigError(f"axis {self.name!r} has non-finite grid values")
        if self.name == "L":
            if any(int(x) != x or x < 1 for x in grid):
                raise ConfigError("L grid must hold integers >= 1")
            grid = tuple(int(x) for x in grid)
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class SweepSpec:
    template: ModelParams
    axis1: Axis
    axis2: Axis | None = None
    n_f_budget: int = DEFAULT_BUDGET
    outputs: tuple[str, ...] = ("csv",)
    mode: str = Mode.SPECTRAL.value

    def __post_init__(self):
        if not isinstance(self.axis1, Axis) or not isinstance(self.axis2, (Axis, type(None))):
            raise ConfigError("sweep axes must be Axis instances")
        if int(self.n_f_budget) != self.n_f_budget or self.n_f_budget < 1:
            raise ConfigError(f"n_f_budget must be an integer >= 1, got {self.n_f_budget!r}")
        if self.axis2 is not None and self.axis2.name == self.axis1.name:
            raise ConfigError("the two sweep axes must differ")
        Mode(self.mode)
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def axes(self) -> list[Axis]:
        return [self.axis1] if self.axis2 is None else [self.axis1, self.axis2]

    def points(self) -> list[tuple[tuple, ModelParams]]:
        """(grid key, params) for every grid point, in grid order."""
        out = []
        grids = [a.grid for a in self.axes]
        names = [a.name for a in self.axes]
        for key in np.ndindex(*(len(g) for g in grids)):
            values = tuple(g[k] for g, k in zip(grids, key))
            out.append((values, self.template.replace(**dict(zip(names, values)))))
        return out

    def to_dict(self) -> dict:
        d = {
            "template": self.template.to_dict(),
            "axis1": {"name": self.axis1.name, "grid": list(self.axis1.grid)},
            "n_f_budget": self.n_f_budget,
            "outputs": list(self.outputs),
            "mode": self.mode,
        }
        if self.axis2 is not None:
            d["axis2"] = {"name": self.axis2.name, "grid": list(self.axis2.grid)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        unknown = set(d) - {"template", "axis1", "axis2", "n_f_budget", "outputs", "mode"}
        if unknown:
            raise ConfigError(f"unknown sweep spec key(s): {sorted(unknown)}")
        try:
            template = ModelParams.from_dict(d["template"])
            axis1 = _axis_from(d["axis1"])
        except KeyError as exc:
            raise ConfigError(f"sweep spec is missing {exc}") from None
        axis2 = _axis_from(d["axis2"]) if d.get("axis2") else None
        return cls(
            template,
            axis1,
            axis2,
            n_f_budget=d.get("n_f_budget", DEFAULT_BUDGET),
            outputs=tuple(d.get("outputs", ("csv",))),
            mode=d.get("mode", Mode.SPECTRAL.value),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SweepSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"sweep spec is not valid JSON: {exc}") from None


def _axis_from(d) -> Axis:
    if not isinstance(d, dict) or "name" not in d or "grid" not in d:
        raise ConfigError(f"axis must be {{'name': ..., 'grid': ...}}, got {d!r}")
    grid = parse_grid(d["grid"]) if isinstance(d["grid"], str) else tuple(d["grid"])
    return Axis(d["name"], grid)


@dataclass
class PointResult:
    key: tuple
    params: ModelParams
    n_c: int | None
    censored: bool
    n_f: int
    error: str | None = None
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None


def critical_cycles(params: ModelParams, budget: int = DEFAULT_BUDGET, mode: str = "spectral"):
    """(n_c, censored) for one system, stopping at the first flip."""
    prop = compile_cycle(params, spectral=Mode(mode) is Mode.SPECTRAL)
    traj = evolve(prop, budget, mode=mode, stop_at_flip=True, budget=budget)
    crit = traj.critical
    return crit.n_c, crit.censored


def _run_point(args) -> PointResult:
    key, params, budget, mode = args
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        try:
            n_c, censored = critical_cycles(params, budget, mode)
            return PointResult(key, params, n_c, censored, budget, None, time.perf_counter() - t0)
        except DTCError as exc:
            log.warning("point %s failed: %s", key, exc)
            return PointResult(key, params, None, False, budget, str(exc), time.perf_counter() - t0)


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from None
        if n < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def run_points(
    points: list[tuple[tuple, ModelParams]],
    budget: int = DEFAULT_BUDGET,
    mode: str = "spectral",
    threads: int | None = None,
) -> list[PointResult]:
    """Evaluate n_c on every point; failures are recorded, not raised."""
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    jobs = [(key, p, budget, mode) for key, p in points]
    if threads == 1 or len(jobs) <= 1:
        results = [_run_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_point, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    return sorted(results, key=lambda r: r.key)


def run_sweep(spec: SweepSpec, threads: int | None = None) -> list[PointResult]:
    return run_points(spec.points(), spec.n_f_budget, spec.mode, threads)


# ---- detuning scans --------------------------------------------------------


@dataclass
class DetuningScan:
    points: list[PointResult]
    mirrored: list[PointResult] | None = None

    @property
    def delta(self) -> np.ndarray:
        return np.array([r.params.delta for r in self.points])

    @property
    def n_c(self) -> np.ndarray:
        return np.array([np.nan if r.n_c is None else r.n_c for r in self.points], dtype=float)

    @property
    def censored(self) -> np.ndarray:
        return np.array([r.censored for r in self.points])

    def mirror_mismatches(self) -> list[tuple[float, int | None, int | None]]:
        """Grid points where n_c(Delta, V) != n_c(-Delta, -V)."""
        if self.mirrored is None:
            return []
        by_delta = {r.params.delta: r for r in self.mirrored}
        out = []
        for r in self.points:
            m = by_delta.get(-r.params.delta)
            if m is None or m.n_c != r.n_c:
                out.append((r.params.delta, r.n_c, None if m is None else m.n_c))
        return out


def scan_detuning(spec: SweepSpec, mirror: bool = False, threads: int | None = None) -> DetuningScan:
    if spec.axis1.name != "delta" or spec.axis2 is not None:
        raise ConfigError("scan_detuning needs a single 'delta' axis")
    pts = spec.points()
    if not mirror:
        return DetuningScan(run_points(pts, spec.n_f_budget, spec.mode, threads))
    tagged = [((0,) + k, p) for k, p in pts] + [((1,) + k, p.mirrored()) for k, p in pts]
    res = run_points(tagged, spec.n_f_budget, spec.mode, threads)
    for r in res:
        r.key = r.key[1:]
    half = len(pts)
    return DetuningScan(res[:half], res[half:])


def half_max_runs(x, y, fraction: float = 0.5) -> list[tuple[float, float]]:
    """Maximal runs of consecutive grid points with y >= fraction * max(y),
    as (x_first, x_last)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0:
        return []
    above = y >= fraction * np.nanmax(y)
    runs, start = [], None
    for k, flag in enumerate(above):
        if flag and start is None:
            start = k
        if not flag and start is not None:
            runs.append((x[start], x[k - 1]))
            start = None
    if start is not None:
        runs.append((x[start], x[-1]))
    return runs


def peak_widths_at_half_max(x, y) -> list[float]:
    """Width of each half-max run, measured between its first and last point."""
    return [b - a for a, b in half_max_runs(x, y)]


def is_single_lobe(x, y, fraction: float = 0.5) -> bool:
    """True when all points at or above fraction*max form one contiguous run,
    i.e. no interior dip below that level inside the central lobe."""
    return len(half_max_runs(x, y, fraction)) == 1


# ---- n_c(L) scaling --------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    n_points: int


@dataclass
class ScalingResult:
    points: list[PointResult]
    fit: ScalingFit | None

    @property
    def L(self) -> np.ndarray:
        return np.array([r.params.L for r in self.points])

    @property
    def n_c(self) -> np.ndarray:
        return np.array([np.nan if r.n_c is None else r.n_c for r in self.points], dtype=float)


def fit_log_nc(L, n_c, censored) -> ScalingFit | None:
    """OLS of log n_c on L over uncensored points with n_c > 0."""
    L = np.asarray(L, dtype=float)
    n_c = np.asarray(n_c, dtype=float)
    keep = ~np.asarray(censored, dtype=bool) & np.isfinite(n_c) & (n_c > 0)
    if keep.sum() < 3:
        return None
    slope, intercept = np.polyfit(L[keep], np.log(n_c[keep]), 1)
    return ScalingFit(float(slope), float(intercept), int(keep.sum()))


def scaling_nc_vs_L(spec: SweepSpec, threads: int | None = None) -> ScalingResult:
    if spec.axis1.name != "L" or spec.axis2 is not None:
        raise ConfigError("scaling_nc_vs_L needs a single 'L' axis")
    res = run_sweep(spec, threads)
    ok = [r for r in res if r.ok]
    fit = fit_log_nc([r.params.L for r in ok], [r.n_c for r in ok], [r.censored for r in ok])
    if fit is None:
        log.info("fewer than 3 uncensored points; exponential fit omitted")
    return ScalingResult(res, fit)


# ---- phase diagram ---------------------------------------------------------


class CellClass(str, enum.Enum):
    GROWING = "+"
    FLAT = "0"
    SHRINKING = "-"

    @classmethod
    def of(cls, delta_n_c: int) -> "CellClass":
        if delta_n_c > 0:
            return cls.GROWING
        if delta_n_c < 0:
            return cls.SHRINKING
        return cls.FLAT


@dataclass(frozen=True)
class PhaseCell:
    L: int
    epsilon: float
    delta_n_c: int
    cls: CellClass
    censored: bool = False

    def __post_init__(self):
        if self.cls is not CellClass.of(self.delta_n_c):
            raise ConfigError(f"class {self.cls} inconsistent with delta_n_c={self.delta_n_c}")


@dataclass
class PhaseDiagram:
    cells: list[PhaseCell]
    points: list[PointResult]

    def critical_size(self, epsilon: float) -> int | None:
        """First L with delta_n_c <= 0 at this epsilon, or None."""
        for c in sorted((c for c in self.cells if c.epsilon == epsilon), key=lambda c: c.L):
            if c.delta_n_c <= 0:
                return c.L
        return None


def phase_cells(points: list[PointResult]) -> list[PhaseCell]:
    """delta_n_c = n_c(L) - n_c(L_prev) between consecutive grid sizes."""
    by_eps: dict[float, list[PointResult]] = {}
    for r in points:
        by_eps.setdefault(r.params.epsilon, []).append(r)
    cells = []
    for eps in sorted(by_eps):
        rows = sorted(by_eps[eps], key=lambda r: r.params.L)
        for prev, cur in zip(rows, rows[1:]):
            if not (prev.ok and cur.ok):
                continue
            d = cur.n_c - prev.n_c
            cells.append(
                PhaseCell(cur.params.L, eps, d, CellClass.of(d), prev.censored or cur.censored)
            )
    return sorted(cells, key=lambda c: (c.L, c.epsilon))


def phase_diagram(spec: SweepSpec, threads: int | None = None) -> PhaseDiagram:
    names = {a.name for a in spec.axes}
    if names != {"L", "epsilon"}:
        raise ConfigError("phase_diagram needs axes 'L' and 'epsilon'")
    res = run_sweep(spec, threads)
    return PhaseDiagram(phase_cells(res), res)


# ---- symmetry audit --------------------------------------------------------


@dataclass(frozen=True)
class SymmetryViolation:
    value: float
    max_p_diff: float
    n_c: int
    n_c_mirrored: int


@dataclass
class SymmetryReport:
    axis: str
    n_points: int
    n_f: int
    tolerance: float
    max_p_diff: float
    violations: list[SymmetryViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def symmetry_audit(
    params: ModelParams,
    grid,
    axis: str = "delta",
    n_f: int = 500,
    tolerance: float = 1e-10,
    mode: str = "iterate",
) -> SymmetryReport:
    """Compare P(n) for (Delta, V) and (-Delta, -V) over a grid of one parameter."""
    grid = Axis(axis, tuple(grid)).grid
    worst = 0.0
    violations = []
    spectral = Mode(mode) is Mode.SPECTRAL
    for value in grid:
        p = params.replace(**{axis: value})
        a = evolve(compile_cycle(p, spectral), n_f, mode=mode)
        b = evolve(compile_cycle(p.mirrored(), spectral), n_f, mode=mode)
        diff = float(np.max(np.abs(a.p - b.p)))
        worst = max(worst, diff)
        if diff > tolerance or a.n_c != b.n_c:
            violations.append(SymmetryViolation(float(value), diff, a.n_c, b.n_c))
    return SymmetryReport(axis, len(grid), n_f, tolerance, worst, violations)
