"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (including
oracle mismatches).  Model parameters come from ``--config`` JSON and/or flat
flags; flags win on conflict.  ``RYDBERG_DTC_OUT`` sets the default output
directory and ``RYDBERG_DTC_THREADS`` the default worker count.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dissipative import evolve_density, fit_decay
from .errors import ConfigError, DTCError
from .floquet import Mode, compile_cycle, evolve, initial_state
from .model import Boundary, ModelParams, Variant
from .oracle import CLOSED_FORMS, CONVENTIONS, compare_with_exact, random_draw
from .persist import (
    RunManifest,
    write_json,
    write_phase_csv,
    write_scan_csv,
    write_spectrum_csv,
    write_trajectory_csv,
)
from .plotting import plot_curve, plot_phase_diagram, plot_spectrum, plot_trajectory
from .sweep import (
    DEFAULT_BUDGET,
    Axis,
    SweepSpec,
    parse_grid,
    phase_diagram,
    scaling_nc_vs_L,
    scan_detuning,
    run_sweep,
)
from .units import parse_frequency

log = logging.getLogger("rydberg_dtc")

OUT_ENV = "RYDBERG_DTC_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# flag dest -> ModelParams field
_MODEL_KEYS = {
    "variant": "variant",
    "L": "L",
    "eps": "epsilon",
    "delta": "delta",
    "v": "v",
    "t1": "t1",
    "t2": "t2",
    "boundary": "boundary",
    "gamma": "gamma",
}
_FREQ_KEYS = ("eps", "delta", "v")


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # let grids such as -1:1:0.05 through as values
        self._negative_number_matcher = re.compile(r"^-(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?([:,].*)?$")

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _model_flags(p: argparse.ArgumentParser, gamma: bool = False) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--variant", choices=[v.value for v in Variant])
    g.add_argument("-L", type=int, dest="L", help="number of atoms")
    g.add_argument("--eps", help="Rabi perturbation epsilon (e.g. 0.1, 0.1MHz)")
    g.add_argument("--delta", help="detuning Delta")
    g.add_argument("--v", help="nearest-neighbour interaction V")
    g.add_argument("--t1", type=float, help="stage-one duration, us")
    g.add_argument("--t2", type=float, help="stage-two duration, us")
    g.add_argument("--boundary", choices=[b.value for b in Boundary])
    if gamma:
        g.add_argument("--gamma", help="decay rate with unit, e.g. 10kHz, 10kHz2pi, 0.01rad_us")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with any flag values")
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--no-plot", action="store_true", help="skip SVG output")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rydberg-dtc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="stroboscopic P(n), Q(n)")
    _model_flags(p)
    _common(p)
    p.add_argument("--nf", type=int, help="number of Floquet cycles")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--psi0", help="initial bitstring, atom 0 first (default all g)")
    p.add_argument("--norm", action="store_true", help="add a state-norm column")

    p = sub.add_parser("spectrum", help="Fourier spectrum of P(n)")
    _model_flags(p)
    _common(p)
    p.add_argument("--nf", type=int)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--psi0")
    p.add_argument("--grid-size", type=int, help="frequency grid size (>= nf)")

    p = sub.add_parser("scan", help="n_c over a grid of one parameter")
    _model_flags(p)
    _common(p)
    p.add_argument("--spec", type=Path, help="sweep spec JSON (replaces axis/grid flags)")
    p.add_argument("--axis", choices=["delta", "epsilon", "v", "t2", "L"])
    p.add_argument("--grid", help="start:stop:step or comma list")
    p.add_argument("--budget", type=int, help=f"cycle budget per point (default {DEFAULT_BUDGET})")
    p.add_argument("--mirror", action="store_true", help="also run (-Delta, -V)")
    p.add_argument("--threads", type=int)
    p.add_argument("--wall-time", action="store_true", help="add a wall_time column")

    p = sub.add_parser("phase-diagram", help="delta n_c over (L, epsilon)")
    _model_flags(p)
    _common(p)
    p.add_argument("--eps-grid", help="epsilon grid, start:stop:step")
    p.add_argument("--L", dest="L_grid", help="L grid, e.g. 2:10")
    p.add_argument("--budget", type=int)
    p.add_argument("--threads", type=int)

    p = sub.add_parser("dissipative", help="Lindblad evolution and decay fit")
    _model_flags(p, gamma=True)
    _common(p)
    p.add_argument("--nf", type=int)
    p.add_argument("--window", help="fit window start:end (default 10:nf)")

    p = sub.add_parser("oracle-check", help="closed forms vs exact evolution")
    _common(p)
    p.add_argument("--draws", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--convention", choices=CONVENTIONS)
    return parser


def _merged(args: argparse.Namespace) -> dict:
    """Config-file values overlaid by explicitly given flags."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        known = set(vars(args)) | set(_MODEL_KEYS.values())
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        # allow ModelParams field names in the file too
        inverse = {v: k for k, v in _MODEL_KEYS.items()}
        cfg = {inverse.get(k, k): v for k, v in cfg.items()}
    for k, v in vars(args).items():
        if v is not None and v is not False and k not in ("config", "command"):
            cfg[k] = v
    return cfg


def _params(cfg: dict, require_gamma: bool = False) -> ModelParams:
    d = {}
    for flag, name in _MODEL_KEYS.items():
        if flag not in cfg:
            continue
        value = cfg[flag]
        if flag in _FREQ_KEYS:
            value = parse_frequency(value)
        elif flag == "gamma":
            value = parse_frequency(value, require_unit=True)
        d[name] = value
    if "L" not in d:
        raise ConfigError("the atom count -L is required")
    if require_gamma and d.get("gamma") is None:
        raise ConfigError("--gamma is required (with a unit suffix)")
    try:
        return ModelParams(**d)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out") or os.environ.get(OUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(manifest: RunManifest, out: Path, files) -> None:
    for f in files:
        manifest.add_output(f)
    manifest.finish()
    manifest.write(out)


def _trajectory(cfg: dict, params: ModelParams, record_norm: bool = False):
    n_f = int(cfg.get("nf", 200))
    mode = Mode(cfg.get("mode", Mode.ITERATE.value))
    psi0 = initial_state(params.L, cfg.get("psi0")) if cfg.get("psi0") else None
    prop = compile_cycle(params, spectral=mode is Mode.SPECTRAL)
    return evolve(prop, n_f, psi0, mode, record_norm=record_norm)


def cmd_simulate(cfg: dict) -> int:
    params = _params(cfg)
    out = _out_dir(cfg)
    traj = _trajectory(cfg, params, record_norm=bool(cfg.get("norm")))
    files = [write_trajectory_csv(out / "trajectory.csv", traj, with_norm=bool(cfg.get("norm")))]
    if not cfg.get("no_plot"):
        files.append(plot_trajectory(traj, out / "trajectory.svg"))
    crit = traj.critical
    print(f"n_f={traj.n_f} n_c={crit.n_c}{' (censored)' if crit.censored else ''}")
    _finish(RunManifest("simulate", params.to_dict(), version=__version__), out, files)
    return EXIT_OK


def cmd_spectrum(cfg: dict) -> int:
    params = _params(cfg)
    out = _out_dir(cfg)
    traj = _trajectory(cfg, params)
    spec = traj.spectrum(cfg.get("grid_size"))
    files = [write_spectrum_csv(out / "spectrum.csv", spec, params)]
    if not cfg.get("no_plot"):
        files.append(plot_spectrum(spec, out / "spectrum.svg"))
    for nu, mag in spec.peaks(3):
        print(f"peak nu={nu:.6f} |S|={mag:.6f}")
    _finish(RunManifest("spectrum", params.to_dict(), version=__version__), out, files)
    return EXIT_OK


def cmd_scan(cfg: dict) -> int:
    out = _out_dir(cfg)
    threads = cfg.get("threads")
    if cfg.get("spec"):
        try:
            spec = SweepSpec.from_json(Path(cfg["spec"]).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read sweep spec: {exc}") from None
    else:
        if not cfg.get("axis") or not cfg.get("grid"):
            raise ConfigError("scan needs --axis and --grid (or --spec)")
        grid = parse_grid(cfg["grid"])
        if cfg["axis"] in _FREQ_KEYS:
            grid = tuple(parse_frequency(x) for x in grid)
        template = _params({**cfg, "L": cfg.get("L", int(grid[0]) if cfg["axis"] == "L" else None)})
        spec = SweepSpec(
            template, Axis(cfg["axis"], grid), n_f_budget=int(cfg.get("budget", DEFAULT_BUDGET))
        )
    files = []
    axis = spec.axis1.name
    if axis == "delta" and spec.axis2 is None:
        scan = scan_detuning(spec, mirror=bool(cfg.get("mirror")), threads=threads)
        results = scan.points + (scan.mirrored or [])
        mism = scan.mirror_mismatches()
        if cfg.get("mirror"):
            print(f"mirror mismatches: {len(mism)}")
    elif axis == "L" and spec.axis2 is None:
        res = scaling_nc_vs_L(spec, threads=threads)
        results = res.points
        fit = None if res.fit is None else vars(res.fit)
        files.append(write_json(out / "scaling_fit.json", {"fit": fit}))
        print("fit omitted" if fit is None else f"slope={res.fit.slope:.6f}")
    else:
        results = run_sweep(spec, threads)
    files.insert(0, write_scan_csv(out / "scan.csv", results, with_wall_time=bool(cfg.get("wall_time"))))
    files.append(write_json(out / "sweep_spec.json", spec.to_dict()))
    if not cfg.get("no_plot") and spec.axis2 is None:
        main = results[: len(spec.axis1.grid)]
        x = [getattr(r.params, axis) for r in main]
        y = [np.nan if r.n_c is None else r.n_c for r in main]
        files.append(
            plot_curve(x, y, out / "scan.svg", axis, "n_c", [r.censored for r in main], logy=axis == "L")
        )
    failed = [r for r in results if not r.ok]
    print(f"{len(results)} points, {len(failed)} failed")
    _finish(RunManifest("scan", spec.to_dict(), version=__version__), out, files)
    return EXIT_OK


def cmd_phase_diagram(cfg: dict) -> int:
    out = _out_dir(cfg)
    if not cfg.get("eps_grid") or not cfg.get("L_grid"):
        raise ConfigError("phase-diagram needs --eps-grid and --L")
    eps = tuple(parse_frequency(x) for x in parse_grid(cfg["eps_grid"]))
    Ls = parse_grid(cfg["L_grid"])
    template = _params({**cfg, "L": int(Ls[0]), "variant": cfg.get("variant", "simplified"), "v": cfg.get("v", "0.1")})
    spec = SweepSpec(
        template, Axis("L", Ls), Axis("epsilon", eps), n_f_budget=int(cfg.get("budget", DEFAULT_BUDGET))
    )
    diagram = phase_diagram(spec, threads=cfg.get("threads"))
    files = [
        write_phase_csv(out / "phase.csv", diagram.cells),
        write_scan_csv(out / "scan.csv", diagram.points),
    ]
    if not cfg.get("no_plot") and diagram.cells:
        files.append(plot_phase_diagram(diagram.cells, out / "phase.svg"))
    counts = {c: sum(cell.cls.value == c for cell in diagram.cells) for c in "+0-"}
    print(f"{len(diagram.cells)} cells: " + " ".join(f"{k}:{v}" for k, v in counts.items()))
    _finish(RunManifest("phase-diagram", spec.to_dict(), version=__version__), out, files)
    return EXIT_OK


def cmd_dissipative(cfg: dict) -> int:
    params = _params(cfg, require_gamma=True)
    out = _out_dir(cfg)
    n_f = int(cfg.get("nf", 100))
    res = evolve_density(params, n_f)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    window = (10, None)
    if cfg.get("window"):
        a, _, b = str(cfg["window"]).partition(":")
        try:
            window = (int(a), int(b) if b else None)
        except ValueError:
            raise ConfigError(f"bad window {cfg['window']!r}; use start:end") from None
    fit = fit_decay(res.trajectory.p, window)
    report = {
        **fit.to_dict(),
        "max_trace_drift": res.max_trace_drift,
        "max_hermiticity_error": res.max_hermiticity_error,
        "min_eigenvalue": res.min_eigenvalue,
    }
    files = [
        write_trajectory_csv(out / "decay.csv", res.trajectory),
        write_json(out / "fit.json", report),
    ]
    if not cfg.get("no_plot"):
        n = np.arange(n_f + 1)
        files.append(plot_curve(n, np.abs(res.trajectory.p), out / "decay.svg", "n", "|P(n)|", logy=True))
    print(f"alpha={fit.alpha:.6g} window={fit.window}")
    _finish(RunManifest("dissipative", params.to_dict(), version=__version__), out, files)
    return EXIT_OK


def cmd_oracle_check(cfg: dict) -> int:
    out = _out_dir(cfg)
    draws = int(cfg.get("draws", 100))
    seed = int(cfg.get("seed", 7))
    tol = float(cfg.get("tol", 1e-8))
    convention = cfg.get("convention", "hamiltonian")
    if draws < 1:
        raise ConfigError("--draws must be >= 1")
    rng = np.random.default_rng(seed)
    params = [random_draw(rng) for _ in range(draws)]
    rows = {}
    all_ok = True
    for L, n in sorted(CLOSED_FORMS):
        errs = [compare_with_exact(p, L, n, convention).error for p in params]
        matched = sum(e <= tol for e in errs)
        all_ok &= matched == draws
        rows[f"L{L}_n{n}"] = {"matched": matched, "draws": draws, "max_error": max(errs)}
        print(f"L={L} n={n}: {matched}/{draws} matched <= {tol:g} (max error {max(errs):.3e})")
    files = [write_json(out / "oracle_check.json", {"tolerance": tol, "convention": convention, "results": rows})]
    total = sum(r["matched"] for r in rows.values())
    print(f"{total}/{draws * len(rows)} matched <= {tol:g}")
    _finish(RunManifest("oracle-check", {"convention": convention}, seed=seed, version=__version__), out, files)
    return EXIT_OK if all_ok else EXIT_NUMERIC


COMMANDS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "scan": cmd_scan,
    "phase-diagram": cmd_phase_diagram,
    "dissipative": cmd_dissipative,
    "oracle-check": cmd_oracle_check,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _merged(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DTCError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
