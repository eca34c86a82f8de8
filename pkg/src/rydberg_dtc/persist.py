"""CSV/JSON persistence and run manifests.

Floats are written with ``repr`` so every CSV re-parses to the exact values
that produced it.  Trajectory and spectrum files carry the model parameters
in a leading ``# params:`` comment line.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import ModelParams
from .observables import Spectrum, Trajectory
from .sweep import CellClass, PhaseCell, PointResult

PARAM_FIELDS = ("variant", "boundary", "L", "epsilon", "delta", "v", "t1", "t2", "gamma")


def _f(x) -> str:
    return repr(float(x))


def _write(path: Path, header_lines: list[str], columns: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    path.write_text(buf.getvalue())
    return path


def _read(path: Path) -> tuple[dict, list[dict]]:
    meta = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


def _params_line(params: ModelParams | None) -> list[str]:
    if params is None:
        return []
    return ["params: " + json.dumps(params.to_dict(), sort_keys=True)]


def _params_from(meta: dict) -> ModelParams | None:
    return ModelParams.from_dict(json.loads(meta["params"])) if "params" in meta else None


def write_trajectory_csv(path, traj: Trajectory, with_norm: bool = False) -> Path:
    """Columns n, P, Q (Q(0) written as -1 by convention) and optionally norm."""
    if with_norm and traj.norm is None:
        raise ConfigError("trajectory has no recorded norms")
    q = np.concatenate([[-1], traj.q])
    cols = ["n", "P", "Q"] + (["norm"] if with_norm else [])
    rows = []
    for n in range(traj.n_f + 1):
        row = [n, _f(traj.p[n]), int(q[n])]
        if with_norm:
            row.append(_f(traj.norm[n]))
        rows.append(row)
    return _write(path, _params_line(traj.params), cols, rows)


def read_trajectory_csv(path) -> Trajectory:
    meta, rows = _read(path)
    p = np.array([float(r["P"]) for r in rows])
    norm = np.array([float(r["norm"]) for r in rows]) if rows and "norm" in rows[0] else None
    return Trajectory(_params_from(meta), p, norm)


def write_spectrum_csv(path, spec: Spectrum, params: ModelParams | None = None) -> Path:
    rows = [
        [_f(nu), _f(v.real), _f(v.imag), _f(abs(v))] for nu, v in zip(spec.nu, spec.values)
    ]
    return _write(path, _params_line(params), ["nu", "re", "im", "abs"], rows)


def read_spectrum_csv(path) -> Spectrum:
    _, rows = _read(path)
    nu = np.array([float(r["nu"]) for r in rows])
    values = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    return Spectrum(nu, values)


def write_scan_csv(path, results: list[PointResult], with_wall_time: bool = False) -> Path:
    """One row per grid point.  ``wall_time`` is opt-in because it breaks
    byte-identical reruns."""
    cols = list(PARAM_FIELDS) + ["n_c", "censored", "n_f", "error"]
    if with_wall_time:
        cols.append("wall_time")
    rows = []
    for r in results:
        d = r.params.to_dict()
        row = [d[k] if k in ("variant", "boundary", "L") else ("" if d[k] is None else _f(d[k])) for k in PARAM_FIELDS]
        row += ["" if r.n_c is None else r.n_c, int(r.censored), r.n_f, r.error or ""]
        if with_wall_time:
            row.append(_f(r.wall_time))
        rows.append(row)
    return _write(path, [], cols, rows)


def read_scan_csv(path, key_axes: tuple[str, ...] = ()) -> list[PointResult]:
    _, rows = _read(path)
    out = []
    for r in rows:
        d = {k: r[k] for k in PARAM_FIELDS}
        d["L"] = int(d["L"])
        for k in ("epsilon", "delta", "v", "t1", "t2"):
            d[k] = float(d[k])
        d["gamma"] = float(d["gamma"]) if d["gamma"] else None
        params = ModelParams.from_dict(d)
        key = tuple(getattr(params, a) for a in key_axes)
        out.append(
            PointResult(
                key=key,
                params=params,
                n_c=int(r["n_c"]) if r["n_c"] else None,
                censored=bool(int(r["censored"])),
                n_f=int(r["n_f"]),
                error=r["error"] or None,
                wall_time=float(r["wall_time"]) if r.get("wall_time") else 0.0,
            )
        )
    return out


def write_phase_csv(path, cells: list[PhaseCell]) -> Path:
    rows = [[c.L, _f(c.epsilon), c.delta_n_c, c.cls.value, int(c.censored)] for c in cells]
    return _write(path, [], ["L", "epsilon", "delta_n_c", "class", "censored"], rows)


def read_phase_csv(path) -> list[PhaseCell]:
    _, rows = _read(path)
    return [
        PhaseCell(
            int(r["L"]),
            float(r["epsilon"]),
            int(r["delta_n_c"]),
            CellClass(r["class"]),
            bool(int(r["censored"])),
        )
        for r in rows
    ]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    # SOURCE_DATE_EPOCH pins timestamps for reproducible manifests
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return t.isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: int | None = None
    version: str = ""
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: dict[str, str] = field(default_factory=dict)
    argv: list[str] = field(default_factory=lambda: list(sys.argv[1:]))

    def add_output(self, path) -> None:
        path = Path(path)
        self.outputs[path.name] = sha256_file(path)

    def finish(self) -> None:
        self.finished = _now()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": dict(sorted(self.outputs.items())),
            "argv": self.argv,
        }

    def write(self, directory, name: str = "manifest.json") -> Path:
        return write_json(Path(directory) / name, self.to_dict())

    @classmethod
    def read(cls, path) -> "RunManifest":
        d = json.loads(Path(path).read_text())
        return cls(**d)


def verify_manifest(path) -> list[str]:
    """Names of listed outputs that are missing or whose digest changed."""
    path = Path(path)
    m = RunManifest.read(path)
    bad = []
    for name, digest in m.outputs.items():
        f = path.parent / name
        if not f.exists() or sha256_file(f) != digest:
            bad.append(name)
    return bad
