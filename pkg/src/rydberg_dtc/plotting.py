"""Deterministic, self-contained SVG figures.

Text is rendered as paths, the SVG id salt is fixed and the date stamp is
dropped, so identical data gives byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .observables import Spectrum, Trajectory  # noqa: E402

# Q = -1 blue, Q = +1 yellow
Q_CMAP = ListedColormap(["#1f4fd1", "#f5d000"])

_RC = {"svg.hashsalt": "rydberg-dtc", "svg.fonttype": "path", "font.size": 9}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def plot_trajectory(traj: Trajectory, path, title: str | None = None) -> Path:
    with matplotlib.rc_context(_RC):
        fig, (ax, strip) = plt.subplots(
            2, 1, figsize=(6.4, 3.6), sharex=True, gridspec_kw={"height_ratios": [4, 1]}
        )
        n = np.arange(traj.n_f + 1)
        ax.plot(n, traj.p, lw=0.8, color="k")
        ax.set_ylabel("P(n)")
        ax.set_ylim(-1.05, 1.05)
        if title:
            ax.set_title(title)
        q = traj.q.astype(float)[None, :]
        strip.pcolormesh(
            np.arange(traj.n_f + 1) + 0.5, [0, 1], q, cmap=Q_CMAP, vmin=-1, vmax=1,
            rasterized=False,
        )
        strip.set_yticks([])
        strip.set_ylabel("Q")
        strip.set_xlabel("n")
        fig.tight_layout()
    return _save(fig, path)


def plot_spectrum(spec: Spectrum, path, peaks: int = 3, title: str | None = None) -> Path:
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 3.0))
        ax.plot(spec.nu, spec.magnitude, lw=0.8, color="k")
        for nu, mag in spec.peaks(peaks):
            ax.annotate(
                f"{nu:.3f}", (nu, mag), textcoords="offset points", xytext=(0, 4),
                ha="center", fontsize=7, color="tab:red",
            )
        ax.set_xlabel("nu")
        ax.set_ylabel("|S(nu)|")
        ax.set_xlim(0, 1)
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return _save(fig, path)


def plot_curve(x, y, path, xlabel: str, ylabel: str, censored=None, logy: bool = False) -> Path:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 3.0))
        ax.plot(x, y, lw=0.8, marker=".", ms=3, color="k")
        if censored is not None:
            c = np.asarray(censored, dtype=bool)
            if c.any():
                ax.plot(x[c], y[c], ls="none", marker="^", color="tab:red", label="censored")
                ax.legend(fontsize=7)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
    return _save(fig, path)


def plot_phase_diagram(cells, path) -> Path:
    Ls = sorted({c.L for c in cells})
    eps = sorted({c.epsilon for c in cells})
    grid = np.full((len(Ls), len(eps)), np.nan)
    for c in cells:
        grid[Ls.index(c.L), eps.index(c.epsilon)] = np.sign(c.delta_n_c)
    cmap = ListedColormap(["#1f4fd1", "#2ca02c", "#f5d000"])
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 3.2))
        ax.pcolormesh(_edges(eps), _edges(Ls), grid, cmap=cmap, vmin=-1.5, vmax=1.5)
        ax.set_xlabel("epsilon")
        ax.set_ylabel("L")
        fig.tight_layout()
    return _save(fig, path)


def _edges(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.size == 1:
        return np.array([v[0] - 0.5, v[0] + 0.5])
    mid = 0.5 * (v[1:] + v[:-1])
    return np.concatenate([[2 * v[0] - mid[0]], mid, [2 * v[-1] - mid[-1]]])
