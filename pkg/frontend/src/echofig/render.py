"""Render echosim CSV outputs as figures.

Three figure kinds, one per CSV contract:

- poincare: stroboscopic phase-space scatter from (seed_id, n, x, p)
- sweep: decoherence times vs preparation time from the sweep CSV
  (quantum points, classical points split by convergence, bound crosses)
- fringe: tau_D vs the momentum fringe scale with the small-scale fit line

Rendering is read-only and deterministic: axes are fixed from the data
ranges, so identical CSVs give visually identical figures.  When the CSV
carries a ``# config_hash=...`` stamp it is printed in the figure corner.
"""
from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SWEEP_COLUMNS = ["T", "tau_d_q", "tau_d_c", "tau_lb", "delta_x", "delta_p", "mean_delta_v", "converged_flag"]
POINCARE_COLUMNS = ["seed_id", "n", "x", "p"]
FRINGE_COLUMNS = ["delta_p", "tau_d_q", "used_in_fit"]

KINDS = ("poincare", "sweep", "fringe")


class ColumnMismatchError(ValueError):
    def __init__(self, expected, found):
        super().__init__(f"CSV columns do not match the contract: expected {expected}, found {found}")
        self.expected = expected
        self.found = found


@dataclass(frozen=True)
class FigureJob:
    kind: str
    input_csv: str
    output_image: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class CsvTable:
    columns: list
    rows: list  # list of row dicts with str values ('' for missing)
    meta: dict  # parsed '# key=value' comment lines

    def floats(self, name: str) -> np.ndarray:
        return np.array([float(r[name]) if r[name] != "" else np.nan for r in self.rows])


def read_table(path, expected_columns) -> CsvTable:
    meta = {}
    rows = []
    columns = None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            parts = line.split(",")
            if columns is None:
                columns = parts
                if columns != list(expected_columns):
                    raise ColumnMismatchError(list(expected_columns), columns)
                continue
            rows.append(dict(zip(columns, parts)))
    if columns is None:
        raise ValueError(f"{path}: no header row found")
    return CsvTable(columns, rows, meta)


def _finish(fig, ax, table: CsvTable, path: str) -> str:
    if "config_hash" in table.meta:
        fig.text(0.99, 0.01, f"config {table.meta['config_hash']}", ha="right", va="bottom",
                 fontsize=6, color="0.5", family="monospace")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _padded_limits(values, frac=0.05):
    values = values[np.isfinite(values)]
    lo, hi = float(values.min()), float(values.max())
    pad = (hi - lo) * frac or 1.0
    return lo - pad, hi + pad


def render_poincare(table: CsvTable, out_path: str) -> str:
    x = table.floats("x")
    p = table.floats("p")
    seed = table.floats("seed_id")
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    ax.scatter(x, p, c=seed, s=0.4, cmap="twilight", linewidths=0, rasterized=True)
    ax.set_xlim(*_padded_limits(x))
    ax.set_ylim(*_padded_limits(p))
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    ax.set_title("Stroboscopic Poincaré section")
    return _finish(fig, ax, table, out_path)


def render_sweep(table: CsvTable, out_path: str) -> str:
    T = table.floats("T")
    tau_q = table.floats("tau_d_q")
    tau_c = table.floats("tau_d_c")
    tau_lb = table.floats("tau_lb")
    converged = table.floats("converged_flag") == 1.0

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    have_q = np.isfinite(tau_q)
    ax.plot(T[have_q], tau_q[have_q], "o-", color="tab:blue", label="quantum", ms=5)
    have_lb = np.isfinite(tau_lb)
    ax.plot(T[have_lb], tau_lb[have_lb], "x", color="tab:green", label="lower bound", ms=7)
    solid = np.isfinite(tau_c) & converged
    hollow = np.isfinite(tau_c) & ~converged
    if solid.any():
        ax.plot(T[solid], tau_c[solid], "s-", color="tab:red", label="classical", ms=5)
    if hollow.any():
        ax.plot(T[hollow], tau_c[hollow], "s", mfc="none", color="tab:red",
                label="classical (unconverged)", ms=5)
    finite = np.concatenate([tau_q[have_q], tau_lb[have_lb], tau_c[np.isfinite(tau_c)]])
    ax.set_xlim(*_padded_limits(T))
    ax.set_ylim(*_padded_limits(finite))
    ax.set_xlabel("preparation time T")
    ax.set_ylabel(r"decoherence time $\tau_D$")
    ax.set_title("Overlap decay time vs preparation time")
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, ax, table, out_path)


def render_fringe(table: CsvTable, out_path: str) -> str:
    dp = table.floats("delta_p")
    tau = table.floats("tau_d_q")
    used = table.floats("used_in_fit") == 1.0

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    ax.plot(dp[used], tau[used], "o", color="tab:blue", label="fit subset", ms=5)
    if (~used).any():
        ax.plot(dp[~used], tau[~used], "o", mfc="none", color="tab:blue",
                label="excluded (largest fringes)", ms=5)
    slope = table.meta.get("fit_slope")
    intercept = table.meta.get("fit_intercept")
    if slope is not None and intercept is not None and used.any():
        slope, intercept = float(slope), float(intercept)
        xs = np.linspace(0.0, dp[used].max() * 1.1, 50)
        label = f"fit: {slope:.2f} dp + {intercept:.3f}"
        if "fit_r" in table.meta:
            label += f" (r={float(table.meta['fit_r']):.3f})"
        ax.plot(xs, slope * xs + intercept, "-", color="tab:orange", lw=1, label=label)
    ax.set_xlim(0.0, _padded_limits(dp)[1])
    ax.set_ylim(0.0, _padded_limits(tau)[1])
    ax.set_xlabel(r"momentum fringe scale $\delta p$")
    ax.set_ylabel(r"decoherence time $\tau_D$")
    ax.set_title("Decay time vs smallest momentum structure")
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, ax, table, out_path)


_RENDERERS = {
    "poincare": (render_poincare, POINCARE_COLUMNS),
    "sweep": (render_sweep, SWEEP_COLUMNS),
    "fringe": (render_fringe, FRINGE_COLUMNS),
}


def render(job: FigureJob) -> str:
    """Render one figure job; returns the output path."""
    renderer, columns = _RENDERERS[job.kind]
    table = read_table(job.input_csv, columns)
    return renderer(table, job.output_image)
