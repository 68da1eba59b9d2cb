"""Render dasec experiment CSVs to raster images.

This package talks to the simulator only through its CSV files: sweep.csv,
region_samples.csv, heatmap.csv and trace.csv, each carrying provenance
comment lines (`# key=value ...`) ahead of the header row. Rendering is a
pure function of file content; re-running overwrites the output identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class RenderError(ValueError):
    """Bad input CSV: missing file, wrong header, or no data rows."""


class FigureKind(Enum):
    FIG3 = "fig3"   # mean total power vs IR SINR threshold (sweep.csv, GammaD)
    FIG4 = "fig4"   # mean total power vs edge-user fraction (sweep.csv, EdgeFraction)
    FIG5 = "fig5"   # mean total power vs eavesdropper count (sweep.csv, NumEves)
    FIG6 = "fig6"   # mean total power vs CSI error std (sweep.csv, SigmaE)
    FIG7 = "fig7"   # received-symbol scatter with CI region (region_samples.csv)
    FIG8 = "fig8"   # per-antenna activation frequency map (heatmap.csv)
    FIG9 = "fig9"   # convergence trace (trace.csv)


_SWEEP_KINDS = {
    FigureKind.FIG3: ("GammaD", "IR SINR threshold (dB)"),
    FigureKind.FIG4: ("EdgeFraction", "edge-user fraction"),
    FigureKind.FIG5: ("NumEves", "number of eavesdroppers"),
    FigureKind.FIG6: ("SigmaE", "CSI error std"),
}


@dataclass
class FigureJob:
    kind: FigureKind
    inputs: list[Path]
    output: Path

    def __post_init__(self):
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)
        if not self.inputs:
            raise RenderError("at least one input CSV is required")
        for p in self.inputs:
            if not p.is_file():
                raise RenderError(f"input CSV not found: {p}")


@dataclass
class CsvTable:
    comments: dict = field(default_factory=dict)
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def floats(self, name: str) -> np.ndarray:
        return np.array([float(v) for v in self.column(name)])


def read_table(path: Path, expect_header: list[str]) -> CsvTable:
    """Parse one dasec CSV: `# key=value` comment lines, header, data rows."""
    tab = CsvTable()
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and row[0].startswith("#"):
                for tok in " ".join(row).lstrip("# ").split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        tab.comments[k] = v
                continue
            if not tab.header:
                tab.header = row
            elif row:
                tab.rows.append(row)
    for col in expect_header:
        if col not in tab.header:
            raise RenderError(f"{path}: missing column {col!r}; header={tab.header}")
    if not tab.rows:
        raise RenderError(f"{path}: no data rows")
    return tab


# ---------------------------------------------------------------------------
# individual renderers


def _render_sweep(job: FigureJob, fig, ax):
    var, xlabel = _SWEEP_KINDS[job.kind]
    tab = read_table(job.inputs[0],
                     ["variant", "layout", "sweep_var", "value", "total_mw"])
    seen_vars = set(tab.column("sweep_var"))
    if seen_vars != {var}:
        raise RenderError(
            f"{job.inputs[0]}: expected sweep over {var}, found {sorted(seen_vars)}")
    variants = tab.column("variant")
    layouts = tab.column("layout")
    values = tab.column("value")
    totals = tab.column("total_mw")
    for key in sorted({(v, l) for v, l in zip(variants, layouts)}):
        xs = sorted({float(x) for v, l, x in zip(variants, layouts, values)
                     if (v, l) == key})
        ys = []
        for x in xs:
            pts = [float(t) for v, l, xv, t in zip(variants, layouts, values, totals)
                   if (v, l) == key and float(xv) == x and t != ""]
            ys.append(np.mean(pts) if pts else np.nan)
        ax.plot(xs, ys, marker="o", label=f"{key[0]}, {key[1]}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mean total power (mW)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)


def ir_inside_fraction(tab: CsvTable) -> float:
    """Fraction of IR points inside the constructive region drawn in fig7."""
    tan_theta = float(tab.comments["tan_theta"])
    radius = float(tab.comments["radius_d"])
    who = np.array(tab.column("who"))
    re = tab.floats("re")[who == "ir"]
    im = tab.floats("im")[who == "ir"]
    if re.size == 0:
        raise RenderError("region CSV has no IR points")
    return float(np.mean(np.abs(im) <= (re - radius) * tan_theta))


def _render_region(job: FigureJob, fig, ax):
    tab = read_table(job.inputs[0], ["who", "re", "im"])
    for key in ("tan_theta", "radius_d"):
        if key not in tab.comments:
            raise RenderError(f"{job.inputs[0]}: missing comment {key}")
    tan_theta = float(tab.comments["tan_theta"])
    radius = float(tab.comments["radius_d"])
    who = np.array(tab.column("who"))
    re, im = tab.floats("re"), tab.floats("im")
    ir = who == "ir"
    ax.scatter(re[ir], im[ir], s=2, c="tab:blue", label="IR", rasterized=True)
    if np.any(~ir):
        ax.scatter(re[~ir], im[~ir], s=2, c="tab:red", label="eavesdroppers",
                   rasterized=True)
    # constructive-region boundary: Im = +-(Re - radius) * tan(theta)
    r_max = max(float(np.max(re)), radius) * 1.05
    xs = np.linspace(radius, r_max, 50)
    ax.plot(xs, (xs - radius) * tan_theta, "k--", lw=1)
    ax.plot(xs, -(xs - radius) * tan_theta, "k--", lw=1)
    frac = ir_inside_fraction(tab)
    ax.annotate(f"IR inside fraction: {frac:.4f}", xy=(0.02, 0.97),
                xycoords="axes fraction", va="top", fontsize=9)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.legend(fontsize=8, loc="lower right")
    ax.set_aspect("equal", adjustable="datalim")


def _render_heatmap(job: FigureJob, fig, ax):
    tab = read_table(job.inputs[0], ["antenna", "x_m", "y_m", "activation_freq"])
    x, y = tab.floats("x_m"), tab.floats("y_m")
    f = tab.floats("activation_freq")
    sc = ax.scatter(x, y, c=f, s=400, cmap="viridis", vmin=0.0, vmax=1.0,
                    edgecolors="k")
    for xi, yi, fi in zip(x, y, f):
        ax.annotate(f"{fi:.2f}", (xi, yi), ha="center", va="center", fontsize=7,
                    color="w" if fi < 0.6 else "k")
    fig.colorbar(sc, ax=ax, label="activation frequency")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")


def _render_trace(job: FigureJob, fig, ax):
    tab = read_table(job.inputs[0], ["iteration", "objective_mw"])
    ax.plot(tab.floats("iteration"), tab.floats("objective_mw"), marker="s")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective (mW)")
    ax.grid(True, alpha=0.3)


_RENDERERS = {
    FigureKind.FIG7: _render_region,
    FigureKind.FIG8: _render_heatmap,
    FigureKind.FIG9: _render_trace,
}


def render(job: FigureJob) -> Path:
    """Render one job to its output path. Raises RenderError before touching
    the output file when the input is missing, malformed or empty."""
    fn = _RENDERERS.get(job.kind, _render_sweep)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    try:
        fn(job, fig, ax)
        ax.set_title(job.kind.value)
        job.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(job.output, dpi=150)
    finally:
        plt.close(fig)
    return job.output
