"""Figure rendering for exported CSV artifacts, plus gnuplot script emission.

Matplotlib (Agg backend) renders trajectory line plots, value-slice
heatmaps, locus scatter clouds, and closed-loop decay figures next to the
CSVs; emit_plot_script writes an equivalent gnuplot script for users who
prefer an external toolchain.
"""

from __future__ import annotations

import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigurationError

PLOT_KINDS = ("trajectory", "value-grid", "loci", "decay")


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def plot_trajectory(csv_path, out_png) -> str:
    """Coordinate traces x_i(t) from a trajectory CSV (t,x1..xn,...)."""
    header, rows = _read_csv(csv_path)
    ncoord = sum(1 for h in header if h.startswith("x"))
    data = np.array([[float(v) for v in r] for r in rows])
    t = data[:, 0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(ncoord):
        ax.plot(t, data[:, 1 + i], label=header[1 + i])
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(os.path.basename(csv_path))
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def plot_value_slice(csv_path, out_png, slice_axis=2, level=0.0) -> str:
    """Heatmap of V on the 2D slice x_{slice_axis} closest to ``level``."""
    header, rows = _read_csv(csv_path)
    ncoord = sum(1 for h in header if h.startswith("x"))
    iv = header.index("V")
    data = np.array([[float(v) for v in r[:iv + 1]] for r in rows])
    X, V = data[:, :ncoord], data[:, iv]
    if ncoord > 2:
        levels = np.unique(X[:, slice_axis])
        lv = levels[np.argmin(np.abs(levels - level))]
        keep = X[:, slice_axis] == lv
        X, V = X[keep], V[keep]
        axes = [k for k in range(ncoord) if k != slice_axis][:2]
    else:
        lv = None
        axes = [0, 1]
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    finite = np.isfinite(V)
    sc = ax.scatter(X[finite, axes[0]], X[finite, axes[1]], c=V[finite],
                    s=12, marker="s", cmap="viridis")
    fig.colorbar(sc, ax=ax, label="V")
    ax.set_xlabel(f"x{axes[0] + 1}")
    ax.set_ylabel(f"x{axes[1] + 1}")
    title = os.path.basename(csv_path)
    if lv is not None:
        title += f"  (x{slice_axis + 1} = {lv:g})"
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def plot_loci(csv_path, out_png) -> str:
    """Scatter cloud per locus kind, first two coordinates."""
    header, rows = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    kinds = sorted({r[0] for r in rows})
    for kind in kinds:
        pts = np.array([[float(v) for v in r[1:]] for r in rows
                        if r[0] == kind])
        ax.scatter(pts[:, 0], pts[:, 1], s=8, label=kind, alpha=0.7)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if kinds:
        ax.legend(loc="best", fontsize=8)
    ax.set_title(os.path.basename(csv_path), fontsize=9)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def plot_decay(csv_path, out_png) -> str:
    """V(x(t)) on a log scale against the V0 e^{-2t} reference line."""
    header, rows = _read_csv(csv_path)
    it, iV = header.index("t"), header.index("V")
    t = np.array([float(r[it]) for r in rows])
    V = np.array([float(r[iV]) for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(t, np.maximum(V, 1e-300), label="V(x(t))")
    if V[0] > 0:
        ax.semilogy(t, V[0] * np.exp(-2.0 * t), "--",
                    label="V(x0) exp(-2t)")
    ax.set_xlabel("t")
    ax.set_ylabel("V")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(os.path.basename(csv_path), fontsize=9)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def render(csv_path, kind, out_png=None) -> str:
    if kind not in PLOT_KINDS:
        raise ConfigurationError(f"unknown plot kind {kind!r}; "
                                 f"expected one of {PLOT_KINDS}")
    if out_png is None:
        out_png = os.path.splitext(csv_path)[0] + ".png"
    fn = {"trajectory": plot_trajectory, "value-grid": plot_value_slice,
          "loci": plot_loci, "decay": plot_decay}[kind]
    return fn(csv_path, out_png)


# ---------------------------------------------------------------------------
# gnuplot emission
# ---------------------------------------------------------------------------


def emit_plot_script(artifact, kind, out_path=None) -> str:
    """Write a gnuplot script rendering the CSV artifact.

    Kinds: trajectory (line plot of x_i(t)), value-grid (heatmap of the
    first two coordinates), loci (scatter per kind), decay (log V with the
    exponential reference).
    """
    if not os.path.exists(artifact):
        raise ConfigurationError(f"artifact {artifact} does not exist")
    if kind not in PLOT_KINDS:
        raise ConfigurationError(f"unknown plot kind {kind!r}; "
                                 f"expected one of {PLOT_KINDS}")
    if out_path is None:
        out_path = os.path.splitext(artifact)[0] + ".gp"
    header, _ = _read_csv(artifact)
    name = os.path.basename(artifact)
    png = os.path.splitext(name)[0] + ".png"
    lines = [
        "set datafile separator ','",
        f"set output '{png}'",
        "set terminal pngcairo size 800,600",
        f"set title '{name}'",
    ]
    if kind == "trajectory":
        ncoord = sum(1 for h in header if h.startswith("x"))
        plots = ", ".join(
            f"'{name}' using 1:{2 + i} with lines title 'x{i + 1}'"
            for i in range(ncoord))
        lines += ["set xlabel 't'", f"plot {plots}"]
    elif kind == "value-grid":
        iv = header.index("V") + 1
        lines += ["set xlabel 'x1'", "set ylabel 'x2'",
                  "set view map",
                  f"splot '{name}' using 1:2:{iv} with points pt 5 ps 0.6 "
                  "palette title 'V'"]
    elif kind == "loci":
        lines += ["set xlabel 'x1'", "set ylabel 'x2'",
                  f"plot '{name}' using 2:3 with points pt 7 ps 0.4 "
                  "title 'locus points'"]
    else:  # decay
        it, iV = header.index("t") + 1, header.index("V") + 1
        lines += ["set xlabel 't'", "set logscale y",
                  f"plot '{name}' using {it}:{iV} with lines title 'V(x(t))'"]
    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return out_path
