"""SVG figures for the scenario outputs.

Figures are written with a fixed SVG hash salt and without a date stamp so the
same data always produce the same file.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 3.4  # column width
fig_size = [fig_width, fig_width * golden_mean]
colors = ["#08589e", "#d7301f", "#2b8cbe", "#4daf4a", "#984ea3"]

params = {
    "axes.prop_cycle": matplotlib.cycler(color=colors),
    "axes.labelsize": 9,
    "font.family": "serif",
    "font.size": 8,
    "font.serif": ["DejaVu Serif"],
    "mathtext.fontset": "stix",
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": fig_size,
    "lines.markersize": 3,
    "lines.linewidth": 1,
    "figure.subplot.left": 0.18,
    "figure.subplot.bottom": 0.20,
    "figure.subplot.right": 0.95,
    "figure.subplot.top": 0.92,
    "svg.hashsalt": "qdspin",
    "svg.fonttype": "path",
}


def _figure():
    with plt.rc_context(params):
        fig, ax = plt.subplots()
    return fig, ax


def save_svg(fig, path: Path) -> Path:
    with plt.rc_context(params):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_fidelity_vs_fss(frame: pd.DataFrame, markers: pd.DataFrame):
    fig, ax = _figure()
    ax.plot(frame["fss [ueV]"], frame["fidelity [1]"], label="model")
    oracle = frame.dropna(subset=["fidelity_oracle [1]"])
    if not oracle.empty:
        ax.plot(oracle["fss [ueV]"], oracle["fidelity_oracle [1]"], "o", mfc="none", label="dynamics")
    ax.plot(markers["fss [ueV]"], markers["fidelity [1]"], "s", label="dots")
    for _, row in markers.iterrows():
        ax.annotate(row["dot"], (row["fss [ueV]"], row["fidelity [1]"]), fontsize=6,
                    xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel(r"$\hbar\delta_{FS}$ ($\mu$eV)")
    ax.set_ylabel("fidelity")
    ax.set_ylim(0.45, 1.02)
    ax.legend(frameon=False)
    return fig


def plot_fidelity_vs_field(frame: pd.DataFrame):
    fig, ax = _figure()
    ax.plot(frame["init_time [ps]"], frame["fidelity [1]"], color=colors[1])
    ax.set_xlabel(r"initialization time $1/\Gamma_e$ (ps)")
    ax.set_ylabel("fidelity", color=colors[1])
    twin = ax.twinx()
    twin.plot(frame["init_time [ps]"], frame["hole_lifetime [ps]"] / 1000.0, "--", color=colors[0])
    twin.set_ylabel(r"hole lifetime $1/\Gamma_h$ (ns)", color=colors[0])
    return fig


def plot_fss_vs_intensity(frame: pd.DataFrame, branches: Sequence[str], measured: Optional[pd.DataFrame] = None):
    fig, ax = _figure()
    for name in branches:
        ax.plot(frame["intensity [kW/cm^2]"], frame[f"fss_{name} [ueV]"], label=name)
    if measured is not None and not measured.empty:
        ax.errorbar(
            measured["intensity [kW/cm^2]"],
            measured["fss [ueV]"],
            yerr=measured["sigma [ueV]"],
            fmt="o",
            mfc="none",
            capsize=1.5,
            label="synthetic",
        )
    ax.set_xlabel(r"CW intensity (kW cm$^{-2}$)")
    ax.set_ylabel(r"$\hbar\delta_{FS}$ ($\mu$eV)")
    ax.legend(frameon=False)
    return fig


def plot_fidelity_vs_intensity(frame: pd.DataFrame, measured: Optional[pd.DataFrame] = None):
    fig, ax = _figure()
    ax.plot(frame["intensity [kW/cm^2]"], frame["fidelity [1]"], label="model")
    if measured is not None and not measured.empty:
        ax.errorbar(
            measured["intensity [kW/cm^2]"],
            measured["fidelity_measured [1]"],
            yerr=measured["sigma [1]"].fillna(0.0),
            fmt="o",
            mfc="none",
            capsize=1.5,
            label="synthetic",
        )
    ax.set_xlabel(r"CW intensity (kW cm$^{-2}$)")
    ax.set_ylabel("fidelity")
    ax.legend(frameon=False)
    return fig


def plot_series(
    x: np.ndarray,
    curves: Dict[str, np.ndarray],
    xlabel: str,
    ylabel: str,
    points: Optional[Dict[str, np.ndarray]] = None,
    yerr: Optional[np.ndarray] = None,
):
    """Generic figure: data points (optionally with error bars) plus lines."""
    fig, ax = _figure()
    for label, y in (points or {}).items():
        if yerr is not None:
            ax.errorbar(x, y, yerr=yerr, fmt="o", ms=2, mfc="none", capsize=1, label=label)
        else:
            ax.plot(x, y, "o", ms=2, mfc="none", label=label)
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    return fig


def plot_groups(frame: pd.DataFrame, group: str, x: str, y: str, fit: str, sigma: str, xlabel: str, ylabel: str):
    fig, ax = _figure()
    for i, (name, sub) in enumerate(frame.groupby(group, sort=False)):
        color = colors[i % len(colors)]
        ax.errorbar(sub[x], sub[y], yerr=sub[sigma], fmt="o", ms=2, mfc="none", capsize=1, color=color, label=name)
        ax.plot(sub[x], sub[fit], color=color)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    return fig
