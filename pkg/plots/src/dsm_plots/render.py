"""Figure construction and PNG output.

Rendering is a pure function of the CSV: the sweep figure plots the
aggregate rows as is, the collapse figure plots the recorded histogram
bins (or re-bins the trial cosines when an explicit bin count is
given) with a zero-mean Gaussian fitted to the recorded sample
variance, and the ablation panel plots the per-gain summary
statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .schema import (SchemaError, load_ablation, load_collapse,  # noqa: E402
                     load_sweep)

KINDS = ("sigma2_vs_temp", "collapse_hist", "ablation_panel")
PNG_DPI = 160
OVERLAY_POINTS = 401


@dataclass(frozen=True)
class PlotSpec:
    input_csv: str
    output_image: str
    kind: str
    bins: int | None = None
    log_x: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(
                f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.bins is not None and self.bins < 1:
            raise SchemaError(f"bins must be >= 1, got {self.bins}")


def _sweep_figure(spec: PlotSpec, text: str):
    data = load_sweep(text)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(data.temperatures, data.sigma2_mean, yerr=data.sigma2_std,
                fmt="o-", capsize=3)
    if spec.log_x:
        ax.set_xscale("log")
    ax.set_xlabel("temperature T")
    ax.set_ylabel("sigma2 (mean with std bars)")
    ax.set_title("Subdominant singular value vs temperature")
    ax.grid(True, which="both", alpha=0.3)
    return fig


def _gaussian_overlay(variance: float) -> tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(-1.0, 1.0, OVERLAY_POINTS)
    ys = np.exp(-xs * xs / (2.0 * variance)) / math.sqrt(
        2.0 * math.pi * variance)
    return xs, ys


def _collapse_figure(spec: PlotSpec, text: str):
    data = load_collapse(text)
    if spec.bins is None:
        lefts = np.array(data.bin_left)
        rights = np.array(data.bin_right)
        density = np.array(data.bin_density)
    else:
        cosines = np.array(data.cosines)
        counts, edges = np.histogram(cosines, bins=spec.bins,
                                     range=(-1.0, 1.0))
        lefts, rights = edges[:-1], edges[1:]
        density = counts / (len(cosines) * np.diff(edges))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(lefts, density, width=rights - lefts, align="edge",
           edgecolor="white", linewidth=0.3)
    xs, ys = _gaussian_overlay(data.stats["variance"])
    ax.plot(xs, ys, linewidth=1.5)
    ax.set_xlabel("final cosine")
    ax.set_ylabel("density")
    ax.set_title("Output cosine density with fitted zero-mean Gaussian")
    return fig


def _ablation_figure(spec: PlotSpec, text: str):
    data = load_ablation(text)
    gammas = data.gammas
    ratios = [data.stats[g]["mean_norm_ratio"] for g in gammas]
    ks = [data.stats[g]["ks_stat"] for g in gammas]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax1.plot(gammas, ratios, "o-")
    ax1.plot(gammas, gammas, "--", linewidth=1.0)
    ax1.set_xlabel("gamma_ln")
    ax1.set_ylabel("mean output-norm ratio")
    ax1.set_title("Gain linearity")
    ax2.plot(gammas, ks, "o-")
    ax2.set_xlabel("gamma_ln")
    ax2.set_ylabel("KS statistic vs plain directions")
    ax2.set_title("Direction agreement")
    if spec.log_x:
        ax1.set_xscale("log")
        ax2.set_xscale("log")
    for ax in (ax1, ax2):
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig


_BUILDERS = {
    "sigma2_vs_temp": _sweep_figure,
    "collapse_hist": _collapse_figure,
    "ablation_panel": _ablation_figure,
}


def build_figure(spec: PlotSpec, text: str):
    """Matplotlib figure for the spec; the test suite re-extracts the
    plotted series from the returned artists."""
    return _BUILDERS[spec.kind](spec, text)


def render(spec: PlotSpec) -> None:
    with open(spec.input_csv, encoding="utf-8") as handle:
        text = handle.read()
    fig = build_figure(spec, text)
    try:
        fig.savefig(spec.output_image, dpi=PNG_DPI)
    finally:
        plt.close(fig)
