"""Report figures: tail density, absolute-return ACF, leverage curve.

Figures are rendered with matplotlib (Agg backend) straight to SVG files
next to the CSV curves the CLI emits, so any external tool can redo the
plots from the same data.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import StylizedFactsReport

__all__ = ["plot_tail_density", "plot_acf", "plot_leverage", "render_report_figures"]

plt.rcParams.update({
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.35,
    "grid.linestyle": "--",
    "svg.hashsalt": "gbmdiff",  # deterministic SVG ids for reproducible bytes
})

_GENERATED = "#1f6fb2"
_REFERENCE = "#c44e52"


def _finish(fig, ax, path, title, xlabel, ylabel):
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_tail_density(report: StylizedFactsReport, path,
                      reference: StylizedFactsReport | None = None):
    fig, ax = plt.subplots()
    ax.loglog(
        report.tail_bin_centers, report.tail_bin_density, "o",
        ms=3, color=_GENERATED, label=f"generated (alpha={report.alpha:.2f})",
    )
    x = report.tail_bin_centers
    if x.size:
        # slope guide anchored at the first density point
        guide = report.tail_bin_density[0] * (x / x[0]) ** (-report.alpha)
        ax.loglog(x, guide, "-", lw=1, color=_GENERATED, alpha=0.6,
                  label=f"|r|^-{report.alpha:.2f}")
    if reference is not None:
        ax.loglog(
            reference.tail_bin_centers, reference.tail_bin_density, "s",
            ms=3, color=_REFERENCE, alpha=0.7,
            label=f"reference (alpha={reference.alpha:.2f})",
        )
    _finish(fig, ax, path, "Heavy-tailed return density",
            "normalized |return|", "density")


def plot_acf(report: StylizedFactsReport, path,
             reference: StylizedFactsReport | None = None):
    fig, ax = plt.subplots()
    lags = np.arange(1, report.acf.size + 1)
    pos = report.acf > 0
    ax.loglog(lags[pos], report.acf[pos], "o-", ms=3, lw=0.8, color=_GENERATED,
              label=f"generated (beta={report.beta:.2f})")
    if reference is not None:
        rpos = reference.acf > 0
        rlags = np.arange(1, reference.acf.size + 1)
        ax.loglog(rlags[rpos], reference.acf[rpos], "s--", ms=3, lw=0.8,
                  color=_REFERENCE, alpha=0.7,
                  label=f"reference (beta={reference.beta:.2f})")
    _finish(fig, ax, path, "Volatility clustering (ACF of |returns|)",
            "lag", "autocorrelation")


def plot_leverage(report: StylizedFactsReport, path,
                  reference: StylizedFactsReport | None = None):
    fig, ax = plt.subplots()
    lags = np.arange(report.leverage.size)
    ax.plot(lags, report.leverage, "-", lw=1.0, color=_GENERATED, label="generated")
    if reference is not None:
        ax.plot(np.arange(reference.leverage.size), reference.leverage, "--",
                lw=1.0, color=_REFERENCE, alpha=0.8, label="reference")
    ax.axhline(0.0, color="black", lw=0.6)
    _finish(fig, ax, path, "Leverage effect L(k)", "lag k",
            "lead-lag correlation")


def render_report_figures(report: StylizedFactsReport, out_dir,
                          reference: StylizedFactsReport | None = None) -> list[str]:
    import os

    paths = []
    for name, fn in (
        ("tail_density.svg", plot_tail_density),
        ("acf_abs.svg", plot_acf),
        ("leverage.svg", plot_leverage),
    ):
        path = os.path.join(out_dir, name)
        fn(report, path, reference)
        paths.append(path)
    return paths
