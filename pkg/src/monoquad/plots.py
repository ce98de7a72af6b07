"""Figure rendering for the CLI report paths.

Each saver takes already-computed results and writes one PNG next to the
delimited/JSON artifact it illustrates.  Rendering is headless (Agg) and
deterministic: fixed bins, fixed styles, no timestamps.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import AdversarialPair, BoundReport
from .oracle import Report

__all__ = ["save_ratio_figure", "save_estimates_figure", "save_adversarial_figure"]

_RC = {
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.framealpha": 0.9,
    "figure.autolayout": True,
}


def save_ratio_figure(reports: list[BoundReport], path: str) -> None:
    """Worst-case bounds and bound ratios versus the sample budget n."""
    ns = np.array([r.n for r in reports])
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        ax1.loglog(ns, [r.mc_wc for r in reports], label="simple MC")
        ax1.loglog(ns, [r.cv_wc for r in reports], label="control variate")
        ax1.loglog(ns, [r.lhs_wc for r in reports], label="Latin design")
        ax1.loglog(ns, [r.trap_sq_err for r in reports], label="trapezoid (sq. err.)")
        ax1.loglog(ns, [r.var_lb for r in reports], "k--", label="unbiased lower bound")
        ax1.set_xlabel("n")
        ax1.set_ylabel("worst-case variance / squared error")
        ax1.legend(fontsize=7)
        ax2.semilogx(ns, [r.ratio_unbiased for r in reports],
                     label="best unbiased / lower bound")
        ax2.semilogx(ns, [r.ratio_trap for r in reports],
                     label="best unbiased / trapezoid")
        ax2.axhline(8.0, color="k", ls=":", lw=0.8)
        ax2.axhline(1.0, color="k", ls=":", lw=0.8)
        ax2.set_xlabel("n")
        ax2.set_ylabel("ratio")
        ax2.legend(fontsize=7)
        fig.savefig(path)
        plt.close(fig)


def save_estimates_figure(estimates: np.ndarray, report: Report, path: str) -> None:
    """Histogram of the replicated estimates against the exact integral."""
    kind = type(report.config.estimator).__name__
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        ax.hist(estimates, bins=64, color="#4878a8", edgecolor="none")
        ax.axvline(report.exact_integral, color="k", lw=1.2, label="exact integral")
        ax.axvline(report.empirical_mean, color="#b2452c", lw=1.0, ls="--",
                   label="empirical mean")
        ax.set_xlabel("estimate")
        ax.set_ylabel("count")
        ax.set_title(f"{kind}, R={report.config.replications}")
        ax.legend(fontsize=7)
        fig.savefig(path)
        plt.close(fig)


def save_adversarial_figure(pair: AdversarialPair, path: str) -> None:
    """The two near-indistinguishable staircases and their separating cell."""
    m = pair.f1.m
    edges = np.arange(m + 1) / m
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        for f, label, style in ((pair.f1, "f1", "-"), (pair.f2, "f2", "--")):
            y = np.concatenate([[f.alphas[0]], f.alphas])
            ax.step(edges, y, where="pre", ls=style, label=label)
        lo, hi = pair.interval
        ax.axvspan(lo, hi, color="#d9b44a", alpha=0.35,
                   label=f"least-hit cell (miss {pair.miss_probability:.3g})")
        ax.set_xlabel("x")
        ax.set_ylabel("f(x)")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(fontsize=7, loc="upper left")
        fig.savefig(path)
        plt.close(fig)
