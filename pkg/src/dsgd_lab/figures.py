"""Figure rendering for run/bench/compare outputs.

Everything draws through the Agg backend straight to files; nothing here
opens a window.  Callers pass the structured results produced by the
optimiser and the benchmark harness, plus a target path; each renderer
returns the path it wrote.
"""
from __future__ import annotations

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_run_figure", "render_bench_figure", "render_compare_figure"]


def render_run_figure(traj, path, title=None):
    """Objective trace with a standard-error band; variance and eta below."""
    cps = traj.checkpoints
    ks = [c.k for c in cps]
    mean = [c.elbo_mean for c in cps]
    lo = [c.elbo_mean - 2 * c.elbo_se for c in cps]
    hi = [c.elbo_mean + 2 * c.elbo_se for c in cps]

    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(7.0, 6.0), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]})
    ax1.plot(ks, mean, color="tab:blue", lw=1.5, label="objective")
    ax1.fill_between(ks, lo, hi, color="tab:blue", alpha=0.2,
                     label="mean +/- 2 se")
    ax1.set_ylabel("objective estimate")
    ax1.legend(loc="lower right", fontsize=8)
    ax1.set_title(title or f"{traj.model_name} / {traj.estimator}")

    ax2.plot(ks, [c.var_avg for c in cps], color="tab:red", lw=1.2,
             label="avg coordinate variance")
    ax2.set_yscale("log")
    ax2.set_ylabel("gradient variance")
    ax2.set_xlabel("iteration")
    etas = [c.eta for c in cps]
    if not all(math.isnan(v) for v in etas):
        ax3 = ax2.twinx()
        ax3.plot(ks, etas, color="tab:gray", lw=1.0, ls="--", label="eta")
        ax3.set_yscale("log")
        ax3.set_ylabel("eta")
    ax2.legend(loc="upper right", fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_bench_figure(rows, path, title=None):
    """Work-normalised variance ratios as log-scale bars, one per estimator."""
    names = [r["estimator"] for r in rows]
    ratios = [r["wnv_avg_ratio"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    bars = ax.bar(range(len(names)), ratios, color="tab:blue", width=0.6)
    ax.set_yscale("log")
    ax.axhline(1.0, color="black", lw=0.8, ls=":")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("work-normalised variance ratio")
    if title:
        ax.set_title(title)
    for b, r in zip(bars, ratios):
        ax.annotate(f"{r:.3g}", (b.get_x() + b.get_width() / 2, r),
                    ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_compare_figure(rows, path, title=None):
    """Final objective (mean over seeds, +/- sd error bars) per estimator."""
    names = [r["estimator"] for r in rows]
    means = [r["elbo_mean"] for r in rows]
    sds = [r["elbo_sd"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.errorbar(range(len(names)), means, yerr=sds, fmt="o", color="tab:blue",
                capsize=4)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("final objective (mean over seeds)")
    ax.grid(True, axis="y", alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
