"""Matplotlib rendering of sweep and bound-comparison reports.

Figures are an optional companion to the delimited output; every number
shown comes from the same records that go into the CSV.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_sweep(records: Sequence, path: str) -> None:
    """Empirical divergence vs the theoretical floor, one panel per tau."""
    by_tau = defaultdict(list)
    for rec in records:
        if rec.feasible and not rec.error:
            by_tau[rec.tau].append(rec)
    taus = sorted(by_tau)
    n = max(len(taus), 1)
    fig, axes = plt.subplots(1, n, figsize=(4.0 * n, 3.2), squeeze=False, sharey=True)
    for ax, tau in zip(axes[0], taus):
        rows = sorted(by_tau[tau], key=lambda r: r.beta)
        betas = [r.beta for r in rows]
        ax.plot(betas, [r.bound for r in rows], "k-", label="lower bound")
        ax.errorbar(
            betas,
            [r.empirical_divergence for r in rows],
            yerr=[r.allowance for r in rows],
            fmt="o",
            ms=4,
            capsize=2,
            label="empirical",
        )
        ax.set_title(f"tau={tau:.4g}, alpha={rows[0].alpha:.3g}" if rows else f"tau={tau:.4g}")
        ax.set_xlabel("beta")
    axes[0][0].set_ylabel("divergence")
    axes[0][0].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": "tworate"})
    plt.close(fig)


def render_comparison(rows: Sequence, path: str) -> None:
    """Tight KL floor g2 and the earlier floor g1 along beta, per alpha."""
    by_alpha = defaultdict(list)
    for r in rows:
        by_alpha[r.alpha].append(r)
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for alpha in sorted(by_alpha):
        pts = sorted(by_alpha[alpha], key=lambda r: r.beta)
        betas = [p.beta for p in pts]
        ax.plot(betas, [p.g2 for p in pts], "-", label=f"g2, alpha={alpha:.3g}")
        ax.plot(betas, [p.g1 for p in pts], "--", color=ax.lines[-1].get_color())
    ax.set_xlabel("beta")
    ax.set_ylabel("KL lower bound")
    ax.legend(frameon=False, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": "tworate"})
    plt.close(fig)
