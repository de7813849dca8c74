"""Figure rendering for the report path.

Every figure mirrors one of the delimited outputs: curve panels show the
posterior median and 90% band of each term, and the matrix heatmaps show
the posterior-mean correlations and the precision-threshold
probabilities.  Files are written next to the CSVs.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _term_label(designs, term, kind="mean"):
    terms = designs.mean_terms if kind == "mean" else designs.var_terms
    names = designs.covariate_names
    col = terms[term].column
    return names[col] if col < len(names) else f"x{col + 1}"


def _response_label(designs, j):
    names = designs.response_names
    return names[j] if j < len(names) else f"y{j + 1}"


def save_curve_figures(curves, designs, outdir):
    """One panel per (response, term): median line with shaded 90% band."""
    paths = []
    for cs in curves:
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.fill_between(cs.grid, cs.lower, cs.upper, alpha=0.25, label="90% band")
        ax.plot(cs.grid, cs.median, lw=1.5, label="posterior median")
        ax.set_xlabel(_term_label(designs, cs.term))
        ax.set_ylabel(f"f({_term_label(designs, cs.term)}) for {_response_label(designs, cs.response)}")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = os.path.join(
            outdir, f"curve_r{cs.response + 1}_t{cs.term + 1}.png"
        )
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def _heatmap(mat, labels, title, path, vmin=None, vmax=None):
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(mat, cmap="RdBu_r", vmin=vmin, vmax=vmax)
    ax.set_xticks(range(len(labels)))
    ax.set_yticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticklabels(labels, fontsize=8)
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            ax.text(j, i, f"{mat[i, j]:.2f}", ha="center", va="center", fontsize=7)
    ax.set_title(title, fontsize=10)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_correlation_figure(samples, outdir):
    """Heatmap of the posterior-mean correlation matrix."""
    designs = samples.designs
    p = designs.p
    mean_r = np.eye(p)
    from .correlation import pair_indices

    k_idx, l_idx = pair_indices(p)
    means = samples.corr.mean(axis=0)
    mean_r[k_idx, l_idx] = means
    mean_r[l_idx, k_idx] = means
    labels = [_response_label(designs, j) for j in range(p)]
    return _heatmap(
        mean_r, labels, "posterior mean correlations",
        os.path.join(outdir, "correlations.png"), vmin=-1, vmax=1,
    )


def save_precision_figure(probs, designs, threshold, outdir):
    """Heatmap of precision-threshold exceedance probabilities."""
    labels = [_response_label(designs, j) for j in range(designs.p)]
    return _heatmap(
        probs, labels, f"P(|scaled precision| > {threshold:g})",
        os.path.join(outdir, "precision.png"), vmin=0, vmax=1,
    )
