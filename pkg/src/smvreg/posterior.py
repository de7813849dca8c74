"""Posterior summaries: curves with credible bands, inclusion
probabilities, correlation and co-clustering summaries, and
precision-threshold probabilities.

Everything here is a pure function of the retained draws, so recomputing
a summary from a re-ingested draws file reproduces it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import correlation as corrmod
from .design import _radial_basis_matrix


@dataclass(frozen=True)
class CurveSummary:
    """Pointwise posterior median and 90% band of one smooth or linear term.

    The term contribution is centered over the observed covariate values
    (the intercept absorbs the level) and back-transformed to the
    response scale.
    """

    grid: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    response: int
    term: int


@dataclass(frozen=True)
class CorrelationSummary:
    """Posterior moments of one correlation plus its co-cluster probability."""

    pair: tuple
    mean: float
    sd: float
    lower: float
    upper: float
    cocluster: float | None


def term_contributions(samples, response, term, grid):
    """Per-draw contribution of one mean term on a covariate grid.

    The grid is given in original covariate units; contributions come
    back in original response units, centered over the observed data.
    Extrapolation beyond the observed covariate range is refused.
    """
    designs = samples.designs
    spec = designs.mean_terms[term]
    cols = designs.mean_slices[term]

    raw_obs = _observed_covariate(designs, spec.column)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if grid.min() < raw_obs.min() - 1e-12 or grid.max() > raw_obs.max() + 1e-12:
        raise ValueError("grid extends beyond the observed covariate range")

    scale = designs.cov_scale.get(spec.column)
    if scale is not None:
        grid_std = (grid - scale.mean) / scale.scale
    else:
        grid_std = grid

    if spec.kind == "parametric":
        basis = grid_std[:, None]
    else:
        basis = _radial_basis_matrix(grid_std, designs.mean_knots[term])

    coef = samples.beta[:, response, 1 + np.arange(cols.start, cols.stop)]
    contrib = coef @ basis.T  # (draws, grid)

    obs_basis = designs.x[:, cols]
    obs_contrib = coef @ obs_basis.T
    contrib = contrib - obs_contrib.mean(axis=1, keepdims=True)

    y_scale = designs.y_scale[response].scale
    return contrib * y_scale


def _observed_covariate(designs, column):
    """Observed values of a covariate in original units.

    The raw table is not retained, but the leading column of any term
    that uses the covariate is the covariate itself (standardized when
    scaling is on), so it can be reconstructed exactly.
    """
    scale = designs.cov_scale.get(column)
    for k, term in enumerate(designs.mean_terms):
        if term.column == column:
            col = designs.x[:, designs.mean_slices[k].start]
            break
    else:
        for k, term in enumerate(designs.var_terms):
            if term.column == column:
                col = designs.z[:, designs.var_slices[k].start]
                break
        else:
            raise ValueError(f"covariate column {column} not used by any term")
    if scale is not None:
        return col * scale.scale + scale.mean
    return col


def curve_summary(samples, response, term, grid):
    """Median and 5%/95% quantiles of a term's contribution on a grid."""
    if samples.n_draws == 0:
        raise ValueError("no retained draws to summarize")
    contrib = term_contributions(samples, response, term, grid)
    med, lo, hi = np.quantile(contrib, [0.5, 0.05, 0.95], axis=0)
    return CurveSummary(
        grid=np.asarray(grid, dtype=float),
        median=med,
        lower=lo,
        upper=hi,
        response=response,
        term=term,
    )


def fitted_mean_summary(samples, response):
    """Median and 90% band of the full mean at the observed design points.

    Includes the intercept and every term, back-transformed to the
    original response scale; this is the model-averaged fitted curve.
    """
    designs = samples.designs
    draws = samples.beta[:, response, :] @ designs.xstar.T  # (draws, n)
    ys = designs.y_scale[response]
    draws = ys.mean + ys.scale * draws
    med, lo, hi = np.quantile(draws, [0.5, 0.05, 0.95], axis=0)
    return med, lo, hi


def inclusion_probabilities(samples):
    """Posterior inclusion rates of mean and variance coefficients.

    Returns a dict with per-coefficient matrices and per-term
    at-least-one probabilities (the OR is evaluated within each draw, so
    the result is not a function of the marginal rates alone).
    """
    gamma = samples.gamma
    delta = samples.delta
    designs = samples.designs
    out = {
        "mean_coef": gamma.mean(axis=0),
        "var_coef": delta.mean(axis=0) if delta.size else np.zeros(delta.shape[1:]),
    }
    out["mean_term"] = _per_term_any(gamma, designs.mean_slices)
    out["var_term"] = _per_term_any(delta, designs.var_slices)
    return out


def _per_term_any(indicators, slices):
    if indicators.size == 0 or not slices:
        return np.zeros((indicators.shape[1], len(slices)))
    cols = [indicators[:, :, s].any(axis=2) for s in slices]
    return np.stack(cols, axis=-1).mean(axis=0)


def at_least_one_probability(samples, response, columns):
    """P(any of the given mean columns is selected) for one response."""
    cols = np.asarray(columns, dtype=int)
    return float(samples.gamma[:, response, cols].any(axis=1).mean())


def correlation_summary(samples):
    """Per-pair posterior moments, quantiles, and co-cluster probabilities.

    Co-clustering is the fraction of draws in which the two endpoint
    variables share a group (grouped variables) and is absent for the
    common model; for grouped correlations the pairwise co-assignment of
    the correlations themselves is returned by cocluster_matrix.
    """
    p = samples.designs.p
    k_idx, l_idx = corrmod.pair_indices(p)
    variant = samples.correlation_spec.variant
    out = []
    for idx in range(k_idx.size):
        draws = samples.corr[:, idx]
        lo, hi = np.quantile(draws, [0.05, 0.95]) if draws.size else (np.nan, np.nan)
        if variant == corrmod.GROUPED_VARIABLES:
            coc = float(
                (samples.labels[:, k_idx[idx]] == samples.labels[:, l_idx[idx]]).mean()
            )
        else:
            coc = None
        out.append(
            CorrelationSummary(
                pair=(int(k_idx[idx]), int(l_idx[idx])),
                mean=float(draws.mean()),
                sd=float(draws.std(ddof=1)) if draws.size > 1 else 0.0,
                lower=float(lo),
                upper=float(hi),
                cocluster=coc,
            )
        )
    return out


def cocluster_matrix(samples):
    """Co-assignment frequencies between clustered items.

    Grouped correlations: (d, d) over correlation pairs.  Grouped
    variables: (p, p) over responses.  None for the common model.
    """
    variant = samples.correlation_spec.variant
    if variant == corrmod.COMMON:
        return None
    labels = samples.labels
    return (labels[:, :, None] == labels[:, None, :]).mean(axis=0)


def precision_threshold_probs(samples, threshold):
    """P(|scaled precision entry| > threshold) under the posterior.

    Every retained correlation matrix is inverted and scaled to unit
    diagonal with negated off-diagonal entries (the partial-correlation
    convention); the matrix of exceedance frequencies has ones on the
    diagonal.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    p = samples.designs.p
    k_idx, l_idx = corrmod.pair_indices(p)
    count = np.zeros((p, p))
    m = samples.n_draws
    for i in range(m):
        corr = samples.corr_matrix(i)
        prec = np.linalg.inv(corr)
        scale = 1.0 / np.sqrt(np.diag(prec))
        scaled = -prec * np.outer(scale, scale)
        count += (np.abs(scaled) > threshold).astype(float)
    probs = count / max(m, 1)
    np.fill_diagonal(probs, 1.0)
    return probs
