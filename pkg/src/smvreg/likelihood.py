"""Log-likelihood evaluation in factored, Cholesky-based form.

The covariance of observation i factors into a diagonal of variances and
a correlation matrix shared across observations, so the full and
beta-marginalized likelihoods never build the dense np x np covariance.
Normalizing constants are kept everywhere so values are comparable
across models and against dense oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import corr_cholesky

_LOG_2PI = float(np.log(2.0 * np.pi))

# Relative pivot tolerance below which a Gram matrix counts as rank deficient.
_RANK_TOL = 1e-10


class RankDeficientGram(Exception):
    """Raised when a selected design has numerically dependent columns."""


class NotPositiveDefinite(Exception):
    """Raised when a correlation matrix fails its Cholesky factorization."""


@dataclass(frozen=True)
class CovarianceFactors:
    """Per-observation variances plus the shared correlation matrix.

    ``sigma2`` is (n, p) with entries sigma^2_{ij}; ``corr`` is the p x p
    correlation matrix and ``chol`` its cached lower Cholesky factor.
    """

    sigma2: np.ndarray
    corr: np.ndarray
    chol: np.ndarray

    @classmethod
    def build(cls, sigma2, corr):
        sigma2 = np.asarray(sigma2, dtype=float)
        corr = np.asarray(corr, dtype=float)
        if np.any(sigma2 <= 0) or not np.all(np.isfinite(sigma2)):
            raise ValueError("all variances must be positive and finite")
        chol = corr_cholesky(corr)
        if chol is None:
            raise NotPositiveDefinite("correlation not positive definite")
        return cls(sigma2=sigma2, corr=corr, chol=chol)

    @property
    def precision(self):
        """Dense inverse of the correlation matrix via its Cholesky factor."""
        inv_chol = np.linalg.solve(self.chol, np.eye(self.chol.shape[0]))
        return inv_chol.T @ inv_chol

    @property
    def log_det_corr(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @property
    def log_det_sigma(self):
        """log |Sigma| over all observations: sum log sigma2 + n log |R|."""
        n = self.sigma2.shape[0]
        return float(np.sum(np.log(self.sigma2))) + n * self.log_det_corr


@dataclass(frozen=True)
class MarginalQuantities:
    """The quadratic form S and the pieces the sampler reuses.

    ``n_selected`` counts selected mean coefficients excluding intercepts;
    ``gram_chol`` and ``xty`` are the selected-design Gram factor and
    cross-product, reused by the coefficient Gibbs draw; ``proj`` is the
    projection term x'A^-1x so S = base - cbeta/(1+cbeta) * proj.
    """

    S: float
    n_selected: int
    log_det_sigma: float
    base: float
    proj: float
    gram_chol: np.ndarray
    xty: np.ndarray
    col_counts: tuple


def selected_columns(designs, gamma):
    """Per-response selected design blocks, intercept first.

    gamma is a (p, px) boolean matrix over the non-intercept mean
    columns.  Returns a list of (n, 1 + N(gamma_j)) arrays.
    """
    n = designs.n
    ones = np.ones((n, 1))
    blocks = []
    for j in range(designs.p):
        sel = designs.x[:, gamma[j]]
        blocks.append(np.concatenate([ones, sel], axis=1))
    return blocks


def compute_S(designs, gamma, factors, c_beta):
    """The marginalized quadratic form via the trace/Gram expression.

    S = tr(R^-1 sum_i y_i y_i') - cbeta/(1+cbeta) b' A^-1 b with
    A = sum_i X_i' R^-1 X_i and b = sum_i X_i' R^-1 y_i, all on the
    variance-whitened scale.  Raises RankDeficientGram when the selected
    Gram matrix is singular at the pivot tolerance.
    """
    if c_beta < 0:
        raise ValueError("c_beta must be non-negative")
    p = designs.p
    inv_sd = 1.0 / np.sqrt(factors.sigma2)
    y_dot = designs.y * inv_sd
    prec = factors.precision

    base = float(np.sum(prec * (y_dot.T @ y_dot)))

    blocks = selected_columns(designs, gamma)
    scaled = [blocks[j] * inv_sd[:, j : j + 1] for j in range(p)]
    counts = tuple(b.shape[1] for b in blocks)
    total = sum(counts)

    gram = np.empty((total, total))
    xty = np.empty(total)
    offs = np.concatenate([[0], np.cumsum(counts)])
    for j in range(p):
        sj = slice(offs[j], offs[j + 1])
        xty[sj] = scaled[j].T @ (y_dot @ prec[j])
        for k in range(j, p):
            sk = slice(offs[k], offs[k + 1])
            block = prec[j, k] * (scaled[j].T @ scaled[k])
            gram[sj, sk] = block
            if k != j:
                gram[sk, sj] = block.T

    gram_chol = _checked_cholesky(gram, gamma)
    half = np.linalg.solve(gram_chol, xty)
    proj = float(half @ half)

    shrink = c_beta / (1.0 + c_beta)
    n_selected = int(np.count_nonzero(gamma))
    s_val = base - shrink * proj
    return MarginalQuantities(
        S=s_val,
        n_selected=n_selected,
        log_det_sigma=factors.log_det_sigma,
        base=base,
        proj=proj,
        gram_chol=gram_chol,
        xty=xty,
        col_counts=counts,
    )


def _checked_cholesky(gram, gamma):
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as err:
        raise RankDeficientGram(_rank_message(gamma)) from err
    piv = np.diag(chol) ** 2
    if piv.size and piv.min() < _RANK_TOL * max(piv.max(), 1.0):
        raise RankDeficientGram(_rank_message(gamma))
    return chol


def _rank_message(gamma):
    picked = [tuple(np.flatnonzero(row)) for row in gamma]
    return f"selected design is rank deficient for indicator configuration {picked}"


def marginal_loglik(designs, gamma, factors, c_beta):
    """Log of the beta-marginalized likelihood, normalizing constants included."""
    quants = compute_S(designs, gamma, factors, c_beta)
    return marginal_loglik_from_quants(quants, designs.n, designs.p, c_beta)


def marginal_loglik_from_quants(quants, n, p, c_beta):
    n_cols = quants.n_selected + p
    return (
        -0.5 * n * p * _LOG_2PI
        - 0.5 * quants.log_det_sigma
        - 0.5 * n_cols * np.log(c_beta + 1.0)
        - 0.5 * (quants.base - c_beta / (1.0 + c_beta) * quants.proj)
    )


def full_loglik(designs, beta, factors):
    """Joint Gaussian log density of all observations at a coefficient draw.

    ``beta`` is the dense (p, 1 + px) coefficient matrix with exact zeros
    at deselected entries; deselected columns therefore drop out without
    special handling.
    """
    mean = designs.xstar @ beta.T
    return gaussian_loglik(designs.y, mean, factors)


def gaussian_loglik(y, mean, factors):
    """Factored evaluation of sum_i log N(y_i; mean_i, S_i^1/2 R S_i^1/2)."""
    n, p = y.shape
    resid = (y - mean) / np.sqrt(factors.sigma2)
    half = np.linalg.solve(factors.chol, resid.T)
    quad = float(np.sum(half * half))
    return (
        -0.5 * n * p * _LOG_2PI
        - 0.5 * factors.log_det_sigma
        - 0.5 * quad
    )


def residual_outer_sum(designs, beta, factors):
    """sum_i (S_i^-1/2 r_i)(S_i^-1/2 r_i)' feeding the correlation update."""
    resid = (designs.y - designs.xstar @ beta.T) / np.sqrt(factors.sigma2)
    return resid.T @ resid
