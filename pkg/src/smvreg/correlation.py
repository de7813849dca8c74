"""Correlation-matrix priors and their Markov kernels.

Three prior variants over the correlation matrix are supported: a single
normal on the (transformed) correlations ("common"), a stick-breaking
mixture clustering the correlations ("grouped_correlations"), and a
mixture clustering the response variables themselves
("grouped_variables", which induces G*(G+1)/2 correlation clusters).

A latent layer theta sits between the correlations and the mixture so
that hyperparameter updates never touch the intractable normalizing
constant over the positive-definite cone; the correlation matrix itself
moves through an inverse-Wishart proposal on an expanded covariance
matrix that is split back into a scale part and a correlation part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import stats

COMMON = "common"
GROUPED_CORRELATIONS = "grouped_correlations"
GROUPED_VARIABLES = "grouped_variables"
_VARIANTS = (COMMON, GROUPED_CORRELATIONS, GROUPED_VARIABLES)

# Cholesky pivots below this (squared) count as numerically non-PD.
_PD_TOL = 1e-10


def fisher_z(r):
    """Map a correlation in (-1, 1) to the real line, z = atanh(r)."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) >= 1.0):
        raise ValueError("fisher_z requires |r| < 1")
    return np.arctanh(r)


def inv_fisher_z(z):
    """Inverse of fisher_z."""
    return np.tanh(np.asarray(z, dtype=float))


def link_jacobian(r, link="fisher_z"):
    """d g(r) / d r for the chosen link; positive on (-1, 1)."""
    r = np.asarray(r, dtype=float)
    if link == "identity":
        return np.ones_like(r)
    if np.any(np.abs(r) >= 1.0):
        raise ValueError("link_jacobian requires |r| < 1")
    return 1.0 / ((1.0 - r) * (1.0 + r))


def apply_link(r, link="fisher_z"):
    if link == "identity":
        return np.asarray(r, dtype=float)
    return fisher_z(r)


def apply_link_inverse(z, link="fisher_z"):
    if link == "identity":
        return np.asarray(z, dtype=float)
    return inv_fisher_z(z)


def pair_indices(p):
    """Upper-triangular (k, l) index arrays in row-major order."""
    return np.triu_indices(p, 1)


def n_pairs(p):
    return p * (p - 1) // 2


def corr_cholesky(mat):
    """Lower Cholesky factor of a correlation matrix, or None.

    Returns None when the factorization fails or any pivot falls below
    the PD tolerance, so proposal code can treat near-singular draws as
    rejections instead of crashing mid-chain.
    """
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.diag(chol) ** 2 <= _PD_TOL):
        return None
    return chol


@dataclass(frozen=True)
class CorrelationModelSpec:
    """Prior variant and hyperparameters for the correlation matrix.

    tau2 is the variance of the latent layer on the link scale; mu_var
    is the base-distribution variance for the cluster means; sigma_var
    is the half-normal variance hyperparameter for sigma2_R; (a_conc,
    b_conc) is the Gamma prior on the stick-breaking concentration.
    """

    variant: str = COMMON
    link: str = "fisher_z"
    tau2: float = 1e-2
    mu_var: float = 1.0
    sigma_var: float = 1.0
    a_conc: float = 5.0
    b_conc: float = 2.0
    n_clusters: int = 0  # truncation H (grouped correlations)
    n_var_groups: int = 0  # G (grouped variables)

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(
                f"unknown correlation variant {self.variant!r}; expected one of {_VARIANTS}"
            )
        if self.link not in ("fisher_z", "identity"):
            raise ValueError(f"unknown link {self.link!r}")
        if self.tau2 <= 0:
            raise ValueError("tau2 must be positive")
        if self.variant == GROUPED_CORRELATIONS and self.n_clusters < 1:
            raise ValueError("grouped correlations needs n_clusters >= 1")
        if self.variant == GROUPED_VARIABLES and self.n_var_groups < 1:
            raise ValueError("grouped variables needs n_var_groups >= 1")

    def resolved(self, p):
        """Fill truncation defaults for a p-dimensional response."""
        if self.variant == GROUPED_CORRELATIONS and self.n_clusters == 0:
            h = min(20, max(1, n_pairs(p)))
            return dataclass_replace(self, n_clusters=h)
        return self


def dataclass_replace(spec, **kw):
    from dataclasses import replace

    return replace(spec, **kw)


@dataclass
class ShadowState:
    """Latent link-scale correlations and their mixture parameters.

    ``theta`` follows the row-major upper-triangular pair order.  For the
    common model ``mu`` is a length-1 array and ``labels`` is all zeros;
    for grouped correlations ``mu`` has one entry per cluster and
    ``labels`` one entry per correlation; for grouped variables ``mu`` is
    a symmetric (G, G) table and ``labels`` one entry per variable.
    """

    theta: np.ndarray
    mu: np.ndarray
    sigma2_R: float
    labels: np.ndarray
    sticks: np.ndarray
    weights: np.ndarray
    concentration: float

    def pair_means(self, pairs_k, pairs_l):
        """Cluster mean for each correlation pair, variant-agnostic."""
        if self.mu.ndim == 2:
            return self.mu[self.labels[pairs_k], self.labels[pairs_l]]
        return self.mu[self.labels]


def init_shadow(p, spec, rng=None):
    """Deterministic initial shadow state: everything in one cluster."""
    d = n_pairs(p)
    if spec.variant == COMMON:
        mu = np.zeros(1)
        labels = np.zeros(d, dtype=int)
        sticks = np.zeros(0)
        weights = np.ones(1)
    elif spec.variant == GROUPED_CORRELATIONS:
        h = spec.n_clusters
        mu = np.zeros(h)
        labels = np.zeros(d, dtype=int)
        sticks, weights = _uniform_sticks(h)
    else:
        g = spec.n_var_groups
        mu = np.zeros((g, g))
        labels = np.zeros(p, dtype=int)
        sticks, weights = _uniform_sticks(g)
    return ShadowState(
        theta=np.zeros(d),
        mu=mu,
        sigma2_R=0.25,
        labels=labels,
        sticks=sticks,
        weights=weights,
        concentration=spec.a_conc / spec.b_conc,
    )


def _uniform_sticks(h):
    """Stick variables whose implied weights are exactly uniform."""
    if h == 1:
        return np.zeros(0), np.ones(1)
    sticks = 1.0 / (h - np.arange(h - 1, dtype=float))
    return sticks, stick_weights(sticks)


def stick_weights(sticks):
    """Weights from stick variables; the last stick is implicit.

    w_1 = v_1, w_h = v_h prod_{l<h}(1 - v_l), and the final weight takes
    the remaining mass so the weights sum to one exactly.
    """
    h = sticks.size + 1
    w = np.empty(h)
    remaining = 1.0
    for i in range(h - 1):
        w[i] = sticks[i] * remaining
        remaining *= 1.0 - sticks[i]
    w[h - 1] = remaining
    return w


def log_prior_R(corr, shadow, spec):
    """Unnormalized log prior of a correlation matrix under the shadow layer.

    Sum over pairs of the squared link-scale deviation from theta plus the
    log link Jacobian; -inf when the matrix is not positive definite.
    """
    corr = np.asarray(corr, dtype=float)
    p = corr.shape[0]
    if p == 1:
        return 0.0
    if corr_cholesky(corr) is None:
        return -np.inf
    k_idx, l_idx = pair_indices(p)
    r = corr[k_idx, l_idx]
    if np.any(np.abs(r) >= 1.0):
        return -np.inf
    z = apply_link(r, spec.link)
    quad = -0.5 * np.sum((z - shadow.theta) ** 2) / spec.tau2
    logjac = float(np.sum(np.log(link_jacobian(r, spec.link))))
    return quad + logjac


def separate_covariance(cov):
    """Split a PD matrix into its variance diagonal and correlation part."""
    d = np.diag(cov).copy()
    inv_s = 1.0 / np.sqrt(d)
    corr = cov * np.outer(inv_s, inv_s)
    np.fill_diagonal(corr, 1.0)
    return d, corr


def _log_iw_unnorm(mat_chol, df, scale):
    """log of |E|^{-(df+p+1)/2} exp(-tr(E^{-1} scale)/2) via a Cholesky of E."""
    p = scale.shape[0]
    logdet = 2.0 * np.sum(np.log(np.diag(mat_chol)))
    half = sla.solve_triangular(mat_chol, scale, lower=True)
    half = sla.solve_triangular(mat_chol, half.T, lower=True)
    return -0.5 * (df + p + 1) * logdet - 0.5 * np.trace(half)


def _log_proposal_density(e_mat, d_diag, df, scale):
    """Normalized log density of the (D, R) split of an IW(df, scale) draw.

    Includes the |scale|^{df/2} normalization (the Gamma and power-of-two
    constants cancel between forward and reverse evaluations) and the
    |D|^{(p-1)/2} Jacobian of the separation, where |D|^{1/2} = prod d_k.
    """
    p = scale.shape[0]
    e_chol = corr_cholesky_like(e_mat)
    if e_chol is None:
        return None
    scale_chol = corr_cholesky_like(scale)
    if scale_chol is None:
        return None
    log_det_scale = 2.0 * np.sum(np.log(np.diag(scale_chol)))
    log_iw = 0.5 * df * log_det_scale + _log_iw_unnorm(e_chol, df, scale)
    log_jac = 0.5 * (p - 1) * float(np.sum(np.log(d_diag)))
    return log_iw + log_jac


def corr_cholesky_like(mat):
    """Cholesky with the same failure semantics as corr_cholesky."""
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.diag(chol) ** 2 <= _PD_TOL):
        return None
    return chol


def separation_log_jacobian(d_diag):
    """log |D|^{(p-1)/2} for the covariance-to-(D, R) change of variables."""
    d_diag = np.asarray(d_diag, dtype=float)
    p = d_diag.size
    return 0.5 * (p - 1) * float(np.sum(np.log(d_diag)))


def propose_and_accept_R(corr, d_expand, s_resid, n_obs, shadow, spec, zeta, rng):
    """One Metropolis-Hastings move of the correlation matrix.

    Draws an expanded covariance from the inverse-Wishart posterior
    IW(n + zeta, s_resid + Psi) centered at the current expanded matrix
    through Psi = (zeta - p - 1) * E, splits the draw into a variance
    diagonal and a correlation matrix, and accepts with the ratio of the
    shadow-prior targets times the reverse/forward proposal densities
    (each with its own centering, evaluated in normalized form).

    Returns (corr, d_expand, accepted).  Numerically non-PD draws count
    as rejections.
    """
    p = corr.shape[0]
    if p == 1:
        return corr, d_expand, True
    if zeta <= p + 1:
        raise ValueError("zeta must exceed p + 1")

    e_cur = np.sqrt(d_expand)[:, None] * corr * np.sqrt(d_expand)[None, :]
    psi_cur = (zeta - p - 1) * e_cur
    df = n_obs + zeta

    try:
        e_prop = stats.invwishart.rvs(df=df, scale=s_resid + psi_cur, random_state=rng)
    except (np.linalg.LinAlgError, ValueError):
        return corr, d_expand, False
    e_prop = np.atleast_2d(e_prop)
    d_prop, corr_prop = separate_covariance(e_prop)
    if np.any(d_prop <= 0) or corr_cholesky(corr_prop) is None:
        return corr, d_expand, False

    psi_prop = (zeta - p - 1) * e_prop

    log_target_prop = _log_target_R(corr_prop, s_resid, n_obs, shadow, spec)
    if not np.isfinite(log_target_prop):
        return corr, d_expand, False
    log_target_cur = _log_target_R(corr, s_resid, n_obs, shadow, spec)

    log_fwd = _log_proposal_density(e_prop, d_prop, df, s_resid + psi_cur)
    log_rev = _log_proposal_density(e_cur, d_expand, df, s_resid + psi_prop)
    if log_fwd is None or log_rev is None:
        return corr, d_expand, False

    log_ratio = (log_target_prop + log_rev) - (log_target_cur + log_fwd)
    if np.log(rng.uniform()) < log_ratio:
        return corr_prop, d_prop, True
    return corr, d_expand, False


def _log_target_R(corr, s_resid, n_obs, shadow, spec):
    """|R|^{-n/2} exp(-tr(R^-1 S)/2) times the shadow prior, in logs."""
    chol = corr_cholesky(corr)
    if chol is None:
        return -np.inf
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    half = sla.solve_triangular(chol, s_resid, lower=True)
    half = sla.solve_triangular(chol, half.T, lower=True)
    loglik = -0.5 * n_obs * logdet - 0.5 * np.trace(half)
    return loglik + log_prior_R(corr, shadow, spec)


def update_theta(shadow, corr, spec, rng):
    """Conjugate refresh of the latent link-scale layer.

    Each theta is normal with precision tau^-2 + sigma2_R^-1, pulled
    between the transformed correlation and its cluster mean.  The
    normalizing-constant ratio of the implied move is taken to be one
    (exact for p = 2 with the fisher-z link, and a good approximation
    for the small tau2 used here).
    """
    p = corr.shape[0]
    if p == 1:
        return shadow
    k_idx, l_idx = pair_indices(p)
    z = apply_link(corr[k_idx, l_idx], spec.link)
    prec = 1.0 / spec.tau2 + 1.0 / shadow.sigma2_R
    var = 1.0 / prec
    mean = var * (z / spec.tau2 + shadow.pair_means(k_idx, l_idx) / shadow.sigma2_R)
    shadow.theta = mean + np.sqrt(var) * rng.standard_normal(z.size)
    return shadow


def _conjugate_mean_draw(theta_sum, count, sigma2_R, mu_var, rng):
    """Posterior draw of a cluster mean given its member thetas."""
    prec = count / sigma2_R + 1.0 / mu_var
    var = 1.0 / prec
    mean = var * theta_sum / sigma2_R
    return mean + np.sqrt(var) * rng.standard_normal()


def update_mu_and_sigma_R(shadow, corr_p, spec, f1sq, rng):
    """Gibbs draw of the cluster means and a random walk on sigma2_R.

    Empty clusters are refreshed from the base distribution.  Returns
    True when the sigma2_R proposal is accepted (negative proposals are
    rejected outright).
    """
    theta = shadow.theta
    if spec.variant == COMMON:
        shadow.mu = np.array(
            [_conjugate_mean_draw(theta.sum(), theta.size, shadow.sigma2_R, spec.mu_var, rng)]
        )
    elif spec.variant == GROUPED_CORRELATIONS:
        for h in range(spec.n_clusters):
            members = shadow.labels == h
            cnt = int(members.sum())
            if cnt == 0:
                shadow.mu[h] = np.sqrt(spec.mu_var) * rng.standard_normal()
            else:
                shadow.mu[h] = _conjugate_mean_draw(
                    theta[members].sum(), cnt, shadow.sigma2_R, spec.mu_var, rng
                )
    else:
        g = spec.n_var_groups
        k_idx, l_idx = pair_indices(corr_p)
        lab_k = shadow.labels[k_idx]
        lab_l = shadow.labels[l_idx]
        for h1 in range(g):
            for h2 in range(h1, g):
                members = ((lab_k == h1) & (lab_l == h2)) | ((lab_k == h2) & (lab_l == h1))
                cnt = int(members.sum())
                if cnt == 0:
                    draw = np.sqrt(spec.mu_var) * rng.standard_normal()
                else:
                    draw = _conjugate_mean_draw(
                        theta[members].sum(), cnt, shadow.sigma2_R, spec.mu_var, rng
                    )
                shadow.mu[h1, h2] = draw
                shadow.mu[h2, h1] = draw

    # sigma2_R random walk against the printed full conditional
    k_idx, l_idx = pair_indices(corr_p)
    resid2 = np.sum((theta - shadow.pair_means(k_idx, l_idx)) ** 2)
    d = theta.size

    def logpdf(s2):
        if s2 <= 0:
            return -np.inf
        return -0.5 * d * np.log(s2) - 0.5 * resid2 / s2 - 0.5 * s2 / spec.sigma_var

    prop = shadow.sigma2_R + np.sqrt(f1sq) * rng.standard_normal()
    log_ratio = logpdf(prop) - logpdf(shadow.sigma2_R)
    if np.log(rng.uniform()) < log_ratio:
        shadow.sigma2_R = prop
        return shadow, True
    return shadow, False


def _stick_update(counts, total, concentration, rng):
    """Blocked-Gibbs draw of the stick variables given cluster counts."""
    h = counts.size
    sticks = np.empty(max(h - 1, 0))
    tail = total
    for i in range(h - 1):
        tail -= counts[i]
        sticks[i] = rng.beta(counts[i] + 1.0, tail + concentration)
    return sticks


def _escobar_west(concentration, n_items, k_nonempty, a, b, rng):
    """Two-stage concentration update under a Gamma(a, b) prior."""
    eta = rng.beta(concentration + 1.0, n_items)
    denom = a + k_nonempty - 1.0 + n_items * (b - np.log(eta))
    pi_eta = (a + k_nonempty - 1.0) / denom
    shape = a + k_nonempty if rng.uniform() < pi_eta else a + k_nonempty - 1.0
    return rng.gamma(shape, 1.0 / (b - np.log(eta)))


def resample_correlation_labels(shadow, rng):
    """Gibbs draw of the per-correlation labels at the current weights.

    P(label = h) is proportional to w_h * N(theta; mu_h, sigma2_R),
    evaluated in logs and drawn by inverse CDF for all pairs at once.
    """
    d = shadow.theta.size
    logw = np.log(np.maximum(shadow.weights, 1e-300))
    logp = logw[None, :] - 0.5 * (shadow.theta[:, None] - shadow.mu[None, :]) ** 2 / shadow.sigma2_R
    logp -= logp.max(axis=1, keepdims=True)
    prob = np.exp(logp)
    prob /= prob.sum(axis=1, keepdims=True)
    cum = np.cumsum(prob, axis=1)
    u = rng.uniform(size=d)
    shadow.labels = (u[:, None] > cum).sum(axis=1)
    return shadow


def resample_variable_labels(shadow, corr_p, rng):
    """Sequential Gibbs scan of the variable labels at the current weights.

    The likelihood of moving variable k to group h is the product over
    partners l of N(theta_kl; mu[h, label_l], sigma2_R) with the other
    labels held at their current values.
    """
    p = corr_p
    g = shadow.weights.size
    theta_mat = np.zeros((p, p))
    k_idx, l_idx = pair_indices(p)
    theta_mat[k_idx, l_idx] = shadow.theta
    theta_mat[l_idx, k_idx] = shadow.theta

    logw = np.log(np.maximum(shadow.weights, 1e-300))
    for k in range(p):
        partners = np.delete(np.arange(p), k)
        partner_labels = shadow.labels[partners]
        # (g, p-1): deviation of theta_k,partner from mu[h, label_partner]
        dev = theta_mat[k, partners][None, :] - shadow.mu[:, partner_labels]
        logp = logw - 0.5 * np.sum(dev**2, axis=1) / shadow.sigma2_R
        logp -= logp.max()
        prob = np.exp(logp)
        prob /= prob.sum()
        shadow.labels[k] = rng.choice(g, p=prob)
    return shadow


def update_dp_clustering(shadow, spec, rng):
    """Sticks, labels, and concentration for the grouped-correlations model."""
    h = spec.n_clusters
    d = shadow.theta.size
    counts = np.bincount(shadow.labels, minlength=h)
    shadow.sticks = _stick_update(counts.astype(float), float(d), shadow.concentration, rng)
    shadow.weights = stick_weights(shadow.sticks)

    resample_correlation_labels(shadow, rng)

    k_nonempty = np.unique(shadow.labels).size
    shadow.concentration = _escobar_west(
        shadow.concentration, d, k_nonempty, spec.a_conc, spec.b_conc, rng
    )
    return shadow


def update_grouped_variables(shadow, corr_p, spec, rng):
    """Sticks, variable labels, and concentration for grouped variables."""
    g = spec.n_var_groups
    p = corr_p
    counts = np.bincount(shadow.labels, minlength=g)
    shadow.sticks = _stick_update(counts.astype(float), float(p), shadow.concentration, rng)
    shadow.weights = stick_weights(shadow.sticks)

    resample_variable_labels(shadow, p, rng)

    k_nonempty = np.unique(shadow.labels).size
    shadow.concentration = _escobar_west(
        shadow.concentration, p, k_nonempty, spec.a_conc, spec.b_conc, rng
    )
    return shadow
