"""The MCMC sampler: blocked selection moves, variance updates, and the
correlation kernel, with adaptive proposal tuning during burn-in.

One sweep updates, in order: mean-model indicators in random blocks;
variance-model indicators jointly with their coefficients through a
one-step reweighted-least-squares proposal; the multiplicative variance
terms; the coefficient shrinkage scale; the variance-coefficient scales;
a Gibbs draw of the regression coefficients; the correlation matrix; the
latent link-scale layer; its mixture means and spread; and, for the
clustered variants, the stick-breaking machinery.  Numerical failures
(non-PD draws, singular Grams, overflowing variances) are counted and
treated as rejections so a chain never crashes mid-run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg as sla
from scipy.special import betaln, gammaln

from . import correlation as corrmod
from .design import build_designs
from .likelihood import (
    CovarianceFactors,
    NotPositiveDefinite,
    RankDeficientGram,
    compute_S,
    residual_outer_sum,
)
from .model import chain_rng

_LOG_2PI = float(np.log(2.0 * np.pi))

# |log variance| beyond this is treated as numerical overflow -> rejection.
_LOGVAR_CAP = 50.0

_MAX_BLOCK = 5


@dataclass
class SamplerState:
    """Every unknown at one sweep.

    ``beta`` and ``alpha`` are dense with exact zeros at deselected
    entries; ``gamma`` / ``delta`` are the matching boolean indicator
    matrices (intercepts are not indexed and never deselected).
    ``d_expand`` carries the expansion variances of the correlation
    proposal between sweeps.
    """

    beta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    sigma2: np.ndarray
    c_beta: float
    c_alpha: np.ndarray
    corr: np.ndarray
    d_expand: np.ndarray
    shadow: corrmod.ShadowState


@dataclass
class TuningState:
    """Adaptive proposal scales and the adaptation bookkeeping.

    Some entries only matter for particular configurations (f2 under the
    half-normal c_alpha prior, zeta when p > 1); run_chain prunes unused
    names from the reported rates.
    """

    p_dim: int
    zeta: float
    h_scale: np.ndarray  # (p, n var terms) IRLS proposal inflation
    g2: float = 1.0
    f1sq: float = 0.1
    f2sq: np.ndarray = None
    f3sq: np.ndarray = None
    batch_size: int = 50
    frozen: bool = False

    def parameters(self):
        """Name -> value map of every adapted scalar."""
        out = {"zeta": self.zeta, "g2": self.g2, "f1": self.f1sq}
        for j in range(self.f3sq.size):
            out[f"f3:{j}"] = self.f3sq[j]
            out[f"f2:{j}"] = self.f2sq[j]
        for j in range(self.h_scale.shape[0]):
            for k in range(self.h_scale.shape[1]):
                out[f"h:{j}:{k}"] = self.h_scale[j, k]
        return out


def default_tuning(p, n_var_terms):
    return TuningState(
        p_dim=p,
        zeta=p + 10.0,
        h_scale=np.ones((p, max(n_var_terms, 1))),
        g2=1.0,
        f1sq=0.1,
        f2sq=np.full(p, 0.5),
        f3sq=np.full(p, 0.25),
    )


class MoveStats:
    """Accept/attempt counters, globally and within the adaptation batch."""

    def __init__(self):
        self.total = {}
        self.batch = {}
        self.last_rate = {}

    def record(self, name, accepted):
        t = self.total.setdefault(name, [0, 0])
        b = self.batch.setdefault(name, [0, 0])
        t[1] += 1
        b[1] += 1
        if accepted:
            t[0] += 1
            b[0] += 1

    def batch_rates(self):
        return {
            k: (acc / att if att else None) for k, (acc, att) in self.batch.items()
        }

    def roll_batch(self):
        for k, (acc, att) in self.batch.items():
            if att:
                self.last_rate[k] = acc / att
        self.batch = {}

    def overall(self):
        return {
            k: (acc / att if att else None) for k, (acc, att) in self.total.items()
        }


def adapt(tuning, rates, batch_index):
    """Nudge each adapted scale toward the 20-25% acceptance band.

    Log-scale steps shrink as min(0.05, 1/sqrt(batch_index)) so the
    adaptation diminishes; rates inside the band leave the scale alone.
    Larger random-walk steps lower acceptance, while a larger zeta
    tightens the correlation proposal and raises it, so the two move in
    opposite directions.  No-op once the tuning is frozen.
    """
    if tuning.frozen:
        return tuning
    step = min(0.05, 1.0 / math.sqrt(max(batch_index, 1)))

    def nudge_up(rate):
        # returns +1 to enlarge the scale, -1 to shrink it, 0 inside band
        if rate is None:
            return 0
        if rate > 0.25:
            return 1
        if rate < 0.20:
            return -1
        return 0

    new = replace(
        tuning,
        h_scale=tuning.h_scale.copy(),
        f2sq=tuning.f2sq.copy(),
        f3sq=tuning.f3sq.copy(),
    )
    for name, rate in rates.items():
        direction = nudge_up(rate)
        if direction == 0:
            continue
        factor = math.exp(direction * step)
        if name == "zeta":
            p_dim = new.p_dim
            excess = (new.zeta - (p_dim + 1.0)) / factor
            new.zeta = max(p_dim + 3.0, p_dim + 1.0 + excess)
        elif name == "g2":
            new.g2 *= factor
        elif name == "f1":
            new.f1sq *= factor
        elif name.startswith("f2:"):
            j = int(name.split(":")[1])
            new.f2sq[j] *= factor
        elif name.startswith("f3:"):
            j = int(name.split(":")[1])
            new.f3sq[j] *= factor
        elif name.startswith("h:"):
            _, j, k = name.split(":")
            new.h_scale[int(j), int(k)] *= factor
    return new


@dataclass
class ChainHealth:
    """Acceptance and failure bookkeeping reported with every run."""

    acceptance: dict = field(default_factory=dict)
    final_window: dict = field(default_factory=dict)
    numerical_failures: dict = field(default_factory=dict)
    tuning_final: dict = field(default_factory=dict)
    adapted_names: tuple = ()


@dataclass
class ChainSamples:
    """Thinned post-burn-in draws plus metadata for the summaries."""

    sweeps: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    sigma2: np.ndarray
    c_beta: np.ndarray
    c_alpha: np.ndarray
    corr: np.ndarray
    theta: np.ndarray
    mu_R: np.ndarray
    sigma2_R: np.ndarray
    labels: np.ndarray
    concentration: np.ndarray
    designs: object
    correlation_spec: corrmod.CorrelationModelSpec
    health: ChainHealth

    @property
    def n_draws(self):
        return self.sweeps.size

    def corr_matrix(self, draw):
        """Reassemble the full correlation matrix of one retained draw."""
        p = self.designs.p
        out = np.eye(p)
        k_idx, l_idx = corrmod.pair_indices(p)
        out[k_idx, l_idx] = self.corr[draw]
        out[l_idx, k_idx] = self.corr[draw]
        return out


class _Cache:
    """Covariance factors and marginal quantities for the current state."""

    def __init__(self, designs, state):
        self.designs = designs
        self.refresh_all(state)

    def refresh_all(self, state):
        self.factors = CovarianceFactors.build(
            variance_matrix(self.designs, state), state.corr
        )
        self.refresh_quants(state)

    def refresh_quants(self, state):
        self.quants = compute_S(self.designs, state.gamma, self.factors, state.c_beta)

    def s_at(self, c_beta):
        q = self.quants
        return q.base - c_beta / (1.0 + c_beta) * q.proj


def variance_matrix(designs, state, alpha=None, sigma2=None):
    """(n, p) matrix of per-observation variances; raises on overflow."""
    alpha = state.alpha if alpha is None else alpha
    sigma2 = state.sigma2 if sigma2 is None else sigma2
    logvar = np.log(sigma2)[None, :]
    if designs.n_var_cols:
        logvar = logvar + designs.z @ alpha.T
    if np.any(np.abs(logvar) > _LOGVAR_CAP):
        raise FloatingPointError("log variance out of range")
    return np.exp(logvar)


def _random_blocks(positions, rng):
    """Shuffle positions and cut them into blocks of random size <= 5."""
    perm = rng.permutation(positions)
    blocks = []
    i = 0
    while i < perm.size:
        size = int(rng.integers(1, min(_MAX_BLOCK, perm.size - i) + 1))
        blocks.append(perm[i : i + size])
        i += size
    return blocks


def _propose_block(current_row, block, q_term, n_rest, incl_prior, rng):
    """Draw a block configuration from the prior-predictive pmf.

    With the inclusion probability integrated out, every configuration
    with m ones has weight Beta(c + n_rest + m, d + q - n_rest - m), so
    the count is sampled first and the positions uniformly after.
    """
    c, d = incl_prior
    size = block.size
    m_range = np.arange(size + 1)
    logw = (
        _log_comb(size, m_range)
        + betaln(c + n_rest + m_range, d + q_term - n_rest - m_range)
    )
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    m = int(rng.choice(size + 1, p=w))
    new_row = current_row.copy()
    new_row[block] = False
    if m:
        chosen = rng.choice(block, size=m, replace=False)
        new_row[chosen] = True
    return new_row


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def update_gamma_blocks(state, cache, priors, rng, stats):
    """Blocked Metropolis moves of the mean-model inclusion indicators.

    Terms are visited in random order; each term's indicators are
    shuffled into random-size blocks, proposed from the integrated-Beta
    prior, and accepted with the marginal-likelihood ratio
    (c_beta + 1)^{(N_C - N_P)/2} exp((S_C - S_P) / 2).
    """
    designs = cache.designs
    p = designs.p
    terms = designs.mean_terms
    if not terms or designs.n_mean_cols == 0:
        return
    order = [(j, k) for j in range(p) for k in range(len(terms))]
    order = [order[i] for i in rng.permutation(len(order))]
    shrink_log = np.log(state.c_beta + 1.0)

    for j, k in order:
        term = terms[k]
        cols = np.arange(designs.mean_slices[k].start, designs.mean_slices[k].stop)
        for block in _random_blocks(cols, rng):
            row = state.gamma[j]
            n_rest = int(row[cols].sum() - row[block].sum())
            new_row = _propose_block(row, block, term.q, n_rest, priors.mean_inclusion, rng)
            if np.array_equal(new_row, row):
                stats.record("gamma", True)
                continue
            gamma_prop = state.gamma.copy()
            gamma_prop[j] = new_row
            try:
                quants_prop = compute_S(designs, gamma_prop, cache.factors, state.c_beta)
            except RankDeficientGram:
                stats.record("gamma", False)
                stats.record("fail:rank", False)
                continue
            log_ratio = 0.5 * shrink_log * (
                cache.quants.n_selected - quants_prop.n_selected
            ) + 0.5 * (cache.s_at(state.c_beta) - quants_prop.S)
            accepted = np.log(rng.uniform()) < log_ratio
            stats.record("gamma", bool(accepted))
            if accepted:
                state.gamma = gamma_prop
                cache.quants = quants_prop


def posterior_mean_beta(designs, gamma, quants, c_beta):
    """Dense posterior-mean coefficient matrix at the current state."""
    shrink = c_beta / (1.0 + c_beta)
    flat = shrink * sla.cho_solve((quants.gram_chol, True), quants.xty)
    return _scatter_beta(designs, gamma, flat, quants.col_counts)


def _scatter_beta(designs, gamma, flat, col_counts):
    p = designs.p
    beta = np.zeros((p, 1 + designs.n_mean_cols))
    offs = np.concatenate([[0], np.cumsum(col_counts)])
    for j in range(p):
        seg = flat[offs[j] : offs[j + 1]]
        beta[j, 0] = seg[0]
        beta[j, 1 + np.flatnonzero(gamma[j])] = seg[1:]
    return beta


def _mvn_logpdf(x, mean, cov_chol, log_scale):
    """N(x; mean, s * L L') in logs, with s = exp(log_scale ... ) scalar."""
    m = x.size
    if m == 0:
        return 0.0
    diff = sla.solve_triangular(cov_chol, x - mean, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(cov_chol))) + m * log_scale
    return -0.5 * m * _LOG_2PI - 0.5 * logdet - 0.5 * float(diff @ diff) / math.exp(log_scale)


def update_delta_alpha(state, cache, priors, tuning, rng, stats):
    """Joint move of variance-model indicators and coefficients.

    The squared residuals at the posterior-mean coefficients follow an
    approximate sigma2_{ij} chi^2_1 law, i.e. a Gamma GLM with log link;
    one reweighted-least-squares step from the current state gives the
    normal proposal for the coefficients of the term being updated.
    """
    designs = cache.designs
    if designs.n_var_cols == 0:
        return
    p = designs.p
    terms = designs.var_terms
    z = designs.z

    order = [(j, k) for j in range(p) for k in range(len(terms))]
    order = [order[i] for i in rng.permutation(len(order))]

    for j, k in order:
        name = f"h:{j}:{k}"
        term = terms[k]
        cols = np.arange(designs.var_slices[k].start, designs.var_slices[k].stop)

        beta_hat = posterior_mean_beta(designs, state.gamma, cache.quants, state.c_beta)
        fitted = designs.xstar @ beta_hat[j]
        e2 = (designs.y[:, j] - fitted) ** 2

        var_cur = cache.factors.sigma2[:, j]
        d_work_cur = np.log(var_cur) + e2 / var_cur - 1.0

        for block in _random_blocks(cols, rng):
            row = state.delta[j]
            n_rest = int(row[cols].sum() - row[block].sum())
            new_row = _propose_block(row, block, term.q, n_rest, priors.var_inclusion, rng)

            sel_prop = np.flatnonzero(new_row[cols]) + cols[0]
            sel_cur = np.flatnonzero(row[cols]) + cols[0]

            alpha_prop_row = state.alpha[j].copy()
            alpha_prop_row[cols] = 0.0
            log_h = math.log(tuning.h_scale[j, k])

            if sel_prop.size:
                z_prop = z[:, sel_prop]
                delta_mat = np.linalg.inv(
                    np.eye(sel_prop.size) / state.c_alpha[j] + z_prop.T @ z_prop
                )
                a_hat_prop = delta_mat @ (z_prop.T @ d_work_cur)
                chol_prop = np.linalg.cholesky(delta_mat)
                draw = a_hat_prop + math.exp(0.5 * log_h) * (
                    chol_prop @ rng.standard_normal(sel_prop.size)
                )
                alpha_prop_row[sel_prop] = draw
                log_q_fwd = _mvn_logpdf(draw, a_hat_prop, chol_prop, log_h)
            else:
                log_q_fwd = 0.0

            alpha_prop = state.alpha.copy()
            alpha_prop[j] = alpha_prop_row
            try:
                sigma2_prop = variance_matrix(designs, state, alpha=alpha_prop)
                factors_prop = CovarianceFactors.build(sigma2_prop, state.corr)
                quants_prop = compute_S(designs, state.gamma, factors_prop, state.c_beta)
            except (FloatingPointError, RankDeficientGram, NotPositiveDefinite):
                stats.record(name, False)
                stats.record("fail:variance", False)
                continue

            # reverse proposal evaluated at the proposed state's working response
            var_prop = sigma2_prop[:, j]
            d_work_prop = np.log(var_prop) + e2 / var_prop - 1.0
            if sel_cur.size:
                z_cur = z[:, sel_cur]
                delta_rev = np.linalg.inv(
                    np.eye(sel_cur.size) / state.c_alpha[j] + z_cur.T @ z_cur
                )
                a_hat_rev = delta_rev @ (z_cur.T @ d_work_prop)
                chol_rev = np.linalg.cholesky(delta_rev)
                log_q_rev = _mvn_logpdf(
                    state.alpha[j, sel_cur], a_hat_rev, chol_rev, log_h
                )
            else:
                log_q_rev = 0.0

            alpha_new = alpha_prop_row[cols][new_row[cols]]
            alpha_old = state.alpha[j, cols][row[cols]]
            log_prior = (
                -0.5 * alpha_new.size * np.log(2 * np.pi * state.c_alpha[j])
                - 0.5 * float(alpha_new @ alpha_new) / state.c_alpha[j]
            ) - (
                -0.5 * alpha_old.size * np.log(2 * np.pi * state.c_alpha[j])
                - 0.5 * float(alpha_old @ alpha_old) / state.c_alpha[j]
            )

            log_lik = -0.5 * float(
                np.sum(np.log(sigma2_prop[:, j])) - np.sum(np.log(var_cur))
            ) + 0.5 * (cache.s_at(state.c_beta) - quants_prop.S)

            log_ratio = log_lik + log_prior + log_q_rev - log_q_fwd
            accepted = np.log(rng.uniform()) < log_ratio
            stats.record(name, bool(accepted))
            if accepted:
                state.delta[j] = new_row
                state.alpha = alpha_prop
                cache.factors = factors_prop
                cache.quants = quants_prop
                var_cur = sigma2_prop[:, j]
                d_work_cur = np.log(var_cur) + e2 / var_cur - 1.0


def update_sigma2_j(state, cache, priors, tuning, rng, stats):
    """Random-walk move of each multiplicative variance term."""
    designs = cache.designs
    for j in range(designs.p):
        name = f"f3:{j}"
        prop = state.sigma2[j] + math.sqrt(tuning.f3sq[j]) * rng.standard_normal()
        if prop <= 0:
            stats.record(name, False)
            continue
        sigma2_prop_vec = state.sigma2.copy()
        sigma2_prop_vec[j] = prop
        try:
            sigma2_prop = variance_matrix(designs, state, sigma2=sigma2_prop_vec)
            factors_prop = CovarianceFactors.build(sigma2_prop, state.corr)
            quants_prop = compute_S(designs, state.gamma, factors_prop, state.c_beta)
        except (FloatingPointError, RankDeficientGram, NotPositiveDefinite):
            stats.record(name, False)
            stats.record("fail:variance", False)
            continue
        log_ratio = (
            0.5 * designs.n * (np.log(state.sigma2[j]) - np.log(prop))
            + 0.5 * (cache.s_at(state.c_beta) - quants_prop.S)
            + priors.sigma2.log_density(prop)
            - priors.sigma2.log_density(state.sigma2[j])
        )
        accepted = np.log(rng.uniform()) < log_ratio
        stats.record(name, bool(accepted))
        if accepted:
            state.sigma2 = sigma2_prop_vec
            cache.factors = factors_prop
            cache.quants = quants_prop


def _cbeta_logpdf(c, n_cols, base, proj, prior):
    if c <= 0:
        return -np.inf
    s_val = base - c / (1.0 + c) * proj
    return (
        -0.5 * n_cols * np.log(c + 1.0)
        - 0.5 * s_val
        - (prior.a + 1.0) * np.log(c)
        - prior.b / c
    )


def _cbeta_dlogpdf(c, n_cols, proj, prior):
    return (
        -0.5 * n_cols / (c + 1.0)
        + 0.5 * proj / (1.0 + c) ** 2
        - (prior.a + 1.0) / c
        + prior.b / c**2
    )


def _cbeta_d2logpdf(c, n_cols, proj, prior):
    return (
        0.5 * n_cols / (c + 1.0) ** 2
        - proj / (1.0 + c) ** 3
        + (prior.a + 1.0) / c**2
        - 2.0 * prior.b / c**3
    )


def newton_raphson_mode(x0, grad, hess, max_iter=100, tol=1e-10):
    """Mode of a unimodal log density on (0, inf) from its derivatives.

    Returns (mode, second derivative at the mode) or None when the
    search leaves the domain, meets a non-concave point, or diverges.
    """
    x = max(x0, 1e-6)
    for _ in range(max_iter):
        d1 = grad(x)
        d2 = hess(x)
        if not np.isfinite(d1) or not np.isfinite(d2) or d2 >= 0:
            return None
        step = d1 / d2
        x_new = x - step
        tries = 0
        while x_new <= 0 and tries < 60:
            step *= 0.5
            x_new = x - step
            tries += 1
        if x_new <= 0 or not np.isfinite(x_new):
            return None
        if abs(x_new - x) < tol * max(1.0, x):
            x = x_new
            break
        x = x_new
    d2 = hess(x)
    if not np.isfinite(d2) or d2 >= 0:
        return None
    return x, d2


def update_c_beta(state, cache, priors, tuning, rng, stats):
    """Independence move of the shrinkage scale from a mode-centered normal.

    The quadratic form depends on c_beta only through the shrinkage
    factor, so the search works on cached quantities.  A random walk on
    the log scale takes over for the sweep when the mode search fails.
    """
    q = cache.quants
    p = cache.designs.p
    n_cols = q.n_selected + p
    prior = priors.c_beta

    mode = newton_raphson_mode(
        state.c_beta,
        lambda c: _cbeta_dlogpdf(c, n_cols, q.proj, prior),
        lambda c: _cbeta_d2logpdf(c, n_cols, q.proj, prior),
    )
    if mode is not None:
        c_hat, d2 = mode
        var = -tuning.g2 / d2
        prop = c_hat + math.sqrt(var) * rng.standard_normal()
        if prop <= 0:
            stats.record("g2", False)
            return
        log_ratio = (
            _cbeta_logpdf(prop, n_cols, q.base, q.proj, prior)
            - _cbeta_logpdf(state.c_beta, n_cols, q.base, q.proj, prior)
            + (-0.5 * (state.c_beta - c_hat) ** 2 / var)
            - (-0.5 * (prop - c_hat) ** 2 / var)
        )
    else:
        prop = math.exp(math.log(state.c_beta) + 0.5 * rng.standard_normal())
        log_ratio = (
            _cbeta_logpdf(prop, n_cols, q.base, q.proj, prior)
            - _cbeta_logpdf(state.c_beta, n_cols, q.base, q.proj, prior)
            + math.log(prop)
            - math.log(state.c_beta)
        )
    accepted = np.log(rng.uniform()) < log_ratio
    stats.record("g2", bool(accepted))
    if accepted:
        state.c_beta = prop


def update_c_alpha(state, cache, priors, tuning, rng, stats):
    """Gibbs (inverse-Gamma prior) or random-walk (half-normal) update."""
    for j in range(cache.designs.p):
        n_sel = int(state.delta[j].sum())
        a_vec = state.alpha[j, state.delta[j]]
        ss = float(a_vec @ a_vec)
        if priors.c_alpha.kind == "ig":
            shape = priors.c_alpha.a + 0.5 * n_sel
            rate = priors.c_alpha.b + 0.5 * ss
            state.c_alpha[j] = rate / rng.gamma(shape)
        else:
            name = f"f2:{j}"
            prop = state.c_alpha[j] + math.sqrt(tuning.f2sq[j]) * rng.standard_normal()

            def logpdf(c):
                if c <= 0:
                    return -np.inf
                return (
                    -0.5 * n_sel * np.log(c)
                    - 0.5 * ss / c
                    - 0.5 * c / priors.c_alpha.phi2
                )

            log_ratio = logpdf(prop) - logpdf(state.c_alpha[j])
            accepted = np.log(rng.uniform()) < log_ratio
            stats.record(name, bool(accepted))
            if accepted:
                state.c_alpha[j] = prop


def draw_beta(state, cache, rng):
    """Exact Gibbs draw of the selected coefficients; deselected stay 0."""
    q = cache.quants
    designs = cache.designs
    shrink = state.c_beta / (1.0 + state.c_beta)
    mean_flat = shrink * sla.cho_solve((q.gram_chol, True), q.xty)
    noise = sla.solve_triangular(
        q.gram_chol.T, rng.standard_normal(mean_flat.size), lower=False
    )
    flat = mean_flat + math.sqrt(shrink) * noise
    state.beta = _scatter_beta(designs, state.gamma, flat, q.col_counts)


def update_correlation(state, cache, corr_spec, tuning, rng, stats):
    """Separation-proposal move of R plus the shadow-layer refreshes."""
    designs = cache.designs
    if designs.p == 1:
        return
    s_resid = residual_outer_sum(designs, state.beta, cache.factors)
    corr_new, d_new, accepted = corrmod.propose_and_accept_R(
        state.corr,
        state.d_expand,
        s_resid,
        designs.n,
        state.shadow,
        corr_spec,
        tuning.zeta,
        rng,
    )
    stats.record("zeta", bool(accepted))
    if accepted and corr_new is not state.corr:
        state.corr = corr_new
        state.d_expand = d_new
        cache.refresh_all(state)

    corrmod.update_theta(state.shadow, state.corr, corr_spec, rng)
    _, f1_acc = corrmod.update_mu_and_sigma_R(
        state.shadow, designs.p, corr_spec, tuning.f1sq, rng
    )
    stats.record("f1", bool(f1_acc))
    if corr_spec.variant == corrmod.GROUPED_CORRELATIONS:
        corrmod.update_dp_clustering(state.shadow, corr_spec, rng)
    elif corr_spec.variant == corrmod.GROUPED_VARIABLES:
        corrmod.update_grouped_variables(state.shadow, designs.p, corr_spec, rng)


class ChainRunner:
    """Owns one chain: state, caches, tuning, and counters.

    Split out from run_chain so joint-consistency checks can interleave
    sweeps with data regeneration.
    """

    def __init__(self, designs, spec, rng, tuning=None, adapt_moves=True):
        self.designs = designs
        self.spec = spec
        self.rng = rng
        self.priors = spec.priors.resolved(designs.n, designs.p)
        self.corr_spec = spec.correlation.resolved(designs.p)
        self.tuning = tuning if tuning is not None else default_tuning(
            designs.p, len(designs.var_terms)
        )
        self.adapt_moves = adapt_moves
        self.stats = MoveStats()
        self.state = self._initial_state()
        self.cache = _Cache(designs, self.state)
        draw_beta(self.state, self.cache, self.rng)

    def _initial_state(self):
        designs = self.designs
        p, px, pz = designs.p, designs.n_mean_cols, designs.n_var_cols
        gamma = np.zeros((p, px), dtype=bool)
        for k, term in enumerate(designs.mean_terms):
            if term.kind == "parametric":
                gamma[:, designs.mean_slices[k]] = True
        sigma2 = np.var(designs.y, axis=0, ddof=1)
        return SamplerState(
            beta=np.zeros((p, 1 + px)),
            gamma=gamma,
            alpha=np.zeros((p, pz)),
            delta=np.zeros((p, pz), dtype=bool),
            sigma2=sigma2,
            c_beta=float(designs.n * p),
            c_alpha=np.ones(p),
            corr=np.eye(p),
            d_expand=np.ones(p),
            shadow=corrmod.init_shadow(p, self.corr_spec),
        )

    def replace_responses(self, y_new):
        """Swap in new response values (joint-consistency harness hook)."""
        self.designs = replace(self.designs, y=np.asarray(y_new, dtype=float))
        self.cache.designs = self.designs
        self.cache.refresh_all(self.state)

    def sweep(self):
        state, cache, rng, stats = self.state, self.cache, self.rng, self.stats
        update_gamma_blocks(state, cache, self.priors, rng, stats)
        update_delta_alpha(state, cache, self.priors, self.tuning, rng, stats)
        update_sigma2_j(state, cache, self.priors, self.tuning, rng, stats)
        update_c_beta(state, cache, self.priors, self.tuning, rng, stats)
        update_c_alpha(state, cache, self.priors, self.tuning, rng, stats)
        draw_beta(state, cache, rng)
        update_correlation(state, cache, self.corr_spec, self.tuning, rng, stats)

    def maybe_adapt(self, sweep_index, burnin):
        if not self.adapt_moves:
            return
        if self.tuning.frozen:
            return
        if sweep_index >= burnin:
            self.stats.roll_batch()
            self.tuning = replace(self.tuning, frozen=True)
            return
        if sweep_index % self.tuning.batch_size == 0:
            batch_index = sweep_index // self.tuning.batch_size
            rates = self.stats.batch_rates()
            self.stats.roll_batch()
            self.tuning = adapt(self.tuning, rates, batch_index)

    def adapted_move_names(self):
        names = ["f1", "g2", "zeta"] if self.designs.p > 1 else ["g2"]
        for j in range(self.designs.p):
            names.append(f"f3:{j}")
            if self.priors.c_alpha.kind == "halfnormal" and self.designs.n_var_cols:
                names.append(f"f2:{j}")
        if self.designs.n_var_cols:
            for j in range(self.designs.p):
                for k in range(len(self.designs.var_terms)):
                    names.append(f"h:{j}:{k}")
        return tuple(names)


def run_chain(spec, data, schedule, stream=0):
    """Run one chain and return the thinned post-burn-in draws.

    ``data`` is a Dataset or prebuilt DesignMatrices.  Fully reproducible
    given (schedule.seed, stream); adaptation freezes at the end of
    burn-in so the retained draws come from a fixed kernel.
    """
    designs = data if hasattr(data, "xstar") else build_designs(data, spec)
    rng = chain_rng(schedule.seed, stream)
    runner = ChainRunner(designs, spec, rng)

    m = schedule.n_retained
    p, px, pz = designs.p, designs.n_mean_cols, designs.n_var_cols
    d_pairs = corrmod.n_pairs(p)
    shadow = runner.state.shadow

    rec = {
        "sweeps": np.zeros(m, dtype=int),
        "beta": np.zeros((m, p, 1 + px)),
        "gamma": np.zeros((m, p, px), dtype=bool),
        "alpha": np.zeros((m, p, pz)),
        "delta": np.zeros((m, p, pz), dtype=bool),
        "sigma2": np.zeros((m, p)),
        "c_beta": np.zeros(m),
        "c_alpha": np.zeros((m, p)),
        "corr": np.zeros((m, d_pairs)),
        "theta": np.zeros((m, d_pairs)),
        "mu_R": np.zeros((m, shadow.mu.size)),
        "sigma2_R": np.zeros(m),
        "labels": np.zeros((m, shadow.labels.size), dtype=int),
        "concentration": np.zeros(m),
    }

    k_idx, l_idx = corrmod.pair_indices(p)
    kept = 0
    for t in range(1, schedule.sweeps + 1):
        runner.sweep()
        runner.maybe_adapt(t, schedule.burnin)
        if t > schedule.burnin and (t - schedule.burnin) % schedule.thin == 0:
            state = runner.state
            rec["sweeps"][kept] = t
            rec["beta"][kept] = state.beta
            rec["gamma"][kept] = state.gamma
            rec["alpha"][kept] = state.alpha
            rec["delta"][kept] = state.delta
            rec["sigma2"][kept] = state.sigma2
            rec["c_beta"][kept] = state.c_beta
            rec["c_alpha"][kept] = state.c_alpha
            rec["corr"][kept] = state.corr[k_idx, l_idx]
            rec["theta"][kept] = state.shadow.theta
            rec["mu_R"][kept] = state.shadow.mu.ravel()
            rec["sigma2_R"][kept] = state.shadow.sigma2_R
            rec["labels"][kept] = state.shadow.labels
            rec["concentration"][kept] = state.shadow.concentration
            kept += 1

    adapted = runner.adapted_move_names()
    health = ChainHealth(
        acceptance=runner.stats.overall(),
        final_window={k: runner.stats.last_rate.get(k) for k in adapted},
        numerical_failures={
            k: v[1] for k, v in runner.stats.total.items() if k.startswith("fail:")
        },
        tuning_final={
            k: v for k, v in runner.tuning.parameters().items()
        },
        adapted_names=adapted,
    )
    return ChainSamples(
        designs=designs,
        correlation_spec=runner.corr_spec,
        health=health,
        **rec,
    )
