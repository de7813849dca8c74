"""Covariate standardization, knot grids, radial bases, and design matrices.

The mean of each response is an intercept plus a shared linear predictor
built from parametric columns and smooth-term blocks; the log-variance
predictor is built the same way.  All functions here are pure and
deterministic given their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TermSpec:
    """One additive term of a mean or variance predictor.

    kind is "parametric" (single column, basis size 1) or "smooth"
    (radial-basis block of size ``q``).  ``column`` indexes into the
    dataset's covariate table.
    """

    kind: str
    column: int
    q: int = 1

    def __post_init__(self):
        if self.kind not in ("parametric", "smooth"):
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.kind == "parametric" and self.q != 1:
            raise ValueError("parametric terms have basis size 1")
        if self.kind == "smooth" and self.q < 2:
            raise ValueError("smooth terms need basis size >= 2")


@dataclass(frozen=True)
class KnotGrid:
    """Strictly increasing knot locations for one smooth term."""

    column: int
    knots: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or np.any(np.diff(k) <= 0):
            raise ValueError("knots must be a strictly increasing 1-d grid")
        object.__setattr__(self, "knots", k)


@dataclass(frozen=True)
class ColumnScale:
    """Back-transformation info for one standardized column."""

    mean: float
    scale: float


def standardize(column):
    """Center and scale a column to sample mean 0 and sample sd 1.

    Returns (standardized, mean, scale).  The scale is the ddof=1
    standard deviation, so e.g. [1, 2, 3] maps to [-1, 0, 1].
    """
    x = np.asarray(column, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("standardize expects a 1-d column of length >= 2")
    m = float(np.mean(x))
    s = float(np.std(x, ddof=1))
    if s == 0.0 or not np.isfinite(s):
        raise ValueError("degenerate covariate: column is constant")
    return (x - m) / s, m, s


def make_knots(u, q):
    """Place q-1 knots at equally spaced sample quantiles of ``u``.

    Quantile levels are l/q for l = 1..q-1.  Fails rather than
    deduplicating when heavy ties collapse the grid, since a degenerate
    basis silently corrupts selection downstream.
    """
    u = np.asarray(u, dtype=float)
    if q < 2:
        raise ValueError("need q >= 2 for a knot grid")
    n_distinct = np.unique(u).size
    if q - 1 > n_distinct:
        raise ValueError(
            f"cannot place {q - 1} knots on a covariate with {n_distinct} distinct values"
        )
    levels = np.arange(1, q) / q
    knots = np.quantile(u, levels)
    if np.any(np.diff(knots) <= 0):
        raise ValueError(
            "tied sample quantiles produce a non-increasing knot grid; "
            "reduce the basis size or jitter the covariate"
        )
    return KnotGrid(column=-1, knots=knots)


def radial_basis_row(u_i, grid):
    """Evaluate the radial basis (u, r^2 log r^2 per knot) at a scalar.

    r = |u - knot|; the limit value 0 at r = 0 makes the basis total and
    continuous.
    """
    knots = grid.knots
    out = np.empty(knots.size + 1)
    out[0] = u_i
    r2 = (u_i - knots) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = r2 * np.log(r2)
    out[1:] = np.where(r2 > 0.0, vals, 0.0)
    return out


def _radial_basis_matrix(u, grid):
    """Vectorized radial_basis_row over a covariate vector."""
    u = np.asarray(u, dtype=float)
    r2 = (u[:, None] - grid.knots[None, :]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = r2 * np.log(r2)
    block = np.where(r2 > 0.0, vals, 0.0)
    return np.column_stack([u, block])


@dataclass(frozen=True)
class DesignMatrices:
    """Mean and variance designs shared by all responses.

    ``x`` holds the mean design without the intercept; ``xstar`` prepends
    the column of ones.  ``z`` is the variance design (no intercept; the
    multiplicative variance term plays that role).  Terms are ordered
    parametric first, then smooth blocks, and ``mean_slices`` /
    ``var_slices`` give each term's column range.
    """

    n: int
    p: int
    x: np.ndarray
    xstar: np.ndarray
    z: np.ndarray
    mean_terms: tuple
    var_terms: tuple
    mean_slices: tuple
    var_slices: tuple
    mean_knots: tuple
    var_knots: tuple
    y: np.ndarray
    y_scale: tuple
    cov_scale: dict = field(default_factory=dict)
    response_names: tuple = ()
    covariate_names: tuple = ()

    @property
    def n_mean_cols(self):
        return self.x.shape[1]

    @property
    def n_var_cols(self):
        return self.z.shape[1]

    def stacked_row(self, i):
        """Dense block-diagonal row X_i* of shape (p, p*(1+px)).

        Block j carries (1, x_i) for response j; used by tests and dense
        oracles, not by the sampler itself.
        """
        width = 1 + self.n_mean_cols
        out = np.zeros((self.p, self.p * width))
        row = self.xstar[i]
        for j in range(self.p):
            out[j, j * width : (j + 1) * width] = row
        return out


def _expand_terms(covariates, terms, scales, standardize_covariates):
    """Order terms parametric-first and expand smooth blocks."""
    ordered = [t for t in terms if t.kind == "parametric"] + [
        t for t in terms if t.kind == "smooth"
    ]
    cols, slices, knots = [], [], []
    start = 0
    for term in ordered:
        if term.column < 0 or term.column >= covariates.shape[1]:
            raise ValueError(f"covariate column {term.column} out of range")
        u = covariates[:, term.column]
        if standardize_covariates:
            if term.column not in scales:
                u_std, m, s = standardize(u)
                scales[term.column] = ColumnScale(m, s)
            else:
                cs = scales[term.column]
                u_std = (u - cs.mean) / cs.scale
            u = u_std
        if term.kind == "parametric":
            cols.append(u[:, None])
            knots.append(None)
        else:
            grid = make_knots(u, term.q)
            grid = KnotGrid(column=term.column, knots=grid.knots)
            cols.append(_radial_basis_matrix(u, grid))
            knots.append(grid)
        slices.append(slice(start, start + term.q))
        start += term.q
    mat = np.column_stack(cols) if cols else np.empty((covariates.shape[0], 0))
    return tuple(ordered), mat, tuple(slices), tuple(knots)


def build_designs(dataset, spec):
    """Assemble DesignMatrices for a model specification.

    Responses and covariates are standardized when the spec asks for it;
    the per-column means and scales are kept for back-transformation in
    posterior summaries.
    """
    y = np.asarray(dataset.y, dtype=float)
    covariates = np.asarray(dataset.covariates, dtype=float)
    n, p = y.shape

    scales = {}
    mean_terms, x, mean_slices, mean_knots = _expand_terms(
        covariates, spec.mean_terms, scales, spec.standardize
    )
    var_terms, z, var_slices, var_knots = _expand_terms(
        covariates, spec.var_terms, scales, spec.standardize
    )

    if spec.standardize:
        y_std = np.empty_like(y)
        y_scale = []
        for j in range(p):
            y_std[:, j], m, s = standardize(y[:, j])
            y_scale.append(ColumnScale(m, s))
        y = y_std
        y_scale = tuple(y_scale)
    else:
        y_scale = tuple(ColumnScale(0.0, 1.0) for _ in range(p))

    xstar = np.column_stack([np.ones(n), x])
    return DesignMatrices(
        n=n,
        p=p,
        x=x,
        xstar=xstar,
        z=z,
        mean_terms=mean_terms,
        var_terms=var_terms,
        mean_slices=mean_slices,
        var_slices=var_slices,
        mean_knots=mean_knots,
        var_knots=var_knots,
        y=y,
        y_scale=y_scale,
        cov_scale=scales,
        response_names=tuple(getattr(dataset, "response_names", ()) or ()),
        covariate_names=tuple(getattr(dataset, "covariate_names", ()) or ()),
    )
