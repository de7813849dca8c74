"""Declarative model description: data container, terms, priors, schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationModelSpec
from .design import TermSpec


@dataclass(frozen=True)
class Dataset:
    """Response matrix plus the covariate table both predictors draw from."""

    y: np.ndarray
    covariates: np.ndarray
    response_names: tuple = ()
    covariate_names: tuple = ()

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        if y.shape[0] != cov.shape[0]:
            raise ValueError("responses and covariates disagree on row count")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", cov)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.y.shape[1]


@dataclass(frozen=True)
class GammaPrior:
    """Shape/rate pair for inverse-Gamma or Gamma hyperpriors."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("shape and rate hyperparameters must be positive")


@dataclass(frozen=True)
class ScalePrior:
    """Prior choice for a positive scale parameter.

    kind "ig" uses an inverse-Gamma(a, b); kind "halfnormal" uses the
    half-normal with variance hyperparameter phi2 (its density is applied
    on the squared-scale axis, matching the sampler's full conditionals).
    """

    kind: str = "halfnormal"
    a: float = 1.0
    b: float = 1.0
    phi2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("ig", "halfnormal"):
            raise ValueError(f"unknown scale prior kind {self.kind!r}")
        if self.kind == "ig" and (self.a <= 0 or self.b <= 0):
            raise ValueError("inverse-Gamma hyperparameters must be positive")
        if self.kind == "halfnormal" and self.phi2 <= 0:
            raise ValueError("half-normal variance must be positive")

    def log_density(self, s2):
        """Log prior density evaluated at a squared scale."""
        if s2 <= 0:
            return -np.inf
        if self.kind == "ig":
            return -(self.a + 1.0) * np.log(s2) - self.b / s2
        return -0.5 * s2 / self.phi2


def default_c_beta_prior(n, p):
    """IG(1/2, n p / 2), the multivariate analogue of the unit-information prior."""
    return GammaPrior(0.5, n * p / 2.0)


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters for everything outside the correlation model.

    ``c_beta`` may be None, in which case the n- and p-dependent default
    IG(1/2, np/2) is filled in when sampling starts.  Inclusion priors
    are Beta(c, d) on the per-term inclusion probabilities.
    """

    c_beta: GammaPrior | None = None
    mean_inclusion: tuple = (1.0, 1.0)
    var_inclusion: tuple = (1.0, 1.0)
    c_alpha: ScalePrior = field(default_factory=lambda: ScalePrior(kind="ig", a=1.1, b=1.1))
    sigma2: ScalePrior = field(default_factory=lambda: ScalePrior(kind="halfnormal", phi2=2.0))

    def __post_init__(self):
        for pair in (self.mean_inclusion, self.var_inclusion):
            if len(pair) != 2 or pair[0] <= 0 or pair[1] <= 0:
                raise ValueError("inclusion priors need two positive Beta parameters")

    def resolved(self, n, p):
        if self.c_beta is not None:
            return self
        from dataclasses import replace

        return replace(self, c_beta=default_c_beta_prior(n, p))


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to turn a Dataset into a fitted model."""

    mean_terms: tuple
    var_terms: tuple = ()
    correlation: CorrelationModelSpec = field(default_factory=CorrelationModelSpec)
    priors: PriorConfig = field(default_factory=PriorConfig)
    standardize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mean_terms", tuple(self.mean_terms))
        object.__setattr__(self, "var_terms", tuple(self.var_terms))
        for t in self.mean_terms + self.var_terms:
            if not isinstance(t, TermSpec):
                raise TypeError("terms must be TermSpec instances")


@dataclass(frozen=True)
class Schedule:
    """Sweep count, burn-in, thinning, and the chain's base seed."""

    sweeps: int
    burnin: int
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.burnin > self.sweeps:
            raise ValueError("burn-in must not exceed the sweep count")
        if self.burnin < 0:
            raise ValueError("burn-in must be non-negative")
        if self.thin < 1:
            raise ValueError("thinning must be >= 1")

    @property
    def n_retained(self):
        return (self.sweeps - self.burnin) // self.thin


def chain_rng(seed, stream=0):
    """Independent generator for a (seed, stream) pair.

    Streams are derived with a spawn-key counter so parallel and serial
    execution see identical draws.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
