"""Desk-scale reproduction of the efficiency-gain simulation study.

Ten uniform covariates, ten equicorrelated responses with a single
linear signal in the first one; models of increasing response dimension
are fit to the same replicate and compared through the summed squared
bias of the first mean curve and the summed squared credible-interval
lengths.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .correlation import CorrelationModelSpec
from .design import TermSpec
from .model import Dataset, ModelSpec, PriorConfig, Schedule
from .posterior import at_least_one_probability, fitted_mean_summary
from .sampler import run_chain

N_COVARIATES = 10
N_RESPONSES = 10
SLOPE = 3.47  # calibrated so the signal-to-noise ratio of response 1 is one
INTERCEPT = 0.0

_MEAN_MODEL_COLUMNS = {1: (0,), 2: (0, 1, 2), 3: tuple(range(10))}


@dataclass(frozen=True)
class SimScenario:
    """One sample-size by correlation cell of the study grid."""

    n: int
    rho: float
    dims: tuple = (1, 2)
    mean_model: int = 1
    replicates: int = 10
    base_seed: int = 0

    def __post_init__(self):
        if self.mean_model not in _MEAN_MODEL_COLUMNS:
            raise ValueError("mean_model must be 1, 2, or 3")
        if max(self.dims) > N_RESPONSES:
            raise ValueError(f"response dimension capped at {N_RESPONSES}")
        lo = -1.0 / (N_RESPONSES - 1)
        if not (lo < self.rho < 1.0):
            raise ValueError(
                f"rho={self.rho} leaves the {N_RESPONSES}x{N_RESPONSES} "
                "equicorrelation matrix indefinite"
            )


@dataclass
class SimMetrics:
    """Per-replicate and aggregated outcomes for one scenario cell.

    ``bias`` and ``var`` are (replicates, len(dims)); failed replicates
    carry NaN rows and are dropped from the aggregates.
    """

    scenario: SimScenario
    bias: np.ndarray
    var: np.ndarray
    spurious: np.ndarray
    relevant: np.ndarray
    seconds: np.ndarray
    relative_bias: dict = field(default_factory=dict)
    relative_variance: dict = field(default_factory=dict)

    def aggregate(self):
        dims = self.scenario.dims
        ok = ~np.isnan(self.bias).any(axis=1)
        b = self.bias[ok]
        v = self.var[ok]
        if 1 in dims and ok.any():
            i1 = dims.index(1)
            for i, d in enumerate(dims):
                self.relative_bias[d] = 100.0 * b[:, i].mean() / b[:, i1].mean()
                self.relative_variance[d] = 100.0 * v[:, i].mean() / v[:, i1].mean()
        return self


def equicorrelation(p, rho):
    """Unit-diagonal matrix with constant off-diagonal rho."""
    mat = np.full((p, p), rho)
    np.fill_diagonal(mat, 1.0)
    return mat


def true_mean_first(x1):
    return INTERCEPT + SLOPE * np.asarray(x1)


def gen_dataset(scenario, rng):
    """Ten uniform(-0.5, 0.5) covariates and ten equicorrelated responses."""
    n = scenario.n
    x = rng.uniform(-0.5, 0.5, size=(n, N_COVARIATES))
    mu = np.zeros((n, N_RESPONSES))
    mu[:, 0] = true_mean_first(x[:, 0])
    chol = np.linalg.cholesky(equicorrelation(N_RESPONSES, scenario.rho))
    y = mu + rng.standard_normal((n, N_RESPONSES)) @ chol.T
    return Dataset(
        y=y,
        covariates=x,
        response_names=tuple(f"y{j + 1}" for j in range(N_RESPONSES)),
        covariate_names=tuple(f"x{k + 1}" for k in range(N_COVARIATES)),
    )


def check_snr(y, fitted):
    """(SST - SSE) / SSE for one response and its fitted values."""
    y = np.asarray(y, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    sst = float(np.sum((y - y.mean()) ** 2))
    sse = float(np.sum((y - fitted) ** 2))
    if sse == 0.0:
        raise ZeroDivisionError("perfect fit: SSE is zero, SNR undefined")
    return (sst - sse) / sse


def scenario_model(scenario, inclusion_prior=None):
    """ModelSpec for one fitted dimension of the study."""
    cols = _MEAN_MODEL_COLUMNS[scenario.mean_model]
    priors = PriorConfig()
    if inclusion_prior is not None:
        priors = replace(priors, mean_inclusion=tuple(inclusion_prior))
    return ModelSpec(
        mean_terms=tuple(TermSpec("parametric", c) for c in cols),
        var_terms=(),
        correlation=CorrelationModelSpec(variant="common"),
        priors=priors,
        standardize=True,
    )


def desk_schedule(seed=0):
    return Schedule(sweeps=10_000, burnin=5_000, thin=2, seed=seed)


def full_schedule(seed=0):
    return Schedule(sweeps=40_000, burnin=20_000, thin=2, seed=seed)


def replicate_seed(base_seed, cell_index, rep):
    """Documented counter scheme: one derived 64-bit seed per replicate."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(cell_index, rep))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _fit_one_replicate(args):
    scenario, schedule, cell_index, rep, inclusion_prior = args
    seed = replicate_seed(scenario.base_seed, cell_index, rep)
    rng = np.random.default_rng(seed)
    data = gen_dataset(scenario, rng)
    mu_true = true_mean_first(data.covariates[:, 0])
    spec = scenario_model(scenario, inclusion_prior)

    n_d = len(scenario.dims)
    bias = np.full(n_d, np.nan)
    var = np.full(n_d, np.nan)
    spurious = np.full(n_d, np.nan)
    relevant = np.full(n_d, np.nan)
    seconds = np.full(n_d, np.nan)

    for i, d in enumerate(scenario.dims):
        sub = Dataset(
            y=data.y[:, :d],
            covariates=data.covariates,
            response_names=data.response_names[:d],
            covariate_names=data.covariate_names,
        )
        t0 = time.perf_counter()
        try:
            samples = run_chain(spec, sub, replace(schedule, seed=seed), stream=i)
        except Exception as err:  # replicate dropped, never fatal
            warnings.warn(
                f"replicate {rep} (n={scenario.n}, rho={scenario.rho}, d={d}) "
                f"failed: {err}"
            )
            continue
        seconds[i] = time.perf_counter() - t0
        med, lo, hi = fitted_mean_summary(samples, 0)
        bias[i] = float(np.sum((mu_true - med) ** 2))
        var[i] = float(np.sum((hi - lo) ** 2))
        extra_cols = np.arange(1, len(_MEAN_MODEL_COLUMNS[scenario.mean_model]))
        if extra_cols.size:
            spurious[i] = at_least_one_probability(samples, 0, extra_cols)
        relevant[i] = float(samples.gamma[:, 0, 0].mean())
    return rep, bias, var, spurious, relevant, seconds


def run_cell(scenario, schedule, cell_index=0, inclusion_prior=None, n_jobs=1):
    """All replicates of one scenario cell, serial or process-parallel."""
    n_d = len(scenario.dims)
    reps = scenario.replicates
    metrics = SimMetrics(
        scenario=scenario,
        bias=np.full((reps, n_d), np.nan),
        var=np.full((reps, n_d), np.nan),
        spurious=np.full((reps, n_d), np.nan),
        relevant=np.full((reps, n_d), np.nan),
        seconds=np.full((reps, n_d), np.nan),
    )
    jobs = [
        (scenario, schedule, cell_index, rep, inclusion_prior) for rep in range(reps)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_fit_one_replicate, jobs))
    else:
        results = [_fit_one_replicate(job) for job in jobs]
    for rep, bias, var, spurious, relevant, seconds in results:
        metrics.bias[rep] = bias
        metrics.var[rep] = var
        metrics.spurious[rep] = spurious
        metrics.relevant[rep] = relevant
        metrics.seconds[rep] = seconds
    return metrics.aggregate()


def run_table(scenarios, schedule, inclusion_prior=None, n_jobs=1):
    """SimMetrics for every cell, keyed by (n, rho)."""
    out = {}
    for idx, scenario in enumerate(scenarios):
        out[(scenario.n, scenario.rho)] = run_cell(
            scenario, schedule, cell_index=idx, inclusion_prior=inclusion_prior,
            n_jobs=n_jobs,
        )
    return out


def format_blocks(results, which="relative_bias", sep="\t"):
    """Paper-layout delimited text: one block per fitted dimension.

    Rows are sample sizes, columns correlation values; entries are
    percentages (relative bias or variance) or seconds (timings).
    """
    cells = list(results.values())
    if not cells:
        return ""
    dims = cells[0].scenario.dims
    n_values = sorted({c.scenario.n for c in cells})
    rho_values = sorted({c.scenario.rho for c in cells})

    lines = []
    for d in dims:
        if which != "seconds" and d == 1:
            continue
        header = [f"d={d}"] + [f"{r:g}" for r in rho_values]
        lines.append(sep.join(header))
        for n in n_values:
            row = [str(n)]
            for r in rho_values:
                cell = results.get((n, r))
                val = np.nan
                if cell is not None:
                    if which == "seconds":
                        i = cell.scenario.dims.index(d)
                        col = cell.seconds[:, i]
                        val = float(np.nanmean(col)) if np.any(~np.isnan(col)) else np.nan
                    else:
                        val = getattr(cell, which).get(d, np.nan)
                row.append(f"{val:.2f}")
            lines.append(sep.join(row))
        lines.append("")
    return "\n".join(lines)


def run_manifest(results, schedule):
    """Machine-readable record of seeds, schedule, and per-cell outcomes."""
    cells = []
    for (n, rho), m in sorted(results.items()):
        cells.append(
            {
                "n": n,
                "rho": rho,
                "mean_model": m.scenario.mean_model,
                "dims": list(m.scenario.dims),
                "replicates": m.scenario.replicates,
                "base_seed": m.scenario.base_seed,
                "relative_bias": {str(k): float(v) for k, v in m.relative_bias.items()},
                "relative_variance": {
                    str(k): float(v) for k, v in m.relative_variance.items()
                },
                "failed_replicates": int(np.isnan(m.bias).any(axis=1).sum()),
            }
        )
    return {
        "schedule": {
            "sweeps": schedule.sweeps,
            "burnin": schedule.burnin,
            "thin": schedule.thin,
            "seed": schedule.seed,
        },
        "cells": cells,
    }
