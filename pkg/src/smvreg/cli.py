"""Batch front-end: config parsing, CSV ingestion, and the fit /
summarize / simulate subcommands.

All floating-point output uses 17 significant digits so draws files
round-trip exactly; every config error is raised before sampling starts.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import __version__
from .correlation import (
    COMMON,
    GROUPED_CORRELATIONS,
    GROUPED_VARIABLES,
    CorrelationModelSpec,
    n_pairs,
    pair_indices,
)
from .design import TermSpec
from .model import Dataset, GammaPrior, ModelSpec, PriorConfig, ScalePrior, Schedule
from .posterior import (
    cocluster_matrix,
    correlation_summary,
    curve_summary,
    inclusion_probabilities,
    precision_threshold_probs,
)
from .sampler import ChainHealth, ChainSamples, run_chain
from .simharness import (
    SimScenario,
    desk_schedule,
    format_blocks,
    full_schedule,
    run_manifest,
    run_table,
)

_FMT = "%.17g"


class ConfigError(ValueError):
    """Config problem with a path-qualified message."""


@dataclass(frozen=True)
class Table:
    """A headered, rectangular, numeric CSV in memory."""

    names: tuple
    values: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    def column(self, name):
        try:
            return self.values[:, self.names.index(name)]
        except ValueError as err:
            raise ConfigError(f"column {name!r} not in data header {self.names}") from err


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; column names resolve against the data."""

    data: str
    responses: tuple
    mean_terms: tuple  # (name, kind, q) triples
    var_terms: tuple
    correlation: CorrelationModelSpec
    priors: PriorConfig
    schedule: Schedule
    standardize: bool = True
    output: str = "out"
    precision_threshold: float = 0.1
    curve_grid: int = 100
    simulate: dict = field(default_factory=dict)


_TOP_KEYS = {
    "data",
    "responses",
    "mean",
    "variance",
    "correlation",
    "priors",
    "chain",
    "standardize",
    "output",
    "precision_threshold",
    "curve_grid",
    "simulate",
}
_CORR_KEYS = {
    "model",
    "link",
    "tau2",
    "mu_prior_var",
    "sigma_prior_var",
    "concentration_prior",
    "clusters",
    "groups",
}
_PRIOR_KEYS = {"c_beta", "mean_inclusion", "var_inclusion", "c_alpha", "sigma2"}
_CHAIN_KEYS = {"sweeps", "burnin", "thin", "seed"}
_TERM_KEYS = {"column", "type", "basis"}
_SIM_KEYS = {"mean_model", "n", "rho", "dims", "replicates"}

_VARIANT_NAMES = {
    "common": COMMON,
    "grouped_correlations": GROUPED_CORRELATIONS,
    "grouped_variables": GROUPED_VARIABLES,
}


def _check_keys(mapping, allowed, path):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(
            f"{path}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def _parse_terms(items, path):
    if items is None:
        return ()
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError(f"{path}[{i}]: expected a mapping")
        _check_keys(item, _TERM_KEYS, f"{path}[{i}]")
        if "column" not in item:
            raise ConfigError(f"{path}[{i}]: missing 'column'")
        kind = item.get("type", "parametric")
        q = int(item.get("basis", 1 if kind == "parametric" else 6))
        if kind not in ("parametric", "smooth"):
            raise ConfigError(f"{path}[{i}].type: must be parametric or smooth")
        if kind == "smooth" and q < 2:
            raise ConfigError(f"{path}[{i}].basis: smooth terms need basis >= 2")
        if kind == "parametric" and q != 1:
            raise ConfigError(f"{path}[{i}].basis: parametric terms have basis 1")
        out.append((str(item["column"]), kind, q))
    return tuple(out)


def _parse_correlation(section):
    section = section or {}
    _check_keys(section, _CORR_KEYS, "correlation")
    name = section.get("model", "common")
    if name not in _VARIANT_NAMES:
        raise ConfigError(
            f"correlation.model: unknown variant {name!r}; valid variants are "
            f"{sorted(_VARIANT_NAMES)}"
        )
    conc = section.get("concentration_prior", [5.0, 2.0])
    if len(conc) != 2 or conc[0] <= 0 or conc[1] <= 0:
        raise ConfigError("correlation.concentration_prior: two positive numbers")
    kw = dict(
        variant=_VARIANT_NAMES[name],
        link=section.get("link", "fisher_z"),
        tau2=float(section.get("tau2", 1e-2)),
        mu_var=float(section.get("mu_prior_var", 1.0)),
        sigma_var=float(section.get("sigma_prior_var", 1.0)),
        a_conc=float(conc[0]),
        b_conc=float(conc[1]),
    )
    if kw["variant"] == GROUPED_CORRELATIONS:
        kw["n_clusters"] = int(section.get("clusters", 0))
    if kw["variant"] == GROUPED_VARIABLES:
        if "groups" not in section:
            raise ConfigError("correlation.groups: required for grouped_variables")
        kw["n_var_groups"] = int(section["groups"])
    try:
        return CorrelationModelSpec(**kw)
    except ValueError as err:
        raise ConfigError(f"correlation: {err}") from err


def _parse_scale_prior(section, path, default):
    if section is None:
        return default
    kind = section.get("type", default.kind)
    try:
        if kind == "ig":
            return ScalePrior(kind="ig", a=float(section["a"]), b=float(section["b"]))
        if kind == "halfnormal":
            return ScalePrior(kind="halfnormal", phi2=float(section["phi2"]))
    except KeyError as err:
        raise ConfigError(f"{path}: missing {err} for type {kind!r}") from err
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err
    raise ConfigError(f"{path}.type: must be 'ig' or 'halfnormal'")


def _parse_priors(section):
    section = section or {}
    _check_keys(section, _PRIOR_KEYS, "priors")
    c_beta = None
    if "c_beta" in section and section["c_beta"] is not None:
        pair = section["c_beta"]
        if len(pair) != 2:
            raise ConfigError("priors.c_beta: expected [shape, rate]")
        c_beta = GammaPrior(float(pair[0]), float(pair[1]))

    def incl(key):
        pair = section.get(key, [1.0, 1.0])
        if len(pair) != 2 or pair[0] <= 0 or pair[1] <= 0:
            raise ConfigError(f"priors.{key}: two positive Beta parameters")
        return (float(pair[0]), float(pair[1]))

    try:
        return PriorConfig(
            c_beta=c_beta,
            mean_inclusion=incl("mean_inclusion"),
            var_inclusion=incl("var_inclusion"),
            c_alpha=_parse_scale_prior(
                section.get("c_alpha"), "priors.c_alpha", ScalePrior(kind="ig", a=1.1, b=1.1)
            ),
            sigma2=_parse_scale_prior(
                section.get("sigma2"), "priors.sigma2", ScalePrior(kind="halfnormal", phi2=2.0)
            ),
        )
    except ValueError as err:
        raise ConfigError(f"priors: {err}") from err


def parse_config(text):
    """Parse and validate a YAML run configuration.

    Omitted priors materialize to the defaults: c_beta IG(1/2, np/2),
    uniform Beta(1, 1) inclusion, c_alpha IG(1.1, 1.1), sigma scale
    half-normal(2), correlation-mean base N(0, 1), sigma_R half-normal(1),
    concentration Gamma(5, 2).
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"malformed YAML: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _check_keys(raw, _TOP_KEYS, "config")

    sim = raw.get("simulate") or {}
    if sim:
        _check_keys(sim, _SIM_KEYS, "simulate")

    chain = raw.get("chain") or {}
    _check_keys(chain, _CHAIN_KEYS, "chain")
    sweeps = int(chain.get("sweeps", 40_000))
    burnin = int(chain.get("burnin", 20_000))
    thin = int(chain.get("thin", 2))
    if burnin >= sweeps:
        raise ConfigError("chain.burnin: must be smaller than chain.sweeps")
    if thin < 1:
        raise ConfigError("chain.thin: must be >= 1")
    schedule = Schedule(
        sweeps=sweeps, burnin=burnin, thin=thin, seed=int(chain.get("seed", 0))
    )

    responses = tuple(str(r) for r in (raw.get("responses") or ()))
    if not responses and not sim:
        raise ConfigError("responses: at least one response column is required")

    threshold = float(raw.get("precision_threshold", 0.1))
    if threshold <= 0:
        raise ConfigError("precision_threshold: must be positive")
    grid = int(raw.get("curve_grid", 100))
    if grid < 2:
        raise ConfigError("curve_grid: must be >= 2")

    return RunConfig(
        data=str(raw.get("data", "")),
        responses=responses,
        mean_terms=_parse_terms(raw.get("mean"), "mean"),
        var_terms=_parse_terms(raw.get("variance"), "variance"),
        correlation=_parse_correlation(raw.get("correlation")),
        priors=_parse_priors(raw.get("priors")),
        schedule=schedule,
        standardize=bool(raw.get("standardize", True)),
        output=str(raw.get("output", "out")),
        precision_threshold=threshold,
        curve_grid=grid,
        simulate=sim,
    )


def ingest_csv(path):
    """Read a headered, rectangular, fully numeric CSV."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    names = tuple(s.strip() for s in lines[0].split(","))
    width = len(names)
    rows = []
    for r, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != width:
            raise ValueError(
                f"{path}: row {r} has {len(cells)} cells, header has {width}"
            )
        row = []
        for c, cell in enumerate(cells):
            try:
                row.append(float(cell))
            except ValueError as err:
                raise ValueError(
                    f"{path}: non-numeric cell at row {r}, column {names[c]!r}: {cell!r}"
                ) from err
        rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Table(names=names, values=np.array(rows))


def resolve_model(config, table):
    """Turn the name-based config into a ModelSpec plus Dataset."""
    for name in config.responses:
        if name not in table.names:
            raise ConfigError(f"responses: column {name!r} not in data header")
    covariate_names = tuple(n for n in table.names if n not in config.responses)

    def to_terms(triples, path):
        out = []
        for name, kind, q in triples:
            if name not in covariate_names:
                raise ConfigError(f"{path}: column {name!r} not among covariates")
            out.append(TermSpec(kind, covariate_names.index(name), q))
        return tuple(out)

    y = np.column_stack([table.column(r) for r in config.responses])
    cov = (
        np.column_stack([table.column(c) for c in covariate_names])
        if covariate_names
        else np.empty((table.n, 0))
    )
    dataset = Dataset(
        y=y,
        covariates=cov,
        response_names=config.responses,
        covariate_names=covariate_names,
    )
    spec = ModelSpec(
        mean_terms=to_terms(config.mean_terms, "mean"),
        var_terms=to_terms(config.var_terms, "variance"),
        correlation=config.correlation,
        priors=config.priors,
        standardize=config.standardize,
    )
    return spec, dataset


# ---------------------------------------------------------------------------
# draws file


def _draw_columns(samples):
    """Ordered (name, array) pairs covering every stored parameter."""
    d = samples.designs
    p, px, pz = d.p, d.n_mean_cols, d.n_var_cols
    cols = [("sweep", samples.sweeps)]
    for j in range(p):
        for c in range(1 + px):
            cols.append((f"beta[{j + 1},{c}]", samples.beta[:, j, c]))
    for j in range(p):
        for c in range(px):
            cols.append((f"gamma[{j + 1},{c + 1}]", samples.gamma[:, j, c].astype(int)))
    for j in range(p):
        for c in range(pz):
            cols.append((f"alpha[{j + 1},{c + 1}]", samples.alpha[:, j, c]))
    for j in range(p):
        for c in range(pz):
            cols.append((f"delta[{j + 1},{c + 1}]", samples.delta[:, j, c].astype(int)))
    for j in range(p):
        cols.append((f"sigma2[{j + 1}]", samples.sigma2[:, j]))
    cols.append(("c_beta", samples.c_beta))
    for j in range(p):
        cols.append((f"c_alpha[{j + 1}]", samples.c_alpha[:, j]))
    k_idx, l_idx = pair_indices(p)
    for i in range(k_idx.size):
        cols.append((f"r[{k_idx[i] + 1},{l_idx[i] + 1}]", samples.corr[:, i]))
    for i in range(k_idx.size):
        cols.append((f"theta[{k_idx[i] + 1},{l_idx[i] + 1}]", samples.theta[:, i]))
    for h in range(samples.mu_R.shape[1]):
        cols.append((f"mu_R[{h + 1}]", samples.mu_R[:, h]))
    cols.append(("sigma2_R", samples.sigma2_R))
    for i in range(samples.labels.shape[1]):
        cols.append((f"label[{i + 1}]", samples.labels[:, i]))
    cols.append(("concentration", samples.concentration))
    return cols


def write_draws(samples, path):
    cols = _draw_columns(samples)
    with open(path, "w") as fh:
        fh.write(",".join(name for name, _ in cols) + "\n")
        m = samples.n_draws
        for i in range(m):
            cells = []
            for name, arr in cols:
                v = arr[i]
                if np.issubdtype(np.asarray(v).dtype, np.integer):
                    cells.append(str(int(v)))
                else:
                    cells.append(_FMT % v)
            fh.write(",".join(cells) + "\n")


def read_draws(path, designs, correlation_spec):
    """Rebuild ChainSamples from a draws file plus its designs."""
    table = ingest_csv(path)
    p, px, pz = designs.p, designs.n_mean_cols, designs.n_var_cols

    def grab(shape, dtype=float):
        return np.zeros((table.n,) + shape, dtype=dtype)

    samples = ChainSamples(
        sweeps=table.column("sweep").astype(int),
        beta=grab((p, 1 + px)),
        gamma=grab((p, px), bool),
        alpha=grab((p, pz)),
        delta=grab((p, pz), bool),
        sigma2=grab((p,)),
        c_beta=table.column("c_beta"),
        c_alpha=grab((p,)),
        corr=grab((n_pairs(p),)),
        theta=grab((n_pairs(p),)),
        mu_R=_mu_block(table),
        sigma2_R=table.column("sigma2_R"),
        labels=_label_block(table),
        concentration=table.column("concentration"),
        designs=designs,
        correlation_spec=correlation_spec,
        health=ChainHealth(),
    )
    for j in range(p):
        for c in range(1 + px):
            samples.beta[:, j, c] = table.column(f"beta[{j + 1},{c}]")
        for c in range(px):
            samples.gamma[:, j, c] = table.column(f"gamma[{j + 1},{c + 1}]") > 0.5
        for c in range(pz):
            samples.alpha[:, j, c] = table.column(f"alpha[{j + 1},{c + 1}]")
            samples.delta[:, j, c] = table.column(f"delta[{j + 1},{c + 1}]") > 0.5
        samples.sigma2[:, j] = table.column(f"sigma2[{j + 1}]")
        samples.c_alpha[:, j] = table.column(f"c_alpha[{j + 1}]")
    k_idx, l_idx = pair_indices(p)
    for i in range(k_idx.size):
        samples.corr[:, i] = table.column(f"r[{k_idx[i] + 1},{l_idx[i] + 1}]")
        samples.theta[:, i] = table.column(f"theta[{k_idx[i] + 1},{l_idx[i] + 1}]")
    return samples


def _mu_block(table):
    names = [n for n in table.names if n.startswith("mu_R[")]
    return np.column_stack([table.column(n) for n in names])


def _label_block(table):
    names = [n for n in table.names if n.startswith("label[")]
    if not names:
        return np.zeros((table.n, 0), dtype=int)
    return np.column_stack([table.column(n).astype(int) for n in names])


# ---------------------------------------------------------------------------
# summaries and manifest


def _curve_grids(designs, n_points):
    """Evenly spaced grids over each mean term's observed covariate range."""
    from .posterior import _observed_covariate

    grids = []
    for t, term in enumerate(designs.mean_terms):
        obs = _observed_covariate(designs, term.column)
        grids.append((t, np.linspace(obs.min(), obs.max(), n_points)))
    return grids


def write_summaries(samples, config, outdir, figures=True):
    designs = samples.designs
    paths = {}

    curves = []
    for j in range(designs.p):
        for t, grid in _curve_grids(designs, config.curve_grid):
            curves.append(curve_summary(samples, j, t, grid))
    path = os.path.join(outdir, "curves.csv")
    with open(path, "w") as fh:
        fh.write("response,term,covariate,grid,median,lower,upper\n")
        for cs in curves:
            cov = designs.covariate_names[designs.mean_terms[cs.term].column] if designs.covariate_names else f"x{designs.mean_terms[cs.term].column + 1}"
            for g, med, lo, hi in zip(cs.grid, cs.median, cs.lower, cs.upper):
                fh.write(
                    f"{cs.response + 1},{cs.term + 1},{cov},"
                    + ",".join(_FMT % v for v in (g, med, lo, hi))
                    + "\n"
                )
    paths["curves"] = path

    incl = inclusion_probabilities(samples)
    path = os.path.join(outdir, "inclusion.csv")
    with open(path, "w") as fh:
        fh.write("kind,response,term,coefficient,probability\n")
        for j in range(designs.p):
            for t, sl in enumerate(designs.mean_slices):
                for c in range(sl.start, sl.stop):
                    fh.write(f"mean,{j + 1},{t + 1},{c + 1},{_FMT % incl['mean_coef'][j, c]}\n")
                fh.write(f"mean_term_any,{j + 1},{t + 1},,{_FMT % incl['mean_term'][j, t]}\n")
            for t, sl in enumerate(designs.var_slices):
                for c in range(sl.start, sl.stop):
                    fh.write(f"variance,{j + 1},{t + 1},{c + 1},{_FMT % incl['var_coef'][j, c]}\n")
                fh.write(f"variance_term_any,{j + 1},{t + 1},,{_FMT % incl['var_term'][j, t]}\n")
    paths["inclusion"] = path

    corr_rows = correlation_summary(samples)
    path = os.path.join(outdir, "correlations.csv")
    with open(path, "w") as fh:
        fh.write("var1,var2,mean,sd,q05,q95,cocluster\n")
        for row in corr_rows:
            coc = "" if row.cocluster is None else _FMT % row.cocluster
            fh.write(
                f"{row.pair[0] + 1},{row.pair[1] + 1},"
                + ",".join(_FMT % v for v in (row.mean, row.sd, row.lower, row.upper))
                + f",{coc}\n"
            )
    paths["correlations"] = path

    coc = cocluster_matrix(samples)
    if coc is not None:
        path = os.path.join(outdir, "cocluster.csv")
        np.savetxt(path, coc, delimiter=",", fmt=_FMT)
        paths["cocluster"] = path

    probs = precision_threshold_probs(samples, config.precision_threshold)
    path = os.path.join(outdir, "precision.csv")
    np.savetxt(path, probs, delimiter=",", fmt=_FMT)
    paths["precision"] = path

    if figures:
        figdir = os.path.join(outdir, "figures")
        os.makedirs(figdir, exist_ok=True)
        from .figures import (
            save_correlation_figure,
            save_curve_figures,
            save_precision_figure,
        )

        save_curve_figures(curves, designs, figdir)
        if designs.p > 1:
            save_correlation_figure(samples, figdir)
            save_precision_figure(probs, designs, config.precision_threshold, figdir)
        paths["figures"] = figdir
    return paths


def write_manifest(samples, config, outdir, extra=None):
    designs = samples.designs
    health = samples.health
    manifest = {
        "version": __version__,
        "seed": config.schedule.seed,
        "schedule": {
            "sweeps": config.schedule.sweeps,
            "burnin": config.schedule.burnin,
            "thin": config.schedule.thin,
        },
        "retained_draws": int(samples.n_draws),
        "acceptance": {k: v for k, v in health.acceptance.items() if v is not None},
        "final_window": {
            k: v for k, v in health.final_window.items() if v is not None
        },
        "numerical_failures": dict(health.numerical_failures),
        "tuning_final": {k: float(v) for k, v in health.tuning_final.items()},
        "standardized": config.standardize,
        "curve_centering": "term contributions are centered over the observed "
        "covariate values; the intercept absorbs the level",
        "config": {
            "data": config.data,
            "responses": list(config.responses),
            "correlation": config.correlation.variant,
        },
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outdir, "manifest.yaml")
    with open(path, "w") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=True)
    return path


# ---------------------------------------------------------------------------
# subcommands


def emit_outputs(samples, config, outdir, figures=True):
    """Write draws, summary tables, figures, and the run manifest."""
    os.makedirs(outdir, exist_ok=True)
    paths = {"draws": os.path.join(outdir, "draws.csv")}
    write_draws(samples, paths["draws"])
    paths.update(write_summaries(samples, config, outdir, figures=figures))
    paths["manifest"] = write_manifest(samples, config, outdir)
    return paths


def cmd_fit(config, outdir, figures=True):
    from .design import build_designs

    table = ingest_csv(config.data)
    spec, dataset = resolve_model(config, table)
    designs = build_designs(dataset, spec)  # fail fast on degenerate designs
    samples = run_chain(spec, designs, config.schedule)
    return emit_outputs(samples, config, outdir, figures=figures)


def cmd_summarize(config, draws_path, outdir, figures=True):
    from .design import build_designs

    table = ingest_csv(config.data)
    spec, dataset = resolve_model(config, table)
    designs = build_designs(dataset, spec)
    samples = read_draws(draws_path, designs, spec.correlation.resolved(designs.p))
    os.makedirs(outdir, exist_ok=True)
    paths = write_summaries(samples, config, outdir, figures=figures)
    return paths


def cmd_simulate(config, outdir, mode, n_jobs=1):
    sim = config.simulate or {}
    schedule = full_schedule(config.schedule.seed) if mode == "full" else desk_schedule(
        config.schedule.seed
    )
    dims = tuple(sim.get("dims", (1, 2)))
    scenarios = [
        SimScenario(
            n=int(n),
            rho=float(rho),
            dims=dims,
            mean_model=int(sim.get("mean_model", 1)),
            replicates=int(sim.get("replicates", 10)),
            base_seed=config.schedule.seed,
        )
        for n in sim.get("n", [50])
        for rho in sim.get("rho", [0.1, 0.9])
    ]
    results = run_table(scenarios, schedule, n_jobs=n_jobs)
    os.makedirs(outdir, exist_ok=True)
    paths = {}
    for which, fname in (
        ("relative_bias", "sim_relative_bias.tsv"),
        ("relative_variance", "sim_relative_variance.tsv"),
        ("seconds", "sim_runtime.tsv"),
    ):
        path = os.path.join(outdir, fname)
        with open(path, "w") as fh:
            fh.write(format_blocks(results, which=which))
        paths[which] = path
    manifest = run_manifest(results, schedule)
    path = os.path.join(outdir, "sim_manifest.yaml")
    with open(path, "w") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=True)
    paths["manifest"] = path
    return paths


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smvreg",
        description="Bayesian semiparametric multivariate-response regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--seed", type=int, default=None, help="override the base seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument(
        "--no-figures", action="store_true", help="skip figure rendering"
    )

    sub.add_parser("fit", parents=[common], help="run the sampler on a CSV dataset")

    p_sum = sub.add_parser(
        "summarize", parents=[common], help="recompute summaries from a draws file"
    )
    p_sum.add_argument("--draws", required=True, help="draws.csv from a previous fit")

    p_sim = sub.add_parser(
        "simulate", parents=[common], help="run the efficiency-gain study"
    )
    scale = p_sim.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", action="store_true", default=True)
    scale.add_argument("--full-scale", dest="desk_scale", action="store_false")
    p_sim.add_argument("--jobs", type=int, default=1, help="parallel replicates")

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    with open(args.config) as fh:
        config = parse_config(fh.read())
    if args.seed is not None:
        config = replace(config, schedule=replace(config.schedule, seed=args.seed))
    outdir = args.out or config.output
    figures = not args.no_figures

    try:
        if args.command == "fit":
            paths = cmd_fit(config, outdir, figures=figures)
        elif args.command == "summarize":
            paths = cmd_summarize(config, args.draws, outdir, figures=figures)
        else:
            mode = "desk" if args.desk_scale else "full"
            paths = cmd_simulate(config, outdir, mode, n_jobs=args.jobs)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
