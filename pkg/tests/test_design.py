import numpy as np
import pytest

from smvreg.design import (
    KnotGrid,
    TermSpec,
    build_designs,
    make_knots,
    radial_basis_row,
    standardize,
)
from smvreg.model import Dataset, ModelSpec


class TestStandardize:
    def test_symmetric_case(self):
        out, mean, scale = standardize([1.0, 2.0, 3.0])
        np.testing.assert_allclose(out, [-1.0, 0.0, 1.0])
        assert mean == 2.0
        assert scale == 1.0

    def test_idempotence(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=64)
        once, _, _ = standardize(x)
        twice, m, s = standardize(once)
        np.testing.assert_allclose(twice, once, atol=1e-12)
        assert abs(m) < 1e-12
        assert abs(s - 1.0) < 1e-12

    def test_moments_on_uniform_draws(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(-0.5, 0.5, size=500)
        out, _, _ = standardize(x)
        assert abs(out.mean()) < 1e-12
        assert abs(np.std(out, ddof=1) - 1.0) < 1e-12

    def test_constant_column_rejected(self):
        with pytest.raises(ValueError, match="degenerate covariate"):
            standardize(np.ones(10))


class TestMakeKnots:
    def test_median_for_two_bases(self):
        u = np.linspace(0.0, 1.0, 101)
        grid = make_knots(u, 2)
        np.testing.assert_allclose(grid.knots, [0.5])

    def test_equally_spaced_quantiles(self):
        u = np.linspace(0.0, 1.0, 101)
        grid = make_knots(u, 6)
        expected = np.quantile(u, np.arange(1, 6) / 6)
        np.testing.assert_allclose(grid.knots, expected)
        assert np.all(np.diff(grid.knots) > 0)

    def test_heavy_ties_rejected(self):
        u = np.array([0.0] * 50 + [1.0] * 50)
        with pytest.raises(ValueError):
            make_knots(u, 6)

    def test_too_few_distinct_values(self):
        with pytest.raises(ValueError):
            make_knots(np.array([0.0, 1.0, 0.0, 1.0]), 4)


class TestRadialBasisRow:
    def test_zero_at_knot(self):
        grid = KnotGrid(column=0, knots=np.array([0.3, 0.7]))
        row = radial_basis_row(0.3, grid)
        assert row[0] == 0.3
        assert row[1] == 0.0

    def test_log_one_gives_zero(self):
        grid = KnotGrid(column=0, knots=np.array([0.0]))
        row = radial_basis_row(1.0, grid)
        assert row[1] == pytest.approx(0.0, abs=1e-15)

    def test_closed_form_at_half(self):
        grid = KnotGrid(column=0, knots=np.array([0.0]))
        row = radial_basis_row(0.5, grid)
        assert row[1] == pytest.approx(0.25 * np.log(0.25), abs=1e-12)
        assert row[1] == pytest.approx(-0.34657359, abs=1e-7)

    def test_continuity_across_knot(self):
        grid = KnotGrid(column=0, knots=np.array([0.41]))
        below = radial_basis_row(0.41 - 1e-8, grid)
        above = radial_basis_row(0.41 + 1e-8, grid)
        assert np.max(np.abs(below - above)) < 1e-6


def _toy_dataset(n=30, n_cov=3, seed=5):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, (n, n_cov))
    y = rng.normal(size=(n, 3))
    return Dataset(y=y, covariates=x)


class TestBuildDesigns:
    def test_single_parametric_shapes(self):
        data = _toy_dataset()
        spec = ModelSpec(mean_terms=(TermSpec("parametric", 0),))
        designs = build_designs(data, spec)
        assert designs.x.shape == (30, 1)
        assert designs.xstar.shape == (30, 2)

    def test_parametric_plus_smooth_width(self):
        data = _toy_dataset()
        spec = ModelSpec(
            mean_terms=(TermSpec("parametric", 0), TermSpec("smooth", 1, 6))
        )
        designs = build_designs(data, spec)
        assert designs.x.shape[1] == 7

    def test_stacked_block_layout(self):
        data = _toy_dataset()
        spec = ModelSpec(
            mean_terms=(TermSpec("parametric", 0), TermSpec("smooth", 1, 6))
        )
        designs = build_designs(data, spec)
        stacked = designs.stacked_row(4)
        assert stacked.shape == (3, 24)
        width = 1 + designs.n_mean_cols
        for j in range(3):
            block = stacked[j, j * width : (j + 1) * width]
            np.testing.assert_array_equal(block, designs.xstar[4])
            outside = np.delete(stacked[j], np.arange(j * width, (j + 1) * width))
            assert np.all(outside == 0.0)

    def test_parametric_terms_come_first(self):
        data = _toy_dataset()
        spec = ModelSpec(
            mean_terms=(TermSpec("smooth", 1, 4), TermSpec("parametric", 0)),
            standardize=False,
        )
        designs = build_designs(data, spec)
        assert designs.mean_terms[0].kind == "parametric"
        np.testing.assert_array_equal(designs.x[:, 0], data.covariates[:, 0])

    def test_column_out_of_range(self):
        data = _toy_dataset()
        spec = ModelSpec(mean_terms=(TermSpec("parametric", 9),))
        with pytest.raises(ValueError, match="out of range"):
            build_designs(data, spec)

    def test_mean_evaluation_matches_termwise_sum(self):
        # evaluating through the design row must agree with summing the
        # term contributions directly
        data = _toy_dataset()
        spec = ModelSpec(
            mean_terms=(TermSpec("parametric", 0), TermSpec("smooth", 1, 5)),
            standardize=False,
        )
        designs = build_designs(data, spec)
        rng = np.random.default_rng(11)
        beta = rng.normal(size=1 + designs.n_mean_cols)
        direct = designs.xstar @ beta
        u0 = data.covariates[:, 0]
        u1 = data.covariates[:, 1]
        grid = designs.mean_knots[1]
        termwise = beta[0] + u0 * beta[1]
        for i in range(designs.n):
            row = radial_basis_row(u1[i], grid)
            termwise_i = termwise[i] + row @ beta[2:]
            assert abs(direct[i] - termwise_i) < 1e-12

    def test_deterministic(self):
        data = _toy_dataset()
        spec = ModelSpec(mean_terms=(TermSpec("smooth", 2, 4),))
        a = build_designs(data, spec)
        b = build_designs(data, spec)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)

    def test_variance_design(self):
        data = _toy_dataset()
        spec = ModelSpec(
            mean_terms=(TermSpec("parametric", 0),),
            var_terms=(TermSpec("parametric", 1), TermSpec("smooth", 2, 4)),
        )
        designs = build_designs(data, spec)
        assert designs.z.shape == (30, 5)
        assert designs.var_slices == (slice(0, 1), slice(1, 5))


class TestTermSpec:
    def test_parametric_q_must_be_one(self):
        with pytest.raises(ValueError):
            TermSpec("parametric", 0, q=3)

    def test_smooth_needs_q_at_least_two(self):
        with pytest.raises(ValueError):
            TermSpec("smooth", 0, q=1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            TermSpec("wiggly", 0)
