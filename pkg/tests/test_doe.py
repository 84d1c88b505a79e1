import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from twinforge.doe import (
    FEATURES,
    PartnerCategory,
    PartnerThresholds,
    _greedy_swap,
    categorize,
    chi2_statistic,
    compute_features,
    corr_matrix,
    crest_factor,
    jump_features,
    linfit_bounds,
    partner_chart,
    partner_chart_from_errors,
    pearson,
    select_test_group,
    select_test_group_detail,
    similarity,
)
from twinforge.errors import (
    ConstantInput,
    DegenerateRange,
    GridMismatch,
    KTooLarge,
    LengthMismatch,
    MissingJumps,
    MissingRom,
)
from twinforge.fom import DataSet
from twinforge.metrics import MEASURES, MetricSet
from twinforge.rom.model import Normalization, init_model
from twinforge.signals import ExcitationSignal, SignalKind, TimeGrid, constant_signal

GRID = TimeGrid(n_samples=10, dt=5.0)


def dataset_with_median(ds_id, median):
    y = np.vstack([np.full(GRID.n_samples, median), np.full(GRID.n_samples, median + 5.0)])
    return DataSet(ds_id, constant_signal(300.0, GRID), y)


def cohort(medians):
    return [dataset_with_median(f"D{j:02d}", m) for j, m in enumerate(medians)]


def exhaustive_chi2(medians, k, bins):
    """Minimum chi-squared over every k-subset, binning by equal-width ranges."""
    lo, hi = min(medians), max(medians)
    bin_of = [min(int((m - lo) / (hi - lo) * bins), bins - 1) for m in medians]
    best = math.inf
    for combo in itertools.combinations(range(len(medians)), k):
        counts = [0] * bins
        for j in combo:
            counts[bin_of[j]] += 1
        e = k / bins
        best = min(best, sum((c - e) ** 2 / e for c in counts))
    return best, bin_of


class TestFeatures:
    def signal(self):
        levels = [300.0, 310.0, 290.0, 320.0, 360.0]
        values = np.repeat(levels, 2)
        jumps = tuple((5.0 + 10.0 * j, levels[j + 1] - levels[j]) for j in range(4))
        return ExcitationSignal(GRID, values, SignalKind.APRBS, jumps)

    def test_jump_means(self):
        jf = jump_features(self.signal())
        assert jf["mean_jumps"] == pytest.approx(15.0)
        assert jf["mean_jumps_excl_first"] == pytest.approx(50.0 / 3.0)
        assert jf["mean_abs_jumps"] == pytest.approx(25.0)
        assert jf["mean_levels"] == pytest.approx(316.0)

    def test_population_statistics(self):
        sig = self.signal()
        y = np.vstack([np.linspace(280, 300, 10), np.linspace(280, 340, 10)])
        fv = compute_features(DataSet("F", sig, y))
        assert fv.std_oven == pytest.approx(np.sqrt(np.mean((sig.values - sig.values.mean()) ** 2)))
        assert fv.std_TB == pytest.approx(np.std(y[1], ddof=0))
        assert fv.mean_oven == pytest.approx(316.0)

    def test_multisine_has_no_jump_features(self):
        fv = compute_features(DataSet("C", constant_signal(330.0, GRID), np.full((2, 10), 300.0)))
        assert fv.std_oven == 0.0 and fv.std_TB == 0.0 and fv.crest_oven == 0.0
        assert all(fv.get(f) is None for f in FEATURES[:4])
        with pytest.raises(MissingJumps):
            jump_features(constant_signal(330.0, GRID))

    def test_crest_factor_of_sine(self):
        t = np.arange(1000) / 1000
        assert crest_factor(300 + 10 * np.sin(2 * np.pi * 5 * t)) == pytest.approx(math.sqrt(2), rel=1e-9)

    def test_unknown_feature(self):
        fv = compute_features(DataSet("C", constant_signal(330.0, GRID), np.full((2, 10), 300.0)))
        with pytest.raises(KeyError):
            fv.get("nope")


class TestTestGroup:
    def test_one_median_per_bin(self):
        sel = select_test_group_detail(cohort([1, 2, 3, 4, 5, 6]), 3, 3)
        assert sel.chi2 == 0.0 and sel.counts == (1, 1, 1)
        assert sel.ids == ("D00", "D02", "D04")
        assert sel.exhaustive

    def test_k_equals_count(self):
        data = cohort([5, 1, 3])
        assert select_test_group(data, 3, 2) == ["D00", "D01", "D02"]

    def test_fifteen_of_large_cohort(self, rng):
        data = cohort(rng.uniform(300, 340, 55))
        sel = select_test_group_detail(data, 15, 5)
        assert len(sel.ids) == 15 and len(set(sel.ids)) == 15
        assert not sel.exhaustive

    def test_errors(self):
        with pytest.raises(KTooLarge):
            select_test_group(cohort([1, 2]), 3)
        with pytest.raises(DegenerateRange):
            select_test_group(cohort([4, 4, 4]), 2)

    def test_input_order_irrelevant(self, rng):
        data = cohort(rng.uniform(0, 10, 9))
        perm = [data[j] for j in rng.permutation(9)]
        assert select_test_group(data, 4) == select_test_group(perm, 4)

    def test_chi2_formula(self):
        assert chi2_statistic([2, 0, 1], 3, 3) == pytest.approx(2.0)


@settings(max_examples=60, deadline=None)
@given(
    medians=st.lists(st.integers(0, 40), min_size=3, max_size=12),
    k=st.integers(1, 5),
    bins=st.integers(2, 5),
)
def test_selection_is_exhaustive_optimum(medians, k, bins):
    if max(medians) == min(medians) or k > len(medians):
        return
    sel = select_test_group_detail(cohort([float(m) for m in medians]), k, bins)
    best, _ = exhaustive_chi2(medians, k, bins)
    assert sel.chi2 == pytest.approx(best, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    bins_of=st.lists(st.integers(0, 4), min_size=3, max_size=12),
    k=st.integers(1, 6),
)
def test_swap_search_reaches_global_optimum(bins_of, k):
    if k > len(bins_of):
        return
    bin_of = np.array(bins_of)
    chosen = _greedy_swap(bin_of, len(bins_of), k, 5)
    assert len(set(chosen)) == k
    got = sum(c * c for c in np.bincount(bin_of[chosen], minlength=5))
    best = min(
        sum(c * c for c in np.bincount(bin_of[list(combo)], minlength=5))
        for combo in itertools.combinations(range(len(bins_of)), k)
    )
    assert got == best


class TestPearson:
    def test_linear(self):
        x = [1.0, 2.0, 4.0, 7.0]
        assert pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0, abs=1e-15)
        assert pearson(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-15)

    def test_hand_value(self):
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)

    def test_errors(self):
        with pytest.raises(ConstantInput):
            pearson([1, 1, 1], [1, 2, 3])
        with pytest.raises(LengthMismatch):
            pearson([1, 2, 3], [1, 2])
        with pytest.raises(LengthMismatch):
            pearson([1, 2], [1, 2])


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    a=st.floats(0.1, 100),
    b=st.floats(-100, 100),
)
def test_pearson_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=8), rng.normal(size=8)
    r = pearson(x, y)
    assert pearson(a * x + b, y) == pytest.approx(r, abs=1e-9)
    assert pearson(x, -a * y + b) == pytest.approx(-r, abs=1e-9)
    assert -1.0 <= r <= 1.0


def feature_cohort(rng, m=10):
    from twinforge.doe import FeatureVector

    fvs, errs = [], []
    for j in range(m):
        vals = {f: float(rng.normal(10, 3)) for f in FEATURES}
        if j % 4 == 0:
            vals["mean_jumps_excl_first"] = None
        fvs.append(FeatureVector(f"P{j}", **vals))
        errs.append(MetricSet(*rng.uniform(0.1, 2.0, 6)))
    return fvs, errs


class TestCorrMatrix:
    def test_layout_and_oracle(self, rng):
        fvs, errs = feature_cohort(rng)
        cm = corr_matrix(fvs, errs)
        assert cm.R.shape == (6, 9) and cm.rows == MEASURES and cm.columns == FEATURES
        for a, meas in enumerate(MEASURES):
            for b, feat in enumerate(FEATURES):
                pairs = [(f.get(feat), getattr(e, meas)) for f, e in zip(fvs, errs) if f.get(feat) is not None]
                assert cm.m[a, b] == len(pairs)
                want = oracles.pearson([p[0] for p in pairs], [p[1] for p in pairs])
                assert cm.R[a, b] == pytest.approx(want, abs=1e-12)

    def test_identical_column(self, rng):
        fvs, errs = feature_cohort(rng)
        errs = [MetricSet(f.std_oven, 1.0 + j, 1.0, 1.0, 1.0, 1.0) for j, f in enumerate(fvs)]
        cm = corr_matrix(fvs, errs)
        assert cm.cell("rmse", "std_oven") == pytest.approx(1.0, abs=1e-12)
        assert ("maxe", "std_oven") in cm.errors and math.isnan(cm.cell("maxe", "std_oven"))

    def test_negative_std_tb_fixture(self, rng):
        from twinforge.doe import FeatureVector

        rmse = rng.uniform(0.5, 3.0, 10)
        fvs = [FeatureVector(f"Q{j}", *([1.0 + j] * 8), std_TB=-r + 1e-9 * rng.normal()) for j, r in enumerate(rmse)]
        errs = [{"rmse": r, "mape": r, "maxe": r, "mede": r, "iqr": r, "r2": r} for r in rmse]
        assert corr_matrix(fvs, errs).cell("rmse", "std_TB") == pytest.approx(-1.0, abs=1e-9)

    def test_permutation_invariant(self, rng):
        fvs, errs = feature_cohort(rng)
        perm = rng.permutation(len(fvs))
        a = corr_matrix(fvs, errs)
        b = corr_matrix([fvs[j] for j in perm], [errs[j] for j in perm])
        assert np.array_equal(a.R, b.R, equal_nan=True)

    def test_misaligned(self, rng):
        fvs, errs = feature_cohort(rng)
        with pytest.raises(LengthMismatch):
            corr_matrix(fvs, errs[:-1])


class TestLinfit:
    def test_exact_line_has_zero_band(self):
        x = np.array([1.0, 2.0, 3.0, 5.0])
        fit = linfit_bounds(x, 3 * x - 2)
        assert fit.slope == pytest.approx(3) and fit.intercept == pytest.approx(-2)
        np.testing.assert_allclose(fit.upper - fit.lower, 0, atol=1e-12)

    def test_band_narrowest_at_mean(self, rng):
        x = rng.uniform(0, 10, 12)
        y = 2 * x + rng.normal(0, 1, 12)
        grid = np.linspace(-5, 15, 201)
        fit = linfit_bounds(x, y, 0.95, x_eval=np.append(grid, x.mean()))
        width = fit.upper - fit.lower
        assert width[-1] <= width[:-1].min() + 1e-12

    def test_five_point_fixture_against_textbook(self):
        from scipy import stats

        x = np.array([0.5, 1.1, 2.3, 3.0, 4.4])
        y = np.array([1.0, 1.9, 3.2, 3.8, 6.1])
        m = 5
        xb = x.mean()
        sxx = ((x - xb) ** 2).sum()
        b1 = ((x - xb) * (y - y.mean())).sum() / sxx
        b0 = y.mean() - b1 * xb
        s = math.sqrt(((y - b0 - b1 * x) ** 2).sum() / (m - 2))
        half = stats.t.ppf(0.975, m - 2) * s * np.sqrt(1 / m + (x - xb) ** 2 / sxx)
        fit = linfit_bounds(x, y, 0.95)
        np.testing.assert_allclose(fit.lower, b0 + b1 * x - half, atol=1e-9, rtol=0)
        np.testing.assert_allclose(fit.upper, b0 + b1 * x + half, atol=1e-9, rtol=0)

    def test_errors(self):
        with pytest.raises(ConstantInput):
            linfit_bounds([2, 2, 2], [1, 2, 3])
        with pytest.raises(LengthMismatch):
            linfit_bounds([1, 2], [1, 2])


class TestSimilarity:
    def test_examples(self, grid):
        a = constant_signal(300.0, grid)
        b = ExcitationSignal(grid, a.values + 10.0, SignalKind.MULTISINE)
        assert similarity(a, a) == 0.0
        assert similarity(a, b) == pytest.approx(10.0)
        with pytest.raises(GridMismatch):
            similarity(a, constant_signal(300.0, GRID))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_similarity_is_pseudometric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (ExcitationSignal(GRID, rng.uniform(280, 470, 10), SignalKind.MULTISINE) for _ in range(3))
    assert similarity(a, b) >= 0
    assert similarity(a, b) == similarity(b, a)
    assert similarity(a, c) <= similarity(a, b) + similarity(b, c) + 1e-12


class TestPartners:
    def test_categories_on_synthetic_cohort(self):
        ids = [f"C{j}" for j in range(8)]
        sims = [0.0, 5.0, 20.0, 30.0, 25.0, 35.0, 40.0, 28.0]
        base = [0.1, 1.0, 3.0, 5.0, 2.0, 9.0, 0.5, 4.0]
        own = [0.6, 0.5, 0.4, 0.3, 2.5, 0.45, 3.0, 0.35]
        cats, cut = categorize(sims, base, own)
        assert cats[0] is PartnerCategory.TOO_SIMILAR
        assert cats[6] is PartnerCategory.DISSIMILAR_WEAK
        assert cats[4] is PartnerCategory.DISSIMILAR_WEAK
        assert cats[5] is PartnerCategory.HIGH_BASE_ERROR
        assert cats[3] is PartnerCategory.HIGH_BASE_ERROR
        assert cats[2] is PartnerCategory.GOOD_PARTNER_SIMILARITY
        chart = partner_chart_from_errors("C0", ids, sims, base, own)
        recs = chart.recommendations()
        assert "C6" not in recs and "C4" not in recs and "C0" not in recs
        assert [r.recommended for r in chart.rows] == sorted([r.recommended for r in chart.rows], reverse=True)
        assert chart == partner_chart_from_errors("C0", ids, sims, base, own)

    def test_thresholds_are_configurable(self):
        sims, base, own = [1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0], [1.0, 1.0, 1.0, 1.0]
        loose, _ = categorize(sims, base, own, PartnerThresholds(similarity_pct=0.0))
        strict, _ = categorize(sims, base, own, PartnerThresholds(similarity_pct=60.0))
        assert sum(c is PartnerCategory.TOO_SIMILAR for c in loose) == 0
        assert sum(c is PartnerCategory.TOO_SIMILAR for c in strict) == 2

    def test_chart_with_models(self, short_sets):
        norm = Normalization.fit(short_sets)
        roms = {ds.id: init_model(2, 0, j, norm) for j, ds in enumerate(short_sets)}
        base = short_sets[0].id
        chart = partner_chart(base, short_sets, roms[base], roms, short_sets[2:])
        assert chart.row(base).similarity == 0.0
        assert chart.row(base).category is PartnerCategory.TOO_SIMILAR
        assert len(chart.rows) == len(short_sets)
        del roms[short_sets[1].id]
        with pytest.raises(MissingRom):
            partner_chart(base, short_sets, roms[base], roms, short_sets[2:])
