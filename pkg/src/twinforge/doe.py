"""Design-of-experiments analytics for choosing training data sets.

Covers data-set features, chi-squared test-group selection, Pearson
correlation between features and test errors, a regression line with a
confidence band, excitation similarity, and the training-partner chart.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import (
    ConstantInput,
    DegenerateRange,
    GridMismatch,
    KTooLarge,
    LengthMismatch,
    MissingJumps,
    MissingRom,
    ValidationError,
)
from .fom import DataSet
from .metrics import MEASURES, aggregate, evaluate
from .signals import ExcitationSignal

FEATURES = (
    "mean_levels",
    "mean_jumps",
    "mean_jumps_excl_first",
    "mean_abs_jumps",
    "mean_oven",
    "std_oven",
    "crest_oven",
    "std_TA",
    "std_TB",
)
JUMP_FEATURES = FEATURES[:4]
EXHAUSTIVE_LIMIT = 100_000


@dataclass(frozen=True)
class FeatureVector:
    """Scalar features of one data set; jump features are ``None`` for multi-sines."""

    id: str
    mean_levels: Optional[float]
    mean_jumps: Optional[float]
    mean_jumps_excl_first: Optional[float]
    mean_abs_jumps: Optional[float]
    mean_oven: float
    std_oven: float
    crest_oven: float
    std_TA: float
    std_TB: float

    def get(self, name: str) -> Optional[float]:
        if name not in FEATURES:
            raise KeyError(f"unknown feature {name!r}")
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in FEATURES}


def crest_factor(values) -> float:
    """Peak over rms of the mean-removed signal; 0 for a constant signal."""
    v = np.asarray(values, dtype=float)
    d = v - v.mean()
    rms = math.sqrt(float(np.mean(d * d)))
    if rms == 0.0:
        return 0.0
    return float(np.max(np.abs(d)) / rms)


def jump_features(signal: ExcitationSignal) -> dict:
    if not signal.is_aprbs_family or not signal.jumps:
        raise MissingJumps(f"signal {signal.id!r} ({signal.kind.value}) has no jump list")
    deltas = np.array([d for _, d in signal.jumps])
    return {
        "mean_levels": float(np.mean(signal.levels)),
        "mean_jumps": float(np.mean(deltas)),
        "mean_jumps_excl_first": float(np.mean(deltas[1:])) if len(deltas) > 1 else None,
        "mean_abs_jumps": float(np.mean(np.abs(deltas))),
    }


def compute_features(ds: DataSet) -> FeatureVector:
    sig = ds.excitation
    try:
        jf = jump_features(sig)
    except MissingJumps:
        jf = dict.fromkeys(JUMP_FEATURES)
    g = sig.values
    return FeatureVector(
        id=ds.id,
        **jf,
        mean_oven=float(np.mean(g)),
        std_oven=float(np.std(g)),
        crest_oven=crest_factor(g),
        std_TA=float(np.std(ds.outputs[0])),
        std_TB=float(np.std(ds.outputs[1])),
    )


# -- test group selection ---------------------------------------------------

def _bin_indices(medians: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(medians.min()), float(medians.max())
    if hi == lo:
        raise DegenerateRange("all medians are equal; cannot bin")
    idx = np.floor((medians - lo) / (hi - lo) * bins).astype(int)
    return np.clip(idx, 0, bins - 1)


def chi2_statistic(counts, k: int, bins: int) -> float:
    expected = k / bins
    counts = np.asarray(counts, dtype=float)
    return float(np.sum((counts - expected) ** 2) / expected)


def _sum_sq(counts) -> int:
    return int(sum(c * c for c in counts))


@dataclass(frozen=True)
class GroupSelection:
    ids: tuple
    chi2: float
    counts: tuple
    exhaustive: bool
    medians: dict = field(compare=False, default_factory=dict)


def select_test_group_detail(datasets: Sequence[DataSet], k: int, bins: int = 5) -> GroupSelection:
    """Pick ``k`` data sets whose T_A medians spread evenly over ``bins`` bins.

    The chi-squared statistic against a uniform bin occupation is a monotone
    function of the sum of squared bin counts, so candidates are compared on
    that integer and ties go to the lexicographically smallest sorted id tuple.
    """
    count = len(datasets)
    if bins < 2:
        raise ValidationError("bins must be >= 2")
    if k < 1 or k > count:
        raise KTooLarge(f"k={k} with {count} data sets")
    order = sorted(range(count), key=lambda j: datasets[j].id)
    ids = [datasets[j].id for j in order]
    if len(set(ids)) != count:
        raise ValidationError("data set ids must be unique")
    medians = np.array([float(np.median(datasets[j].outputs[0])) for j in order])
    bin_of = _bin_indices(medians, bins)

    def counts_of(members):
        c = [0] * bins
        for j in members:
            c[bin_of[j]] += 1
        return c

    exhaustive = math.comb(count, k) <= EXHAUSTIVE_LIMIT
    if exhaustive:
        # combinations() over sorted indices yields lexicographic id order
        best, best_score = None, None
        for combo in itertools.combinations(range(count), k):
            score = _sum_sq(counts_of(combo))
            if best_score is None or score < best_score:
                best, best_score = combo, score
        chosen = list(best)
    else:
        chosen = _greedy_swap(bin_of, count, k, bins)
    counts = counts_of(chosen)
    return GroupSelection(
        tuple(ids[j] for j in sorted(chosen)),
        chi2_statistic(counts, k, bins),
        tuple(counts),
        exhaustive,
        {ids[j]: float(medians[j]) for j in range(count)},
    )


def _greedy_swap(bin_of, count, k, bins) -> list:
    counts = [0] * bins
    chosen = []
    remaining = list(range(count))
    for _ in range(k):
        # adding to bin b raises sum(c^2) by 2*c_b + 1: fill the emptiest bin
        j = min(remaining, key=lambda r: (counts[bin_of[r]], r))
        chosen.append(j)
        remaining.remove(j)
        counts[bin_of[j]] += 1
    improved = True
    while improved:
        improved = False
        for a_pos in range(len(chosen)):
            a = chosen[a_pos]
            for b in sorted(remaining):
                ba, bb = bin_of[a], bin_of[b]
                if ba == bb:
                    continue
                delta = (counts[bb] + 1) ** 2 + (counts[ba] - 1) ** 2 - counts[bb] ** 2 - counts[ba] ** 2
                if delta < 0:
                    counts[ba] -= 1
                    counts[bb] += 1
                    chosen[a_pos] = b
                    remaining.remove(b)
                    remaining.append(a)
                    improved = True
                    break
            if improved:
                break
    return chosen


def select_test_group(datasets: Sequence[DataSet], k: int, bins: int = 5) -> list:
    return list(select_test_group_detail(datasets, k, bins).ids)


# -- correlation ------------------------------------------------------------

def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"lengths differ: {x.shape} vs {y.shape}")
    if x.size < 3:
        raise LengthMismatch("need at least 3 pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInput("Pearson correlation undefined for a constant input")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson R for (error measure, feature) cells.

    Rows follow :data:`~twinforge.metrics.MEASURES`, columns follow
    :data:`FEATURES`. Undefined cells hold NaN and a reason in ``errors``.
    """

    rows: tuple
    columns: tuple
    R: np.ndarray
    m: np.ndarray
    errors: dict = field(default_factory=dict)

    def cell(self, measure: str, feature: str) -> float:
        return float(self.R[self.rows.index(measure), self.columns.index(feature)])


def corr_matrix(features: Sequence[FeatureVector], errors: Sequence) -> CorrelationMatrix:
    """Correlate per-ROM test errors with the features of each ROM's training set.

    ``features[j]`` and ``errors[j]`` (a GlobalMetrics or mapping) describe ROM j.
    """
    if len(features) != len(errors):
        raise LengthMismatch("features and errors must be aligned")
    R = np.full((len(MEASURES), len(FEATURES)), np.nan)
    M = np.zeros((len(MEASURES), len(FEATURES)), dtype=int)
    problems = {}
    for a, measure in enumerate(MEASURES):
        for b, feat in enumerate(FEATURES):
            pairs = []
            for fv, err in zip(features, errors):
                x = fv.get(feat)
                y = err[measure] if isinstance(err, Mapping) else getattr(err, measure)
                if x is not None and y is not None and math.isfinite(y):
                    pairs.append((float(x), float(y)))
            pairs.sort()
            M[a, b] = len(pairs)
            try:
                R[a, b] = pearson([p[0] for p in pairs], [p[1] for p in pairs])
            except (ConstantInput, LengthMismatch) as exc:
                problems[(measure, feat)] = f"{exc.code}: {exc}"
    return CorrelationMatrix(MEASURES, FEATURES, R, M, problems)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    x: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    p: float


def linfit_bounds(xs, ys, p: float = 0.95, x_eval=None) -> LinearFit:
    """Least-squares line and the two-sided confidence band of the mean response."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch("xs and ys must be equally long vectors")
    m = x.size
    if m < 3:
        raise LengthMismatch("need at least 3 points")
    if not 0 < p < 1:
        raise ValidationError("confidence level must lie in (0, 1)")
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0.0:
        raise ConstantInput("xs are constant")
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    s = math.sqrt(float(np.sum(resid**2)) / (m - 2))
    tq = float(stats.t.ppf(0.5 + 0.5 * p, m - 2))
    xe = x if x_eval is None else np.asarray(x_eval, dtype=float)
    half = tq * s * np.sqrt(1.0 / m + (xe - xbar) ** 2 / sxx)
    fit = intercept + slope * xe
    return LinearFit(slope, intercept, xe, fit - half, fit + half, p)


# -- training partners --------------------------------------------------------

def similarity(a: ExcitationSignal, b: ExcitationSignal) -> float:
    """RMS of the sample-wise difference between two excitations (kelvin)."""
    if a.grid.n_samples != b.grid.n_samples:
        raise GridMismatch("signals must share the grid")
    d = a.values - b.values
    return math.sqrt(float(np.mean(d * d)))


class PartnerCategory(str, Enum):
    TOO_SIMILAR = "TOO_SIMILAR"
    GOOD_PARTNER_SIMILARITY = "GOOD_PARTNER_SIMILARITY"
    DISSIMILAR_WEAK = "DISSIMILAR_WEAK"
    HIGH_BASE_ERROR = "HIGH_BASE_ERROR"


RECOMMENDED = (PartnerCategory.GOOD_PARTNER_SIMILARITY, PartnerCategory.HIGH_BASE_ERROR)


@dataclass(frozen=True)
class PartnerThresholds:
    similarity_pct: float = 10.0
    own_error_pct: float = 50.0
    high_base_error_pct: float = 75.0


@dataclass(frozen=True)
class PartnerRow:
    id: str
    similarity: float
    base_rom_error: float
    own_rom_error: float
    category: PartnerCategory
    score: int = 0

    @property
    def recommended(self) -> bool:
        return self.category in RECOMMENDED


@dataclass(frozen=True)
class PartnerChart:
    base_id: str
    rows: tuple
    thresholds: dict = field(default_factory=dict)

    def recommendations(self, count: Optional[int] = None) -> list:
        picks = [r.id for r in self.rows if r.recommended]
        return picks if count is None else picks[:count]

    def row(self, ds_id: str) -> PartnerRow:
        for r in self.rows:
            if r.id == ds_id:
                return r
        raise KeyError(ds_id)


def categorize(similarities, base_errors, own_errors,
               th: PartnerThresholds = PartnerThresholds()):
    """Assign partner categories from cohort-relative percentile thresholds.

    Order of the rules: near-identical excitation, then weak own ROM, then a
    split of the remaining good candidates by the base ROM's error on them.
    Returns the categories and the threshold values that were used.
    """
    sim = np.asarray(similarities, dtype=float)
    base = np.asarray(base_errors, dtype=float)
    own = np.asarray(own_errors, dtype=float)
    cut = {
        "similarity": float(np.percentile(sim, th.similarity_pct)),
        "own_error": float(np.percentile(own, th.own_error_pct)),
        "high_base_error": float(np.percentile(base, th.high_base_error_pct)),
    }
    cats = []
    for s, b, o in zip(sim, base, own):
        if s == 0.0 or s < cut["similarity"]:
            cats.append(PartnerCategory.TOO_SIMILAR)
        elif o > cut["own_error"]:
            cats.append(PartnerCategory.DISSIMILAR_WEAK)
        elif b >= cut["high_base_error"]:
            cats.append(PartnerCategory.HIGH_BASE_ERROR)
        else:
            cats.append(PartnerCategory.GOOD_PARTNER_SIMILARITY)
    return cats, cut


def _ranks(values, ids, descending: bool) -> dict:
    order = sorted(range(len(values)), key=lambda j: ((-values[j] if descending else values[j]), ids[j]))
    return {ids[j]: rank for rank, j in enumerate(order, start=1)}


def partner_chart_from_errors(base_id: str, ids, similarities, base_errors, own_errors,
                              th: PartnerThresholds = PartnerThresholds()) -> PartnerChart:
    """Chart rows sorted by recommendation score, ties broken by id.

    Score is the rank by descending base-ROM error plus the rank by ascending
    own-ROM error; lower is better. Recommended categories come first.
    """
    ids = list(ids)
    cats, cut = categorize(similarities, base_errors, own_errors, th)
    r_base = _ranks(list(base_errors), ids, descending=True)
    r_own = _ranks(list(own_errors), ids, descending=False)
    rows = [
        PartnerRow(i, float(s), float(b), float(o), c, r_base[i] + r_own[i])
        for i, s, b, o, c in zip(ids, similarities, base_errors, own_errors, cats)
    ]
    rows.sort(key=lambda r: (not r.recommended, r.score, r.id))
    return PartnerChart(base_id, tuple(rows), cut)


def partner_chart(base_id: str, candidates: Sequence[DataSet], base_rom, own_roms: Mapping,
                  test_group: Sequence[DataSet],
                  th: PartnerThresholds = PartnerThresholds()) -> PartnerChart:
    """Score every candidate as a second training set for ``base_rom``."""
    from .rom.model import simulate

    by_id = {ds.id: ds for ds in candidates}
    if base_id not in by_id:
        raise ValidationError(f"base data set {base_id!r} must be among the candidates")
    base_signal = by_id[base_id].excitation
    ids, sims, base_err, own_err = [], [], [], []
    for ds in sorted(candidates, key=lambda d: d.id):
        if ds.id not in own_roms:
            raise MissingRom(f"no 1-data-set ROM for candidate {ds.id!r}")
        ids.append(ds.id)
        sims.append(similarity(base_signal, ds.excitation))
        pred = simulate(base_rom, ds.excitation, ds.x0).outputs
        base_err.append(evaluate(pred, ds.outputs).rmse)
        own_err.append(group_metrics(own_roms[ds.id], test_group).rmse)
    return partner_chart_from_errors(base_id, ids, sims, base_err, own_err, th)


def group_metrics(model, group: Sequence[DataSet]):
    """GlobalMetrics of ``model`` over a test group."""
    from .rom.model import simulate

    return aggregate(
        [evaluate(simulate(model, ds.excitation, ds.x0).outputs, ds.outputs) for ds in group]
    )
