"""Error measures of one prediction and their averages over a test group."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .errors import ConstantReference, EmptyGroup, ShapeMismatch, ZeroReference

MEASURES = ("rmse", "mape", "maxe", "mede", "iqr", "r2")


@dataclass(frozen=True)
class MetricSet:
    rmse: float
    mape: float
    maxe: float
    mede: float
    iqr: float
    r2: float

    def as_dict(self) -> dict:
        return asdict(self)

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, k) for k in MEASURES)


@dataclass(frozen=True)
class GlobalMetrics:
    """Per-measure means over a group, plus the per-data-set values."""

    rmse: float
    mape: float
    maxe: float
    mede: float
    iqr: float
    r2: float
    sets: tuple = field(default=(), compare=False)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in MEASURES}


def evaluate(pred, ref) -> MetricSet:
    """Pool signed errors ``pred - ref`` over channels and samples.

    ``r2`` is the only measure computed per channel (then averaged), since a
    pooled coefficient mixes channels with different spreads.
    """
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if pred.shape != ref.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs ref {ref.shape}")
    if pred.ndim == 1:
        pred, ref = pred[None], ref[None]
    if pred.ndim != 2 or pred.shape[0] < 1 or pred.shape[1] < 1:
        raise ShapeMismatch("expected an (n, N) array with n >= 1")
    if np.any(ref == 0):
        raise ZeroReference("reference contains zeros; mape undefined")
    e = pred - ref
    flat = e.ravel()
    q25, q50, q75 = np.percentile(flat, [25.0, 50.0, 75.0])
    ss_tot = np.sum((ref - ref.mean(axis=1, keepdims=True)) ** 2, axis=1)
    if np.any(ss_tot == 0):
        raise ConstantReference("a reference channel is constant; r2 undefined")
    ss_res = np.sum(e**2, axis=1)
    return MetricSet(
        rmse=float(np.sqrt(np.mean(flat**2))),
        mape=float(np.mean(np.abs(e) / np.abs(ref)) * 100.0),
        maxe=float(np.max(np.abs(flat))),
        mede=float(q50),
        iqr=float(q75 - q25),
        r2=float(np.mean(1.0 - ss_res / ss_tot)),
    )


def aggregate(sets: Sequence[MetricSet]) -> GlobalMetrics:
    sets = tuple(sets)
    if not sets:
        raise EmptyGroup("cannot aggregate an empty group")
    # sorting makes the float sums independent of the input order
    means = {k: float(np.mean(sorted(getattr(s, k) for s in sets))) for k in MEASURES}
    return GlobalMetrics(**means, sets=sets)
