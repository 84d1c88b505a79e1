"""Full-batch training and complexity selection for :class:`RomModel`."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptyScenarios, GridMismatch, InvalidConfig
from .model import (
    Normalization,
    RomModel,
    init_model,
    loss_and_gradient,
    prepare_scenarios,
)

log = logging.getLogger(__name__)

@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 5000
    step_size: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    rel_tol: float = 1e-5
    patience: int = 200
    seed: int = 0
    i_max: int = 8
    i_tol: float = 0.02

    def validate(self) -> None:
        if not self.step_size > 0:
            raise InvalidConfig("step_size must be > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidConfig("moment decay rates must lie in (0, 1)")
        if self.i_max < 0 or self.max_epochs < 1 or self.patience < 1:
            raise InvalidConfig("need i_max >= 0, max_epochs >= 1, patience >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: RomModel
    history: list
    best_loss: float
    epochs: int


def _check(scenarios: Sequence, n: int) -> None:
    if not scenarios:
        raise EmptyScenarios("at least one training scenario is required")
    first = scenarios[0]
    for ds in scenarios:
        if ds.grid.n_samples != first.grid.n_samples or ds.channels != first.channels:
            raise GridMismatch("scenarios must share grid length and channel names")
    if len(first.channels) != n:
        raise GridMismatch(f"n={n} but data sets carry {len(first.channels)} channels")


def fit(scenarios: Sequence, n: int, i: int, cfg: TrainConfig = TrainConfig(),
        init: RomModel | None = None) -> TrainResult:
    """Adam on the full batch; returns the best parameters seen."""
    cfg.validate()
    _check(scenarios, n)
    if init is None:
        model = init_model(n, i, cfg.seed, Normalization.fit(scenarios))
    else:
        model = init
    prepared = prepare_scenarios(scenarios, model.norm, model.i)

    # the optimizer steps log(out_scale) so the positive scale can grow by
    # orders of magnitude at a fixed step size
    theta = model.flat()
    phi = theta.copy()
    phi[-1] = np.log(theta[-1])
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    best_loss, best_theta = np.inf, theta.copy()
    last_improvement = 0
    history = []
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        loss, grad = loss_and_gradient(model, prepared)
        history.append(loss)
        if loss < best_loss * (1.0 - cfg.rel_tol):
            last_improvement = epoch
        if loss < best_loss:
            best_loss, best_theta = loss, theta.copy()
        if epoch - last_improvement >= cfg.patience:
            break
        grad[-1] *= theta[-1]
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad * grad
        m1_hat = m1 / (1.0 - cfg.beta1**epoch)
        m2_hat = m2 / (1.0 - cfg.beta2**epoch)
        phi = phi - cfg.step_size * m1_hat / (np.sqrt(m2_hat) + cfg.eps)
        theta = phi.copy()
        theta[-1] = np.exp(phi[-1])
        model = model.with_flat(theta)
    log.debug("n=%d i=%d: best loss %.3e after %d epochs", n, i, best_loss, epoch)
    return TrainResult(model.with_flat(best_theta), history, float(best_loss), epoch)


def train(scenarios: Sequence, n: int, i: int, cfg: TrainConfig = TrainConfig(),
          init: RomModel | None = None):
    """Train a model of complexity ``i``; returns ``(model, history)``."""
    res = fit(scenarios, n, i, cfg, init)
    return res.model, res.history


def select_complexity(scenarios: Sequence, n: int, cfg: TrainConfig = TrainConfig(),
                      return_sweep: bool = False):
    """Grow ``i`` from 0 while the best training loss keeps improving by ``i_tol``.

    Returns ``(model, chosen_i)``; with ``return_sweep`` also the list of
    ``(i, best_loss)`` pairs that were trained.
    """
    cfg.validate()
    best = fit(scenarios, n, 0, cfg)
    chosen = 0
    sweep = [(0, best.best_loss)]
    for i in range(1, cfg.i_max + 1):
        cand = fit(scenarios, n, i, cfg)
        sweep.append((i, cand.best_loss))
        if cand.best_loss < best.best_loss * (1.0 - cfg.i_tol):
            best, chosen = cand, i
        else:
            break
    if return_sweep:
        return best.model, chosen, sweep
    return best.model, chosen
