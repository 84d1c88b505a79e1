"""Augmented neural-ODE model, RK4 simulation and the training loss gradient."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ..errors import (
    EmptyScenarios,
    GridMismatch,
    InvalidDimension,
    NonfiniteState,
    ShapeMismatch,
    ValidationError,
)
from ..signals import ExcitationSignal, TimeGrid, half_step_values, sample_at
from . import kernels


@dataclass(frozen=True)
class Normalization:
    """Affine maps between physical and network units.

    Outputs and the input map to roughly [0, 1] via ``(v - offset) / scale``;
    time maps to ``tau = (t - t_offset) / t_span``.
    """

    y_offset: tuple
    y_scale: tuple
    g_offset: float = 0.0
    g_scale: float = 1.0
    t_offset: float = 0.0
    t_span: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "y_offset", tuple(float(v) for v in self.y_offset))
        object.__setattr__(self, "y_scale", tuple(float(v) for v in self.y_scale))
        if len(self.y_offset) != len(self.y_scale):
            raise ValidationError("y_offset and y_scale lengths differ")
        scales = (*self.y_scale, self.g_scale, self.t_span)
        if not all(math.isfinite(v) and v > 0 for v in scales):
            raise ValidationError("normalization scales must be finite and > 0")

    @classmethod
    def identity(cls, n: int) -> "Normalization":
        return cls((0.0,) * n, (1.0,) * n)

    @classmethod
    def fit(cls, scenarios: Sequence) -> "Normalization":
        """Per-channel min/max over the union of scenarios."""
        y = np.concatenate([ds.outputs for ds in scenarios], axis=1)
        g = np.concatenate([ds.excitation.values for ds in scenarios])
        lo, hi = y.min(axis=1), y.max(axis=1)
        y_scale = np.where(hi > lo, hi - lo, 1.0)
        g_lo, g_hi = float(g.min()), float(g.max())
        grid = scenarios[0].grid
        return cls(
            tuple(lo), tuple(y_scale), g_lo, g_hi - g_lo if g_hi > g_lo else 1.0,
            grid.t0, grid.span,
        )

    @property
    def n(self) -> int:
        return len(self.y_offset)

    def normalize_y(self, y):
        y = np.asarray(y, dtype=float)
        off, sc = np.array(self.y_offset), np.array(self.y_scale)
        return (y - off.reshape((-1,) + (1,) * (y.ndim - 1))) / sc.reshape((-1,) + (1,) * (y.ndim - 1))

    def denormalize_y(self, x):
        x = np.asarray(x, dtype=float)
        off, sc = np.array(self.y_offset), np.array(self.y_scale)
        return x * sc.reshape((-1,) + (1,) * (x.ndim - 1)) + off.reshape((-1,) + (1,) * (x.ndim - 1))

    def normalize_g(self, g):
        return (np.asarray(g, dtype=float) - self.g_offset) / self.g_scale

    def dtau(self, grid: TimeGrid) -> float:
        return grid.dt / self.t_span

    def to_dict(self) -> dict:
        return {
            "y_offset": list(self.y_offset), "y_scale": list(self.y_scale),
            "g_offset": self.g_offset, "g_scale": self.g_scale,
            "t_offset": self.t_offset, "t_span": self.t_span,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(
            tuple(d["y_offset"]), tuple(d["y_scale"]), float(d["g_offset"]),
            float(d["g_scale"]), float(d["t_offset"]), float(d["t_span"]),
        )


@dataclass(frozen=True, eq=False)
class RomModel:
    n: int
    i: int
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    out_scale: float
    norm: Normalization

    def __post_init__(self):
        m = self.n + self.i
        shapes = {"W1": (m, m + 1), "b1": (m,), "W2": (m, m), "b2": (m,)}
        for name, shape in shapes.items():
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise InvalidDimension(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (math.isfinite(self.out_scale) and self.out_scale > 0):
            raise ValidationError("out_scale must be finite and > 0")
        object.__setattr__(self, "out_scale", float(self.out_scale))
        if self.norm.n != self.n:
            raise InvalidDimension("normalization channel count differs from n")

    @property
    def m(self) -> int:
        return self.n + self.i

    @property
    def n_params(self) -> int:
        m = self.m
        return m * (m + 1) + m + m * m + m + 1

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [self.W1.ravel(), self.b1, self.W2.ravel(), self.b2, [self.out_scale]]
        )

    def with_flat(self, theta: np.ndarray) -> "RomModel":
        W1, b1, W2, b2, s = unflatten(theta, self.m)
        return replace(self, W1=W1, b1=b1, W2=W2, b2=b2, out_scale=s)

    def __eq__(self, other):
        if not isinstance(other, RomModel):
            return NotImplemented
        return (
            self.n == other.n and self.i == other.i and self.norm == other.norm
            and self.out_scale == other.out_scale
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("W1", "b1", "W2", "b2"))
        )

    __hash__ = None


def unflatten(theta: np.ndarray, m: int):
    theta = np.asarray(theta, dtype=float)
    sizes = [m * (m + 1), m, m * m, m]
    parts = np.split(theta[:-1], np.cumsum(sizes)[:-1])
    return (
        parts[0].reshape(m, m + 1).copy(), parts[1].copy(),
        parts[2].reshape(m, m).copy(), parts[3].copy(), float(theta[-1]),
    )


def init_model(n: int, i: int, seed: int, norm: Normalization | None = None) -> RomModel:
    """Glorot-uniform weights, zero biases, unit output scale."""
    if int(n) != n or int(i) != i or n < 1 or i < 0:
        raise InvalidDimension(f"need n >= 1 and i >= 0, got n={n}, i={i}")
    m = n + i
    rng = np.random.default_rng(seed)
    r1 = math.sqrt(6.0 / ((m + 1) + m))
    r2 = math.sqrt(6.0 / (m + m))
    W1 = rng.uniform(-r1, r1, size=(m, m + 1))
    W2 = rng.uniform(-r2, r2, size=(m, m))
    return RomModel(n, i, W1, np.zeros(m), W2, np.zeros(m), 1.0,
                    norm if norm is not None else Normalization.identity(n))


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def rhs(model: RomModel, state, g: float) -> np.ndarray:
    """Right-hand side in normalised units: ``s * (2 z - 1)``."""
    state = np.asarray(state, dtype=float)
    if state.shape != (model.m,):
        raise InvalidDimension(f"state must have length {model.m}")
    x = np.concatenate([state, [g]])
    h = _sigmoid(model.W1 @ x + model.b1)
    z = _sigmoid(model.W2 @ h + model.b2)
    return model.out_scale * (2.0 * z - 1.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # (n + i) x N, normalised
    outputs: np.ndarray  # n x N, kelvin


def stage_inputs(signal: ExcitationSignal, norm: Normalization):
    """Normalised input at the grid nodes and at the RK4 half steps."""
    g_nodes = norm.normalize_g(signal.values)
    g_half = norm.normalize_g(half_step_values(signal))
    return np.ascontiguousarray(g_nodes), np.ascontiguousarray(g_half)


def initial_state(x0, norm: Normalization, n_aug: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (norm.n,):
        raise InvalidDimension(f"x0 must have length {norm.n}")
    return np.concatenate([norm.normalize_y(x0), np.zeros(n_aug)])


def integrate(field: Callable, signal: ExcitationSignal, x0, norm: Normalization,
              n_aug: int = 0) -> Trajectory:
    """Classic RK4 in normalised time for an arbitrary field ``f(state, g, tau)``.

    Stage inputs are read with :func:`sample_at` and then normalised.
    """
    grid = signal.grid
    dtau = norm.dtau(grid)
    N = grid.n_samples
    x = initial_state(x0, norm, n_aug)
    states = np.empty((x.size, N))
    states[:, 0] = x
    for k in range(N - 1):
        tk = grid.t0 + k * grid.dt
        tau = (tk - norm.t_offset) / norm.t_span
        g0 = float(norm.normalize_g(signal.values[k]))
        gh = float(norm.normalize_g(sample_at(signal, tk + 0.5 * grid.dt)))
        g1 = float(norm.normalize_g(signal.values[k + 1]))
        k1 = np.asarray(field(x, g0, tau), dtype=float)
        k2 = np.asarray(field(x + 0.5 * dtau * k1, gh, tau + 0.5 * dtau), dtype=float)
        k3 = np.asarray(field(x + 0.5 * dtau * k2, gh, tau + 0.5 * dtau), dtype=float)
        k4 = np.asarray(field(x + dtau * k3, g1, tau + dtau), dtype=float)
        x = x + dtau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonfiniteState(f"state became non-finite at step {k + 1}")
        states[:, k + 1] = x
    return Trajectory(grid, states, norm.denormalize_y(states[: norm.n]))


def simulate(model: RomModel, signal: ExcitationSignal, x0) -> Trajectory:
    """Fast compiled equivalent of ``integrate(lambda u, g, t: rhs(model, u, g), ...)``."""
    norm = model.norm
    g_nodes, g_half = stage_inputs(signal, norm)
    x = initial_state(x0, norm, model.i)
    X = kernels.simulate(model.W1, model.b1, model.W2, model.b2, model.out_scale,
                         x, g_nodes, g_half, norm.dtau(signal.grid))
    if not np.all(np.isfinite(X)):
        raise NonfiniteState("ROM trajectory became non-finite")
    states = np.ascontiguousarray(X.T)
    return Trajectory(signal.grid, states, norm.denormalize_y(states[: model.n]))


def loss_mse(pred, target) -> float:
    """Channel-averaged mean squared error of one scenario."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs target {target.shape}")
    if pred.ndim == 1:
        pred, target = pred[None], target[None]
    return float(np.mean(np.mean((pred - target) ** 2, axis=1)))


def loss_mse_multi(preds: Sequence, targets: Sequence) -> float:
    """Arithmetic mean of per-scenario :func:`loss_mse` values."""
    if len(preds) != len(targets) or not preds:
        raise ShapeMismatch("need equally many, and at least one, predictions and targets")
    return float(np.mean([loss_mse(p, t) for p, t in zip(preds, targets)]))


@dataclass(frozen=True)
class Scenario:
    """One training scenario in network units, ready for the compiled kernels."""

    x0: np.ndarray
    g_nodes: np.ndarray
    g_half: np.ndarray
    dtau: float
    target: np.ndarray  # N x n, normalised


def prepare_scenarios(scenarios: Sequence, norm: Normalization, n_aug: int) -> list:
    if not scenarios:
        raise EmptyScenarios("at least one scenario is required")
    n0 = scenarios[0].grid.n_samples
    out = []
    for ds in scenarios:
        if ds.grid.n_samples != n0:
            raise GridMismatch("scenarios must share the grid length")
        g_nodes, g_half = stage_inputs(ds.excitation, norm)
        target = np.ascontiguousarray(norm.normalize_y(ds.outputs).T)
        out.append(Scenario(initial_state(ds.x0, norm, n_aug), g_nodes, g_half,
                            norm.dtau(ds.grid), target))
    return out


def loss_and_gradient(model: RomModel, prepared: Sequence) -> tuple:
    """Training loss (mean over scenarios, normalised units) and its gradient.

    The gradient is returned flat, ordered like :meth:`RomModel.flat`.
    """
    S = len(prepared)
    total = 0.0
    grad = np.zeros(model.n_params)
    for sc in prepared:
        N = sc.target.shape[0]
        weight = 1.0 / (model.n * N * S)
        loss, dW1, db1, dW2, db2, ds, X = kernels.loss_and_grad(
            model.W1, model.b1, model.W2, model.b2, model.out_scale,
            sc.x0, sc.g_nodes, sc.g_half, sc.dtau, sc.target, weight,
        )
        if not np.isfinite(loss):
            raise NonfiniteState("loss became non-finite")
        total += loss
        grad += np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2, [ds]])
    return total, grad


def gradient(model: RomModel, scenarios: Sequence) -> dict:
    """Exact derivative of the RK4 training loss w.r.t. every parameter.

    ``scenarios`` are :class:`~twinforge.fom.DataSet` objects; the loss uses
    the model's own normalisation.
    """
    prepared = prepare_scenarios(scenarios, model.norm, model.i)
    _, g = loss_and_gradient(model, prepared)
    W1, b1, W2, b2, s = unflatten(g, model.m)
    return {"W1": W1, "b1": b1, "W2": W2, "b2": b2, "out_scale": s}


def training_loss(model: RomModel, scenarios: Sequence) -> float:
    return loss_and_gradient(model, prepare_scenarios(scenarios, model.norm, model.i))[0]
