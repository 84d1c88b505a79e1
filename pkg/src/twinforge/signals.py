"""Excitation signal synthesis: APRBS, multi-sine and APRBS with cosine ramps.

All generators are pure functions of ``(config, grid, seed)``. Signals are
sampled on a uniform :class:`TimeGrid`; :func:`sample_at` defines how a signal
is read between samples (linear interpolation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import DurationTooShort, InvalidConfig, OutOfRange

# Hold-time draws are rejected and redrawn when the jumps do not fit the grid.
MAX_SCHEDULE_ATTEMPTS = 1000


class SignalKind(str, Enum):
    APRBS = "APRBS"
    MULTISINE = "MULTISINE"
    SINAPRBS = "SINAPRBS"

    @property
    def prefix(self) -> str:
        return {"APRBS": "AP", "MULTISINE": "MS", "SINAPRBS": "SA"}[self.value]


class PhaseMode(str, Enum):
    RANDOM = "RANDOM"
    SCHROEDER = "SCHROEDER"


@dataclass(frozen=True)
class TimeGrid:
    n_samples: int = 280
    dt: float = 5.0
    t0: float = 0.0

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise InvalidConfig(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidConfig(f"dt must be positive, got {self.dt}")
        if not math.isfinite(self.t0):
            raise InvalidConfig("t0 must be finite")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + (self.n_samples - 1) * self.dt

    @property
    def span(self) -> float:
        return (self.n_samples - 1) * self.dt

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "dt": self.dt, "t0": self.t0}

    @classmethod
    def from_dict(cls, d: dict) -> "TimeGrid":
        return cls(int(d["n_samples"]), float(d["dt"]), float(d.get("t0", 0.0)))


@dataclass(frozen=True, eq=False)
class ExcitationSignal:
    """Sampled oven-temperature trajectory with its synthesis metadata."""

    grid: TimeGrid
    values: np.ndarray
    kind: SignalKind
    jumps: tuple = ()
    seed: int = 0
    id: str = ""

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.shape != (self.grid.n_samples,):
            raise InvalidConfig(
                f"signal has {values.shape} values for a grid of {self.grid.n_samples} samples"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidConfig("signal values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", SignalKind(self.kind))
        object.__setattr__(
            self, "jumps", tuple((float(t), float(d)) for t, d in self.jumps)
        )

    @property
    def is_aprbs_family(self) -> bool:
        return self.kind in (SignalKind.APRBS, SignalKind.SINAPRBS)

    @property
    def levels(self) -> np.ndarray:
        """Plateau levels implied by the first value and the jump deltas."""
        deltas = np.array([d for _, d in self.jumps], dtype=float)
        return self.values[0] + np.concatenate([[0.0], np.cumsum(deltas)])

    def with_id(self, new_id: str) -> "ExcitationSignal":
        return ExcitationSignal(self.grid, self.values, self.kind, self.jumps, self.seed, new_id)

    def __eq__(self, other):
        if not isinstance(other, ExcitationSignal):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.kind == other.kind
            and self.jumps == other.jumps
            and self.seed == other.seed
            and self.id == other.id
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class AprbsConfig:
    amp_min: float = 280.0
    amp_max: float = 470.0
    n_levels: int = 5
    hold_min: float = 150.0
    hold_max: float = 500.0
    transition_time: float = 0.0
    # None draws the first level at random; a number fixes it (kelvin).
    first_value: Optional[float] = None

    def validate(self, grid: TimeGrid) -> None:
        if not (self.amp_min < self.amp_max):
            raise InvalidConfig("amp_min must be below amp_max")
        if int(self.n_levels) != self.n_levels or self.n_levels < 2:
            raise InvalidConfig("n_levels must be an integer >= 2")
        if not (0 < self.hold_min <= self.hold_max):
            raise InvalidConfig("need 0 < hold_min <= hold_max")
        if self.hold_min < grid.dt:
            raise InvalidConfig("hold_min must span at least one grid step")
        if self.transition_time < 0:
            raise InvalidConfig("transition_time must be >= 0")
        if self.transition_time > self.hold_min:
            raise InvalidConfig("transition_time longer than hold_min would overlap ramps")
        if (self.n_levels - 1) * self.hold_min > grid.span:
            raise InvalidConfig("(n_levels - 1) * hold_min exceeds the signal duration")
        if self.first_value is not None and not (
            self.amp_min <= self.first_value <= self.amp_max
        ):
            raise InvalidConfig("first_value outside [amp_min, amp_max]")


@dataclass(frozen=True)
class MultisineConfig:
    amp_min: float = 280.0
    amp_max: float = 470.0
    n_harmonics: int = 5
    f_min: float = 1.0 / 1400.0
    f_max: float = 8.0 / 1400.0
    phase_mode: PhaseMode = PhaseMode.SCHROEDER

    def validate(self, grid: TimeGrid) -> None:
        if not (self.amp_min < self.amp_max):
            raise InvalidConfig("amp_min must be below amp_max")
        if int(self.n_harmonics) != self.n_harmonics or self.n_harmonics < 1:
            raise InvalidConfig("n_harmonics must be an integer >= 1")
        nyquist = 0.5 / grid.dt
        if not (0 < self.f_min < self.f_max <= nyquist):
            raise InvalidConfig(f"need 0 < f_min < f_max <= {nyquist} Hz (Nyquist)")
        PhaseMode(self.phase_mode)


def _plateau_schedule(cfg: AprbsConfig, grid: TimeGrid, rng: np.random.Generator):
    """Draw levels and snapped jump indices; redraw holds until the jumps fit."""
    if cfg.first_value is None:
        levels = rng.uniform(cfg.amp_min, cfg.amp_max, size=cfg.n_levels)
    else:
        levels = np.concatenate(
            [[cfg.first_value], rng.uniform(cfg.amp_min, cfg.amp_max, size=cfg.n_levels - 1)]
        )
    n_jumps = cfg.n_levels - 1
    for _ in range(MAX_SCHEDULE_ATTEMPTS):
        holds = rng.uniform(cfg.hold_min, cfg.hold_max, size=n_jumps)
        steps = np.maximum(np.rint(holds / grid.dt).astype(int), 1)
        idx = np.cumsum(steps)
        if idx[-1] <= grid.n_samples - 1:
            return levels, idx
    raise DurationTooShort(
        f"{n_jumps} plateaus of at least {cfg.hold_min} s did not fit into "
        f"{grid.span} s after {MAX_SCHEDULE_ATTEMPTS} draws"
    )


def gen_aprbs(cfg: AprbsConfig, grid: TimeGrid, seed: int) -> ExcitationSignal:
    """Piecewise-constant signal with ``n_levels`` random plateaus."""
    cfg.validate(grid)
    rng = np.random.default_rng(seed)
    levels, idx = _plateau_schedule(cfg, grid, rng)
    values = np.empty(grid.n_samples)
    bounds = np.concatenate([[0], idx, [grid.n_samples]])
    for level, a, b in zip(levels, bounds[:-1], bounds[1:]):
        values[a:b] = level
    jumps = [
        (grid.t0 + k * grid.dt, levels[j + 1] - levels[j]) for j, k in enumerate(idx)
    ]
    return ExcitationSignal(grid, values, SignalKind.APRBS, jumps, seed)


def gen_sinaprbs(cfg: AprbsConfig, grid: TimeGrid, seed: int) -> ExcitationSignal:
    """APRBS whose steps become half-cosine ramps centred on the jump instants."""
    if not cfg.transition_time > 0:
        raise InvalidConfig("sinAPRBS needs transition_time > 0")
    cfg.validate(grid)
    rng = np.random.default_rng(seed)
    levels, idx = _plateau_schedule(cfg, grid, rng)
    t = grid.times
    values = np.empty(grid.n_samples)
    bounds = np.concatenate([[0], idx, [grid.n_samples]])
    for level, a, b in zip(levels, bounds[:-1], bounds[1:]):
        values[a:b] = level
    half = 0.5 * cfg.transition_time
    jumps = []
    for j, k in enumerate(idx):
        tj = grid.t0 + k * grid.dt
        lo, hi = levels[j], levels[j + 1]
        on_ramp = np.abs(t - tj) < half
        phase = (t[on_ramp] - (tj - half)) / cfg.transition_time
        values[on_ramp] = lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * phase))
        jumps.append((tj, hi - lo))
    values = np.clip(values, cfg.amp_min, cfg.amp_max)
    return ExcitationSignal(grid, values, SignalKind.SINAPRBS, jumps, seed)


def multisine_frequencies(cfg: MultisineConfig) -> np.ndarray:
    if cfg.n_harmonics == 1:
        return np.array([cfg.f_min])
    return np.linspace(cfg.f_min, cfg.f_max, cfg.n_harmonics)


def gen_multisine(cfg: MultisineConfig, grid: TimeGrid, seed: int) -> ExcitationSignal:
    """Sum of unit sinusoids, affinely rescaled onto exactly [amp_min, amp_max]."""
    cfg.validate(grid)
    freqs = multisine_frequencies(cfg)
    K = len(freqs)
    if PhaseMode(cfg.phase_mode) is PhaseMode.SCHROEDER:
        k = np.arange(1, K + 1)
        phases = -np.pi * k * (k - 1) / K
    else:
        phases = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, size=K)
    t = grid.times - grid.t0
    raw = np.sin(2.0 * np.pi * np.outer(t, freqs) + phases).sum(axis=1)
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0:
        raise InvalidConfig("multisine is constant on this grid; widen the band")
    u = (raw - lo) / (hi - lo)
    values = np.clip(cfg.amp_min * (1.0 - u) + cfg.amp_max * u, cfg.amp_min, cfg.amp_max)
    return ExcitationSignal(grid, values, SignalKind.MULTISINE, (), seed)


def sample_at(signal: ExcitationSignal, t: float) -> float:
    """Linear interpolation of ``signal`` at time ``t`` (seconds)."""
    g = signal.grid
    pos = (t - g.t0) / g.dt
    if not (0.0 <= pos <= g.n_samples - 1) or not math.isfinite(pos):
        raise OutOfRange(f"t={t} outside [{g.t0}, {g.t_end}]")
    k = min(int(math.floor(pos)), g.n_samples - 2)
    frac = pos - k
    v = signal.values
    if frac == 0.0:
        return float(v[k])
    if frac == 1.0:
        return float(v[k + 1])
    return float(v[k] + frac * (v[k + 1] - v[k]))


def half_step_values(signal: ExcitationSignal) -> np.ndarray:
    """Signal values midway between consecutive samples, via :func:`sample_at`."""
    g = signal.grid
    return np.array(
        [sample_at(signal, g.t0 + (k + 0.5) * g.dt) for k in range(g.n_samples - 1)]
    )


def generate(kind: SignalKind | str, cfg, grid: TimeGrid, seed: int) -> ExcitationSignal:
    kind = SignalKind(kind)
    if kind is SignalKind.APRBS:
        return gen_aprbs(cfg, grid, seed)
    if kind is SignalKind.SINAPRBS:
        return gen_sinaprbs(cfg, grid, seed)
    return gen_multisine(cfg, grid, seed)


def constant_signal(value: float, grid: TimeGrid, kind=SignalKind.MULTISINE,
                    jumps: Sequence = ()) -> ExcitationSignal:
    return ExcitationSignal(grid, np.full(grid.n_samples, float(value)), kind, tuple(jumps), 0)
