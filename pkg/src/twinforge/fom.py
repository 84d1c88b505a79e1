"""Reference full-order model: 1D slab with coupled heat and moisture transport.

The slab is discretised on ``n_nodes`` equally spaced nodes from the centre
(x=0, symmetry) to the surface (x=L, convective exchange with the oven).
Explicit Euler in time; ghost nodes realise both flux boundary conditions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .errors import InvalidConfig, NonfiniteState, UnstableTimestep, ValidationError
from .signals import ExcitationSignal

CHANNELS = ("T_A", "T_B")


@dataclass(frozen=True)
class FomConfig:
    length: float = 0.015
    n_nodes: int = 31
    alpha: float = 25.0
    k0: float = 0.45
    beta_M: float = 0.3
    rho_cp: float = 3.6e6
    D_m: float = 1e-9
    h_evap: float = 1e-6
    T_init: float = 278.0
    M_init: float = 2.5
    dt_internal: float = 0.00390625
    probe_core_index: int = 0
    probe_surface_index: int = -1

    @property
    def dx(self) -> float:
        return self.length / (self.n_nodes - 1)

    @property
    def core_index(self) -> int:
        return self.probe_core_index % self.n_nodes

    @property
    def surface_index(self) -> int:
        return self.probe_surface_index % self.n_nodes

    def stable_dt(self) -> float:
        """Largest explicit step keeping every nodal update a convex combination.

        Conductivity peaks at the initial moisture (moisture only decreases),
        and the convective ghost node adds ``alpha*dx`` at the surface.
        """
        k_max = self.k0 * (1.0 + self.beta_M * self.M_init)
        return 0.5 * self.dx**2 * self.rho_cp / (k_max + self.alpha * self.dx)

    def validate(self) -> None:
        if self.n_nodes < 3:
            raise InvalidConfig("n_nodes must be >= 3")
        for name in ("length", "alpha", "k0", "rho_cp", "D_m", "h_evap", "T_init", "dt_internal"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be > 0")
        if self.beta_M < 0 or self.M_init < 0:
            raise InvalidConfig("beta_M and M_init must be >= 0")
        for name in ("probe_core_index", "probe_surface_index"):
            idx = getattr(self, name)
            if not -self.n_nodes <= idx < self.n_nodes:
                raise InvalidConfig(f"{name}={idx} out of range")
        if self.dt_internal > self.stable_dt():
            raise UnstableTimestep(
                f"dt_internal={self.dt_internal} s exceeds explicit bound "
                f"{self.stable_dt():.6g} s"
            )
        r_m = self.dt_internal * self.D_m / self.dx**2
        if r_m > 0.5:
            raise UnstableTimestep(f"moisture diffusion number {r_m:.3g} > 0.5")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class DataSet:
    """Excitation plus the two recorded probe temperatures on one grid."""

    id: str
    excitation: ExcitationSignal
    outputs: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.ascontiguousarray(self.outputs, dtype=float)
        n = self.excitation.grid.n_samples
        if y.shape != (len(CHANNELS), n):
            raise ValidationError(f"outputs must have shape (2, {n}), got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValidationError(f"data set {self.id!r} contains non-finite outputs")
        y.setflags(write=False)
        object.__setattr__(self, "outputs", y)

    @property
    def grid(self):
        return self.excitation.grid

    @property
    def channels(self):
        return CHANNELS

    @property
    def x0(self) -> np.ndarray:
        return self.outputs[:, 0].copy()

    def with_id(self, new_id: str) -> "DataSet":
        return DataSet(new_id, self.excitation.with_id(new_id), self.outputs, dict(self.provenance))

    def __eq__(self, other):
        if not isinstance(other, DataSet):
            return NotImplemented
        return (
            self.id == other.id
            and self.excitation == other.excitation
            and np.array_equal(self.outputs, other.outputs)
            and self.provenance == other.provenance
        )

    __hash__ = None


def _run(signal: ExcitationSignal, cfg: FomConfig):
    cfg.validate()
    grid = signal.grid
    ratio = grid.dt / cfg.dt_internal
    substeps = int(round(ratio))
    if substeps < 1 or abs(ratio - substeps) > 1e-9 * ratio:
        raise InvalidConfig(
            f"dt_internal={cfg.dt_internal} must divide the recording dt={grid.dt}"
        )
    h = grid.dt / substeps
    dx2 = cfg.dx**2
    # surface moisture stays non-negative only if its self-coefficient does
    dT_max = max(float(signal.values.max()) - cfg.T_init, 0.0)
    if h * cfg.D_m / dx2 * (2.0 + 2.0 * cfg.dx * cfg.h_evap * dT_max / cfg.D_m) > 1.0:
        raise UnstableTimestep("dt_internal too large for the surface moisture loss term")
    out, m_mean = _euler_kernel(
        np.asarray(signal.values, dtype=float), substeps, h, cfg.dx, cfg.n_nodes,
        cfg.alpha, cfg.k0, cfg.beta_M, cfg.rho_cp, cfg.D_m, cfg.h_evap,
        cfg.T_init, cfg.M_init, cfg.core_index, cfg.surface_index,
    )
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.isfinite(out).all(axis=0)))
        raise NonfiniteState(f"full-order state diverged near t={grid.times[bad]}")
    return out, m_mean


@njit(cache=True)
def _euler_kernel(g, substeps, h, dx, nn, alpha, k0, beta_M, rho_cp, D_m, h_evap,
                  T_init, M_init, core, surf):
    n_samples = g.shape[0]
    T = np.full(nn, T_init)
    M = np.full(nn, M_init)
    T_new = np.empty(nn)
    M_new = np.empty(nn)
    # trapezoid weights: the ghost-node scheme conserves this discrete mean
    w = np.full(nn, 1.0 / (nn - 1))
    w[0] *= 0.5
    w[nn - 1] *= 0.5
    out = np.empty((2, n_samples))
    m_mean = np.empty(n_samples)
    out[0, 0] = T[core]
    out[1, 0] = T[surf]
    m_mean[0] = np.sum(w * M)
    cT = h / (rho_cp * dx * dx)
    cM = h * D_m / (dx * dx)
    last = nn - 1
    for k in range(n_samples - 1):
        g0 = g[k]
        g1 = g[k + 1]
        for s in range(substeps):
            T_oven = g0 + (s / substeps) * (g1 - g0)
            k_s = k0 * (1.0 + beta_M * M[last])
            ghost_T = T[last - 1] - 2.0 * dx * alpha / k_s * (T[last] - T_oven)
            evap = h_evap * max(T[last] - T_init, 0.0) * M[last]
            ghost_M = M[last - 1] - 2.0 * dx * evap / D_m
            T_new[0] = T[0] + cT * k0 * (1.0 + beta_M * M[0]) * 2.0 * (T[1] - T[0])
            M_new[0] = M[0] + cM * 2.0 * (M[1] - M[0])
            for j in range(1, last):
                kj = k0 * (1.0 + beta_M * M[j])
                T_new[j] = T[j] + cT * kj * (T[j - 1] - 2.0 * T[j] + T[j + 1])
                M_new[j] = M[j] + cM * (M[j - 1] - 2.0 * M[j] + M[j + 1])
            T_new[last] = T[last] + cT * k_s * (T[last - 1] - 2.0 * T[last] + ghost_T)
            M_new[last] = M[last] + cM * (M[last - 1] - 2.0 * M[last] + ghost_M)
            T, T_new = T_new, T
            M, M_new = M_new, M
        out[0, k + 1] = T[core]
        out[1, k + 1] = T[surf]
        m_mean[k + 1] = np.sum(w * M)
    return out, m_mean


def simulate_fom(signal: ExcitationSignal, cfg: FomConfig = FomConfig()) -> DataSet:
    """Simulate the slab under ``signal`` and record core (T_A) and surface (T_B)."""
    out, _ = _run(signal, cfg)
    provenance = {"fom_digest": cfg.digest(), "seed": int(signal.seed)}
    return DataSet(signal.id, signal, out, provenance)


def mean_moisture_history(signal: ExcitationSignal, cfg: FomConfig = FomConfig()) -> np.ndarray:
    """Spatial mean moisture (trapezoid weights) at every grid sample."""
    return _run(signal, cfg)[1]
