from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinforge.errors import InvalidConfig, NonfiniteState, UnstableTimestep, ValidationError
from twinforge.fom import CHANNELS, DataSet, FomConfig, mean_moisture_history, simulate_fom
from twinforge.signals import (
    AprbsConfig,
    ExcitationSignal,
    SignalKind,
    TimeGrid,
    constant_signal,
    gen_aprbs,
)


def reference_fom(values, cfg: FomConfig, dt: float):
    """Vectorised explicit Euler with ghost nodes, written independently of the kernel."""
    n = cfg.n_nodes
    dx = cfg.dx
    sub = int(round(dt / cfg.dt_internal))
    h = dt / sub
    T = np.full(n, cfg.T_init)
    M = np.full(n, cfg.M_init)
    rec = [(T[0], T[-1])]
    for k in range(len(values) - 1):
        for s in range(sub):
            g = values[k] + (values[k + 1] - values[k]) * s / sub
            kap = cfg.k0 * (1 + cfg.beta_M * M)
            flux_T = cfg.alpha * (T[-1] - g)
            flux_M = cfg.h_evap * max(T[-1] - cfg.T_init, 0.0) * M[-1]
            Tp = np.concatenate([[T[1]], T, [T[-2] - 2 * dx * flux_T / kap[-1]]])
            Mp = np.concatenate([[M[1]], M, [M[-2] - 2 * dx * flux_M / cfg.D_m]])
            lapT = (Tp[:-2] - 2 * Tp[1:-1] + Tp[2:]) / dx**2
            lapM = (Mp[:-2] - 2 * Mp[1:-1] + Mp[2:]) / dx**2
            T = T + h * kap / cfg.rho_cp * lapT
            M = M + h * cfg.D_m * lapM
        rec.append((T[0], T[-1]))
    return np.array(rec).T


def step_signal(grid, T_init=278.0, rise=100.0):
    v = np.full(grid.n_samples, T_init + rise)
    v[0] = T_init
    return ExcitationSignal(grid, v, SignalKind.APRBS, ((grid.t0 + grid.dt, rise),))


def test_matches_independent_reference():
    cfg = FomConfig(n_nodes=7, dt_internal=0.5)
    grid = TimeGrid(n_samples=40, dt=5.0)
    sig = gen_aprbs(AprbsConfig(hold_min=40, hold_max=80, n_levels=4), grid, 2)
    ds = simulate_fom(sig, cfg)
    ref = reference_fom(sig.values, cfg, grid.dt)
    np.testing.assert_allclose(ds.outputs, ref, rtol=0, atol=1e-9)


def test_equilibrium_is_fixed_point(grid):
    ds = simulate_fom(constant_signal(278.0, grid))
    assert np.max(np.abs(ds.outputs - 278.0)) == 0.0


def test_step_response_ordering(grid):
    ds = simulate_fom(step_signal(grid))
    T_A, T_B = ds.outputs
    assert np.all(np.diff(T_B) >= 0)
    assert np.all(T_B[1:] >= T_A[1:])
    assert T_B[-1] > T_A[-1] > 278.0


@pytest.mark.parametrize("case", ["step", "aprbs"])
def test_self_convergence(grid, case):
    cfg = FomConfig()
    sig = step_signal(grid) if case == "step" else gen_aprbs(AprbsConfig(), grid, 4)
    coarse = simulate_fom(sig, cfg).outputs
    fine = simulate_fom(sig, replace(cfg, dt_internal=cfg.dt_internal / 2)).outputs
    assert np.max(np.abs(coarse - fine)) < 1e-3


def test_moisture_never_increases(grid):
    m = mean_moisture_history(gen_aprbs(AprbsConfig(), grid, 8))
    assert np.all(np.diff(m) <= 1e-15)
    assert m[-1] < m[0]


def test_provenance_and_channels(grid):
    sig = gen_aprbs(AprbsConfig(), grid, 4)
    ds = simulate_fom(sig)
    assert ds.channels == CHANNELS
    assert ds.provenance == {"fom_digest": FomConfig().digest(), "seed": 4}
    np.testing.assert_array_equal(ds.x0, [278.0, 278.0])


def test_deterministic(grid):
    sig = gen_aprbs(AprbsConfig(), grid, 6)
    assert simulate_fom(sig) == simulate_fom(sig)


def test_stability_bound_rejects_large_step():
    cfg = FomConfig()
    with pytest.raises(UnstableTimestep):
        replace(cfg, dt_internal=cfg.stable_dt() * 1.01).validate()


def test_spec_default_step_is_stable():
    # the coarser 0.25 s step is admissible, only less accurate
    replace(FomConfig(), dt_internal=0.25).validate()


@pytest.mark.parametrize(
    "kw",
    [{"n_nodes": 2}, {"alpha": 0.0}, {"k0": -1.0}, {"probe_core_index": 31}, {"beta_M": -0.1}],
)
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        replace(FomConfig(), **kw).validate()


def test_dt_internal_must_divide_recording_step(grid):
    with pytest.raises(InvalidConfig):
        simulate_fom(constant_signal(300.0, grid), replace(FomConfig(), dt_internal=0.3))


def test_divergence_detected(short_grid):
    cfg = FomConfig(rho_cp=1.0, dt_internal=1e-9)
    sig = constant_signal(1e308, TimeGrid(3, 1e-8))
    with pytest.raises((NonfiniteState, UnstableTimestep)):
        simulate_fom(sig, cfg)


def test_dataset_validation(grid):
    sig = constant_signal(300.0, grid)
    with pytest.raises(ValidationError):
        DataSet("x", sig, np.zeros((2, 5)))
    bad = np.full((2, grid.n_samples), 300.0)
    bad[1, 3] = np.nan
    with pytest.raises(ValidationError):
        DataSet("x", sig, bad)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_discrete_maximum_principle(seed):
    grid = TimeGrid()
    sig = gen_aprbs(AprbsConfig(), grid, seed)
    y = simulate_fom(sig).outputs
    lo = min(278.0, sig.values.min())
    hi = max(278.0, sig.values.max())
    assert y.min() >= lo - 1e-9 and y.max() <= hi + 1e-9
