"""Shared builders for ROM tests."""

import numpy as np

from twinforge.rom.model import Normalization, RomModel, Scenario


def random_model(rng, n, i, scale=1.0, out_scale=None):
    m = n + i
    return RomModel(
        n, i,
        rng.normal(0, scale, (m, m + 1)), rng.normal(0, scale, m),
        rng.normal(0, scale, (m, m)), rng.normal(0, scale, m),
        float(out_scale if out_scale is not None else rng.uniform(0.5, 2.0)),
        Normalization.identity(n),
    )


def random_scenario(rng, n, i, N):
    """Scenario with a random smooth input and random targets in [0, 1]."""
    g_nodes = rng.uniform(0, 1, N)
    g_half = 0.5 * (g_nodes[:-1] + g_nodes[1:])
    x0 = np.concatenate([rng.uniform(0, 1, n), np.zeros(i)])
    target = rng.uniform(0, 1, (N, n))
    target[0] = x0[:n]
    return Scenario(x0, g_nodes, g_half, 1.0 / (N - 1), np.ascontiguousarray(target))


def central_differences(loss, theta, h=1e-6):
    fd = np.empty_like(theta)
    for j in range(theta.size):
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        fd[j] = (loss(tp) - loss(tm)) / (2 * h)
    return fd


def gradient_mismatch(grad, fd, rel=1e-4, floor=1e-8):
    """Indices where ``|grad - fd|`` exceeds ``max(rel * magnitude, floor)``."""
    tol = np.maximum(rel * np.maximum(np.abs(grad), np.abs(fd)), floor)
    return np.nonzero(np.abs(grad - fd) > tol)[0]
