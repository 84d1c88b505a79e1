"""Compiled RK4 forward pass and its reverse-mode derivative.

Network: ``h = sig(W1 @ [u; g] + b1)``, ``z = sig(W2 @ h + b2)``,
``f = s * (2 z - 1)``. ``W1`` has ``m + 1`` columns, the last one weighting
the scalar input ``g``.

Stage inputs for step ``k`` are ``g_nodes[k]``, ``g_half[k]`` (twice) and
``g_nodes[k + 1]``.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _sig(a):
    if a >= 0.0:
        return 1.0 / (1.0 + np.exp(-a))
    e = np.exp(a)
    return e / (1.0 + e)


@njit(cache=True)
def field_eval(W1, b1, W2, b2, s, u, g, h, z, f):
    m = u.shape[0]
    for r in range(m):
        a = b1[r] + W1[r, m] * g
        for c in range(m):
            a += W1[r, c] * u[c]
        h[r] = _sig(a)
    for r in range(m):
        a = b2[r]
        for c in range(m):
            a += W2[r, c] * h[c]
        z[r] = _sig(a)
        f[r] = s * (2.0 * z[r] - 1.0)


@njit(cache=True)
def rk4_forward(W1, b1, W2, b2, s, x0, g_nodes, g_half, dtau, U, H, Z):
    """Integrate from ``x0``; fills the stage caches ``U, H, Z`` (steps x 4 x m).

    Returns the state at every sample, shape (N, m).
    """
    N = g_nodes.shape[0]
    m = x0.shape[0]
    X = np.empty((N, m))
    X[0] = x0
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    half = 0.5 * dtau
    sixth = dtau / 6.0
    for k in range(N - 1):
        x = X[k]
        U[k, 0] = x
        field_eval(W1, b1, W2, b2, s, U[k, 0], g_nodes[k], H[k, 0], Z[k, 0], k1)
        for c in range(m):
            U[k, 1, c] = x[c] + half * k1[c]
        field_eval(W1, b1, W2, b2, s, U[k, 1], g_half[k], H[k, 1], Z[k, 1], k2)
        for c in range(m):
            U[k, 2, c] = x[c] + half * k2[c]
        field_eval(W1, b1, W2, b2, s, U[k, 2], g_half[k], H[k, 2], Z[k, 2], k3)
        for c in range(m):
            U[k, 3, c] = x[c] + dtau * k3[c]
        field_eval(W1, b1, W2, b2, s, U[k, 3], g_nodes[k + 1], H[k, 3], Z[k, 3], k4)
        for c in range(m):
            X[k + 1, c] = x[c] + sixth * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c])
    return X


@njit(cache=True)
def simulate(W1, b1, W2, b2, s, x0, g_nodes, g_half, dtau):
    N = g_nodes.shape[0]
    m = x0.shape[0]
    U = np.empty((N - 1, 4, m))
    H = np.empty((N - 1, 4, m))
    Z = np.empty((N - 1, 4, m))
    return rk4_forward(W1, b1, W2, b2, s, x0, g_nodes, g_half, dtau, U, H, Z)


@njit(cache=True)
def _stage_backward(W1, W2, s, u, h, z, g, dout, dW1, db1, dW2, db2, du):
    """Accumulate parameter gradients of one field evaluation; return ds.

    Writes d(loss)/d(u) into ``du``.
    """
    m = u.shape[0]
    dp2 = np.empty(m)
    dp1 = np.empty(m)
    ds = 0.0
    for r in range(m):
        ds += dout[r] * (2.0 * z[r] - 1.0)
        dp2[r] = 2.0 * s * dout[r] * z[r] * (1.0 - z[r])
        db2[r] += dp2[r]
        for c in range(m):
            dW2[r, c] += dp2[r] * h[c]
    for c in range(m):
        acc = 0.0
        for r in range(m):
            acc += W2[r, c] * dp2[r]
        dp1[c] = acc * h[c] * (1.0 - h[c])
    for r in range(m):
        db1[r] += dp1[r]
        for c in range(m):
            dW1[r, c] += dp1[r] * u[c]
        dW1[r, m] += dp1[r] * g
    for c in range(m):
        acc = 0.0
        for r in range(m):
            acc += W1[r, c] * dp1[r]
        du[c] = acc
    return ds


@njit(cache=True)
def loss_and_grad(W1, b1, W2, b2, s, x0, g_nodes, g_half, dtau, Y, weight):
    """Squared-error loss of the first ``n`` states against ``Y`` (N x n).

    ``weight`` multiplies the summed squared error (e.g. 1 / (n N S)).
    Returns ``(loss, dW1, db1, dW2, db2, ds, X)``.
    """
    N = g_nodes.shape[0]
    m = x0.shape[0]
    n = Y.shape[1]
    U = np.empty((N - 1, 4, m))
    H = np.empty((N - 1, 4, m))
    Z = np.empty((N - 1, 4, m))
    X = rk4_forward(W1, b1, W2, b2, s, x0, g_nodes, g_half, dtau, U, H, Z)

    loss = 0.0
    dX = np.zeros((N, m))
    for k in range(N):
        for j in range(n):
            e = X[k, j] - Y[k, j]
            loss += e * e
            dX[k, j] = 2.0 * weight * e
    loss *= weight

    dW1 = np.zeros(W1.shape)
    db1 = np.zeros(m)
    dW2 = np.zeros(W2.shape)
    db2 = np.zeros(m)
    ds = 0.0
    a = dX[N - 1].copy()
    ax = np.empty(m)
    dk1 = np.empty(m)
    dk2 = np.empty(m)
    dk3 = np.empty(m)
    dk4 = np.empty(m)
    du = np.empty(m)
    half = 0.5 * dtau
    sixth = dtau / 6.0
    third = dtau / 3.0
    for k in range(N - 2, -1, -1):
        for c in range(m):
            ax[c] = a[c]
            dk1[c] = sixth * a[c]
            dk2[c] = third * a[c]
            dk3[c] = third * a[c]
            dk4[c] = sixth * a[c]
        ds += _stage_backward(W1, W2, s, U[k, 3], H[k, 3], Z[k, 3], g_nodes[k + 1],
                              dk4, dW1, db1, dW2, db2, du)
        for c in range(m):
            ax[c] += du[c]
            dk3[c] += dtau * du[c]
        ds += _stage_backward(W1, W2, s, U[k, 2], H[k, 2], Z[k, 2], g_half[k],
                              dk3, dW1, db1, dW2, db2, du)
        for c in range(m):
            ax[c] += du[c]
            dk2[c] += half * du[c]
        ds += _stage_backward(W1, W2, s, U[k, 1], H[k, 1], Z[k, 1], g_half[k],
                              dk2, dW1, db1, dW2, db2, du)
        for c in range(m):
            ax[c] += du[c]
            dk1[c] += half * du[c]
        ds += _stage_backward(W1, W2, s, U[k, 0], H[k, 0], Z[k, 0], g_nodes[k],
                              dk1, dW1, db1, dW2, db2, du)
        for c in range(m):
            a[c] = ax[c] + du[c] + dX[k, c]
    return loss, dW1, db1, dW2, db2, ds, X
