"""Batched classical Runge-Kutta propagators for linear time-varying dynamics.

For xdot = A(t) x + b(t) the RK4 update is affine, x_{k+1} = M_k x_k + g_k,
and both M_k and g_k depend only on the step's stage data.  Building all step
matrices in one vectorized pass and then running the cheap sequential
recurrence is exactly RK4 with exact stage evaluations, but avoids per-step
Python overhead in the right-hand side.
"""

from __future__ import annotations

import numpy as np


def step_matrices(A_stages, h):
    """RK4 transition matrices M_k from stage matrices (A(t_k), A(t_k+h/2), A(t_k+h)).

    A_stages: tuple of three (N, n, n) arrays.  Returns (N, n, n).
    """
    F1, F2, F3 = A_stages
    n = F1.shape[-1]
    I = np.eye(n)
    K1 = F1
    K2 = F2 @ (I + 0.5 * h * K1)
    K3 = F2 @ (I + 0.5 * h * K2)
    K4 = F3 @ (I + h * K3)
    return I + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


def step_offsets(A_stages, b_stages, h):
    """RK4 affine offsets g_k for the forced system; shapes (N, n)."""
    F1, F2, F3 = A_stages
    b1, b2, b3 = b_stages
    k1 = b1
    k2 = (F2 @ (0.5 * h * k1)[..., None])[..., 0] + b2
    k3 = (F2 @ (0.5 * h * k2)[..., None])[..., 0] + b2
    k4 = (F3 @ (h * k3)[..., None])[..., 0] + b3
    return (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate_vector(M, g, x0):
    """x_{k+1} = M_k x_k + g_k from x_0; returns (N+1, n) including x_0.

    Overflow is left to the caller's finiteness check.
    """
    N = M.shape[0]
    out = np.empty((N + 1, x0.size))
    x = np.array(x0, dtype=float)
    out[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            x = M[k] @ x + g[k]
            out[k + 1] = x
    return out


def propagate_matrix(M, X0):
    """X_{k+1} = M_k X_k from X_0; returns (N+1, n, n)."""
    N = M.shape[0]
    n = X0.shape[0]
    out = np.empty((N + 1, n, n))
    X = np.array(X0, dtype=float)
    out[0] = X
    for k in range(N):
        X = M[k] @ X
        out[k + 1] = X
    return out
