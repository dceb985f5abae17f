"""Numba-compiled inner loops.

Everything here works on plain float64/int64 arrays with 0-based regime
labels. Parameter matrices ``theta`` have shape ``(K, 5)`` with columns
``(a0, a1, a2, b, gamma)``.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)

# Below this distance from the GARCH persistence boundary the fixed point is
# not used as a starting variance.
INIT_DENOM_FLOOR = 0.05


@njit(cache=True)
def initial_variance(a0, a1, a2, b, target):
    denom = 1.0 - 0.5 * (a1 + a2) - b
    if denom > INIT_DENOM_FLOOR:
        return a0 / denom
    if target > 0.0 and np.isfinite(target):
        return target
    return 1.0


@njit(cache=True)
def initial_variances(theta, target):
    K = theta.shape[0]
    out = np.empty(K)
    for j in range(K):
        out[j] = initial_variance(theta[j, 0], theta[j, 1], theta[j, 2], theta[j, 3], target)
    return out


@njit(cache=True)
def variance_update(a0, a1, a2, b, gamma, y_prev, h_prev):
    w = 1.0 / (1.0 + math.exp(-gamma * y_prev))
    return a0 + y_prev * y_prev * (a1 * (1.0 - w) + a2 * w) + b * h_prev


@njit(cache=True)
def variance_paths(theta, y, h1):
    """Per-regime variances ``H[j, t]`` for t = 0..T-1 given ``H[:, 0] = h1``."""
    K = theta.shape[0]
    T = y.shape[0]
    H = np.empty((K, T))
    for j in range(K):
        a0, a1, a2, b, g = theta[j, 0], theta[j, 1], theta[j, 2], theta[j, 3], theta[j, 4]
        h = h1[j]
        if T > 0:
            H[j, 0] = h
        for t in range(1, T):
            h = variance_update(a0, a1, a2, b, g, y[t - 1], h)
            H[j, t] = h
    return H


@njit(cache=True)
def forward_filter(theta, P, y, alpha0, h1):
    """Hamilton-type forward pass in the log domain.

    Returns ``(alpha, H, loglik, filtered, bad)`` where ``alpha[t]`` and
    ``H[t]`` are the predictive regime probabilities and variances for
    observation ``t`` (row ``T`` is the one-step-ahead state after the last
    observation), ``filtered[t]`` is p(z_t | y_1..y_t) and ``bad`` is the
    index of the first degenerate step or -1.
    """
    K = theta.shape[0]
    T = y.shape[0]
    alpha = np.empty((T + 1, K))
    H = np.empty((T + 1, K))
    loglik = np.empty(T)
    filtered = np.empty((T, K))
    c = np.empty(K)
    alpha[0, :] = alpha0
    H[0, :] = h1
    for t in range(T):
        yt = y[t]
        m = -np.inf
        for j in range(K):
            h = H[t, j]
            a = alpha[t, j]
            if a > 0.0 and h > 0.0:
                c[j] = math.log(a) - 0.5 * (LOG_2PI + math.log(h) + yt * yt / h)
            else:
                c[j] = -np.inf
            if c[j] > m:
                m = c[j]
        if not np.isfinite(m):
            return alpha, H, loglik, filtered, t
        s = 0.0
        for j in range(K):
            c[j] = math.exp(c[j] - m)
            s += c[j]
        loglik[t] = m + math.log(s)
        for j in range(K):
            filtered[t, j] = c[j] / s
        tot = 0.0
        for j in range(K):
            acc = 0.0
            for i in range(K):
                acc += filtered[t, i] * P[i, j]
            alpha[t + 1, j] = acc
            tot += acc
        for j in range(K):
            alpha[t + 1, j] /= tot
            H[t + 1, j] = variance_update(
                theta[j, 0], theta[j, 1], theta[j, 2], theta[j, 3], theta[j, 4], yt, H[t, j]
            )
    return alpha, H, loglik, filtered, -1


@njit(cache=True)
def sequential_draw(p, u):
    """Categorical draw by successive conditional acceptance.

    Step j accepts j with probability p_j / sum_{l>=j} p_l using the
    uniform ``u[j]``. Returns -1 when ``p`` carries no mass.
    """
    K = p.shape[0]
    tail = 0.0
    for j in range(K):
        tail += p[j]
    if not tail > 0.0:
        return -1
    for j in range(K - 1):
        tail = 0.0
        for l in range(j, K):
            tail += p[l]
        if tail > 0.0 and u[j] <= p[j] / tail:
            return j
    return K - 1


@njit(cache=True)
def backward_sample(filtered, P, u):
    """Draw a state path from ``filtered`` probabilities, last time first.

    Returns ``(z, bad)`` with ``bad`` the failing index or -1.
    """
    T, K = filtered.shape
    z = np.zeros(T, dtype=np.int64)
    p = np.empty(K)
    if T == 0:
        return z, -1
    k = sequential_draw(filtered[T - 1], u[T - 1])
    if k < 0:
        return z, T - 1
    z[T - 1] = k
    for t in range(T - 2, -1, -1):
        nxt = z[t + 1]
        for j in range(K):
            p[j] = filtered[t, j] * P[j, nxt]
        k = sequential_draw(p, u[t])
        if k < 0:
            return z, t
        z[t] = k
    return z, -1


@njit(cache=True)
def regime_loglik(params, y, active, target):
    """Sum of Gaussian log densities over the times where ``active`` is set,
    using the variance recursion of one regime."""
    a0, a1, a2, b, g = params[0], params[1], params[2], params[3], params[4]
    h = initial_variance(a0, a1, a2, b, target)
    T = y.shape[0]
    ll = 0.0
    for t in range(T):
        if active[t]:
            ll += -0.5 * (LOG_2PI + math.log(h) + y[t] * y[t] / h)
        if t + 1 < T:
            h = variance_update(a0, a1, a2, b, g, y[t], h)
    return ll


@njit(cache=True)
def regime_loglik_grid(grid_params, y, active, target):
    G = grid_params.shape[0]
    out = np.empty(G)
    for g in range(G):
        out[g] = regime_loglik(grid_params[g], y, active, target)
    return out


@njit(cache=True)
def regime_loglik_grid_fixed_w(grid_params, y, active, target):
    """Same as :func:`regime_loglik_grid` when every grid point shares gamma,
    so the logistic weights are computed once."""
    G = grid_params.shape[0]
    T = y.shape[0]
    gamma = grid_params[0, 4]
    neg = np.empty(T)
    pos = np.empty(T)
    for t in range(T):
        w = 1.0 / (1.0 + math.exp(-gamma * y[t]))
        ysq = y[t] * y[t]
        neg[t] = ysq * (1.0 - w)
        pos[t] = ysq * w
    out = np.empty(G)
    for g in range(G):
        a0, a1, a2, b = grid_params[g, 0], grid_params[g, 1], grid_params[g, 2], grid_params[g, 3]
        h = initial_variance(a0, a1, a2, b, target)
        ll = 0.0
        for t in range(T):
            if active[t]:
                ll += -0.5 * (LOG_2PI + math.log(h) + y[t] * y[t] / h)
            h = a0 + a1 * neg[t] + a2 * pos[t] + b * h
        out[g] = ll
    return out


@njit(cache=True)
def simulate_path(theta, P, eps, u, z0, h1):
    """Simulate returns, 0-based states and all regime variances."""
    K = theta.shape[0]
    n = eps.shape[0]
    y = np.empty(n)
    z = np.empty(n, dtype=np.int64)
    H = np.empty((K, n))
    h = h1.copy()
    state = z0
    for t in range(n):
        if t > 0:
            acc = 0.0
            nxt = K - 1
            for j in range(K - 1):
                acc += P[state, j]
                if u[t] < acc:
                    nxt = j
                    break
            state = nxt
            for j in range(K):
                h[j] = variance_update(
                    theta[j, 0], theta[j, 1], theta[j, 2], theta[j, 3], theta[j, 4], y[t - 1], h[j]
                )
        for j in range(K):
            H[j, t] = h[j]
        z[t] = state
        y[t] = eps[t] * math.sqrt(h[state])
    return y, z, H
