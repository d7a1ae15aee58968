"""Compiled numeric core for the memory-1 value computations.

Everything here works on plain float64 arrays so numba can compile it.
The linear systems are 4x4, solved by Gaussian elimination with partial
pivoting; no library solver is involved in the production path.
"""

from __future__ import annotations

import numpy as np
from numba import njit

ADAM_STEPS = 50
ADAM_LR = 0.1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@njit(cache=True, nogil=True)
def solve4(A, b):
    """Solve A x = b for a 4x4 system, partial pivoting, inputs preserved."""
    M = A.copy()
    x = b.copy()
    for col in range(4):
        piv = col
        best = abs(M[col, col])
        for r in range(col + 1, 4):
            v = abs(M[r, col])
            if v > best:
                best = v
                piv = r
        if piv != col:
            for c in range(4):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
            tmp = x[col]
            x[col] = x[piv]
            x[piv] = tmp
        inv = 1.0 / M[col, col]
        for r in range(col + 1, 4):
            f = M[r, col] * inv
            if f != 0.0:
                for c in range(col, 4):
                    M[r, c] -= f * M[col, c]
                x[r] -= f * x[col]
    for col in range(3, -1, -1):
        acc = x[col]
        for c in range(col + 1, 4):
            acc -= M[col, c] * x[c]
        x[col] = acc / M[col, col]
    return x


@njit(cache=True, nogil=True)
def noisy(p, p_noise):
    return (1.0 - p_noise) * p + p_noise * (1.0 - p)


@njit(cache=True, nogil=True)
def build_transition(p_self_n, p_opp_n):
    """Joint-state transition matrix, rows and columns in (CC, CD, DC, DD)
    order from the self player's perspective."""
    T = np.empty((4, 4), dtype=np.float64)
    for s in range(4):
        a = p_self_n[s]
        b = p_opp_n[s]
        T[s, 0] = a * b
        T[s, 1] = a * (1.0 - b)
        T[s, 2] = (1.0 - a) * b
        T[s, 3] = (1.0 - a) * (1.0 - b)
    return T


@njit(cache=True, nogil=True)
def value_kernel(p_self, p_opp_n, s0, gamma, u, p_noise):
    """Discounted average payoff per round of the intended policy ``p_self``
    against a (noise-inclusive) opponent vector, starting from state s0."""
    pn = np.empty(4, dtype=np.float64)
    for s in range(4):
        pn[s] = noisy(p_self[s], p_noise)
    T = build_transition(pn, p_opp_n)
    A = -gamma * T
    for s in range(4):
        A[s, s] += 1.0
    x = solve4(A, u)  # x = (I - gamma T)^{-1} u
    tx = 0.0
    for c in range(4):
        tx += T[s0, c] * x[c]
    return (1.0 - gamma) * tx


@njit(cache=True, nogil=True)
def value_grad_kernel(p_self, p_opp_n, s0, gamma, u, p_noise):
    """Value plus its exact gradient with respect to the four intended
    cooperation probabilities.

    With M = (I - gamma T)^{-1} the value is (1-gamma) e_s0' T M u; a change
    in row s of T contributes (1-gamma) (e_s0[s] + gamma (e_s0' T M)[s])
    times the row derivative dotted with M u, chain-ruled through the noise
    map (factor 1 - 2 p_noise).
    """
    pn = np.empty(4, dtype=np.float64)
    for s in range(4):
        pn[s] = noisy(p_self[s], p_noise)
    T = build_transition(pn, p_opp_n)
    A = -gamma * T
    for s in range(4):
        A[s, s] += 1.0
    x = solve4(A, u)
    value = 0.0
    for c in range(4):
        value += T[s0, c] * x[c]
    value *= 1.0 - gamma

    rhs = np.empty(4, dtype=np.float64)
    for c in range(4):
        rhs[c] = T[s0, c]
    At = np.empty((4, 4), dtype=np.float64)
    for i in range(4):
        for j in range(4):
            At[i, j] = A[j, i]
    w = solve4(At, rhs)  # w[s] = (e_s0' T M)[s]

    scale = 1.0 - 2.0 * p_noise
    grad = np.empty(4, dtype=np.float64)
    for s in range(4):
        b = p_opp_n[s]
        gdot = b * x[0] + (1.0 - b) * x[1] - b * x[2] - (1.0 - b) * x[3]
        indicator = 1.0 if s == s0 else 0.0
        grad[s] = (1.0 - gamma) * (indicator + gamma * w[s]) * gdot * scale
    return value, grad


@njit(cache=True, nogil=True)
def adam_kernel(p_opp_n, s0, gamma, u, p_noise, steps, lr):
    """Gradient ascent on the discounted value with Adam, starting from the
    centre of the cube, projecting onto [0, 1] after every step, and keeping
    the best iterate seen."""
    p = np.full(4, 0.5, dtype=np.float64)
    m = np.zeros(4, dtype=np.float64)
    v = np.zeros(4, dtype=np.float64)
    best_p = p.copy()
    best_val = -1e300
    b1 = ADAM_BETA1
    b2 = ADAM_BETA2
    b1t = 1.0
    b2t = 1.0
    for step in range(steps):
        val, grad = value_grad_kernel(p, p_opp_n, s0, gamma, u, p_noise)
        if val > best_val:
            best_val = val
            best_p = p.copy()
        b1t *= b1
        b2t *= b2
        for s in range(4):
            m[s] = b1 * m[s] + (1.0 - b1) * grad[s]
            v[s] = b2 * v[s] + (1.0 - b2) * grad[s] * grad[s]
            mhat = m[s] / (1.0 - b1t)
            vhat = v[s] / (1.0 - b2t)
            p[s] += lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
            if p[s] < 0.0:
                p[s] = 0.0
            elif p[s] > 1.0:
                p[s] = 1.0
    val = value_kernel(p, p_opp_n, s0, gamma, u, p_noise)
    if val > best_val:
        best_val = val
        best_p = p.copy()
    return best_p, best_val


@njit(cache=True, nogil=True)
def corner_kernel(p_opp_n, s0, gamma, u, p_noise):
    """Exhaustive search over the 16 deterministic intended policies."""
    best_p = np.zeros(4, dtype=np.float64)
    best_val = -1e300
    p = np.empty(4, dtype=np.float64)
    for mask in range(16):
        for s in range(4):
            p[s] = 1.0 if (mask >> s) & 1 else 0.0
        val = value_kernel(p, p_opp_n, s0, gamma, u, p_noise)
        if val > best_val:
            best_val = val
            best_p = p.copy()
    return best_p, best_val
