"""Numba twins of the numpy kernels.

Same signatures and same algebra as ``numpy_kernels``; the elementwise
stages are fused into explicit loops and the matrix products go through
``np.dot`` (BLAS).  All kernels are compiled ``nogil`` so the chunked
wrapper in ``lfis.nn`` can run chunks on a thread pool, and ``cache=True``
persists the compiled artifacts next to this file.

Import this module only through ``lfis.backends``, which falls back to the
numpy implementation when numba is unavailable or disabled.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True, fastmath=False)


@njit(**_JIT)
def _affine_tanh(X, W, b):
    Z = np.dot(X, W)
    n, h = Z.shape
    A = np.empty((n, h))
    for i in range(n):
        for k in range(h):
            A[i, k] = math.tanh(Z[i, k] + b[k])
    return A


@njit(**_JIT)
def forward(W1, b1, W2, b2, W3, b3, X):
    A1 = _affine_tanh(X, W1, b1)
    A2 = _affine_tanh(A1, W2, b2)
    V = np.dot(A2, W3)
    n, d = V.shape
    for i in range(n):
        for e in range(d):
            V[i, e] += b3[e]
    return V


@njit(**_JIT)
def forward_div(W1, b1, W2, b2, W3, b3, X):
    n, d = X.shape
    h1 = W1.shape[1]
    h2 = W2.shape[1]
    A1 = _affine_tanh(X, W1, b1)
    A2 = _affine_tanh(A1, W2, b2)
    V = np.dot(A2, W3)
    for i in range(n):
        for e in range(d):
            V[i, e] += b3[e]

    U = np.empty((n * d, h1))
    for i in range(n):
        for e in range(d):
            r = i * d + e
            for h in range(h1):
                U[r, h] = (1.0 - A1[i, h] * A1[i, h]) * W1[e, h]
    P = np.dot(U, W2)

    div = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for e in range(d):
            r = i * d + e
            for j in range(h2):
                acc += (1.0 - A2[i, j] * A2[i, j]) * P[r, j] * W3[j, e]
        div[i] = acc
    return V, div


@njit(**_JIT)
def _mtm(A, B):
    # A.T @ B with contiguous operands for BLAS
    return np.dot(np.ascontiguousarray(A.T), B)


@njit(**_JIT)
def loss_and_grad(W1, b1, W2, b2, W3, b3, X, S, C):
    n, d = X.shape
    h1 = W1.shape[1]
    h2 = W2.shape[1]

    A1 = _affine_tanh(X, W1, b1)
    A2 = _affine_tanh(A1, W2, b2)
    V = np.dot(A2, W3)
    G1 = np.empty((n, h1))
    G2 = np.empty((n, h2))
    for i in range(n):
        for h in range(h1):
            G1[i, h] = 1.0 - A1[i, h] * A1[i, h]
        for j in range(h2):
            G2[i, j] = 1.0 - A2[i, j] * A2[i, j]
        for e in range(d):
            V[i, e] += b3[e]

    U = np.empty((n * d, h1))
    for i in range(n):
        for e in range(d):
            r = i * d + e
            for h in range(h1):
                U[r, h] = G1[i, h] * W1[e, h]
    P = np.dot(U, W2)

    W3T = np.ascontiguousarray(W3.T)
    eps = np.empty(n)
    m = np.empty(n)
    loss = 0.0
    for i in range(n):
        acc = 0.0
        for e in range(d):
            r = i * d + e
            for j in range(h2):
                acc += G2[i, j] * P[r, j] * W3T[e, j]
        sv = 0.0
        for e in range(d):
            sv += S[i, e] * V[i, e]
        e_i = acc + sv + C[i]
        eps[i] = e_i
        loss += e_i * e_i
        m[i] = 2.0 * e_i / n
    loss /= n

    # first-order part
    Y = np.empty((n, d))
    for i in range(n):
        for e in range(d):
            Y[i, e] = m[i] * S[i, e]
    gW3 = _mtm(A2, Y)
    gb3 = np.zeros(d)
    for i in range(n):
        for e in range(d):
            gb3[e] += Y[i, e]
    D2 = np.dot(Y, W3T)
    for i in range(n):
        for j in range(h2):
            D2[i, j] *= G2[i, j]
    gW2 = _mtm(A1, D2)
    gb2 = np.zeros(h2)
    for i in range(n):
        for j in range(h2):
            gb2[j] += D2[i, j]
    W2T = np.ascontiguousarray(W2.T)
    D1 = np.dot(D2, W2T)
    for i in range(n):
        for h in range(h1):
            D1[i, h] *= G1[i, h]
    gW1 = _mtm(X, D1)
    gb1 = np.zeros(h1)
    for i in range(n):
        for h in range(h1):
            gb1[h] += D1[i, h]

    # divergence part
    Cc = np.dot(np.ascontiguousarray(W1.T), W3T)
    R = np.zeros((n, h2))
    for i in range(n):
        for e in range(d):
            r = i * d + e
            for j in range(h2):
                R[i, j] += P[r, j] * W3T[e, j]
    t2 = np.empty((n, h2))
    for i in range(n):
        for j in range(h2):
            t2[i, j] = m[i] * R[i, j] * (-2.0 * A2[i, j] * G2[i, j])

    W2Cc = np.empty((h1, h2))
    for h in range(h1):
        for j in range(h2):
            W2Cc[h, j] = W2[h, j] * Cc[h, j]
    F = np.dot(G2, np.ascontiguousarray(W2Cc.T))
    T2W2 = np.dot(t2, W2T)
    t1 = np.empty((n, h1))
    for i in range(n):
        for h in range(h1):
            t1[i, h] = m[i] * F[i, h] * (-2.0 * A1[i, h] * G1[i, h]) + T2W2[i, h] * G1[i, h]

    mG1 = np.empty((n, h1))
    for i in range(n):
        for h in range(h1):
            mG1[i, h] = m[i] * G1[i, h]
    Hm = _mtm(mG1, G2)

    gW1 += _mtm(X, t1)
    HW = np.empty((h1, h2))
    for h in range(h1):
        for j in range(h2):
            HW[h, j] = Hm[h, j] * W2[h, j]
    HW3 = np.dot(HW, W3)
    for e in range(d):
        for h in range(h1):
            gW1[e, h] += HW3[h, e]
    for i in range(n):
        for h in range(h1):
            gb1[h] += t1[i, h]

    gW2 += _mtm(A1, t2)
    for h in range(h1):
        for j in range(h2):
            gW2[h, j] += Cc[h, j] * Hm[h, j]
    for i in range(n):
        for j in range(h2):
            gb2[j] += t2[i, j]

    gW3T = np.zeros((d, h2))
    for i in range(n):
        for e in range(d):
            r = i * d + e
            for j in range(h2):
                gW3T[e, j] += m[i] * G2[i, j] * P[r, j]
    for j in range(h2):
        for e in range(d):
            gW3[j, e] += gW3T[e, j]

    return loss, (gW1, gb1, gW2, gb2, gW3, gb3), eps
