"""Pure-numpy reference implementation of the velocity-net kernels.

The network is a two-hidden-layer tanh MLP, D -> H1 -> H2 -> D, evaluated
in float64.  Three kernels cover everything the samplers and the trainer
need:

* ``forward``      -- velocity values v(x)
* ``forward_div``  -- velocity plus its exact divergence tr(dv/dx),
                      computed by propagating all D coordinate tangents
                      through the net (no stochastic trace estimate)
* ``loss_and_grad`` -- mean squared consistency residual
                      eps_i = div v(x_i) + s_i . v(x_i) + c_i
                      and its exact gradient in every weight and bias,
                      including the second-order terms that flow through
                      the divergence

The gradient is derived by hand; the only derivative facts used are
tanh' = 1 - tanh^2 and (1 - a^2)' = -2 a (1 - a^2).  A numba twin of this
module lives in ``numba_kernels``; both expose identical signatures and
are selected in ``lfis.backends``.
"""

from __future__ import annotations

import numpy as np


def forward(W1, b1, W2, b2, W3, b3, X):
    """Velocity field values, shape (n, D)."""
    A1 = np.tanh(X @ W1 + b1)
    A2 = np.tanh(A1 @ W2 + b2)
    return A2 @ W3 + b3


def forward_div(W1, b1, W2, b2, W3, b3, X):
    """Velocity values and exact divergence.

    Returns ``(V, div)`` with shapes (n, D) and (n,).  The divergence is
    the trace of the input Jacobian, obtained by pushing the D canonical
    tangent vectors through the network:

        d v / d x_e = ((1-a2^2) . (((1-a1^2) . W1[e]) W2)) W3
    """
    n, d = X.shape
    h1 = W1.shape[1]
    h2 = W2.shape[1]
    A1 = np.tanh(X @ W1 + b1)
    G1 = 1.0 - A1 * A1
    A2 = np.tanh(A1 @ W2 + b2)
    G2 = 1.0 - A2 * A2
    V = A2 @ W3 + b3

    # U[n,e,h] = G1[n,h] * W1[e,h]; P = U @ W2 batched over (n,e)
    U = (G1[:, None, :] * W1[None, :, :]).reshape(n * d, h1)
    P = (U @ W2).reshape(n, d, h2)
    Q = P * G2[:, None, :]
    # div[n] = sum_{e,j} Q[n,e,j] * W3[j,e]
    div = Q.reshape(n, d * h2) @ np.ascontiguousarray(W3.T).ravel()
    return V, div


def loss_and_grad(W1, b1, W2, b2, W3, b3, X, S, C):
    """Mean squared residual and its exact parameter gradient.

    Residual per sample: eps = div v(x) + S . v(x) + C, where S is the
    annealed score at x and C the (already centred) time-derivative
    source term.  Loss is mean(eps^2).

    Returns ``(loss, (gW1, gb1, gW2, gb2, gW3, gb3), eps)``.
    """
    n, d = X.shape
    h1 = W1.shape[1]
    h2 = W2.shape[1]

    A1 = np.tanh(X @ W1 + b1)
    G1 = 1.0 - A1 * A1
    A2 = np.tanh(A1 @ W2 + b2)
    G2 = 1.0 - A2 * A2
    V = A2 @ W3 + b3

    U = (G1[:, None, :] * W1[None, :, :]).reshape(n * d, h1)
    P = (U @ W2).reshape(n, d, h2)
    W3T = np.ascontiguousarray(W3.T)
    div = (P * G2[:, None, :]).reshape(n, d * h2) @ W3T.ravel()

    eps = div + np.sum(S * V, axis=1) + C
    loss = float(np.mean(eps * eps))
    m = (2.0 / n) * eps

    # --- first-order part: cotangent m*S on the output -----------------
    Y = m[:, None] * S
    gW3 = A2.T @ Y
    gb3 = Y.sum(axis=0)
    D2 = (Y @ W3.T) * G2
    gW2 = A1.T @ D2
    gb2 = D2.sum(axis=0)
    D1 = (D2 @ W2.T) * G1
    gW1 = X.T @ D1
    gb1 = D1.sum(axis=0)

    # --- divergence part ------------------------------------------------
    # Constants reused below:
    #   Cc[h,j]  = sum_e W1[e,h] W3[j,e]
    #   R[n,j]   = sum_e P[n,e,j] W3[j,e]
    #   Hm[h,j]  = sum_n m_n G1[n,h] G2[n,j]
    Cc = W1.T @ W3.T
    R = np.einsum("nej,ej->nj", P, W3T)
    gp2 = -2.0 * A2 * G2
    t2 = (m[:, None] * R) * gp2

    F = G2 @ (W2 * Cc).T
    gp1 = -2.0 * A1 * G1
    t1 = (m[:, None] * F) * gp1 + (t2 @ W2.T) * G1

    Hm = (m[:, None] * G1).T @ G2

    gW1 += X.T @ t1 + ((Hm * W2) @ W3).T
    gb1 += t1.sum(axis=0)
    gW2 += Cc * Hm + A1.T @ t2
    gb2 += t2.sum(axis=0)
    # gW3[j,e] += sum_n m_n G2[n,j] P[n,e,j]
    gW3 += np.einsum("nj,nej->je", m[:, None] * G2, P)

    return loss, (gW1, gb1, gW2, gb2, gW3, gb3), eps
