"""Velocity network: parameters, initialization, and batched evaluation.

The network shape is fixed by the method: input dimension D, two tanh
hidden layers of equal width (64 by default), linear output back to D.
Everything is float64.  Heavy lifting happens in ``lfis.backends``; this
module owns parameter handling, memory-bounded chunking, and the optional
thread pool that the CLI ``--threads`` flag controls.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backends
from .errors import NumericsError

# Upper bound on n*D elements evaluated per kernel call.  Keeps the
# (rows*D, width) tangent temporaries around 100 MB at width 64, and is
# deliberately independent of the thread count so results do not change
# when --threads does.
_CHUNK_ELEMS = 1 << 17

_num_threads = 1


def set_num_threads(n: int) -> None:
    """Set the worker count used to spread kernel chunks over threads."""
    global _num_threads
    _num_threads = max(1, int(n))


def get_num_threads() -> int:
    return _num_threads


@dataclass
class NetParams:
    """Weights and biases of the D -> width -> width -> D tanh network."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    @property
    def dim(self) -> int:
        return self.W1.shape[0]

    @property
    def width(self) -> int:
        return self.W1.shape[1]

    def as_list(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def copy(self) -> "NetParams":
        return NetParams(*(a.copy() for a in self.as_list()))

    def n_params(self) -> int:
        return sum(a.size for a in self.as_list())


def init_params(dim: int, width: int = 64, rng: np.random.Generator | None = None,
                zero_last: bool = True) -> NetParams:
    """Fresh parameters.

    Hidden layers draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the output
    layer starts at zero (so the initial velocity field is identically
    zero) unless ``zero_last`` is disabled.
    """
    if rng is None:
        rng = np.random.default_rng()
    s1 = 1.0 / np.sqrt(dim)
    s2 = 1.0 / np.sqrt(width)
    W1 = rng.uniform(-s1, s1, size=(dim, width))
    b1 = rng.uniform(-s1, s1, size=width)
    W2 = rng.uniform(-s2, s2, size=(width, width))
    b2 = rng.uniform(-s2, s2, size=width)
    if zero_last:
        W3 = np.zeros((width, dim))
        b3 = np.zeros(dim)
    else:
        W3 = rng.uniform(-s2, s2, size=(width, dim))
        b3 = rng.uniform(-s2, s2, size=dim)
    return NetParams(W1, b1, W2, b2, W3, b3)


def _chunk_rows(d: int) -> int:
    return max(64, _CHUNK_ELEMS // max(d, 1))


def _split(n: int, rows: int) -> list[tuple[int, int]]:
    return [(a, min(a + rows, n)) for a in range(0, n, rows)]


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def forward(params: NetParams, x: np.ndarray) -> np.ndarray:
    """Velocity values v(x); accepts a single point (D,) or a batch (n, D)."""
    X, single = _as_batch(x)
    V = _mapped(backends.forward, params, X)
    return V[0] if single else V


def velocity_and_divergence(params: NetParams, x: np.ndarray):
    """v(x) and the exact divergence tr(dv/dx)."""
    X, single = _as_batch(x)
    out = _mapped(backends.forward_div, params, X)
    V, div = out
    if single:
        return V[0], float(div[0])
    return V, div


def divergence(params: NetParams, x: np.ndarray):
    return velocity_and_divergence(params, x)[1]


def _mapped(kernel, params: NetParams, X: np.ndarray):
    n, d = X.shape
    spans = _split(n, _chunk_rows(d))
    args = tuple(params.as_list())
    if len(spans) == 1:
        return kernel(*args, X)
    if _num_threads > 1:
        with ThreadPoolExecutor(max_workers=_num_threads) as pool:
            parts = list(pool.map(lambda s: kernel(*args, X[s[0]:s[1]]), spans))
    else:
        parts = [kernel(*args, X[a:b]) for a, b in spans]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[k] for p in parts]) for k in range(len(parts[0])))
    return np.concatenate(parts)


def residuals(params: NetParams, x: np.ndarray, score: np.ndarray,
              source: np.ndarray) -> np.ndarray:
    """Consistency residual eps = div v + score . v + source.

    ``source`` is the centred time-derivative term, precomputed by the
    caller.  Accepts single points or batches.
    """
    X, single = _as_batch(x)
    S, _ = _as_batch(score)
    C = np.atleast_1d(np.asarray(source, dtype=np.float64))
    V, div = velocity_and_divergence(params, X)
    eps = np.asarray(div) + np.sum(S * np.atleast_2d(V), axis=1) + C
    return float(eps[0]) if single else eps


def loss_and_grad(params: NetParams, X: np.ndarray, S: np.ndarray, C: np.ndarray):
    """Mean squared residual and its gradient, chunked and thread-mapped.

    Returns ``(loss, grads, eps)`` where ``grads`` is a list matching
    ``params.as_list()``.  Raises :class:`NumericsError` if the loss or
    any gradient entry is non-finite.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    S = np.ascontiguousarray(S, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, d = X.shape
    spans = _split(n, _chunk_rows(d))
    args = tuple(params.as_list())

    def one(span):
        a, b = span
        return backends.loss_and_grad(*args, X[a:b], S[a:b], C[a:b])

    if len(spans) == 1:
        loss, grads, eps = one(spans[0])
        grads = list(grads)
    else:
        if _num_threads > 1:
            with ThreadPoolExecutor(max_workers=_num_threads) as pool:
                parts = list(pool.map(one, spans))
        else:
            parts = [one(s) for s in spans]
        loss = 0.0
        grads = [np.zeros_like(a) for a in args]
        eps_parts = []
        for (a, b), (l_c, g_c, e_c) in zip(spans, parts):
            w = (b - a) / n
            loss += l_c * w
            for g_tot, g in zip(grads, g_c):
                g_tot += w * g
            eps_parts.append(e_c)
        eps = np.concatenate(eps_parts)

    if not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads):
        raise NumericsError("non-finite loss or gradient in residual training step")
    return float(loss), grads, eps


class MlpVelocityField:
    """A trained (or in-training) network viewed as a velocity field."""

    def __init__(self, params: NetParams):
        self.params = params

    @property
    def dim(self) -> int:
        return self.params.dim

    def velocity_and_divergence(self, X: np.ndarray):
        return velocity_and_divergence(self.params, X)


class LinearVelocityField:
    """v(x) = a * x, the closed-form optimal field of isotropic Gaussian paths."""

    def __init__(self, coef: float, dim: int):
        self.coef = float(coef)
        self.dim = int(dim)

    def velocity_and_divergence(self, X: np.ndarray):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        V = self.coef * X
        div = np.full(X.shape[0], self.coef * self.dim)
        return V, div
