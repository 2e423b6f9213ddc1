"""Benchmark densities, Bayesian posteriors, and their data loaders.

All densities are float64 and batch-oriented: ``X`` has shape (n, D),
log-densities come back as (n,), scores as (n, D).  Log-densities include
their known normalizing constants, so an unnormalized target is exactly
the object whose missing constant the samplers estimate.

Two kinds of object appear:

* :class:`TargetDensity` -- anything with a log-density and score; used
  as the reference or the target of a geometric path.
* :class:`BayesTarget`   -- a prior (a TargetDensity that can sample)
  plus a likelihood; used by the posterior-tempering path.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular
from scipy.special import expit, logsumexp

from .errors import ConfigError

LOG_2PI = math.log(2.0 * math.pi)


def _batch(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X[None, :] if X.ndim == 1 else X


class TargetDensity:
    dim: int

    def log_density(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def score(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_density_and_score(self, X: np.ndarray):
        return self.log_density(X), self.score(X)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no direct sampler")


class StandardNormal(TargetDensity):
    """N(0, I); the default reference measure and weight prior."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def log_density(self, X):
        X = _batch(X)
        with np.errstate(over="ignore"):  # far-out points go to -inf
            return -0.5 * np.sum(X * X, axis=1) - 0.5 * self.dim * LOG_2PI

    def score(self, X):
        return -_batch(X)

    def sample(self, n, rng):
        return rng.standard_normal((n, self.dim))


class IsotropicGaussian(TargetDensity):
    """exp(-|x|^2 / (2 s^2)), kept unnormalized on purpose.

    Its true normalizer is known in closed form (``log_norm``), which makes
    it the oracle target for estimator checks.  ``sample`` draws from the
    normalized N(0, s^2 I).
    """

    def __init__(self, dim: int, s: float):
        self.dim = int(dim)
        self.s = float(s)

    @property
    def log_norm(self) -> float:
        return self.dim * math.log(self.s * math.sqrt(2.0 * math.pi))

    def log_density(self, X):
        X = _batch(X)
        with np.errstate(over="ignore"):
            return -0.5 * np.sum(X * X, axis=1) / (self.s * self.s)

    def score(self, X):
        return -_batch(X) / (self.s * self.s)

    def sample(self, n, rng):
        return self.s * rng.standard_normal((n, self.dim))


class ScaledTarget(TargetDensity):
    """base density times exp(log_scale); score and shape unchanged."""

    def __init__(self, base: TargetDensity, log_scale: float):
        self.base = base
        self.log_scale = float(log_scale)
        self.dim = base.dim

    def log_density(self, X):
        return self.base.log_density(X) + self.log_scale

    def score(self, X):
        return self.base.score(X)

    def log_density_and_score(self, X):
        ld, sc = self.base.log_density_and_score(X)
        return ld + self.log_scale, sc

    def sample(self, n, rng):
        return self.base.sample(n, rng)


class GaussianMixture(TargetDensity):
    """Sum of isotropic Gaussian modes with shared variance.

    ``mode_normalizer`` selects the per-mode constant:

    * ``"full"``        -- (2 pi s^2)^(-D/2); the mixture is a normalized
                           density with log Z = 0.
    * ``"single-axis"`` -- (2 pi s^2)^(-1/2) regardless of D; this leaves
                           log Z = (D-1)/2 * log(2 pi s^2), the convention
                           under which the reported annealed-SMC baseline
                           value for the 9-mode grid is -1.29.
    """

    def __init__(self, centers, variance: float, weights=None,
                 mode_normalizer: str = "full"):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        self.variance = float(variance)
        k, self.dim = self.centers.shape
        if weights is None:
            w = np.full(k, 1.0 / k)
        else:
            w = np.asarray(weights, dtype=np.float64)
            if w.shape != (k,) or np.any(w <= 0):
                raise ConfigError("mixture weights must be positive, one per mode")
            w = w / w.sum()
        self.weights = w
        if mode_normalizer == "full":
            self._mode_const = -0.5 * self.dim * math.log(2.0 * math.pi * self.variance)
        elif mode_normalizer == "single-axis":
            self._mode_const = -0.5 * math.log(2.0 * math.pi * self.variance)
        else:
            raise ConfigError("mode_normalizer must be 'full' or 'single-axis'")
        self.mode_normalizer = mode_normalizer

    @classmethod
    def grid(cls, dim: int = 2, points=(-1.0, 0.0, 1.0), variance: float = 0.012,
             weights=None, mode_normalizer: str = "full") -> "GaussianMixture":
        """Modes on the tensor grid points^dim (the 9-mode square by default)."""
        axes = np.meshgrid(*([np.asarray(points, dtype=np.float64)] * dim),
                           indexing="ij")
        centers = np.stack([a.ravel() for a in axes], axis=1)
        return cls(centers, variance, weights=weights, mode_normalizer=mode_normalizer)

    @property
    def log_norm(self) -> float:
        if self.mode_normalizer == "full":
            return 0.0
        return 0.5 * (self.dim - 1) * math.log(2.0 * math.pi * self.variance)

    def _mode_logs(self, X):
        X = _batch(X)
        diff = X[:, None, :] - self.centers[None, :, :]     # (n, K, D)
        sq = np.sum(diff * diff, axis=2)
        logs = np.log(self.weights)[None, :] - 0.5 * sq / self.variance
        return logs + self._mode_const, diff

    def log_density(self, X):
        logs, _ = self._mode_logs(X)
        return logsumexp(logs, axis=1)

    def score(self, X):
        return self.log_density_and_score(X)[1]

    def log_density_and_score(self, X):
        logs, diff = self._mode_logs(X)
        ld = logsumexp(logs, axis=1)
        resp = np.exp(logs - ld[:, None])                    # (n, K)
        sc = -np.einsum("nk,nkd->nd", resp, diff) / self.variance
        return ld, sc

    def sample(self, n, rng):
        ks = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.centers[ks] + math.sqrt(self.variance) * rng.standard_normal(
            (n, self.dim))


class Funnel(TargetDensity):
    """x0 ~ N(0, x0_var); x_{1:D-1} | x0 ~ N(0, exp(x0) I).  Normalized."""

    def __init__(self, dim: int = 10, x0_var: float = 9.0):
        if dim < 2:
            raise ConfigError("funnel needs dim >= 2")
        self.dim = int(dim)
        self.x0_var = float(x0_var)

    def log_density(self, X):
        return self.log_density_and_score(X)[0]

    def score(self, X):
        return self.log_density_and_score(X)[1]

    def log_density_and_score(self, X):
        X = _batch(X)
        x0 = X[:, 0]
        rest = X[:, 1:]
        r = np.sum(rest * rest, axis=1)
        k = self.dim - 1
        with np.errstate(over="ignore"):
            inv = np.exp(-x0)
        ld = (-0.5 * x0 * x0 / self.x0_var
              - 0.5 * math.log(2.0 * math.pi * self.x0_var)
              - 0.5 * inv * r
              - 0.5 * k * (LOG_2PI + x0))
        sc = np.empty_like(X)
        sc[:, 0] = -x0 / self.x0_var + 0.5 * inv * r - 0.5 * k
        sc[:, 1:] = -rest * inv[:, None]
        return ld, sc

    def sample(self, n, rng):
        x = rng.standard_normal((n, self.dim))
        x[:, 0] *= math.sqrt(self.x0_var)
        x[:, 1:] *= np.exp(0.5 * x[:, 0])[:, None]
        return x


class GaussianPrior(TargetDensity):
    """N(mean, cov) with a precomputed Cholesky factor."""

    def __init__(self, mean: np.ndarray, cov: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.cov = np.asarray(cov, dtype=np.float64)
        self.dim = self.mean.shape[0]
        self._L = cholesky(cov, lower=True)
        self._cho = (self._L, True)
        self._log_det = 2.0 * float(np.sum(np.log(np.diag(self._L))))

    def log_density(self, X):
        X = _batch(X)
        Z = solve_triangular(self._L, (X - self.mean).T, lower=True)
        return -0.5 * np.sum(Z * Z, axis=0) - 0.5 * (self.dim * LOG_2PI + self._log_det)

    def score(self, X):
        X = _batch(X)
        return -cho_solve(self._cho, (X - self.mean).T).T

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self._L.T


@dataclass
class BayesTarget:
    """A prior plus a likelihood; the posterior-tempering path consumes this."""

    prior: TargetDensity

    @property
    def dim(self) -> int:
        return self.prior.dim

    def log_lik(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def score_lik(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_lik_and_score(self, X: np.ndarray):
        return self.log_lik(X), self.score_lik(X)


class LogisticRegression(BayesTarget):
    """Bayesian logistic regression with a standard normal weight prior.

    ``features`` must already contain the intercept column; ``labels`` are
    0/1.  The sampled variable is the weight vector.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        self.features = np.ascontiguousarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.float64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ConfigError("features must be (n, D) with one label per row")
        if not np.all(np.isin(self.labels, (0.0, 1.0))):
            raise ConfigError("labels must be binary 0/1")
        super().__init__(prior=StandardNormal(self.features.shape[1]))
        self.n_data = self.features.shape[0]

    def log_lik(self, X):
        Z = _batch(X) @ self.features.T                       # (m, n_data)
        return Z @ self.labels - np.sum(np.logaddexp(0.0, Z), axis=1)

    def score_lik(self, X):
        Z = _batch(X) @ self.features.T
        return (self.labels[None, :] - expit(Z)) @ self.features

    def log_lik_and_score(self, X):
        Z = _batch(X) @ self.features.T
        ll = Z @ self.labels - np.sum(np.logaddexp(0.0, Z), axis=1)
        sc = (self.labels[None, :] - expit(Z)) @ self.features
        return ll, sc


class LogGaussianCoxProcess(BayesTarget):
    """Log-Gaussian Cox point process on an M x M grid.

    Latent field x over grid cells, prior N(mean, K) with
    K(u, v) = s2 * exp(-|u - v|_2 / (M * beta)) on integer grid indices
    (equivalently normalized cell positions with length scale beta).
    Counts y enter through log L(x) = sum_i x_i y_i - a * exp(x_i),
    the cell-wise Poisson likelihood with intensity a * exp(x),
    a = 1/M^2.  Cells are ordered row-major: cell (i, j) -> index i*M + j.
    """

    S2 = 1.91
    BETA = 1.0 / 33.0
    MEAN = math.log(126.0) - S2

    def __init__(self, grid_size: int, counts: np.ndarray):
        m = int(grid_size)
        counts = np.asarray(counts, dtype=np.float64).ravel()
        if counts.shape != (m * m,):
            raise ConfigError(f"expected {m * m} counts for a {m}x{m} grid, "
                              f"got {counts.shape[0]}")
        if np.any(counts < 0) or not np.allclose(counts, np.round(counts)):
            raise ConfigError("counts must be non-negative integers")
        self.grid_size = m
        self.counts = counts
        self.alpha = 1.0 / (m * m)
        ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        pos = np.stack([ii.ravel(), jj.ravel()], axis=1).astype(np.float64)
        dist = np.sqrt(np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=2))
        K = self.S2 * np.exp(-dist / (m * self.BETA))
        super().__init__(prior=GaussianPrior(np.full(m * m, self.MEAN), K))

    def log_lik(self, X):
        X = _batch(X)
        with np.errstate(over="ignore"):
            ex = np.exp(X)
        return X @ self.counts - self.alpha * np.sum(ex, axis=1)

    def score_lik(self, X):
        X = _batch(X)
        with np.errstate(over="ignore"):
            ex = np.exp(X)
        return self.counts[None, :] - self.alpha * ex

    def log_lik_and_score(self, X):
        X = _batch(X)
        with np.errstate(over="ignore"):
            ex = np.exp(X)
        ll = X @ self.counts - self.alpha * np.sum(ex, axis=1)
        return ll, self.counts[None, :] - self.alpha * ex


# ---------------------------------------------------------------------------
# data generation and loading


def lgcp_synthetic_counts(grid_size: int, seed: int):
    """Draw a latent field from the LGCP prior and Poisson counts from it.

    Returns ``(counts, latent)``; the model is exactly well-specified for
    the returned counts.
    """
    m = int(grid_size)
    dummy = LogGaussianCoxProcess(m, np.zeros(m * m))
    rng = np.random.default_rng(seed)
    latent = dummy.prior.sample(1, rng)[0]
    counts = rng.poisson(dummy.alpha * np.exp(latent)).astype(np.int64)
    return counts, latent


def save_lgcp_json(path, grid_size: int, counts, seed: int | None = None) -> None:
    doc = {"grid": int(grid_size), "counts": [int(c) for c in np.ravel(counts)]}
    if seed is not None:
        doc["seed"] = int(seed)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_lgcp_json(path) -> LogGaussianCoxProcess:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read LGCP counts file {path}: {exc}") from exc
    if "grid" not in doc or "counts" not in doc:
        raise ConfigError(f"LGCP counts file {path} needs 'grid' and 'counts' keys")
    return LogGaussianCoxProcess(doc["grid"], np.asarray(doc["counts"]))


def make_logistic_data(n_rows: int, n_features: int, seed: int, scale: float = 1.5):
    """Synthetic binary-classification data with a known generating weight.

    Returns ``(features_raw, labels)``; features are standard normal and
    labels Bernoulli under a logistic model with N(0, scale^2) weights.
    """
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_rows, n_features))
    w = scale * rng.standard_normal(n_features)
    b = 0.5 * scale * rng.standard_normal()
    p = expit(U @ w + b)
    y = (rng.random(n_rows) < p).astype(np.int64)
    return U, y


def save_logistic_csv(path, features: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row, lab in zip(np.asarray(features), np.asarray(labels)):
            writer.writerow([f"{v:.10g}" for v in row] + [int(lab)])


def load_uci_csv(path) -> LogisticRegression:
    """Read a UCI-style classification CSV into a logistic-regression target.

    Rules: comma-separated, optional header row, label in the last column.
    Labels may be two distinct strings (mapped to 0/1 in sorted order) or
    already 0/1.  Features are standardized column-wise (constant columns
    become zeros) and an intercept column of ones is appended, so a file
    with F feature columns yields a posterior of dimension F + 1.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"dataset {path} is empty")

    def numeric(field: str) -> bool:
        try:
            float(field)
            return True
        except ValueError:
            return False

    start = 0
    if not all(numeric(f) for f in rows[0][:-1]):
        start = 1  # header
        if len(rows) == 1:
            raise ConfigError(f"dataset {path} has a header but no data rows")
    width = len(rows[start])
    feats, raw_labels = [], []
    for i, row in enumerate(rows[start:], start=start):
        if len(row) != width:
            raise ConfigError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        try:
            feats.append([float(v) for v in row[:-1]])
        except ValueError as exc:
            raise ConfigError(f"{path}: row {i} has a non-numeric feature: {exc}") from exc
        raw_labels.append(row[-1].strip())

    uniq = sorted(set(raw_labels))
    if len(uniq) != 2:
        raise ConfigError(f"{path}: need exactly two label values, got {uniq[:5]}")
    mapping = {uniq[0]: 0.0, uniq[1]: 1.0}
    y = np.array([mapping[l] for l in raw_labels])

    U = np.asarray(feats, dtype=np.float64)
    mu = U.mean(axis=0)
    sd = U.std(axis=0)
    sd[sd == 0.0] = 1.0
    U = (U - mu) / sd
    U = np.hstack([U, np.ones((U.shape[0], 1))])
    return LogisticRegression(U, y)
