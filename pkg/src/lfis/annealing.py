"""Annealing schedules and the two interpolating density families.

A path rho~*(x, t) connects a tractable start at t=0 to the target at
t=1, controlled by a schedule tau(t):

* geometric   : log rho~* = (1 - tau) log mu + tau log nu~
                (reference measure mu, unnormalized target nu~)
* posterior   : log rho~* = log pi + tau log L
                (prior pi tempered into the posterior by the likelihood)

Every evaluation returns the three quantities the samplers consume at a
time slice: the log-density itself, its x-gradient (the annealed score),
and the partial time derivative d/dt log rho~*(x, t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericsError


class Schedule:
    """tau: [0,1] -> [0,1], monotone, with tau(0)=0 and tau(1)=1."""

    name: str = "base"

    def tau(self, t: float) -> float:
        raise NotImplementedError

    def dtau(self, t: float) -> float:
        raise NotImplementedError

    @staticmethod
    def _check(t: float) -> float:
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"schedule time must lie in [0, 1], got {t}")
        return t


class LinearSchedule(Schedule):
    name = "linear"

    def tau(self, t):
        return self._check(t)

    def dtau(self, t):
        self._check(t)
        return 1.0


class QuadraticSchedule(Schedule):
    name = "quadratic"

    def tau(self, t):
        t = self._check(t)
        return t * t

    def dtau(self, t):
        return 2.0 * self._check(t)


class CosineSchedule(Schedule):
    """tau(t) = (1 - cos(pi t)) / 2; flat at both endpoints."""

    name = "cosine"

    def tau(self, t):
        t = self._check(t)
        return 0.5 * (1.0 - math.cos(math.pi * t))

    def dtau(self, t):
        t = self._check(t)
        return 0.5 * math.pi * math.sin(math.pi * t)


_SCHEDULES = {c.name: c for c in (LinearSchedule, QuadraticSchedule, CosineSchedule)}


def get_schedule(name: str) -> Schedule:
    try:
        return _SCHEDULES[name]()
    except KeyError:
        raise ValueError(
            f"unknown schedule {name!r}; choose from {sorted(_SCHEDULES)}"
        ) from None


class PathEval(NamedTuple):
    log_density: np.ndarray  # (n,)
    score: np.ndarray        # (n, D)
    dt_log: np.ndarray       # (n,)


def _finite(arr: np.ndarray, what: str, check: bool) -> np.ndarray:
    if check and not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite {what} in path evaluation")
    return arr


@dataclass
class GeometricPath:
    """(1 - tau)-weighted reference against a tau-weighted target."""

    reference: "object"  # TargetDensity
    target: "object"     # TargetDensity, possibly unnormalized
    schedule: Schedule

    @property
    def dim(self) -> int:
        return self.target.dim

    def initial_sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.reference.sample(n, rng)

    def log_ratio(self, X: np.ndarray) -> np.ndarray:
        """log nu~(x) - log mu(x); the incremental-weight kernel for SMC."""
        return self.target.log_density(X) - self.reference.log_density(X)

    def eval(self, X: np.ndarray, t: float, check: bool = True) -> PathEval:
        tau = self.schedule.tau(t)
        dtau = self.schedule.dtau(t)
        lmu, smu = self.reference.log_density_and_score(X)
        lnu, snu = self.target.log_density_and_score(X)
        _finite(lmu, "reference log-density", check)
        _finite(lnu, "target log-density", check)
        _finite(smu, "reference score", check)
        _finite(snu, "target score", check)
        log_density = (1.0 - tau) * lmu + tau * lnu
        score = (1.0 - tau) * smu + tau * snu
        dt_log = dtau * (lnu - lmu)
        return PathEval(log_density, score, dt_log)


@dataclass
class PosteriorPath:
    """Prior tempered into the posterior: log rho~* = log pi + tau log L."""

    bayes: "object"  # BayesTarget: prior + likelihood
    schedule: Schedule

    @property
    def dim(self) -> int:
        return self.bayes.prior.dim

    def initial_sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.bayes.prior.sample(n, rng)

    def log_ratio(self, X: np.ndarray) -> np.ndarray:
        """log L(x); the incremental-weight kernel for SMC."""
        return self.bayes.log_lik(X)

    def eval(self, X: np.ndarray, t: float, check: bool = True) -> PathEval:
        tau = self.schedule.tau(t)
        dtau = self.schedule.dtau(t)
        lpi, spi = self.bayes.prior.log_density_and_score(X)
        llik, slik = self.bayes.log_lik_and_score(X)
        _finite(lpi, "prior log-density", check)
        _finite(llik, "log-likelihood", check)
        _finite(spi, "prior score", check)
        _finite(slik, "likelihood score", check)
        log_density = lpi + tau * llik
        score = spi + tau * slik
        dt_log = dtau * llik
        return PathEval(log_density, score, dt_log)
