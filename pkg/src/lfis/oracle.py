"""Closed forms for the Gaussian-to-Gaussian geometric path.

With reference N(0, I) and unnormalized target exp(-|x|^2 / (2 s^2)),
every time slice of the geometric path is a centered isotropic Gaussian
with precision

    lam(t) = 1 - tau(t) * b,      b = 1 - 1/s^2,

and the velocity field that transports the path exactly is linear,

    v*(x, t) = a(t) x,            a(t) = tau'(t) * b / (2 lam(t)).

The consistency residual of this field vanishes identically in x, which
makes the pair (path, field) an oracle for every estimator in the
package.  The running normalizer is also explicit:

    log Z(t) = (D/2) * (tau(t) * log(2 pi) - log lam(t)),

equal to D * log(s * sqrt(2 pi)) at t = 1.
"""

from __future__ import annotations

import math

from .annealing import GeometricPath, Schedule
from .nn import LinearVelocityField
from .targets import IsotropicGaussian, StandardNormal


def gaussian_path(dim: int, s: float, schedule: Schedule) -> GeometricPath:
    return GeometricPath(StandardNormal(dim), IsotropicGaussian(dim, s), schedule)


def precision(schedule: Schedule, t: float, s: float) -> float:
    b = 1.0 - 1.0 / (s * s)
    return 1.0 - schedule.tau(t) * b


def velocity_coef(schedule: Schedule, t: float, s: float) -> float:
    b = 1.0 - 1.0 / (s * s)
    return schedule.dtau(t) * b / (2.0 * precision(schedule, t, s))


def mean_dt_log(schedule: Schedule, t: float, s: float, dim: int) -> float:
    """E over the path slice of d/dt log rho~*(x, t)."""
    a = velocity_coef(schedule, t, s)
    return dim * (a + 0.5 * schedule.dtau(t) * math.log(2.0 * math.pi))


def log_z(schedule: Schedule, t: float, s: float, dim: int) -> float:
    lam = precision(schedule, t, s)
    return 0.5 * dim * (schedule.tau(t) * math.log(2.0 * math.pi) - math.log(lam))


def oracle_fields(schedule: Schedule, T: int, s: float, dim: int):
    """The exact velocity field at each grid time l/T, as field objects."""
    return [LinearVelocityField(velocity_coef(schedule, l / T, s), dim)
            for l in range(T)]
