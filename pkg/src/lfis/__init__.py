"""Liouville-flow importance sampling.

Trains a small velocity network for every step of a discretized annealing
path so that transporting particles along the learned flow tracks the
prescribed density evolution.  Accumulated local errors become importance
weights, giving consistent normalizing-constant estimates together with
the samples themselves.
"""

from .annealing import (CosineSchedule, GeometricPath, LinearSchedule,
                        PosteriorPath, QuadraticSchedule, get_schedule)
from .errors import CheckpointError, ConfigError, LfisError, NumericsError
from .flow import (FlowModel, SampleResult, TrainConfig, generate_samples,
                   log_z_hat, log_z_path, sample, train_flow)
from .metrics import RunReport, ess, sliced_w2
from .nn import MlpVelocityField, NetParams, init_params, set_num_threads
from .smc import HmcConfig, SmcResult, run_smc
from .targets import (BayesTarget, Funnel, GaussianMixture, GaussianPrior,
                      IsotropicGaussian, LogGaussianCoxProcess,
                      LogisticRegression, ScaledTarget, StandardNormal)

__version__ = "0.1.0"

__all__ = [
    "BayesTarget", "CheckpointError", "ConfigError", "CosineSchedule",
    "ess", "FlowModel", "Funnel", "GaussianMixture", "GaussianPrior",
    "generate_samples", "GeometricPath", "get_schedule", "HmcConfig",
    "init_params", "IsotropicGaussian", "LfisError", "LinearSchedule",
    "log_z_hat", "log_z_path", "LogGaussianCoxProcess", "LogisticRegression",
    "MlpVelocityField", "NetParams", "NumericsError", "PosteriorPath",
    "QuadraticSchedule", "RunReport", "run_smc", "sample", "SampleResult",
    "ScaledTarget", "set_num_threads", "sliced_w2", "SmcResult",
    "StandardNormal", "TrainConfig", "train_flow",
]
