"""Run configuration: JSON schema, target construction, validation.

A run config is a JSON object; CLI flags override file values and the
fully resolved config is echoed next to every run's outputs.  The
``target`` section picks the density and, for geometric paths, a standard
normal reference is implied:

    {"name": "mixture", "dim": 2, "variance": 0.012, ...}
    {"name": "funnel", "dim": 10}
    {"name": "gaussian", "dim": 1, "s": 2.0}          (oracle pair)
    {"name": "logistic", "dataset": "ionosphere.csv"}
    {"name": "lgcp", "dataset": "counts.json"}

``seed`` is mandatory; when absent the LFIS_SEED environment variable is
consulted before failing.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .annealing import GeometricPath, PosteriorPath, get_schedule
from .errors import ConfigError
from .flow import TrainConfig
from .smc import HmcConfig
from .targets import (Funnel, GaussianMixture, IsotropicGaussian, ScaledTarget,
                      StandardNormal, load_lgcp_json, load_uci_csv)

GEOMETRIC_TARGETS = ("mixture", "funnel", "gaussian")
POSTERIOR_TARGETS = ("logistic", "lgcp")


def build_target(tcfg: dict):
    """Target object from its config section (geometric targets only)."""
    name = tcfg.get("name")
    if name == "mixture":
        mix = GaussianMixture.grid(
            dim=int(tcfg.get("dim", 2)),
            points=tcfg.get("points", (-1.0, 0.0, 1.0)),
            variance=float(tcfg.get("variance", 0.012)),
            weights=tcfg.get("weights"),
            mode_normalizer=tcfg.get("mode_normalizer", "full"),
        )
        ls = float(tcfg.get("log_scale", 0.0))
        return ScaledTarget(mix, ls) if ls != 0.0 else mix
    if name == "funnel":
        return Funnel(dim=int(tcfg.get("dim", 10)),
                      x0_var=float(tcfg.get("x0_var", 9.0)))
    if name == "gaussian":
        base = IsotropicGaussian(int(tcfg.get("dim", 1)), float(tcfg.get("s", 2.0)))
        ls = float(tcfg.get("log_scale", 0.0))
        return ScaledTarget(base, ls) if ls != 0.0 else base
    raise ConfigError(f"unknown geometric target {name!r}")


def build_bayes(tcfg: dict):
    name = tcfg.get("name")
    ds = tcfg.get("dataset")
    if ds is None:
        raise ConfigError(f"target {name!r} needs a 'dataset' file")
    if not Path(ds).exists():
        raise ConfigError(f"dataset file not found: {ds}")
    if name == "logistic":
        return load_uci_csv(ds)
    if name == "lgcp":
        return load_lgcp_json(ds)
    raise ConfigError(f"unknown posterior target {name!r}")


def build_path(tcfg: dict, schedule_name: str):
    """Annealing path (with implied reference/prior) from a target config."""
    sched = get_schedule(schedule_name)
    name = tcfg.get("name")
    if name in GEOMETRIC_TARGETS:
        target = build_target(tcfg)
        return GeometricPath(StandardNormal(target.dim), target, sched)
    if name in POSTERIOR_TARGETS:
        return PosteriorPath(build_bayes(tcfg), sched)
    raise ConfigError(f"target.name must be one of "
                      f"{GEOMETRIC_TARGETS + POSTERIOR_TARGETS}, got {name!r}")


def target_tag(tcfg: dict) -> str:
    name = tcfg.get("name", "?")
    if name == "mixture":
        return f"mixture-d{tcfg.get('dim', 2)}"
    if name == "funnel":
        return f"funnel-d{tcfg.get('dim', 10)}"
    if name == "gaussian":
        return f"gaussian-d{tcfg.get('dim', 1)}-s{tcfg.get('s', 2.0)}"
    if name in POSTERIOR_TARGETS:
        stem = Path(tcfg.get("dataset", "?")).stem
        return f"{name}-{stem}"
    return str(name)


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def resolve_seed(cfg: dict) -> int:
    seed = cfg.get("seed")
    if seed is None:
        env = os.environ.get("LFIS_SEED")
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise ConfigError(f"LFIS_SEED must be an integer, got {env!r}") from None
    if seed is None:
        raise ConfigError("no seed: set 'seed' in the config or LFIS_SEED")
    return int(seed)


def resolve_run_config(cfg: dict) -> dict:
    """Fill defaults, validate, and return the fully resolved config."""
    out = dict(cfg)
    out["seed"] = resolve_seed(cfg)
    if "target" not in out or not isinstance(out["target"], dict):
        raise ConfigError("config needs a 'target' object")
    out["schedule"] = out.get("schedule", "cosine")
    get_schedule(out["schedule"])  # validates the name
    T = out.get("T", 64)
    if not isinstance(T, int) or T < 1:
        raise ConfigError(f"T must be a positive integer, got {T!r}")
    out["T"] = T
    train = dict(out.get("train", {}))
    sample = dict(out.get("sample", {}))
    smc = dict(out.get("smc", {}))
    train.setdefault("n_pool", 50_000)
    train.setdefault("max_epochs", 2000)
    train.setdefault("criterion", 1e-3)
    train.setdefault("lr", 5e-3)
    train.setdefault("patience", 200)
    train.setdefault("lr_factor", 0.5)
    train.setdefault("width", 64)
    train.setdefault("batch", None)
    train.setdefault("reuse_pool", None)
    train.setdefault("weights_in_training", True)
    train.setdefault("scale_fallback_mean_by_dt", False)
    train.setdefault("progressive_pool", False)
    sample.setdefault("n", 2000)
    sample.setdefault("reps", 30)
    sample.setdefault("weights", True)
    smc.setdefault("particles", 2000)
    smc.setdefault("step_size", 0.02)
    smc.setdefault("n_leapfrog", 20)
    smc.setdefault("n_kernels", 10)
    smc.setdefault("ess_threshold", 0.98)
    out["train"], out["sample"], out["smc"] = train, sample, smc
    return out


def train_config_from(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        T=cfg["T"], seed=cfg["seed"], n_pool=int(t["n_pool"]),
        batch=None if t["batch"] is None else int(t["batch"]),
        max_epochs=int(t["max_epochs"]), criterion=float(t["criterion"]),
        lr=float(t["lr"]), patience=int(t["patience"]),
        lr_factor=float(t["lr_factor"]), width=int(t["width"]),
        reuse_pool=t["reuse_pool"],
        weights_in_training=bool(t["weights_in_training"]),
        scale_fallback_mean_by_dt=bool(t["scale_fallback_mean_by_dt"]),
        progressive_pool=bool(t["progressive_pool"]),
    )


def hmc_config_from(cfg: dict) -> HmcConfig:
    s = cfg["smc"]
    return HmcConfig(step_size=float(s["step_size"]),
                     n_leapfrog=int(s["n_leapfrog"]),
                     n_kernels=int(s["n_kernels"])).validate()
