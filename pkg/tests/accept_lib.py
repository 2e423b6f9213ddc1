"""Shared fixtures for the acceptance tests.

The heavy artifacts (trained flows, long SMC baselines) are cached on
disk under .cache/ so the test run can resume interrupted work instead
of repeating hours of training.  This module is also runnable as a
script to pre-build those artifacts:

    python3 tests/accept_lib.py            # build everything, in order
    python3 tests/accept_lib.py mg-cosine  # build one artifact

Every artifact is keyed by a tag; seeds are fixed here so a rebuilt
artifact is bit-identical to a cached one.
"""

import json
import sys
from pathlib import Path

import numpy as np

from lfis import checkpoint as ckpt
from lfis import config as cfgmod
from lfis import flow as flowmod
from lfis import smc as smcmod
from lfis.metrics import RunReport
from lfis.targets import (lgcp_synthetic_counts, make_logistic_data,
                          save_lgcp_json, save_logistic_csv)

ROOT = Path(__file__).resolve().parent.parent
CACHE = ROOT / ".cache"

# Desk-scale deviations from the full-size recipe, applied uniformly:
# pool reuse is forced on for every flow (fresh-batch mode re-transports
# the whole prefix of the flow each epoch, which is days of work at
# D >= 10 on one core), and the posterior targets get smaller pools and
# epoch caps sized to finish in minutes rather than hours.

FLOW_SPECS = {
    "mg-cosine": dict(
        target={"name": "mixture", "dim": 2, "variance": 0.012},
        schedule="cosine", T=64, seed=101,
        train=dict(n_pool=50_000, batch=2000, max_epochs=2000, reuse_pool=True),
    ),
    "mg-linear": dict(
        target={"name": "mixture", "dim": 2, "variance": 0.012},
        schedule="linear", T=64, seed=102,
        train=dict(n_pool=50_000, batch=2000, max_epochs=2000, reuse_pool=True),
    ),
    "mg-quadratic": dict(
        target={"name": "mixture", "dim": 2, "variance": 0.012},
        schedule="quadratic", T=64, seed=103,
        train=dict(n_pool=50_000, batch=2000, max_epochs=2000, reuse_pool=True),
    ),
    "funnel64": dict(
        target={"name": "funnel", "dim": 10},
        schedule="cosine", T=64, seed=104,
        train=dict(n_pool=50_000, batch=2000, max_epochs=2000, reuse_pool=True),
    ),
    # the funnel's late slices need a much larger epoch budget and a
    # gentler learning-rate decay than the mixture to bring the residual
    # criterion down; this is the flow the funnel criteria evaluate
    "funnel64-deep": dict(
        target={"name": "funnel", "dim": 10},
        schedule="cosine", T=64, seed=104,
        train=dict(n_pool=50_000, batch=2000, max_epochs=8000, patience=400,
                   lr_factor=0.7, reuse_pool=True),
    ),
    "logistic": dict(
        target={"name": "logistic", "dataset": "DATA/logistic.csv"},
        schedule="cosine", T=64, seed=105,
        train=dict(n_pool=50_000, batch=2000, max_epochs=800, reuse_pool=True),
    ),
    # the T=64 logistic flow carries an Euler transport bias of ~+0.02
    # that dominates its gap to the T=1024 SMC gold standard; T=256
    # shrinks it below the agreement bound (first-order in 1/T)
    "logistic256": dict(
        target={"name": "logistic", "dataset": "DATA/logistic.csv"},
        schedule="cosine", T=256, seed=105,
        train=dict(n_pool=50_000, batch=2000, max_epochs=800, reuse_pool=True,
                   progressive_pool=True),
    ),
    "lgcp10": dict(
        target={"name": "lgcp", "dataset": "DATA/lgcp10.json"},
        schedule="cosine", T=64, seed=106,
        train=dict(n_pool=20_000, batch=2000, max_epochs=600, reuse_pool=True),
    ),
    # same story as the logistic target at a larger scale: T=64 leaves a
    # transport bias of ~+0.18 at D=100, so the gold-standard comparison
    # runs on a 4x finer grid; progressive pooling keeps that affordable
    "lgcp256": dict(
        target={"name": "lgcp", "dataset": "DATA/lgcp10.json"},
        schedule="cosine", T=256, seed=106,
        train=dict(n_pool=20_000, batch=2000, max_epochs=200, patience=150,
                   lr_factor=0.7, reuse_pool=True, progressive_pool=True),
    ),
}

SMC_SPECS = {
    "smc-funnel-t256": dict(
        target={"name": "funnel", "dim": 10}, schedule="cosine",
        T=256, n=2000, reps=30, seed=201, hmc=(0.02, 20, 10),
    ),
    "smc-mg-t64": dict(
        target={"name": "mixture", "dim": 2, "variance": 0.012,
                "mode_normalizer": "single-axis"},
        schedule="cosine", T=64, n=2000, reps=30, seed=202, hmc=(0.02, 20, 10),
    ),
    "smc-logistic-t1024": dict(
        target={"name": "logistic", "dataset": "DATA/logistic.csv"},
        schedule="cosine", T=1024, n=512, reps=8, seed=203, hmc=(0.02, 20, 10),
    ),
    "smc-lgcp-t1024": dict(
        target={"name": "lgcp", "dataset": "DATA/lgcp10.json"},
        schedule="cosine", T=1024, n=256, reps=6, seed=204, hmc=(0.2, 20, 2),
    ),
}

BUILD_ORDER = [
    "data", "mg-cosine", "funnel64-deep", "mg-linear", "mg-quadratic",
    "logistic256", "lgcp256", "smc-mg-t64", "smc-funnel-t256",
    "smc-logistic-t1024", "smc-lgcp-t1024",
]


def ensure_data() -> None:
    data_dir = CACHE / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    csv = data_dir / "logistic.csv"
    if not csv.exists():
        X, y = make_logistic_data(100, 10, seed=7)
        save_logistic_csv(csv, X, y)
    lg = data_dir / "lgcp10.json"
    if not lg.exists():
        counts, _ = lgcp_synthetic_counts(10, seed=7)
        save_lgcp_json(lg, 10, counts, seed=7)


def _resolve_target(tcfg: dict) -> dict:
    out = dict(tcfg)
    if isinstance(out.get("dataset"), str) and out["dataset"].startswith("DATA/"):
        out["dataset"] = str(CACHE / "data" / out["dataset"][len("DATA/"):])
    return out


def get_flow(tag: str, progress=None):
    """Load the cached flow for ``tag``, training (resumably) if absent."""
    spec = FLOW_SPECS[tag]
    ensure_data()
    target = _resolve_target(spec["target"])
    flow_dir = CACHE / "flows" / tag
    if (flow_dir / "manifest.json").exists():
        return ckpt.load_flow(flow_dir)
    path = cfgmod.build_path(target, spec["schedule"])
    tcfg = flowmod.TrainConfig(T=spec["T"], seed=spec["seed"], **spec["train"])
    fm = flowmod.train_flow(path, tcfg, checkpoint_dir=flow_dir / "checkpoints",
                            progress=progress)
    ckpt.save_flow(flow_dir, fm, target, spec["schedule"])
    return fm


def get_smc(tag: str, progress=None) -> list:
    """Cached SMC baseline reports for ``tag``, running missing reps."""
    spec = SMC_SPECS[tag]
    ensure_data()
    target = _resolve_target(spec["target"])
    out = CACHE / "smc"
    out.mkdir(parents=True, exist_ok=True)
    fp = out / f"{tag}.jsonl"
    reports = []
    if fp.exists():
        with open(fp) as fh:
            reports = [RunReport.from_json_line(line) for line in fh if line.strip()]
    if len(reports) >= spec["reps"]:
        return reports[: spec["reps"]]
    path = cfgmod.build_path(target, spec["schedule"])
    hmc = smcmod.HmcConfig(*spec["hmc"])
    seeds = np.random.SeedSequence(spec["seed"]).spawn(spec["reps"])
    for rep in range(len(reports), spec["reps"]):
        rng = np.random.default_rng(seeds[rep])
        res = smcmod.run_smc(path, spec["T"], spec["n"], rng, hmc=hmc)
        rep_doc = RunReport(
            method="smc", target=cfgmod.target_tag(target), T=spec["T"],
            n=spec["n"], seed=spec["seed"] + rep, log_z_hat=res.log_z,
            log_z_path=None, ess=res.ess_final, sliced_w2=None,
            seconds=res.seconds,
            config={"hmc": list(spec["hmc"]), "schedule": spec["schedule"]},
        )
        reports.append(rep_doc)
        with open(fp, "a") as fh:
            fh.write(rep_doc.to_json_line() + "\n")
        if progress is not None:
            progress(tag, rep, res.log_z)
    return reports


def lfis_reps(fm, n: int, reps: int, seed: int, weights: bool = True) -> list:
    """Repeated sampling runs from a trained flow."""
    out = []
    seeds = np.random.SeedSequence(seed).spawn(reps)
    for rep in range(reps):
        rng = np.random.default_rng(seeds[rep])
        out.append(flowmod.sample(fm, n, rng, weights_in_sampling=weights))
    return out


def build(tag: str) -> None:
    if tag == "data":
        ensure_data()
        print("data ready", flush=True)
        return
    if tag in FLOW_SPECS:
        def prog(meta):
            print(f"[{tag}] step {meta['step'] + 1}/{FLOW_SPECS[tag]['T']} "
                  f"epochs={meta['epochs']} converged={meta['converged']} "
                  f"({meta['seconds']:.1f}s)", flush=True)
        get_flow(tag, progress=prog)
        print(f"[{tag}] flow ready", flush=True)
        return
    if tag in SMC_SPECS:
        def prog(t, rep, lz):
            print(f"[{t}] rep {rep + 1}/{SMC_SPECS[t]['reps']} log_z={lz:+.4f}",
                  flush=True)
        get_smc(tag, progress=prog)
        print(f"[{tag}] baseline ready", flush=True)
        return
    raise SystemExit(f"unknown tag {tag!r}")


if __name__ == "__main__":
    jobs = sys.argv[1:] or BUILD_ORDER
    for job in jobs:
        build(job)
