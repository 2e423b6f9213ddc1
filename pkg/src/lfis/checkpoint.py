"""Flow checkpoints: one parameter file per time slice plus a manifest.

Layout of a checkpoint directory:

    step_0000.npz ... step_{T-1:04d}.npz   network parameters per slice
    partial.json                           progress while training
    manifest.json                          written once training finished

Parameters round-trip bit-exactly (float64 ``.npz``).  ``partial.json``
lets an interrupted training resume at the next slice; because every RNG
stream is keyed by slice index, a resumed run reproduces the
uninterrupted result exactly.  The manifest stores the target/schedule
description so ``load_flow`` can rebuild the annealing path without the
original script.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .nn import MlpVelocityField, NetParams

VERSION = 1

# Fields of TrainConfig that must match for a partial checkpoint to be
# resumed; a mismatch means the directory belongs to a different run.
_RESUME_KEYS = ("T", "seed", "n_pool", "batch", "max_epochs", "criterion",
                "lr", "patience", "lr_factor", "width", "reuse_pool",
                "weights_in_training", "scale_fallback_mean_by_dt",
                "progressive_pool")

# Keys added after the format was first frozen; checkpoints written before
# one existed behaved like its default, so compare against that.
_ADDED_KEY_DEFAULTS = {"progressive_pool": False}


def _step_file(directory: Path, k: int) -> Path:
    return directory / f"step_{k:04d}.npz"


def _write_json(path: Path, doc: dict) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def save_step(directory, k: int, params: NetParams, means_so_far,
              meta, train_config: dict | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savez(_step_file(directory, k),
             W1=params.W1, b1=params.b1, W2=params.W2, b2=params.b2,
             W3=params.W3, b3=params.b3,
             step=np.int64(k), dim=np.int64(params.dim),
             width=np.int64(params.width), activation=np.bytes_(b"tanh"))
    doc = {
        "version": VERSION,
        "completed": k + 1,
        "means": [float(m) for m in means_so_far],
        "meta": meta,
    }
    if train_config is not None:
        doc["train_config"] = train_config
    _write_json(directory / "partial.json", doc)


def load_step(directory, k: int) -> NetParams:
    f = _step_file(Path(directory), k)
    if not f.exists():
        raise CheckpointError(f"missing checkpoint file {f}")
    with np.load(f) as z:
        p = NetParams(z["W1"], z["b1"], z["W2"], z["b2"], z["W3"], z["b3"])
        if int(z["step"]) != k:
            raise CheckpointError(f"{f} records step {int(z['step'])}, expected {k}")
    return p


def load_partial(directory, train_config: dict | None = None):
    """Completed prefix of an interrupted training run, or None.

    Returns ``(fields, means, meta)``.  When ``train_config`` is given it
    is checked against the stored one; a mismatch raises rather than
    silently resuming someone else's run.
    """
    directory = Path(directory)
    pj = directory / "partial.json"
    if not pj.exists():
        return None
    try:
        with open(pj) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable partial checkpoint {pj}: {exc}") from exc
    stored_cfg = doc.get("train_config")
    if train_config is not None and stored_cfg is not None:
        for key in _RESUME_KEYS:
            default = _ADDED_KEY_DEFAULTS.get(key)
            stored_val = stored_cfg.get(key, default)
            current_val = train_config.get(key, default)
            if stored_val != current_val:
                raise CheckpointError(
                    f"checkpoint {directory} was trained with {key}="
                    f"{stored_val!r}, current config has {current_val!r}")
    n_done = int(doc.get("completed", 0))
    means = doc.get("means", [])
    meta = doc.get("meta", [])
    if len(means) < n_done or len(meta) < n_done:
        raise CheckpointError(f"partial checkpoint {directory} is inconsistent")
    fields = [MlpVelocityField(load_step(directory, k)) for k in range(n_done)]
    return fields, np.asarray(means[:n_done], dtype=np.float64), meta[:n_done]


def save_flow(directory, flow, target_config: dict | None,
              schedule_name: str) -> None:
    """Write the final manifest next to the per-slice parameter files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, f in enumerate(flow.fields):
        if not _step_file(directory, k).exists():
            save_step(directory, k, f.params, flow.stored_means[: k + 1],
                      flow.train_meta, flow.config)
    manifest = {
        "version": VERSION,
        "T": flow.T,
        "dim": flow.dim,
        "width": flow.fields[0].params.width if flow.fields else None,
        "schedule": schedule_name,
        "target": target_config,
        "stored_means": [float(m) for m in flow.stored_means],
        "train_meta": flow.train_meta,
        "train_config": flow.config,
    }
    _write_json(directory / "manifest.json", manifest)


def load_flow(directory, path=None):
    """Rebuild a FlowModel from a finished checkpoint directory.

    ``path`` (the annealing path object) is rebuilt from the manifest's
    target/schedule description when not supplied.
    """
    from .config import build_path  # deferred; config imports targets only
    from .flow import FlowModel

    directory = Path(directory)
    mf = directory / "manifest.json"
    if not mf.exists():
        raise CheckpointError(f"no manifest.json in {directory}")
    try:
        with open(mf) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable manifest {mf}: {exc}") from exc
    if manifest.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {manifest.get('version')}")
    T = int(manifest["T"])
    if path is None:
        if manifest.get("target") is None:
            raise CheckpointError(f"{mf} has no target description; pass the path explicitly")
        path = build_path(manifest["target"], manifest["schedule"])
    fields = [MlpVelocityField(load_step(directory, k)) for k in range(T)]
    for f in fields:
        if f.params.dim != int(manifest["dim"]):
            raise CheckpointError("checkpoint dimension mismatch")
    means = np.asarray(manifest["stored_means"], dtype=np.float64)
    if means.shape != (T,):
        raise CheckpointError("manifest stored_means length must equal T")
    return FlowModel(path=path, T=T, fields=fields, stored_means=means,
                     train_meta=manifest.get("train_meta", []),
                     config=manifest.get("train_config", {}))
