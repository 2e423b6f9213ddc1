"""Sample-quality metrics and run reporting.

* ``ess``        -- normalized effective sample size in (0, 1]
* ``sliced_w2``  -- sliced 2-Wasserstein distance: the average over random
                    unit directions of the 1-D W2 between the projected
                    samples.  Weighted inputs are systematically resampled
                    to uniform first.
* ``RunReport``  -- one sampling run as a JSON line; ``aggregate`` folds a
                    set of reports into mean +/- std tables (markdown and
                    CSV).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .smc import systematic_resample


def ess(weights: np.ndarray) -> float:
    """1 / (N sum w_i^2) for normalized weights; 1.0 means uniform."""
    w = np.asarray(weights, dtype=np.float64)
    s = w.sum()
    if not np.isfinite(s) or s <= 0 or np.any(w < 0):
        raise ConfigError("weights must be non-negative, finite, and not all zero")
    w = w / s
    return float(1.0 / (w.shape[0] * np.sum(w * w)))


def _to_uniform(x: np.ndarray, w: np.ndarray | None,
                rng: np.random.Generator) -> np.ndarray:
    if w is None:
        return x
    w = np.asarray(w, dtype=np.float64)
    w = w / w.sum()
    return x[systematic_resample(w, rng)]


def sliced_w2(xa: np.ndarray, xb: np.ndarray, *, wa=None, wb=None,
              n_projections: int = 128, rng: np.random.Generator | None = None) -> float:
    """Mean over random directions of the 1-D W2 between projections.

    Directions are normalized standard-normal draws.  With equal sample
    counts the per-direction W2 pairs sorted projections; otherwise both
    empirical quantile functions are read at the midpoint grid of the
    larger count.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    xa = np.atleast_2d(np.asarray(xa, dtype=np.float64))
    xb = np.atleast_2d(np.asarray(xb, dtype=np.float64))
    if xa.shape[1] != xb.shape[1]:
        raise ConfigError("sample sets must share a dimension")
    xa = _to_uniform(xa, wa, rng)
    xb = _to_uniform(xb, wb, rng)

    d = xa.shape[1]
    dirs = rng.standard_normal((n_projections, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = xa @ dirs.T    # (na, P)
    pb = xb @ dirs.T
    pa.sort(axis=0)
    pb.sort(axis=0)
    na, nb = pa.shape[0], pb.shape[0]
    if na != nb:
        m = max(na, nb)
        grid = (np.arange(m) + 0.5) / m
        pa = np.quantile(pa, grid, axis=0)
        pb = np.quantile(pb, grid, axis=0)
    return float(np.mean(np.sqrt(np.mean((pa - pb) ** 2, axis=0))))


@dataclass
class RunReport:
    """One sampling run, serializable as a JSON line."""

    method: str              # "lfis" | "smc"
    target: str
    T: int
    n: int
    seed: int
    log_z_hat: float
    log_z_path: float | None = None
    ess: float | None = None
    sliced_w2: float | None = None
    seconds: float | None = None
    config: dict | None = None

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "RunReport":
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad report line: {exc}") from exc
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in doc.items() if k in known})


def write_reports(path, reports) -> None:
    with open(path, "a") as fh:
        for r in reports:
            fh.write(r.to_json_line() + "\n")


def read_reports(path) -> list[RunReport]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(RunReport.from_json_line(line))
    return out


_AGG_FIELDS = ("log_z_hat", "log_z_path", "ess", "sliced_w2")


def aggregate(reports) -> list[dict]:
    """Group by (method, target, T) and report mean +/- sample std.

    Values are sample statistics over the runs in each group; std uses
    ddof=1 and is NaN for singleton groups.
    """
    groups: dict[tuple, list[RunReport]] = {}
    for r in reports:
        groups.setdefault((r.method, r.target, r.T), []).append(r)
    rows = []
    for (method, target, T), rs in sorted(groups.items()):
        row = {"method": method, "target": target, "T": T, "runs": len(rs)}
        for f in _AGG_FIELDS:
            vals = np.array([getattr(r, f) for r in rs
                             if getattr(r, f) is not None], dtype=np.float64)
            if vals.size == 0:
                row[f"{f}_mean"] = None
                row[f"{f}_std"] = None
            else:
                row[f"{f}_mean"] = float(vals.mean())
                row[f"{f}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else float("nan")
        rows.append(row)
    return rows


def table_markdown(rows) -> str:
    heads = ["method", "target", "T", "runs"]
    for f in _AGG_FIELDS:
        heads.append(f)
    lines = ["| " + " | ".join(heads) + " |",
             "|" + "|".join("---" for _ in heads) + "|"]
    for row in rows:
        cells = [str(row["method"]), str(row["target"]), str(row["T"]), str(row["runs"])]
        for f in _AGG_FIELDS:
            m, s = row.get(f"{f}_mean"), row.get(f"{f}_std")
            cells.append("-" if m is None else f"{m:.4f} ± {s:.4f}"
                         if s is not None and np.isfinite(s) else f"{m:.4f}")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def table_csv(rows) -> str:
    cols = ["method", "target", "T", "runs"]
    for f in _AGG_FIELDS:
        cols += [f"{f}_mean", f"{f}_std"]
    lines = [",".join(cols)]
    for row in rows:
        vals = []
        for c in cols:
            v = row.get(c)
            vals.append("" if v is None else str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"
