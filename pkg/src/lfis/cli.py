"""Command-line interface.

Subcommands:

    train     fit the per-step velocity fields for a target and save them
    sample    transport particles through a saved flow, estimate log Z
    smc       annealed SMC baseline with HMC mutation kernels
    compare   aggregate report files into a summary table
    gen-data  synthetic datasets and ground-truth sample files

Every run writes its fully resolved configuration next to its outputs so
results can be reproduced from the artifacts alone.  Exit codes: 0 on
success, 2 for configuration errors, 3 for numerical failures, 4 for
checkpoint or file-system problems.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import config as cfgmod
from . import flow as flowmod
from . import nn, smc
from .errors import CheckpointError, ConfigError, NumericsError
from .metrics import (RunReport, aggregate, read_reports, sliced_w2,
                      table_csv, table_markdown, write_reports)
from .targets import (lgcp_synthetic_counts, make_logistic_data,
                      save_lgcp_json, save_logistic_csv)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--schedule", choices=("linear", "quadratic", "cosine"),
                   help="override the annealing schedule")
    p.add_argument("-T", "--steps", type=int, dest="T",
                   help="override the number of time steps")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for batched network evaluation")


def _load_run_config(args) -> dict:
    cfg = cfgmod.load_config_file(args.config) if args.config else {}
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "schedule", None):
        cfg["schedule"] = args.schedule
    if getattr(args, "T", None):
        cfg["T"] = args.T
    if getattr(args, "target", None):
        try:
            cfg["target"] = json.loads(args.target)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--target is not valid JSON: {exc}") from exc
    return cfgmod.resolve_run_config(cfg)


def _echo_config(cfg: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    out_dir = Path(args.out)
    _echo_config(cfg, out_dir)
    path = cfgmod.build_path(cfg["target"], cfg["schedule"])
    tcfg = cfgmod.train_config_from(cfg)

    def progress(meta: dict) -> None:
        print(f"step {meta['step']:4d}/{tcfg.T}  t={meta['t']:.4f}  "
              f"epochs={meta['epochs']:4d}  criterion={meta['criterion']:.3e}  "
              f"converged={meta['converged']}  {meta['seconds']:.1f}s",
              flush=True)

    ck_dir = out_dir / "checkpoints" if not args.no_checkpoint else None
    t0 = time.perf_counter()
    flow = flowmod.train_flow(path, tcfg, checkpoint_dir=ck_dir,
                              progress=progress if not args.quiet else None)
    elapsed = time.perf_counter() - t0
    ckpt.save_flow(out_dir / "flow", flow, cfg["target"], cfg["schedule"])
    print(f"trained {tcfg.T} steps in {elapsed:.1f}s -> {out_dir / 'flow'}")
    return 0


def cmd_sample(args) -> int:
    flow_dir = Path(args.flow)
    flow = ckpt.load_flow(flow_dir)
    with open(flow_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    tag = cfgmod.target_tag(manifest["target"])
    seed = args.seed
    if seed is None:
        seed = cfgmod.resolve_seed({})
    truth = None
    if args.truth:
        with np.load(args.truth) as doc:
            truth = np.asarray(doc["samples"], dtype=np.float64)
    nn.set_num_threads(args.threads)

    reports = []
    child_seeds = np.random.SeedSequence(seed).spawn(args.reps)
    for rep in range(args.reps):
        rng = np.random.default_rng(child_seeds[rep])
        t0 = time.perf_counter()
        res = flowmod.sample(flow, args.n, rng,
                             weights_in_sampling=not args.no_weights)
        elapsed = time.perf_counter() - t0
        sw2 = None
        if truth is not None:
            sw2 = sliced_w2(res.x, truth, wa=res.weights,
                            rng=np.random.default_rng(child_seeds[rep].spawn(1)[0]))
        reports.append(RunReport(
            method="lfis" if not args.no_weights else "lfis-unweighted",
            target=tag, T=flow.T, n=args.n, seed=seed + rep,
            log_z_hat=res.log_z_hat, log_z_path=res.log_z_path,
            ess=res.ess, sliced_w2=sw2, seconds=elapsed,
            config={"flow": str(flow_dir), "schedule": manifest["schedule"]},
        ))
        if not args.quiet:
            print(f"rep {rep + 1:3d}/{args.reps}  log_z={res.log_z_hat:+.4f}  "
                  f"path={res.log_z_path:+.4f}  ess={res.ess:.3f}", flush=True)
        if args.save_samples and rep == 0:
            np.savez(args.save_samples, samples=res.x, weights=res.weights)

    if args.out:
        write_reports(args.out, reports)
    lz = np.array([r.log_z_hat for r in reports])
    print(f"log_z_hat mean={lz.mean():+.4f} std={lz.std(ddof=1) if len(lz) > 1 else 0.0:.4f} "
          f"over {args.reps} reps")
    return 0


def cmd_smc(args) -> int:
    cfg = _load_run_config(args)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir is not None:
        _echo_config(cfg, out_dir)
    path = cfgmod.build_path(cfg["target"], cfg["schedule"])
    hmc = cfgmod.hmc_config_from(cfg)
    tag = cfgmod.target_tag(cfg["target"])
    n = args.n if args.n is not None else cfg["smc"]["particles"]
    reps = args.reps

    reports = []
    child_seeds = np.random.SeedSequence(cfg["seed"]).spawn(reps)
    for rep in range(reps):
        rng = np.random.default_rng(child_seeds[rep])
        t0 = time.perf_counter()
        res = smc.run_smc(path, cfg["T"], n, rng, hmc=hmc,
                          ess_threshold=cfg["smc"]["ess_threshold"])
        elapsed = time.perf_counter() - t0
        reports.append(RunReport(
            method="smc", target=tag, T=cfg["T"], n=n,
            seed=cfg["seed"] + rep, log_z_hat=res.log_z, log_z_path=None,
            ess=res.ess_final, sliced_w2=None, seconds=elapsed,
            config={"hmc": {"step_size": hmc.step_size,
                            "n_leapfrog": hmc.n_leapfrog,
                            "n_kernels": hmc.n_kernels},
                    "schedule": cfg["schedule"]},
        ))
        if not args.quiet:
            print(f"rep {rep + 1:3d}/{reps}  log_z={res.log_z:+.4f}  "
                  f"resamples={res.n_resamples}  "
                  f"accept={np.mean(res.accept_trace):.3f}", flush=True)
        if args.save_samples and rep == 0:
            np.savez(args.save_samples, samples=res.x, weights=res.weights)

    if args.out:
        write_reports(args.out, reports)
    lz = np.array([r.log_z_hat for r in reports])
    print(f"log_z mean={lz.mean():+.4f} std={lz.std(ddof=1) if len(lz) > 1 else 0.0:.4f} "
          f"over {reps} reps")
    return 0


def cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        reports.extend(read_reports(path))
    if not reports:
        raise ConfigError("no reports found in the given files")
    rows = aggregate(reports)
    text = table_csv(rows) if args.format == "csv" else table_markdown(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_gen_data(args) -> int:
    if args.seed is None and args.kind != "truth":
        args.seed = 0
    if args.kind == "lgcp":
        counts, latent = lgcp_synthetic_counts(args.grid, args.seed)
        save_lgcp_json(args.out, args.grid, counts, args.seed)
        if args.save_latent:
            np.savez(args.save_latent, latent=latent)
        print(f"wrote {args.grid}x{args.grid} grid counts "
              f"(total {int(counts.sum())}) to {args.out}")
        return 0
    if args.kind == "logistic":
        X, y = make_logistic_data(args.n, args.features, args.seed)
        save_logistic_csv(args.out, X, y)
        print(f"wrote {args.n} rows x {args.features} features to {args.out}")
        return 0
    if args.kind == "truth":
        cfg = _load_run_config(args)
        path = cfgmod.build_path(cfg["target"], cfg["schedule"])
        target = getattr(path, "target", None)
        if target is None:
            raise ConfigError("ground-truth sampling is only available for "
                              "targets with exact samplers")
        rng = np.random.default_rng(cfg["seed"])
        try:
            samples = target.sample(args.n, rng)
        except NotImplementedError as exc:
            raise ConfigError(str(exc)) from exc
        np.savez(args.out, samples=samples)
        print(f"wrote {args.n} ground-truth samples to {args.out}")
        return 0
    raise ConfigError(f"unknown data kind {args.kind!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lfis",
        description="Liouville-flow importance sampling: train neural "
                    "velocity fields along an annealing path, transport "
                    "particles, and estimate normalizing constants.")
    sub = p.add_subparsers(dest="command", required=True)

    pt = sub.add_parser("train", help="train velocity fields")
    _add_common(pt)
    pt.add_argument("--target", help="inline JSON target config")
    pt.add_argument("--out", required=True, help="output directory")
    pt.add_argument("--no-checkpoint", action="store_true",
                    help="skip per-step checkpoints")
    pt.add_argument("--quiet", action="store_true")
    pt.set_defaults(func=cmd_train)

    ps = sub.add_parser("sample", help="sample from a trained flow")
    ps.add_argument("--flow", required=True, help="saved flow directory")
    ps.add_argument("--n", type=int, default=2000, help="particles per rep")
    ps.add_argument("--reps", type=int, default=1)
    ps.add_argument("--seed", type=int, help="base seed (else LFIS_SEED)")
    ps.add_argument("--no-weights", action="store_true",
                    help="report unweighted estimates")
    ps.add_argument("--truth", help=".npz with ground-truth 'samples' for "
                                    "sliced Wasserstein-2 evaluation")
    ps.add_argument("--out", help="append JSON-line reports here")
    ps.add_argument("--save-samples", help="save first rep's particles (.npz)")
    ps.add_argument("--threads", type=int, default=1)
    ps.add_argument("--quiet", action="store_true")
    ps.set_defaults(func=cmd_sample)

    pm = sub.add_parser("smc", help="annealed SMC baseline")
    _add_common(pm)
    pm.add_argument("--target", help="inline JSON target config")
    pm.add_argument("--n", type=int, help="particles (else config)")
    pm.add_argument("--reps", type=int, default=1)
    pm.add_argument("--out", help="append JSON-line reports here")
    pm.add_argument("--out-dir", help="directory for the resolved config echo")
    pm.add_argument("--save-samples", help="save first rep's particles (.npz)")
    pm.add_argument("--quiet", action="store_true")
    pm.set_defaults(func=cmd_smc)

    pc = sub.add_parser("compare", help="aggregate report files")
    pc.add_argument("reports", nargs="+", help="JSON-line report files")
    pc.add_argument("--format", choices=("md", "csv"), default="md")
    pc.add_argument("--out", help="write the table here as well")
    pc.set_defaults(func=cmd_compare)

    pg = sub.add_parser("gen-data", help="synthetic datasets")
    pg.add_argument("kind", choices=("lgcp", "logistic", "truth"))
    pg.add_argument("--out", required=True)
    pg.add_argument("--seed", type=int, help="generator seed (default 0; "
                                             "truth falls back to the config)")
    pg.add_argument("--grid", type=int, default=10, help="lgcp grid side")
    pg.add_argument("--save-latent", help="lgcp: save the generating field")
    pg.add_argument("--n", type=int, default=100,
                    help="logistic rows / truth samples")
    pg.add_argument("--features", type=int, default=10,
                    help="logistic feature count (before intercept)")
    pg.add_argument("--config", help="truth: run config for the target")
    pg.add_argument("--target", help="truth: inline JSON target config")
    pg.add_argument("--schedule", help=argparse.SUPPRESS)
    pg.add_argument("-T", type=int, dest="T", help=argparse.SUPPRESS)
    pg.set_defaults(func=cmd_gen_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        nn.set_num_threads(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (CheckpointError, OSError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
