"""Flow transport, residual training, and the two normalizer estimators.

Particles drawn from the path's start are pushed through one velocity
field per time slice with an explicit Euler step x += v(x) / T.  Because
the fields are only approximate, each particle carries two running
accumulators, updated *before* it moves, from the uncentered residual

    e_i = div v(x_i) + S(x_i, l/T) . v(x_i) + dt_log(x_i, l/T):

* ``delta`` += -(e_i - m_l) / T, where m_l is the slice mean of dt_log.
  Importance weights are w_i = exp(-delta_i) / sum_j exp(-delta_j); delta
  is the negative log of the unnormalized trajectory weight, so a perfect
  field gives delta = 0 and uniform weights.
* ``lam``   += e_i / T.  This is the log *modified* weight: its sample
  mean of exponentials estimates the normalizer, log Z^ =
  logmeanexp(lam), without needing the slice means at all.

The two differ by the deterministic running sum of the slice means:
lam_i + delta_i = sum_l m_l / T for every particle, which doubles as a
cheap internal consistency check.

The second estimator integrates the slice means themselves:
log Z-path = sum_l m^_l / T with m^_l re-estimated from the moving
ensemble (left-endpoint rule, matching the Euler transport).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import nn, optim
from .annealing import GeometricPath, PosteriorPath
from .errors import ConfigError, NumericsError


@dataclass
class ParticleEnsemble:
    x: np.ndarray                 # (n, D)
    delta: np.ndarray             # (n,) trajectory-error accumulator
    lam: np.ndarray               # (n,) uncentered accumulator
    steps: int                    # transport steps applied
    recorded_means: np.ndarray    # (steps,) slice means seen during transport

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def log_weights(self) -> np.ndarray:
        lw = -self.delta
        return lw - logsumexp(lw)

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights())

    def ess(self) -> float:
        """Normalized effective sample size in (0, 1]."""
        lw = self.log_weights()
        return float(np.exp(-logsumexp(2.0 * lw))) / self.n


def weighted_mean_dt_log(dt_log: np.ndarray, weights: np.ndarray | None) -> float:
    """Slice mean of dt_log; warns when the weights have collapsed."""
    if weights is None:
        return float(np.mean(dt_log))
    wsum2 = float(np.sum(weights * weights))
    if wsum2 > 0 and 1.0 / wsum2 < 1.0 + 1e-9:
        warnings.warn("slice-mean weights are degenerate (effective count ~ 1)",
                      RuntimeWarning, stacklevel=2)
    return float(np.dot(weights, dt_log))


def generate_samples(fields, path, T: int, n: int, rng: np.random.Generator,
                     stored_means=None, *, weighted_means: bool = True,
                     scale_fallback_mean_by_dt: bool = False) -> ParticleEnsemble:
    """Transport ``n`` fresh draws through ``fields[0:k]`` on the grid l/T.

    ``stored_means[l]`` centres the delta update at slice l; when absent,
    the mean is re-estimated from the current ensemble (weighted by the
    running weights unless ``weighted_means`` is off).
    ``scale_fallback_mean_by_dt`` additionally divides that re-estimated
    mean by T, treating it as a per-step increment rather than a slice
    average; kept off by default, it biases the centring.
    """
    k = len(fields)
    if T < 1 or k > T:
        raise ConfigError(f"need 1 <= len(fields) <= T, got k={k}, T={T}")
    if stored_means is not None and len(stored_means) < k:
        raise ConfigError("stored_means must cover every field being applied")

    x = np.ascontiguousarray(path.initial_sample(n, rng), dtype=np.float64)
    delta = np.zeros(n)
    lam = np.zeros(n)
    recorded = np.empty(k)
    inv_t = 1.0 / T

    for l in range(k):
        try:
            pe = path.eval(x, l / T)
        except NumericsError as exc:
            raise NumericsError(
                f"transport diverged at step {l} (t={l / T:.4f}): {exc}"
            ) from exc
        V, div = fields[l].velocity_and_divergence(x)
        e_unc = div + np.sum(pe.score * V, axis=1) + pe.dt_log

        if weighted_means:
            lw = -delta
            w = np.exp(lw - logsumexp(lw))
            m_hat = weighted_mean_dt_log(pe.dt_log, w)
        else:
            m_hat = weighted_mean_dt_log(pe.dt_log, None)
        recorded[l] = m_hat

        if stored_means is not None:
            m_l = float(stored_means[l])
        else:
            m_l = m_hat * inv_t if scale_fallback_mean_by_dt else m_hat

        delta -= (e_unc - m_l) * inv_t
        lam += e_unc * inv_t
        x = x + V * inv_t
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(delta))):
            raise NumericsError(f"transport diverged at step {l} (t={l / T:.4f})")

    return ParticleEnsemble(x, delta, lam, k, recorded)


def log_z_hat(ens: ParticleEnsemble) -> float:
    """Normalizer estimate from the modified-weight accumulator."""
    return float(logsumexp(ens.lam) - np.log(ens.n))


def log_z_path(recorded_means, T: int) -> float:
    """Normalizer estimate from the slice means (left-endpoint rule)."""
    return float(np.sum(recorded_means) / T)


@dataclass
class TrainConfig:
    T: int
    seed: int
    n_pool: int = 50_000
    batch: int | None = None          # default: 2000 if D <= 10 else 10000
    max_epochs: int = 2000
    criterion: float = 1e-3
    lr: float = 5e-3
    patience: int = 200
    lr_factor: float = 0.5
    width: int = 64
    reuse_pool: bool | None = None    # default: True iff D < 10
    weights_in_training: bool = True
    scale_fallback_mean_by_dt: bool = False
    progressive_pool: bool = False    # advance one shared pool a step per slice

    def resolve(self, dim: int) -> "TrainConfig":
        out = TrainConfig(**{**self.__dict__})
        if out.batch is None:
            out.batch = 2000 if dim <= 10 else 10_000
        if out.reuse_pool is None:
            out.reuse_pool = True if out.progressive_pool else dim < 10
        if out.progressive_pool and not out.reuse_pool:
            raise ConfigError("progressive_pool subsamples the shared pool and "
                              "needs reuse_pool on")
        if out.batch > out.n_pool:
            raise ConfigError(f"batch {out.batch} exceeds pool size {out.n_pool}")
        if not (300 <= out.batch <= 10_000):
            warnings.warn(f"batch size {out.batch} is outside the usual 300..10000 band",
                          RuntimeWarning, stacklevel=2)
        if out.T < 1:
            raise ConfigError("T must be a positive integer")
        return out


@dataclass
class FlowModel:
    path: object                      # GeometricPath | PosteriorPath
    T: int
    fields: list
    stored_means: np.ndarray          # (T,) training-time slice means
    train_meta: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.path.dim

    def params_list(self):
        return [f.params for f in self.fields]


def _criterion_value(loss: float, dt_log_batch: np.ndarray) -> float:
    var = float(np.var(dt_log_batch))
    return loss / max(var, 1e-30)


def train_flow(path, cfg: TrainConfig, *, checkpoint_dir=None,
               progress=None) -> FlowModel:
    """Train one velocity field per time slice, warm-starting each from
    the previous one.

    Per slice k: draw a fresh pool of ``n_pool`` particles transported
    through the already-trained fields, estimate the slice mean of dt_log
    on it once, then run Adam on mean(eps^2) over batches until
    mean(eps^2) / var(dt_log) < ``criterion`` or ``max_epochs`` is hit.
    The criterion is checked before stepping, so an already-perfect field
    records zero epochs.  With ``reuse_pool`` the batches are subsamples
    of the pool (positions, scores, and sources precomputed); otherwise
    every epoch transports a fresh batch from scratch.

    ``progressive_pool`` replaces the fresh pool per slice with a single
    ensemble drawn once at t=0 and advanced one Euler step after each
    slice is trained.  Re-transporting a fresh pool through the k-slice
    prefix makes training cost quadratic in T; the progressive variant is
    linear and is the practical choice for large T or expensive targets.
    The advance applies exactly the transport update, so the maintained
    ensemble equals what ``generate_samples`` would produce from the same
    draw, and resuming rebuilds it bit-exactly.

    ``checkpoint_dir`` enables per-slice saves and resuming: a partial
    directory is picked up where it left off and the result is bit-equal
    to an uninterrupted run (all RNG streams are keyed by slice index).
    """
    from . import checkpoint  # local import; checkpoint pulls config helpers

    cfg = cfg.resolve(path.dim)
    root = np.random.SeedSequence(cfg.seed)
    ss_init, ss_pool, ss_epoch = root.spawn(3)
    init_rng = np.random.default_rng(ss_init)
    pool_seeds = ss_pool.spawn(cfg.T)
    epoch_seeds = ss_epoch.spawn(cfg.T)

    params = nn.init_params(path.dim, cfg.width, init_rng, zero_last=True)
    fields: list[nn.MlpVelocityField] = []
    means = np.zeros(cfg.T)
    meta: list[dict] = []

    start_k = 0
    if checkpoint_dir is not None:
        done = checkpoint.load_partial(checkpoint_dir, dict(cfg.__dict__))
        if done is not None:
            fields, means_done, meta = done
            means[: len(fields)] = means_done
            start_k = len(fields)
            if start_k > 0:
                params = fields[-1].params.copy()

    ens = None
    if cfg.progressive_pool:
        # one shared pool for the whole run, keyed by the slice-0 stream;
        # on resume this replays the prefix transport, which is bit-equal
        # to having advanced the ensemble slice by slice
        pool_rng = np.random.default_rng(pool_seeds[0])
        ens = generate_samples(fields, path, cfg.T, cfg.n_pool, pool_rng,
                               stored_means=means[:start_k])

    for k in range(start_k, cfg.T):
        t = k / cfg.T
        t_start = time.perf_counter()
        if not cfg.progressive_pool:
            pool_rng = np.random.default_rng(pool_seeds[k])
            ens = generate_samples(fields, path, cfg.T, cfg.n_pool, pool_rng,
                                   stored_means=means[:k])
        try:
            pe = path.eval(ens.x, t)
        except NumericsError as exc:
            raise NumericsError(
                f"transport diverged at step {k} (t={t:.4f}): {exc}") from exc
        pool_ess = ens.ess() if k > 0 else 1.0
        w = ens.weights() if cfg.weights_in_training else None
        m_k = weighted_mean_dt_log(pe.dt_log, w)
        means[k] = m_k

        state = optim.AdamState(lr=cfg.lr, patience=cfg.patience, factor=cfg.lr_factor)
        plist = params.as_list()
        epoch_rng = np.random.default_rng(epoch_seeds[k])

        if cfg.reuse_pool:
            X_pool = ens.x
            S_pool = pe.score
            C_pool = pe.dt_log - m_k
            dt_pool = pe.dt_log

        converged = False
        epochs = 0
        loss = float("nan")
        crit = float("nan")
        for epoch in range(cfg.max_epochs):
            if cfg.reuse_pool:
                idx = epoch_rng.choice(cfg.n_pool, size=cfg.batch, replace=False)
                Xb, Sb, Cb = X_pool[idx], S_pool[idx], C_pool[idx]
                dt_b = dt_pool[idx]
            else:
                ens_b = generate_samples(fields, path, cfg.T, cfg.batch, epoch_rng,
                                         stored_means=means[:k])
                pe_b = path.eval(ens_b.x, t)
                Xb, Sb = ens_b.x, pe_b.score
                dt_b = pe_b.dt_log
                Cb = dt_b - m_k

            loss, grads, _ = nn.loss_and_grad(params, Xb, Sb, Cb)
            crit = _criterion_value(loss, dt_b)
            if crit < cfg.criterion:
                converged = True
                epochs = epoch
                break
            optim.adam_step(plist, grads, state)
            optim.note_loss(state, loss)
            epochs = epoch + 1

        fields.append(nn.MlpVelocityField(params.copy()))

        if cfg.progressive_pool:
            # advance the shared pool with the field just trained, using
            # the same update order as generate_samples so the state stays
            # reproducible from the slice-0 draw
            inv_t = 1.0 / cfg.T
            V, div = fields[-1].velocity_and_divergence(ens.x)
            e_unc = div + np.sum(pe.score * V, axis=1) + pe.dt_log
            lw = -ens.delta
            w_adv = np.exp(lw - logsumexp(lw))
            rec = weighted_mean_dt_log(pe.dt_log, w_adv)
            ens.delta -= (e_unc - m_k) * inv_t
            ens.lam += e_unc * inv_t
            ens.x = ens.x + V * inv_t
            ens.steps += 1
            ens.recorded_means = np.append(ens.recorded_means, rec)
            if not (np.all(np.isfinite(ens.x)) and np.all(np.isfinite(ens.delta))):
                raise NumericsError(f"transport diverged at step {k} (t={t:.4f})")

        step_meta = {
            "step": k,
            "t": t,
            "epochs": epochs,
            "converged": converged,
            "loss": loss,
            "criterion": crit,
            "lr_final": state.lr,
            "mean_dt_log": m_k,
            "pool_ess": pool_ess,
            "seconds": time.perf_counter() - t_start,
        }
        meta.append(step_meta)
        if checkpoint_dir is not None:
            checkpoint.save_step(checkpoint_dir, k, fields[-1].params, means[: k + 1],
                                 meta, dict(cfg.__dict__))
        if progress is not None:
            progress(step_meta)
        # params object keeps training in place at the next slice (warm start);
        # the field above holds its own copy.

    flow = FlowModel(path=path, T=cfg.T, fields=fields, stored_means=means,
                     train_meta=meta, config=dict(cfg.__dict__))
    return flow


@dataclass
class SampleResult:
    x: np.ndarray
    weights: np.ndarray
    log_z_hat: float
    log_z_path: float
    ess: float
    recorded_means: np.ndarray
    weighted: bool
    seconds: float
    ensemble: ParticleEnsemble


def sample(flow: FlowModel, n: int, rng: np.random.Generator, *,
           weights_in_sampling: bool = True) -> SampleResult:
    """Draw one ensemble from a trained flow and form both estimators.

    With weights on (default): importance weights from the delta
    accumulator, slice means re-estimated under those weights, and the
    modified-weight normalizer logmeanexp(lam).  With weights off, every
    estimate reverts to its unweighted form: uniform output weights and
    both normalizer estimates collapse to the unweighted slice-mean sum.
    Centring always uses the training-time stored means, so the delta/lam
    bookkeeping itself is identical in the two modes.
    """
    t0 = time.perf_counter()
    ens = generate_samples(flow.fields, flow.path, flow.T, n, rng,
                           stored_means=flow.stored_means,
                           weighted_means=weights_in_sampling)
    lzp = log_z_path(ens.recorded_means, flow.T)
    if weights_in_sampling:
        w = ens.weights()
        lzh = log_z_hat(ens)
        ess = ens.ess()
    else:
        w = np.full(ens.n, 1.0 / ens.n)
        lzh = lzp
        ess = 1.0
    return SampleResult(ens.x, w, lzh, lzp, ess, ens.recorded_means,
                        weights_in_sampling, time.perf_counter() - t0, ens)
