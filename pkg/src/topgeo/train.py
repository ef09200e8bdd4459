"""Adam training loop, step-decay schedule, evaluation sweeps and checkpoints."""
import csv
import os
import time
from dataclasses import dataclass, fields

import numpy as np

from . import checkpoint
from . import tensor as T
from .config import ModelConfig
from .data import augment, load_manifest_clouds, read_manifest
from .errors import ConfigError, NumericError
from .geometry import fps
from .metrics import (chamfer, geometry_loss, metric_report, topo_constraint_loss,
                      total_loss)
from .pipeline import config_of, init_params, recover

LOG_COLUMNS = ("step", "epoch", "lr", "geo", "top", "total", "wall_ms")


@dataclass
class TrainConfig:
    lr0: float = 0.005
    decay_factor: float = 0.5
    decay_every_epochs: int = 30
    epochs: int = 20
    batch_size: int = 8
    lam: float = 1000.0
    n_points: int = 256
    manifest: str = ""
    seed: int = 0
    max_steps: int = 0  # 0 means run all epochs
    augment: bool = True
    k: int = 16
    c1: int = 128
    c2: int = 256
    c3: int = 512
    c: int = 128
    m: int = 128

    def __post_init__(self):
        for name in ("lr0", "decay_factor", "decay_every_epochs", "epochs", "batch_size",
                     "lam", "n_points"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        self.model_config()

    def model_config(self):
        return ModelConfig(n_points=self.n_points, k=self.k, c1=self.c1, c2=self.c2,
                           c3=self.c3, c=self.c, m=self.m, lam=self.lam)

    @classmethod
    def from_mapping(cls, values):
        """Build from string key/values (config files); unknown keys are errors."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            typ = known[key].type
            try:
                if typ in (bool, "bool"):
                    if raw.lower() not in ("1", "0", "true", "false", "yes", "no"):
                        raise ValueError(raw)
                    kwargs[key] = raw.lower() in ("1", "true", "yes")
                elif typ in (int, "int"):
                    kwargs[key] = int(raw)
                elif typ in (float, "float"):
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = raw
            except ValueError:
                raise ConfigError(f"bad value for config key {key!r}: {raw!r}") from None
        return cls(**kwargs)


@dataclass
class TrainLogRow:
    step: int
    epoch: int
    lr: float
    geo: float
    top: float
    total: float
    wall_ms: float


@dataclass
class TrainResult:
    params: object
    log: list


def lr_schedule(epoch, cfg):
    return cfg.lr0 * cfg.decay_factor ** (epoch // cfg.decay_every_epochs)


class Adam:
    """Bias-corrected Adam over a ParamStore. Missing gradients count as zero."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self, params, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1.0 - b1 ** self.t, 1.0 - b2 ** self.t
        for name, p in params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if g.shape != p.data.shape or self.m[name].shape != p.data.shape:
                raise ConfigError(f"gradient/state shape mismatch for {name}")
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            p.data -= lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)


def adam_step(params, state, lr):
    state.step(params, lr)


def sample_loss(params, cloud, cfg):
    """Per-cloud (geo, top, named tensors) for one recovery forward pass."""
    out = recover(params, cloud, cfg, inspect=lambda name, t: _check_finite({name: t}))
    geo = geometry_loss(out.r0, out.r1, out.r2, cloud)
    top = topo_constraint_loss(out.k0, out.k1, out.k2)
    named = {"r0": out.r0, "k0": out.k0, "r1": out.r1, "k1": out.k1, "r2": out.r2, "k2": out.k2}
    return geo, top, named


def _check_finite(named):
    for name, t in named.items():
        if not np.all(np.isfinite(t.data)):
            raise NumericError(f"non-finite values first appeared in {name!r}")


def batch_loss(params, clouds, mcfg, lam):
    geo = top = None
    for cloud in clouds:
        g, t, _ = sample_loss(params, cloud, mcfg)
        geo = g if geo is None else geo + g
        top = t if top is None else top + t
    scale = 1.0 / len(clouds)
    br = total_loss(geo * scale, top * scale, lam)
    _check_finite({"geo": T.Tensor(br.geo), "top": T.Tensor(br.top), "total": T.Tensor(br.total)})
    return br


def train(cfg, clouds=None, out_dir=None, params=None, progress=None):
    """Run the training loop; returns the trained parameters and per-step log.

    ``clouds`` overrides ``cfg.manifest``. When ``out_dir`` is given a
    checkpoint ``ckpt.bin`` is rewritten after every epoch and ``train.csv``
    holds the log.
    """
    if clouds is None:
        if not cfg.manifest:
            raise ConfigError("no manifest given")
        clouds = load_manifest_clouds(read_manifest(cfg.manifest))
    clouds = [np.asarray(c, dtype=np.float64) for c in clouds]
    for c in clouds:
        if len(c) != cfg.n_points:
            raise ConfigError(f"dataset cloud has {len(c)} points, config expects {cfg.n_points}")
    mcfg = cfg.model_config()
    params = params if params is not None else init_params(mcfg, seed=cfg.seed)
    opt = Adam(params)
    rng = np.random.default_rng([cfg.seed, 7])
    log = []
    step = 0
    start = time.perf_counter()
    writer = fh = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        fh = open(os.path.join(out_dir, "train.csv"), "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
    try:
        for epoch in range(cfg.epochs):
            lr = lr_schedule(epoch, cfg)
            order = rng.permutation(len(clouds))
            for b in range(0, len(order), cfg.batch_size):
                if cfg.max_steps and step >= cfg.max_steps:
                    break
                batch = [clouds[i] for i in order[b:b + cfg.batch_size]]
                if cfg.augment:
                    batch = [augment(c, rng) for c in batch]
                params.zero_grad()
                br = batch_loss(params, batch, mcfg, cfg.lam)
                br.tensor.backward()
                opt.step(params, lr)
                row = TrainLogRow(step, epoch, lr, br.geo, br.top, br.total,
                                  (time.perf_counter() - start) * 1000.0)
                log.append(row)
                if writer:
                    writer.writerow([row.step, row.epoch, repr(row.lr), repr(row.geo),
                                     repr(row.top), repr(row.total), f"{row.wall_ms:.1f}"])
                if progress:
                    progress(row)
                step += 1
            if out_dir:
                checkpoint.save(params, os.path.join(out_dir, "ckpt.bin"))
            if cfg.max_steps and step >= cfg.max_steps:
                break
    finally:
        if fh:
            fh.close()
    if out_dir:
        checkpoint.save(params, os.path.join(out_dir, "ckpt.bin"))
    return TrainResult(params, log)


def read_log(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [TrainLogRow(int(r["step"]), int(r["epoch"]), float(r["lr"]), float(r["geo"]),
                        float(r["top"]), float(r["total"]), float(r["wall_ms"])) for r in rows]


@dataclass
class EvalRow:
    name: str
    cd: float
    hd: float
    emd: float
    emd_mode: str
    sample_cd: float


def evaluate(params, clouds, names=None):
    """Metrics of R2 against each ground-truth cloud plus the CD of R0.

    Returns ``(rows, means)`` with unscaled values.
    """
    cfg = config_of(params)
    names = names or [str(i) for i in range(len(clouds))]
    rows = []
    with T.no_grad():
        for name, gt in zip(names, clouds):
            out = recover(params, gt, cfg)
            rep = metric_report(out.r2.data, gt)
            sample_cd = float(chamfer(out.r0.data, gt).data)
            rows.append(EvalRow(name, rep.cd, rep.hd, rep.emd, rep.emd_mode, sample_cd))
    means = EvalRow("mean", *(float(np.mean([getattr(r, f) for r in rows]))
                              for f in ("cd", "hd", "emd")),
                    rows[0].emd_mode if rows else "exact",
                    float(np.mean([r.sample_cd for r in rows])))
    return rows, means


def fps_baseline_cd(cloud):
    """CD of the plain FPS quarter-size cloud against the full cloud."""
    idx = fps(cloud, len(cloud) // 4)
    with T.no_grad():
        return float(chamfer(cloud[idx], cloud).data)
