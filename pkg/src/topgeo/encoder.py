"""Down-preservation: set abstraction, shape code, attention and the sampled cloud R0.

Parameters live under ``dp.*``.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .blocks import (TopoEmbedding, add_ita_params, add_topo_params, displacement_head,
                     effective_k, intertwining_attention, topological_embedding)
from .errors import CardinalityError, ConfigError, ShapeError
from .geometry import as_cloud, fps, knn
from .nn import mlp_apply, resmlp_apply

SA_RATIOS = (4, 16)
MIN_POINTS = 64


@dataclass
class SAOutput:
    points: np.ndarray
    features: T.Tensor
    index: Optional[np.ndarray] = None  # rows of the level input that were sampled


@dataclass
class ShapeCode:
    per_point: T.Tensor
    global_code: T.Tensor


@dataclass
class DPResult:
    r0: T.Tensor
    k0: T.Tensor
    sampled: SAOutput
    code: ShapeCode
    topo: TopoEmbedding
    h: T.Tensor


def check_cloud_size(n):
    if n < MIN_POINTS or n % 16:
        raise CardinalityError(
            f"point count must be divisible by 16 (4 for sampling, 16 for the abstraction "
            f"cascade) and at least {MIN_POINTS}, got {n}")


def _sa_mlp(params, prefix, x):
    x = mlp_apply(params, prefix + ".mlp0", x, "relu")
    return mlp_apply(params, prefix + ".mlp1", x, "relu")


def first_set_abstraction(params, p, n_out, k):
    """FPS centroids, lifted relations to their neighbors in ``p``, max-pooled MLP."""
    idx = fps(p, n_out)
    p_d = p[idx]
    topo = topological_embedding(params, "dp.topo", p_d, p, k, exclude=idx)
    centers = np.broadcast_to(p_d[:, None, :], topo.raw.shape)
    x = _sa_mlp(params, "dp.sa1", T.concat([T.Tensor(centers), topo.delta], axis=-1))
    return SAOutput(p_d, T.max_reduce(x, axis=1), idx), topo


def set_abstraction(params, prefix, level, n_out, k):
    """One deeper abstraction level; ``n_out=1`` pools the whole set into one code."""
    n_in = len(level.points)
    if n_out == 1:
        x = T.concat([T.Tensor(level.points), level.features], axis=-1)
        x = _sa_mlp(params, prefix, x)
        return SAOutput(np.zeros((1, 3)), T.reshape(T.max_reduce(x, axis=0), (1, -1)))
    if n_in % n_out:
        raise ConfigError(f"cannot reduce {n_in} points to {n_out} evenly")
    idx = fps(level.points, n_out)
    centers = level.points[idx]
    nbr = knn(centers, level.points, effective_k(k, n_in), exclude=idx)
    rel = centers[:, None, :] - level.points[nbr.indices]
    ctr = np.broadcast_to(centers[:, None, :], rel.shape)
    grouped = T.concat([T.Tensor(ctr), T.Tensor(rel), T.gather_rows(level.features, nbr.indices)],
                       axis=-1)
    return SAOutput(centers, T.max_reduce(_sa_mlp(params, prefix, grouped), axis=1), idx)


def shape_code(params, x_d, s):
    if s.shape[0] != 1:
        raise ShapeError(f"global code must be a single row, got {s.shape}")
    rep = T.broadcast_to(s, (x_d.shape[0], s.shape[1]))
    return resmlp_apply(params, "dp.shape", T.concat([x_d, rep], axis=-1))


def down_preserve(params, cfg, p):
    """Sampled cloud ``R0 = P_d + tanh(K_d)`` and its pre-tanh features ``K_d``."""
    p = as_cloud(p)
    n = len(p)
    check_cloud_size(n)
    lvl1, _ = first_set_abstraction(params, p, n // SA_RATIOS[0], cfg.k)
    lvl2 = set_abstraction(params, "dp.sa2", lvl1, n // SA_RATIOS[1], cfg.k)
    s = set_abstraction(params, "dp.sa3", lvl2, 1, cfg.k).features
    code = shape_code(params, lvl1.features, s)
    # attention neighborhoods live among the sampled points so the code can be gathered
    topo = topological_embedding(params, "dp.topo", lvl1.points, lvl1.points, cfg.k)
    h = intertwining_attention(params, "dp.ita", code, topo)
    delta, k0 = displacement_head(params, "dp.head", h)
    r0 = T.Tensor(lvl1.points) + delta
    return DPResult(r0, k0, lvl1, ShapeCode(code, s), topo, h)


def add_encoder_params(params, cfg, rng, zero_head=True):
    add_topo_params(params, "dp.topo", cfg.m, rng)
    w1 = 3 + cfg.m
    params.add_linear("dp.sa1.mlp0", w1, 2 * w1, rng)
    params.add_linear("dp.sa1.mlp1", 2 * w1, cfg.c1, rng)
    w2 = 6 + cfg.c1
    params.add_linear("dp.sa2.mlp0", w2, 2 * w2, rng)
    params.add_linear("dp.sa2.mlp1", 2 * w2, cfg.c2, rng)
    w3 = 3 + cfg.c2
    params.add_linear("dp.sa3.mlp0", w3, 2 * w3, rng)
    params.add_linear("dp.sa3.mlp1", 2 * w3, cfg.c3, rng)
    params.add_resmlp("dp.shape", cfg.c1 + cfg.c3, cfg.c1, rng)
    add_ita_params(params, "dp.ita", cfg.c1, cfg.c, rng)
    params.add_resmlp("dp.head", cfg.c, 3, rng, zero_out=zero_head)
