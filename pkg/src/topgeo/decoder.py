"""Up-preservation phases: each doubles the cloud through attention-driven point splitting.

Nothing here reads encoder state: a phase sees only its input points and,
in the second phase, the previous phase's displacement features. Parameters
live under ``up1.*`` and ``up2.*``.
"""
from dataclasses import dataclass
from typing import Optional

from . import tensor as T
from .blocks import (add_ita_params, add_topo_params, displacement_head,
                     intertwining_attention, topological_embedding)
from .errors import CardinalityError, ShapeError
from .geometry import inverse_distance_interpolate, knn
from .nn import mlp_apply, point_split_deconv, resmlp_apply

UP_PREFIXES = ("up1", "up2")


@dataclass
class UpPhaseState:
    p_pre: T.Tensor
    x_pre: T.Tensor
    k_prev: Optional[T.Tensor] = None
    level: int = 1

    def __post_init__(self):
        if self.x_pre.shape[0] != self.p_pre.shape[0]:
            raise ShapeError("x_pre rows must equal the number of input points")
        if self.k_prev is not None and self.k_prev.shape[0] != self.p_pre.shape[0]:
            raise ShapeError("k_prev rows must equal the number of input points")


@dataclass
class UpResult:
    points: T.Tensor
    k_feat: T.Tensor
    attention: T.Tensor


def make_state(params, prefix, p_pre, k_prev=None, level=1):
    p_pre = T.as_tensor(p_pre)
    if p_pre.shape[0] < 4:
        raise CardinalityError(f"an up phase needs at least 4 points, got {p_pre.shape[0]}")
    x_pre = mlp_apply(params, prefix + ".pre1", mlp_apply(params, prefix + ".pre0", p_pre, "relu"))
    return UpPhaseState(p_pre, x_pre, k_prev, level)


def upsample_feature(state):
    nbr3 = knn(state.p_pre.data, state.p_pre.data, 3, exclude="self")
    return inverse_distance_interpolate(state.p_pre, state.x_pre, nbr3)


def up_topological_embedding(params, prefix, p_pre, k):
    """Relations computed from this phase's own points; the kNN is reused by the UPA."""
    return topological_embedding(params, prefix + ".topo", p_pre, p_pre, k)


def query_formation(params, prefix, state, x_u, topo=None):
    """Query from interpolated, pooled and point-wise features; key defaults to the query.

    When ``topo`` is given the query is refined by intertwining attention with
    the pooled point features acting as the shape code.
    """
    pooled = T.max_reduce(state.x_pre, axis=0)
    pooled = T.broadcast_to(T.reshape(pooled, (1, -1)), state.x_pre.shape)
    q = resmlp_apply(params, prefix + ".query", T.concat([x_u, pooled, state.x_pre], axis=-1))
    if topo is not None:
        q = intertwining_attention(params, prefix + ".ita", q, topo)
    if state.k_prev is None:
        return q, q
    return q, mlp_apply(params, prefix + ".key", state.k_prev)


def up_preserving_attention(params, prefix, q, k, x_u, topo, r=2, return_weights=False):
    n = q.shape[0]
    if k.shape[0] != n or x_u.shape[0] != n or topo.nbr.indices.shape[0] != n:
        raise ShapeError("q, k, x_u and the neighbor index must share a row count")
    idx = topo.nbr.indices
    phi = T.expand_dims(mlp_apply(params, prefix + ".phi", q), 1)
    psi = T.gather_rows(mlp_apply(params, prefix + ".psi", k), idx)
    logits = mlp_apply(params, prefix + ".gamma0", phi - psi + topo.delta, "relu")
    w = T.softmax(mlp_apply(params, prefix + ".gamma1", logits), axis=1)
    v = T.gather_rows(resmlp_apply(params, prefix + ".value", T.concat([q, k], axis=-1)), idx)
    lift = mlp_apply(params, prefix + ".lift1", mlp_apply(params, prefix + ".lift0", x_u, "relu"))
    a = T.tsum(w * (v + topo.delta + T.expand_dims(lift, 1)), axis=1)
    h = point_split_deconv(params, prefix + ".split",
                           mlp_apply(params, prefix + ".merge", a, "relu"), r)
    return (h, w) if return_weights else h


def up_preserve(params, prefix, cfg, p_pre, k_prev=None, level=1):
    """One phase: every input point emits two children offset by ``tanh(K_l)``."""
    state = make_state(params, prefix, p_pre, k_prev, level)
    x_u = upsample_feature(state)
    topo = up_topological_embedding(params, prefix, state.p_pre, cfg.k)
    q, k = query_formation(params, prefix, state, x_u, topo)
    h, w = up_preserving_attention(params, prefix + ".upa", q, k, x_u, topo, cfg.r,
                                   return_weights=True)
    delta, k_feat = displacement_head(params, prefix + ".head", h)
    points = T.repeat(state.p_pre, cfg.r, axis=0) + delta
    return UpResult(points, k_feat, w)


def upsample_only(params, cfg, p_sparse):
    """Both up phases applied to an externally supplied sparse cloud (4x output)."""
    n = T.as_tensor(p_sparse).shape[0]
    if n <= cfg.k:
        raise CardinalityError(f"upsampling needs at least {cfg.k + 1} points, got {n}")
    first = up_preserve(params, "up1", cfg, T.as_tensor(p_sparse), None, 1)
    second = up_preserve(params, "up2", cfg, first.points, first.k_feat, 2)
    return second.points


def add_decoder_params(params, cfg, rng, zero_head=True):
    c = cfg.c
    for level, prefix in enumerate(UP_PREFIXES, start=1):
        params.add_linear(prefix + ".pre0", 3, c, rng)
        params.add_linear(prefix + ".pre1", c, c, rng)
        add_topo_params(params, prefix + ".topo", cfg.m, rng)
        params.add_resmlp(prefix + ".query", 3 * c, c, rng)
        add_ita_params(params, prefix + ".ita", c, c, rng)
        if level > 1:
            params.add_linear(prefix + ".key", 3, c, rng)
        upa = prefix + ".upa"
        params.add_linear(upa + ".phi", c, c, rng)
        params.add_linear(upa + ".psi", c, c, rng)
        params.add_linear(upa + ".gamma0", c, c, rng)
        params.add_linear(upa + ".gamma1", c, c, rng)
        params.add_resmlp(upa + ".value", 2 * c, c, rng)
        params.add_linear(upa + ".lift0", c, c, rng)
        params.add_linear(upa + ".lift1", c, c, rng)
        params.add_linear(upa + ".merge", c, c, rng)
        params.add_linear(upa + ".split", c, cfg.r * c, rng)
        params.add_resmlp(prefix + ".head", c, 3, rng, zero_out=zero_head)
