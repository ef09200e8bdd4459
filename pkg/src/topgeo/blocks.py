"""Building blocks shared by the sampling and restoration phases."""
from dataclasses import dataclass

from . import tensor as T
from .geometry import NeighborIndex, group_subtract, knn
from .nn import mlp_apply, resmlp_apply


@dataclass
class TopoEmbedding:
    raw: T.Tensor
    delta: T.Tensor
    nbr: NeighborIndex


def effective_k(k, n_source, self_excluded=True):
    """Neighborhood size clamped to the candidates that exist."""
    return max(1, min(k, n_source - (1 if self_excluded else 0)))


def lift_relations(params, prefix, raw):
    return mlp_apply(params, prefix + ".lift1", mlp_apply(params, prefix + ".lift0", raw, "relu"))


def topological_embedding(params, prefix, centroids, source, k, exclude="self"):
    """kNN relative vectors ``p_i - p_j`` and their shared MLP lift."""
    centroids, source = T.as_tensor(centroids), T.as_tensor(source)
    k = effective_k(k, source.shape[0], exclude is not None)
    nbr = knn(centroids.data, source.data, k, exclude)
    raw = group_subtract(centroids, source, nbr)
    return TopoEmbedding(raw, lift_relations(params, prefix, raw), nbr)


def intertwining_attention(params, prefix, code, topo, return_weights=False):
    """Vector attention of a per-point code over its topological neighborhood.

    ``h_i = sum_j softmax_j(gamma(phi(c_i) - psi(c_j) + d_ij)) * (eta(c_j) + d_ij)``
    with the softmax taken per channel over the neighbor axis.
    """
    idx = topo.nbr.indices
    phi = T.expand_dims(mlp_apply(params, prefix + ".phi", code), 1)
    psi = T.gather_rows(mlp_apply(params, prefix + ".psi", code), idx)
    eta = T.gather_rows(mlp_apply(params, prefix + ".eta", code), idx)
    logits = mlp_apply(params, prefix + ".gamma0", phi - psi + topo.delta, "relu")
    logits = mlp_apply(params, prefix + ".gamma1", logits)
    w = T.softmax(logits, axis=1)
    h = T.tsum(w * (eta + topo.delta), axis=1)
    return (h, w) if return_weights else h


def displacement_head(params, prefix, h):
    """Returns ``(tanh(K), K)`` with ``K`` the 3-wide residual regression."""
    k_feat = resmlp_apply(params, prefix, h)
    return T.tanh(k_feat), k_feat


def add_topo_params(params, prefix, m, rng):
    params.add_linear(prefix + ".lift0", 3, m, rng)
    params.add_linear(prefix + ".lift1", m, m, rng)


def add_ita_params(params, prefix, c_in, c, rng):
    for name in ("phi", "psi", "eta"):
        params.add_linear(f"{prefix}.{name}", c_in, c, rng)
    params.add_linear(prefix + ".gamma0", c, c, rng)
    params.add_linear(prefix + ".gamma1", c, c, rng)
