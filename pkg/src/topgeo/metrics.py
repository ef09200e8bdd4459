"""Evaluation metrics (CD, HD, EMD) and the training losses."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from . import tensor as T
from .errors import CardinalityError, ConfigError, ShapeError
from .geometry import as_cloud

DEFAULT_LAMBDA = 1000.0
EMD_EXACT_MAX = 512


@dataclass(frozen=True)
class MetricReport:
    cd: float
    hd: float
    emd: float
    emd_mode: str


@dataclass(frozen=True)
class LossBreakdown:
    geo: float
    top: float
    total: float
    lam: float
    tensor: Optional[T.Tensor] = None


def _pairwise(a, b):
    d = a[:, None, :] - b[None, :, :]
    return np.sqrt((d * d).sum(axis=-1))


def chamfer(a, b, squared=False):
    """Symmetric Chamfer distance with unsquared L2 terms.

    ``mean_x min_y |x-y| + mean_y min_x |y-x|``. Inputs may be arrays or
    Tensors; the result is a scalar Tensor differentiable in both. When two
    targets are equidistant the lower index is used. ``squared=True`` swaps
    in squared distances, for comparison with the squared convention.
    """
    a, b = T.as_tensor(a), T.as_tensor(b)
    if len(a) == 0 or len(b) == 0:
        raise CardinalityError("chamfer needs two non-empty clouds")
    pa, pb = as_cloud(a.data), as_cloud(b.data)
    ia, _ = kernels.nearest(pa, pb)
    ib, _ = kernels.nearest(pb, pa)
    da = a - T.gather_rows(b, ia)
    db = b - T.gather_rows(a, ib)
    if squared:
        ta, tb = T.tsum(T.square(da), axis=1), T.tsum(T.square(db), axis=1)
    else:
        ta, tb = T.norm(da, axis=1), T.norm(db, axis=1)
    return T.mean(ta) + T.mean(tb)


def hausdorff(a, b):
    a, b = as_cloud(a), as_cloud(b)
    _, da = kernels.nearest(a, b)
    _, db = kernels.nearest(b, a)
    return float(np.sqrt(max(da.max(), db.max())))


def hungarian(cost):
    """Minimum-cost perfect matching of a square cost matrix (row -> column)."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ShapeError(f"cost matrix must be square, got {cost.shape}")
    return kernels.hungarian(cost)


def auction_assignment(cost, eps_start=None, eps_end=None):
    """Forward auction with epsilon scaling; cost within n*eps_end of optimal."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    scale = float(cost.max()) if cost.size else 0.0
    scale = scale if scale > 0 else 1.0
    eps_start = 0.1 * scale if eps_start is None else eps_start
    eps_end = 1e-4 * scale if eps_end is None else eps_end
    return kernels.auction(cost, float(eps_start), float(eps_end))


def emd(a, b, mode="exact"):
    """Earth mover's distance between equal-size clouds, normalized by size."""
    a, b = as_cloud(a), as_cloud(b)
    if len(a) != len(b):
        raise CardinalityError(f"emd needs equal sizes, got {len(a)} and {len(b)}")
    cost = _pairwise(a, b)
    if mode == "exact":
        if len(a) > EMD_EXACT_MAX:
            raise ConfigError(f"exact emd is capped at {EMD_EXACT_MAX} points, got {len(a)}")
        assign = hungarian(cost)
    elif mode == "approximate":
        assign = auction_assignment(cost)
    else:
        raise ConfigError(f"unknown emd mode {mode!r}")
    return float(cost[np.arange(len(a)), assign].sum() / len(a))


def metric_report(pred, gt):
    pred, gt = as_cloud(pred), as_cloud(gt)
    mode = "exact" if len(gt) <= EMD_EXACT_MAX else "approximate"
    with T.no_grad():
        cd = float(chamfer(pred, gt).data)
    return MetricReport(cd, hausdorff(pred, gt), emd(pred, gt, mode), mode)


def geometry_loss(r0, r1, r2, p):
    """Sum of Chamfer distances of every resolution against the full target."""
    return chamfer(r0, p) + chamfer(r1, p) + chamfer(r2, p)


def topo_constraint_loss(k0, k1, k2, n=None):
    """Sum over phases and points of the per-point channel mean of ``k**2``."""
    ks = [T.as_tensor(k) for k in (k0, k1, k2)]
    rows = [k.shape[0] for k in ks]
    if rows[1] != 2 * rows[0] or rows[2] != 2 * rows[1] or (n is not None and rows[2] != n):
        raise ShapeError(f"feature rows must be N/4, N/2, N; got {rows}")
    total = None
    for k in ks:
        term = T.tsum(T.mean(T.square(k), axis=1))
        total = term if total is None else total + term
    return total


def total_loss(geo, top, lam=DEFAULT_LAMBDA):
    geo_t, top_t = T.as_tensor(geo), T.as_tensor(top)
    tot = geo_t * lam + top_t
    return LossBreakdown(float(geo_t.data), float(top_t.data), float(tot.data), float(lam), tot)
