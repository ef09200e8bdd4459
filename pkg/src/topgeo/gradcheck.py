"""Finite-difference verification of every differentiable operation.

Each check reports the largest relative error
``|analytic - numeric| / max(1, |numeric|)`` over the coordinates it probes.
Primitives are held to 1e-4 and the end-to-end training loss to 1e-3.
"""
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .blocks import add_ita_params, add_topo_params, intertwining_attention, topological_embedding
from .config import ModelConfig
from .decoder import up_preserving_attention
from .errors import NumericError
from .metrics import chamfer, geometry_loss, topo_constraint_loss, total_loss
from .nn import (ParamStore, maxpool_neighbors, mlp_apply, point_split_deconv, resmlp_apply,
                 softmax_lastdim)
from .pipeline import init_params, recover

PRIMITIVE_TOL = 1e-4
END_TO_END_TOL = 1e-3
STEP = 1e-4
CORRUPT_FACTOR = 1.5
# one-sided slopes differing by more than this flag a piecewise boundary within h
KINK_TOL = END_TO_END_TOL


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float
    note: str = ""

    @property
    def passed(self):
        return bool(np.isfinite(self.error) and self.error <= self.tol)


@dataclass
class GradReport:
    results: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def worst(self):
        return max(self.results, key=lambda r: r.error / r.tol)

    def lines(self):
        return [f"{'PASS' if r.passed else 'FAIL'} {r.name:<28s} max_rel_err={r.error:.3e} "
                f"tol={r.tol:.0e}" + (f" ({r.note})" if r.note else "") for r in self.results]


def _coord_error(analytic, f_plus, f0, f_minus, h):
    """Relative error at one coordinate and whether a kink lies within ``h``.

    A kink (forward and backward slopes disagree by more than ``KINK_TOL``)
    is excused only when the analytic value matches one of the one-sided
    slopes, i.e. the gradient of the branch that is active at the point.
    """
    central = (f_plus - f_minus) / (2.0 * h)
    scale = max(1.0, abs(central))
    fwd, bwd = (f_plus - f0) / h, (f0 - f_minus) / h
    err = abs(analytic - central) / scale
    if abs(fwd - bwd) / scale > KINK_TOL:
        return min(err, abs(analytic - fwd) / scale, abs(analytic - bwd) / scale), True
    return err, False


def param_grad_check(params, name, loss_fn, coords, h=STEP):
    """``(max relative error, kinks)`` of ``d loss / d params[name]`` at ``coords``."""
    p = params[name]
    params.zero_grad()
    T.backward(loss_fn())
    analytic = p.grad.ravel().copy()
    flat = p.data.reshape(-1)
    worst = 0.0
    kinks = 0
    with T.no_grad():
        f0 = float(loss_fn().data)
        for i in coords:
            orig = flat[i]
            vals = []
            for step in (h, -h):
                flat[i] = orig + step
                vals.append(float(loss_fn().data))
            flat[i] = orig
            if not all(np.isfinite(vals)):
                raise NumericError(f"non-finite loss while perturbing {name}[{i}]")
            err, kink = _coord_error(analytic[i], vals[0], f0, vals[1], h)
            kinks += kink
            worst = max(worst, err)
    return worst, kinks


def _maybe_corrupt(name, corrupt):
    """Wrap an op so its backward pass is scaled when ``name`` is the corruption target."""
    def wrap(fn):
        if name != corrupt:
            return fn
        return lambda *a, **kw: T.scale_grad(fn(*a, **kw), CORRUPT_FACTOR)
    return wrap


def primitive_ops(rng, corrupt=None):
    """Named scalar functions of a (5, 4) input, one per primitive."""
    ps = ParamStore()
    ps.add_linear("l", 4, 4, rng)
    ps.add_resmlp("r", 4, 3, rng)
    ps.add_linear("s", 4, 8, rng)
    idx = rng.integers(0, 5, size=(5, 3))
    raw = {
        "mlp_relu": lambda x: mlp_apply(ps, "l", x, "relu"),
        "mlp_tanh": lambda x: mlp_apply(ps, "l", x, "tanh"),
        "resmlp": lambda x: resmlp_apply(ps, "r", x),
        "point_split_deconv": lambda x: point_split_deconv(ps, "s", x, 2),
        "softmax_lastdim": softmax_lastdim,
        "maxpool_neighbors": lambda x: maxpool_neighbors(T.reshape(x, (5, 2, 2))),
        "gather_rows": lambda x: T.gather_rows(x, idx),
        "norm": lambda x: T.norm(x, axis=-1),
    }
    ops = {}
    for name, fn in raw.items():
        fn = _maybe_corrupt(name, corrupt)(fn)
        w = rng.normal(size=fn(T.Tensor(np.zeros((5, 4)))).shape)
        ops[name] = (lambda f, w_: lambda x: T.tsum(f(x) * w_))(fn, w)
    return ops


def check_primitives(rng, corrupt=None, trials=3):
    out = []
    for name, f in primitive_ops(rng, corrupt).items():
        err = max(T.grad_check(f, rng.normal(size=(5, 4)), h=STEP) for _ in range(trials))
        out.append(CheckResult(name, err, PRIMITIVE_TOL))
    return out


def check_chamfer(rng, corrupt=None):
    b = rng.normal(size=(9, 3))
    fn = _maybe_corrupt("chamfer", corrupt)(lambda a: chamfer(a, b))
    return CheckResult("chamfer", T.grad_check(fn, rng.normal(size=(7, 3)), h=STEP),
                       PRIMITIVE_TOL)


def check_ita(rng, corrupt=None, n=12, c=6, m=6, k=4):
    ps = ParamStore()
    add_topo_params(ps, "t", m, rng)
    add_ita_params(ps, "a", c, m, rng)
    pts = rng.normal(size=(n, 3))
    w = rng.normal(size=(n, m))
    ita = _maybe_corrupt("intertwining_attention", corrupt)(intertwining_attention)

    def f(code):
        topo = topological_embedding(ps, "t", pts, pts, k)
        return T.tsum(ita(ps, "a", code, topo) * w)
    err_code = T.grad_check(f, rng.normal(size=(n, c)), h=STEP)
    # relative vectors carry the positional gradient through the lift
    code0 = rng.normal(size=(n, c))

    def g(p):
        topo = topological_embedding(ps, "t", p, p, k)
        return T.tsum(ita(ps, "a", T.Tensor(code0), topo) * w)
    err_pos = T.grad_check(g, pts, h=STEP)
    return CheckResult("intertwining_attention", max(err_code, err_pos), PRIMITIVE_TOL)


def check_upa(rng, corrupt=None, n=10, c=6, k=4):
    ps = ParamStore()
    add_topo_params(ps, "t", c, rng)
    for name in ("phi", "psi", "gamma0", "gamma1", "lift0", "lift1", "merge"):
        ps.add_linear("u." + name, c, c, rng)
    ps.add_resmlp("u.value", 2 * c, c, rng)
    ps.add_linear("u.split", c, 2 * c, rng)
    pts = rng.normal(size=(n, 3))
    k_in = T.Tensor(rng.normal(size=(n, c)))
    x_u = T.Tensor(rng.normal(size=(n, c)))
    w = rng.normal(size=(2 * n, c))
    upa = _maybe_corrupt("up_preserving_attention", corrupt)(up_preserving_attention)

    def f(q):
        topo = topological_embedding(ps, "t", pts, pts, k)
        return T.tsum(upa(ps, "u", q, k_in, x_u, topo, 2) * w)
    return CheckResult("up_preserving_attention", T.grad_check(f, rng.normal(size=(n, c)), h=STEP),
                       PRIMITIVE_TOL)


def end_to_end_setup(n=64, seed=0, widths=None):
    """Small-width model with non-zero heads and a random cloud.

    Random heads keep the up-phase children apart so no neighbor search
    sees exact duplicates.
    """
    if widths is None:
        cfg = ModelConfig(n_points=n)
    else:
        cfg = ModelConfig(n_points=n, k=8, c1=widths, c2=widths, c3=widths, c=widths, m=widths)
    params = init_params(cfg, seed=seed, zero_heads=False)
    cloud = np.random.default_rng(seed + 1).normal(size=(n, 3))
    cloud /= np.linalg.norm(cloud, axis=1).max()
    return cfg, params, cloud


def end_to_end_loss(params, cfg, cloud, corrupt=None):
    out = recover(params, cloud, cfg)
    geo = geometry_loss(out.r0, out.r1, out.r2, cloud)
    top = topo_constraint_loss(out.k0, out.k1, out.k2)
    tensor = total_loss(geo, top, cfg.lam).tensor
    if corrupt == "end_to_end":
        tensor = T.scale_grad(tensor, CORRUPT_FACTOR)
    return tensor


def check_end_to_end(n=64, seed=0, coords_per_param=1, corrupt=None, names=None, widths=None):
    """FD check of the total loss against sampled coordinates of every parameter.

    Returns the result, the worst parameter's name and the number of probed
    coordinates that sat on a piecewise boundary.
    """
    cfg, params, cloud = end_to_end_setup(n, seed, widths)
    rng = np.random.default_rng(seed + 2)
    worst, worst_name, kinks = 0.0, "", 0
    for name in names or list(params.entries):
        size = params[name].data.size
        coords = rng.choice(size, min(coords_per_param, size), replace=False)
        err, k = param_grad_check(params, name,
                                  lambda: end_to_end_loss(params, cfg, cloud, corrupt), coords)
        kinks += k
        if err >= worst:
            worst, worst_name = err, name
    note = f"worst {worst_name}, {kinks} probes on piecewise boundaries"
    return CheckResult(f"end_to_end(n={n})", worst, END_TO_END_TOL, note), worst_name, kinks


def run_suite(seed=0, corrupt=None, end_to_end=True, coords_per_param=1):
    """All checks; ``corrupt`` names one op whose gradient is deliberately scaled."""
    rng = np.random.default_rng(seed)
    report = GradReport()
    report.results.extend(check_primitives(rng, corrupt))
    report.results.append(check_chamfer(rng, corrupt))
    report.results.append(check_ita(rng, corrupt))
    report.results.append(check_upa(rng, corrupt))
    if end_to_end:
        report.results.append(check_end_to_end(seed=seed, corrupt=corrupt,
                                               coords_per_param=coords_per_param)[0])
    return report


CHECK_NAMES = ("mlp_relu", "mlp_tanh", "resmlp", "point_split_deconv", "softmax_lastdim",
               "maxpool_neighbors", "gather_rows", "norm", "chamfer", "intertwining_attention",
               "up_preserving_attention", "end_to_end")
