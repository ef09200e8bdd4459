import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.spatial.transform import Rotation

from topgeo import kernels
from topgeo.errors import CardinalityError, ConfigError, ShapeError
from topgeo.metrics import (auction_assignment, chamfer, emd, geometry_loss, hausdorff,
                            hungarian, metric_report, topo_constraint_loss, total_loss)
from topgeo.tensor import grad_check


def brute_chamfer(a, b):
    da = [min(math.dist(x, y) for y in b) for x in a]
    db = [min(math.dist(y, x) for x in a) for y in b]
    return sum(da) / len(a) + sum(db) / len(b)


def brute_hausdorff(a, b):
    return max(max(min(math.dist(x, y) for y in b) for x in a),
               max(min(math.dist(y, x) for x in a) for y in b))


def brute_emd(a, b):
    n = len(a)
    return min(sum(math.dist(a[i], b[p[i]]) for i in range(n))
               for p in itertools.permutations(range(n))) / n


def _cd(a, b):
    return float(chamfer(a, b).data)


# chamfer --------------------------------------------------------------------------


def test_chamfer_examples():
    a = np.random.default_rng(0).normal(size=(5, 3))
    assert _cd(a, a) == 0.0
    assert _cd([[0, 0, 0]], [[1, 0, 0]]) == 2.0
    assert _cd([[0, 0, 0], [1, 0, 0]], [[0, 0, 0]]) == 0.5


def test_chamfer_empty():
    with pytest.raises(CardinalityError):
        chamfer(np.zeros((0, 3)), np.zeros((2, 3)))


def test_chamfer_squared_flag():
    assert _cd([[0, 0, 0]], [[2, 0, 0]]) == 4.0
    assert float(chamfer([[0, 0, 0]], [[2, 0, 0]], squared=True).data) == 8.0


def test_metrics_match_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        a, b = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
        assert abs(_cd(a, b) - brute_chamfer(a, b)) <= 1e-12
        assert abs(hausdorff(a, b) - brute_hausdorff(a, b)) <= 1e-12
        if n <= 6:
            assert abs(emd(a, b) - brute_emd(a, b)) <= 1e-12


def test_symmetry_and_identity():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = rng.normal(size=(int(rng.integers(1, 9)), 3))
        b = rng.normal(size=(int(rng.integers(1, 9)), 3))
        assert _cd(a, b) == pytest.approx(_cd(b, a), abs=1e-15)
        assert hausdorff(a, b) == hausdorff(b, a)
        assert _cd(a, b) > 0 and hausdorff(a, b) > 0
        assert _cd(a, a[::-1]) == 0.0 and hausdorff(a, a[::-1]) == 0.0


def test_rigid_invariance():
    rng = np.random.default_rng(3)
    for i in range(20):
        a, b = rng.normal(size=(16, 3)), rng.normal(size=(16, 3))
        rot = Rotation.random(random_state=i).as_matrix()
        t = rng.normal(size=3)
        a2, b2 = a @ rot.T + t, b @ rot.T + t
        assert _cd(a2, b2) == pytest.approx(_cd(a, b), abs=1e-9)
        assert hausdorff(a2, b2) == pytest.approx(hausdorff(a, b), abs=1e-9)
        assert emd(a2, b2) == pytest.approx(emd(a, b), abs=1e-9)


def test_chamfer_gradient_16_points():
    rng = np.random.default_rng(4)
    b = rng.normal(size=(16, 3))
    assert grad_check(lambda a: chamfer(a, b), rng.normal(size=(16, 3))) < 1e-4
    a = rng.normal(size=(16, 3))
    assert grad_check(lambda x: chamfer(a, x), b) < 1e-4


def test_chamfer_tie_routes_gradient_to_lowest_index():
    from topgeo.tensor import Tensor, backward
    b = Tensor(np.array([[1.0, 0, 0], [-1.0, 0, 0]]), requires_grad=True)
    backward(chamfer(np.zeros((1, 3)), b))
    # the query at the origin is equidistant; only b[0] receives its a->b term
    np.testing.assert_allclose(b.grad[0], [1.0 + 0.5, 0, 0])
    np.testing.assert_allclose(b.grad[1], [-0.5, 0, 0])


# hausdorff ---------------------------------------------------------------------------


def test_hausdorff_examples():
    a = np.random.default_rng(5).normal(size=(4, 3))
    assert hausdorff(a, a) == 0.0
    assert hausdorff([[0, 0, 0], [2, 0, 0]], [[0, 0, 0]]) == 2.0


def test_hausdorff_bounds_chamfer():
    rng = np.random.default_rng(6)
    for _ in range(100):
        a = rng.normal(size=(int(rng.integers(1, 20)), 3))
        b = rng.normal(size=(int(rng.integers(1, 20)), 3))
        assert hausdorff(a, b) >= _cd(a, b) / 2


# emd -----------------------------------------------------------------------------------


def test_emd_examples():
    a = np.random.default_rng(7).normal(size=(6, 3))
    assert emd(a, a) == 0.0
    # identity matching costs (0 + sqrt 2) / 2, the swap (1 + 1) / 2
    assert emd([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [0, 1, 0]]) == pytest.approx(math.sqrt(2) / 2,
                                                                                abs=1e-15)


def test_emd_errors():
    with pytest.raises(CardinalityError):
        emd(np.zeros((3, 3)), np.zeros((4, 3)))
    with pytest.raises(ConfigError):
        emd(np.zeros((513, 3)), np.zeros((513, 3)), mode="exact")
    with pytest.raises(ConfigError):
        emd(np.zeros((2, 3)), np.zeros((2, 3)), mode="sinkhorn")


def test_hungarian_matches_scipy():
    rng = np.random.default_rng(8)
    for n in (1, 2, 5, 17, 64):
        cost = rng.random((n, n))
        rows, cols = linear_sum_assignment(cost)
        assign = hungarian(cost)
        assert sorted(assign) == list(range(n))
        assert cost[np.arange(n), assign].sum() == pytest.approx(cost[rows, cols].sum(), abs=1e-12)


def test_auction_near_optimal_and_exact_lower_bound():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        a, b = rng.normal(size=(128, 3)), rng.normal(size=(128, 3))
        ex, ap = emd(a, b, "exact"), emd(a, b, "approximate")
        assert ex <= ap + 1e-12
        worst = max(worst, (ap - ex) / ex)
    assert worst <= 0.01


def test_auction_returns_permutation():
    cost = np.random.default_rng(10).random((30, 30))
    assert sorted(auction_assignment(cost)) == list(range(30))


def test_metric_report_mode_switch():
    rng = np.random.default_rng(11)
    small = metric_report(rng.normal(size=(8, 3)), rng.normal(size=(8, 3)))
    assert small.emd_mode == "exact"
    big = metric_report(rng.normal(size=(520, 3)), rng.normal(size=(520, 3)))
    assert big.emd_mode == "approximate"


def test_kernel_backends_agree_on_assignment():
    rng = np.random.default_rng(12)
    cost = rng.random((40, 40))
    for impl in kernels.BACKENDS.values():
        assert cost[np.arange(40), impl.hungarian(cost)].sum() == pytest.approx(
            cost[np.arange(40), hungarian(cost)].sum(), abs=1e-12)


# losses ------------------------------------------------------------------------------------


def test_geometry_loss_examples():
    p = np.random.default_rng(13).normal(size=(6, 3))
    assert float(geometry_loss(p, p, p, p).data) == 0.0
    o = np.zeros((1, 3))
    assert float(geometry_loss([[1.0, 0, 0]], o, o, o).data) == 2.0


def test_geometry_loss_decreases_toward_target():
    rng = np.random.default_rng(14)
    for _ in range(20):
        p = rng.normal(size=(8, 3))
        gap = np.linalg.norm(p[:, None] - p[None], axis=-1)[np.triu_indices(8, 1)].min()
        # offsets short enough that every point keeps its own target as nearest
        offs = []
        for _ in range(3):
            d = rng.normal(size=(8, 3))
            offs.append(d / np.linalg.norm(d, axis=1, keepdims=True) * gap / 3)
        vals = [float(geometry_loss(*[p + s * d for d in offs], p).data)
                for s in np.linspace(1, 0, 11)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] == 0.0


def test_geometry_loss_gradient():
    rng = np.random.default_rng(15)
    p = rng.normal(size=(16, 3))
    r0, r2 = rng.normal(size=(4, 3)), rng.normal(size=(16, 3))
    assert grad_check(lambda r1: geometry_loss(r0, r1, r2, p), rng.normal(size=(8, 3))) < 1e-4


def test_topo_loss_examples():
    assert float(topo_constraint_loss(np.zeros((1, 3)), np.zeros((2, 3)), np.zeros((4, 3))).data) == 0
    k1 = np.zeros((2, 2))
    assert float(topo_constraint_loss([[1.0, 3.0]], k1, np.zeros((4, 2))).data) == 5.0
    rng = np.random.default_rng(16)
    ks = [rng.normal(size=(m, 3)) for m in (4, 8, 16)]
    base = float(topo_constraint_loss(*ks).data)
    assert float(topo_constraint_loss(*[3 * k for k in ks]).data) == pytest.approx(9 * base,
                                                                                   rel=1e-14)


def test_topo_loss_row_counts():
    with pytest.raises(ShapeError):
        topo_constraint_loss(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((4, 3)))
    with pytest.raises(ShapeError):
        topo_constraint_loss(np.zeros((1, 3)), np.zeros((2, 3)), np.zeros((4, 3)), n=8)


def test_total_loss_examples():
    assert total_loss(0.0, 0.0).total == 0.0
    br = total_loss(0.001, 0.5, 1000)
    assert br.total == pytest.approx(1.5, abs=1e-15)
    assert total_loss(1.0, 0.0).lam == 1000.0
