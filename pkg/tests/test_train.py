import numpy as np
import pytest

from topgeo import checkpoint
from topgeo import tensor as T
from topgeo.data import make_sample
from topgeo.errors import ConfigError, NumericError
from topgeo.geometry import fps
from topgeo.metrics import geometry_loss
from topgeo.nn import ParamStore
from topgeo.pipeline import init_params, recover
from topgeo.train import (Adam, TrainConfig, batch_loss, evaluate, fps_baseline_cd, lr_schedule,
                          read_log, train)

SMALL = dict(c1=16, c2=16, c3=16, c=16, m=16)


def scalar_store(w):
    ps = ParamStore()
    ps.add("w", np.array([w], dtype=np.float64))
    return ps


def tiny_clouds(count=4, n=64):
    kinds = ("sphere", "torus", "helix", "box_surface")
    return [make_sample(kinds[i % 4], i, "uniform", n) for i in range(count)]


# adam ------------------------------------------------------------------------------


def test_adam_quadratic():
    ps = scalar_store(1.0)
    opt = Adam(ps)
    for _ in range(200):
        ps.zero_grad()
        w = ps["w"]
        T.tsum(w * w).backward()
        opt.step(ps, 0.1)
    assert abs(ps["w"].data[0]) < 1e-2


@pytest.mark.parametrize("g", [3.0, -0.02, 1e3])
def test_adam_first_step_is_lr_sign(g):
    ps = scalar_store(0.0)
    ps["w"].grad = np.array([g])
    Adam(ps).step(ps, 0.01)
    assert ps["w"].data[0] == pytest.approx(-0.01 * np.sign(g), rel=1e-6)


def test_adam_zero_gradient_is_noop():
    ps = scalar_store(0.7)
    opt = Adam(ps)
    ps["w"].grad = np.zeros(1)
    for _ in range(3):
        opt.step(ps, 0.1)
    assert ps["w"].data[0] == 0.7
    assert opt.m["w"][0] == 0.0 and opt.v["w"][0] == 0.0


def test_adam_missing_gradient_counts_as_zero():
    ps = scalar_store(0.7)
    Adam(ps).step(ps, 0.1)
    assert ps["w"].data[0] == 0.7


def test_adam_shape_mismatch():
    ps = scalar_store(1.0)
    ps["w"].grad = np.zeros(2)
    with pytest.raises(ConfigError):
        Adam(ps).step(ps, 0.1)


# schedule and config ------------------------------------------------------------------


def test_lr_schedule_values():
    cfg = TrainConfig()
    assert lr_schedule(0, cfg) == 0.005
    assert lr_schedule(29, cfg) == 0.005
    assert lr_schedule(30, cfg) == 0.0025
    assert lr_schedule(119, cfg) == pytest.approx(0.000625, rel=1e-15)


def test_train_config_defaults_and_validation():
    cfg = TrainConfig()
    assert (cfg.lr0, cfg.lam, cfg.epochs, cfg.batch_size, cfg.n_points) == (0.005, 1000.0, 20, 8, 256)
    assert cfg.model_config().lam == 1000.0
    for bad in (dict(lr0=0), dict(batch_size=-1), dict(n_points=250), dict(max_steps=-1)):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


def test_from_mapping():
    cfg = TrainConfig.from_mapping({"lr0": "0.01", "epochs": "3", "augment": "false",
                                    "manifest": "m.txt", "lam": "10"})
    assert (cfg.lr0, cfg.epochs, cfg.augment, cfg.manifest, cfg.lam) == (0.01, 3, False,
                                                                          "m.txt", 10.0)
    with pytest.raises(ConfigError):
        TrainConfig.from_mapping({"learning_rate": "0.1"})
    with pytest.raises(ConfigError):
        TrainConfig.from_mapping({"epochs": "three"})
    with pytest.raises(ConfigError):
        TrainConfig.from_mapping({"augment": "maybe"})


# loss assembly and training --------------------------------------------------------------


def test_step_zero_equals_fps_duplication_baseline():
    clouds = tiny_clouds(2)
    cfg = TrainConfig(n_points=64, **SMALL)
    params = init_params(cfg.model_config(), seed=0)
    br = batch_loss(params, clouds, cfg.model_config(), cfg.lam)
    want = 0.0
    for p in clouds:
        fp = p[fps(p, 16)]
        want += float(geometry_loss(fp, np.repeat(fp, 2, 0), np.repeat(fp, 4, 0), p).data)
    assert br.geo == want / 2
    assert br.top == 0.0


def test_train_log_and_determinism(tmp_path):
    clouds = tiny_clouds(4)
    cfg = TrainConfig(n_points=64, batch_size=2, epochs=2, lr0=1e-3, **SMALL)
    a = train(cfg, clouds=clouds, out_dir=str(tmp_path / "a"))
    train(cfg, clouds=clouds, out_dir=str(tmp_path / "b"))
    assert len(a.log) == 4
    assert [r.epoch for r in a.log] == [0, 0, 1, 1]
    for r in a.log:
        assert abs(r.total - (cfg.lam * r.geo + r.top)) <= 1e-9
    assert (tmp_path / "a" / "ckpt.bin").read_bytes() == (tmp_path / "b" / "ckpt.bin").read_bytes()
    rows = read_log(tmp_path / "a" / "train.csv")
    assert [(r.step, r.geo, r.top, r.total) for r in rows] == [(r.step, r.geo, r.top, r.total)
                                                              for r in a.log]


def test_train_max_steps_and_manifest(tmp_path):
    man = tmp_path / "m.txt"
    man.write_text("sphere 0 uniform 64\ntorus 1 random 64\nhelix 2 partial 64\n")
    cfg = TrainConfig(n_points=64, batch_size=1, epochs=5, max_steps=2, manifest=str(man), **SMALL)
    assert len(train(cfg).log) == 2


def test_train_rejects_mismatched_clouds():
    cfg = TrainConfig(n_points=64, **SMALL)
    with pytest.raises(ConfigError):
        train(cfg, clouds=tiny_clouds(1, n=128))
    with pytest.raises(ConfigError):
        train(cfg)


def test_non_finite_loss_names_tensor():
    cfg = TrainConfig(n_points=64, **SMALL)
    params = init_params(cfg.model_config())
    params["dp.head.fc1.bias"].data[...] = np.nan
    with pytest.raises(NumericError, match="'k0'"):
        batch_loss(params, tiny_clouds(1), cfg.model_config(), cfg.lam)
    params = init_params(cfg.model_config())
    params["up2.head.fc1.bias"].data[...] = np.inf
    with pytest.raises(NumericError, match="'k2'"):
        batch_loss(params, tiny_clouds(1), cfg.model_config(), cfg.lam)


def test_train_moves_parameters():
    cfg = TrainConfig(n_points=64, batch_size=2, epochs=1, lr0=1e-3, augment=False, **SMALL)
    start = init_params(cfg.model_config(), seed=0)
    res = train(cfg, clouds=tiny_clouds(2), params=start.copy())
    assert any(not np.array_equal(res.params[n].data, start[n].data) for n in start)


# evaluation ---------------------------------------------------------------------------


def test_evaluate_self_comparison_is_zero():
    cfg = TrainConfig(n_points=64, **SMALL)
    params = init_params(cfg.model_config())
    r2 = evaluate_outputs(params, tiny_clouds(1)[0])
    # zero heads map an FPS-duplicated cloud onto itself
    rows, mean = evaluate(params, [r2])
    assert rows[0].cd == 0.0 and rows[0].hd == 0.0 and rows[0].emd == 0.0


def evaluate_outputs(params, cloud):
    with T.no_grad():
        return recover(params, cloud).r2.data


def test_evaluate_means_and_baseline():
    cfg = TrainConfig(n_points=64, **SMALL)
    params = init_params(cfg.model_config())
    clouds = tiny_clouds(3)
    rows, mean = evaluate(params, clouds, ["a", "b", "c"])
    assert [r.name for r in rows] == ["a", "b", "c"]
    assert mean.cd == pytest.approx(np.mean([r.cd for r in rows]), rel=1e-15)
    # zero heads: R0 is the FPS quarter cloud
    assert rows[0].sample_cd == fps_baseline_cd(clouds[0])
    assert rows[0].emd_mode == "exact"


def test_checkpoint_round_trip_metrics_identical(tmp_path):
    cfg = TrainConfig(n_points=64, **SMALL)
    params = checkpoint.round_trip(init_params(cfg.model_config(), zero_heads=False))
    checkpoint.save(params, tmp_path / "c.bin")
    again = checkpoint.load(tmp_path / "c.bin")
    clouds = tiny_clouds(2)
    assert evaluate(params, clouds) == evaluate(again, clouds)
