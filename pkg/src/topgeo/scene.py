"""Large-scene recovery by overlapping kNN patches around FPS seeds."""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import CardinalityError, ConfigError
from .geometry import as_cloud, denormalize, fps, knn, normalize_unit_sphere
from .pipeline import config_of, recover

THREADS_ENV = "TOPGEO_THREADS"


@dataclass
class ScenePatch:
    seed_index: int
    indices: np.ndarray
    points: np.ndarray


@dataclass
class SceneResult:
    points: np.ndarray
    patches: list
    num_patch: int


def num_patches(n_points, patch_points, multiplier):
    if patch_points < 1 or multiplier < 1:
        raise ConfigError("patch_points and patch_multiplier must be positive")
    if n_points < patch_points:
        raise CardinalityError(f"scene has {n_points} points, fewer than one patch of {patch_points}")
    return (n_points // patch_points) * multiplier


def make_patches(scene, patch_points=2048, multiplier=4):
    """FPS seeds over the scene, each grouped with its ``patch_points`` nearest points.

    The seed itself belongs to its patch; overlap between patches is kept.
    """
    scene = as_cloud(scene)
    m = num_patches(len(scene), patch_points, multiplier)
    seeds = fps(scene, min(m, len(scene)))
    if m > len(seeds):
        # more patches than points: seeds wrap around in FPS order
        seeds = np.resize(seeds, m)
    nbr = knn(scene[seeds], scene, patch_points)
    return [ScenePatch(int(s), idx, scene[idx]) for s, idx in zip(seeds, nbr.indices)]


def worker_count(n_tasks):
    raw = os.environ.get(THREADS_ENV, "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, min(cap, n_tasks))


def recover_patch(params, patch, cfg=None):
    """Normalize, run the model, and return R2 in the patch's input frame."""
    cfg = cfg or config_of(params)
    norm, rec = normalize_unit_sphere(patch)
    with T.no_grad():
        out = recover(params, norm, cfg)
    return denormalize(out.r2.data, rec)


def recover_scene(params, scene, patch_points=2048, multiplier=4, threads=None):
    """Merged R2 of every patch, concatenated in seed order, in the scene's frame."""
    scene = as_cloud(scene)
    cfg = config_of(params)
    if patch_points != cfg.n_points:
        cfg = type(cfg)(**{**cfg.as_dict(), "n_points": patch_points})
    norm_scene, scene_rec = normalize_unit_sphere(scene)
    patches = make_patches(norm_scene, patch_points, multiplier)
    n_workers = threads or worker_count(len(patches))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            preds = list(pool.map(lambda p: recover_patch(params, p.points, cfg), patches))
    else:
        preds = [recover_patch(params, p.points, cfg) for p in patches]
    merged = denormalize(np.concatenate(preds, axis=0), scene_rec)
    return SceneResult(merged, patches, len(patches))
