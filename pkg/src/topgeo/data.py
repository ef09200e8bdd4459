"""Synthetic parametric shapes, the three sampling regimes, and augmentation.

A sample is fully described by one manifest line ``kind seed regime n``;
shape dimensions are drawn from ``seed`` within the ranges in
``PARAM_RANGES`` so the line alone regenerates the cloud bit for bit.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import CardinalityError, ConfigError
from .geometry import as_cloud, normalize_unit_sphere

KINDS = ("sphere", "torus", "box_surface", "cylinder", "two_planes_with_hole", "helix")
REGIMES = ("uniform", "random", "partial")

PARAM_RANGES = {
    "sphere": {"radius": (0.5, 2.0)},
    "torus": {"major": (0.6, 1.5), "minor": (0.15, 0.5)},
    "box_surface": {"sx": (0.3, 1.5), "sy": (0.3, 1.5), "sz": (0.3, 1.5)},
    "cylinder": {"radius": (0.3, 1.0), "height": (0.5, 2.5)},
    "two_planes_with_hole": {"size": (1.0, 2.0), "gap": (0.3, 1.2), "hole": (0.1, 0.4)},
    "helix": {"radius": (0.5, 1.0), "pitch": (0.3, 0.8), "turns": (1.5, 3.0), "tube": (0.05, 0.15)},
}

SOURCE_OVERSAMPLE = 4
PARTIAL_ATTEMPTS = 16


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    n: int
    seed: int
    params: dict = field(default_factory=dict)

    def resolved_params(self):
        """Explicit params, else a draw from the kind's ranges keyed by ``seed``."""
        if self.kind not in PARAM_RANGES:
            raise ConfigError(f"unknown shape kind {self.kind!r}")
        ranges = PARAM_RANGES[self.kind]
        rng = np.random.default_rng([self.seed, KINDS.index(self.kind)])
        drawn = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in ranges.items()}
        out = {**drawn, **self.params}
        for name, value in out.items():
            if name not in ranges:
                raise ConfigError(f"{self.kind} has no parameter {name!r}")
            if not value > 0:
                raise ConfigError(f"{self.kind}.{name} must be positive, got {value}")
        if self.kind == "torus" and out["minor"] >= out["major"]:
            raise ConfigError("torus minor radius must be below the major radius")
        if self.kind == "two_planes_with_hole" and out["hole"] >= out["size"] / 2:
            raise ConfigError("hole does not fit inside the plane")
        return out


def _sphere(rng, n, radius):
    v = rng.normal(size=(n, 3))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def _torus(rng, n, major, minor):
    out = np.empty((0, 3))
    while len(out) < n:
        u = rng.uniform(0, 2 * np.pi, 2 * n)
        v = rng.uniform(0, 2 * np.pi, 2 * n)
        # area element is proportional to (major + minor*cos v)
        keep = rng.uniform(0, major + minor, 2 * n) < major + minor * np.cos(v)
        u, v = u[keep], v[keep]
        ring = major + minor * np.cos(v)
        out = np.vstack([out, np.stack([ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)], 1)])
    return out[:n]


def _box(rng, n, sx, sy, sz):
    half = np.array([sx, sy, sz]) / 2
    areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    pts = rng.uniform(-1, 1, size=(n, 3)) * half
    axis = face // 2
    pts[np.arange(n), axis] = np.where(face % 2 == 0, -1.0, 1.0) * half[axis]
    return pts


def _cylinder(rng, n, radius, height):
    side, cap = 2 * np.pi * radius * height, np.pi * radius ** 2
    part = rng.choice(3, size=n, p=np.array([side, cap, cap]) / (side + 2 * cap))
    theta = rng.uniform(0, 2 * np.pi, n)
    rad = np.where(part == 0, radius, radius * np.sqrt(rng.uniform(0, 1, n)))
    z = np.where(part == 0, rng.uniform(-height / 2, height / 2, n),
                 np.where(part == 1, -height / 2, height / 2))
    return np.stack([rad * np.cos(theta), rad * np.sin(theta), z], 1)


def _two_planes(rng, n, size, gap, hole):
    out = np.empty((0, 3))
    while len(out) < n:
        xy = rng.uniform(-size / 2, size / 2, size=(2 * n, 2))
        xy = xy[np.hypot(xy[:, 0], xy[:, 1]) > hole]
        z = np.where(rng.uniform(size=len(xy)) < 0.5, -gap / 2, gap / 2)
        out = np.vstack([out, np.column_stack([xy, z])])
    return out[:n]


def _helix(rng, n, radius, pitch, turns, tube):
    b = pitch / (2 * np.pi)
    speed = np.hypot(radius, b)
    kappa = radius / speed ** 2
    out = np.empty((0, 3))
    while len(out) < n:
        t = rng.uniform(0, 2 * np.pi * turns, 2 * n)
        a = rng.uniform(0, 2 * np.pi, 2 * n)
        # tube area element (1 - kappa*tube*cos a) around a constant-speed curve
        keep = rng.uniform(0, 1 + kappa * tube, 2 * n) < 1 - kappa * tube * np.cos(a)
        t, a = t[keep], a[keep]
        c = np.stack([radius * np.cos(t), radius * np.sin(t), b * t], 1)
        nrm = -np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], 1)
        tan = np.stack([-radius * np.sin(t), radius * np.cos(t), np.full_like(t, b)], 1) / speed
        bin_ = np.cross(tan, nrm)
        off = tube * (np.cos(a)[:, None] * nrm + np.sin(a)[:, None] * bin_)
        out = np.vstack([out, c + off])
    return out[:n]


_SAMPLERS = {
    "sphere": _sphere,
    "torus": _torus,
    "box_surface": _box,
    "cylinder": _cylinder,
    "two_planes_with_hole": _two_planes,
    "helix": _helix,
}


def sample_surface(spec, n=None):
    """Area-uniform surface samples in the shape's own (unnormalized) frame."""
    params = spec.resolved_params()
    rng = np.random.default_rng([spec.seed, KINDS.index(spec.kind), 1])
    return _SAMPLERS[spec.kind](rng, spec.n if n is None else n, **params)


def gen_shape(spec):
    if spec.n < 4 or spec.n % 4:
        raise ConfigError(f"n must be a positive multiple of 4, got {spec.n}")
    return normalize_unit_sphere(sample_surface(spec))[0]


def apply_regime(cloud, regime, rng, n, region_weights=None):
    """Draw ``n`` points from a dense uniform cloud under one sampling regime.

    ``region_weights`` (8 octant weights) overrides the random regime's
    lognormal density bias.
    """
    cloud = as_cloud(cloud)
    if regime == "uniform":
        if len(cloud) < n:
            raise CardinalityError(f"need at least {n} source points, got {len(cloud)}")
        return cloud[rng.choice(len(cloud), n, replace=False)]
    if regime == "random":
        p = _octant_weights(cloud, rng, region_weights)
        return cloud[rng.choice(len(cloud), n, replace=True, p=p)]
    if regime == "partial":
        for _ in range(PARTIAL_ATTEMPTS):
            u = rng.normal(size=3)
            proj = cloud @ (u / np.linalg.norm(u))
            frac = rng.uniform(0.2, 0.4)
            kept = cloud[proj < np.quantile(proj, 1.0 - frac)]
            if len(kept) >= n:
                return kept[rng.choice(len(kept), n, replace=False)]
        raise CardinalityError(f"partial cut left fewer than {n} points {PARTIAL_ATTEMPTS} times")
    raise ConfigError(f"unknown regime {regime!r}")


def _octant_weights(cloud, rng, region_w=None, sigma=0.75):
    if region_w is None:
        region_w = rng.lognormal(0.0, sigma, size=8)
    region_w = np.asarray(region_w, dtype=np.float64)
    if region_w.shape != (8,) or not np.all(region_w > 0):
        raise ConfigError("region_weights must be 8 positive numbers")
    c = cloud - cloud.mean(axis=0)
    octant = (c[:, 0] > 0) * 4 + (c[:, 1] > 0) * 2 + (c[:, 2] > 0)
    w = region_w[octant]
    return w / w.sum()


def make_sample(kind, seed, regime, n):
    """One normalized training/evaluation cloud from a manifest entry."""
    dense = gen_shape(ShapeSpec(kind, n * SOURCE_OVERSAMPLE, seed))
    rng = np.random.default_rng([seed, REGIMES.index(regime), 2])
    return normalize_unit_sphere(apply_regime(dense, regime, rng, n))[0]


def augment(cloud, rng, p_mirror=0.5, p_scale=0.5, p_rotate=0.5, scale_range=(0.8, 1.2)):
    """Random mirror, scale, and yaw rotation, each with its own probability."""
    pts = np.array(cloud, dtype=np.float64)
    draws = rng.uniform(size=3)
    axis = rng.integers(3)
    scale = rng.uniform(*scale_range)
    angle = rng.uniform(0, 2 * np.pi)
    if draws[0] < p_mirror:
        pts[:, axis] = -pts[:, axis]
    if draws[1] < p_scale:
        pts = pts * scale
    if draws[2] < p_rotate:
        c, s = np.cos(angle), np.sin(angle)
        pts = pts @ np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    return normalize_unit_sphere(pts)[0]


# manifests -------------------------------------------------------------------


def make_manifest(count, n, seed=0, kinds=KINDS, regimes=REGIMES):
    rows = []
    for i in range(count):
        regime = regimes[(i // len(kinds)) % len(regimes)]
        rows.append((kinds[i % len(kinds)], seed * 100003 + i, regime, n))
    return rows


def write_manifest(path, rows):
    with open(path, "w") as fh:
        for kind, seed, regime, n in rows:
            fh.write(f"{kind} {seed} {regime} {n}\n")


def read_manifest(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4 or parts[0] not in KINDS or parts[2] not in REGIMES:
                raise ConfigError(f"{path}:{lineno}: expected 'kind seed regime n', got {line!r}")
            rows.append((parts[0], int(parts[1]), parts[2], int(parts[3])))
    return rows


def load_manifest_clouds(rows):
    return [make_sample(*row) for row in rows]
