"""ASCII XYZ point files: one ``x y z`` line per point, ``#`` comments allowed."""
import os

import numpy as np

from .errors import CardinalityError, DataError


def read_xyz(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 coordinates, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise DataError(f"{path}:{lineno}: not a number in {line!r}") from None
    if not rows:
        raise CardinalityError(f"{path}: no points")
    pts = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise DataError(f"{path}: non-finite coordinate")
    return pts


def format_xyz(points, comment=None):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise CardinalityError(f"expected an (n, 3) array, got shape {pts.shape}")
    lines = [f"# {comment}"] if comment else []
    # 9 significant digits keep every coordinate within 1e-6 of the original
    lines.extend(f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in pts)
    return "\n".join(lines) + "\n"


def write_xyz(path, points, comment=None):
    text = format_xyz(points, comment)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
