"""Learned point cloud sampling and coarse-to-fine recovery on numpy."""
from .config import ModelConfig
from .errors import (CardinalityError, ConfigError, DataError, DegenerateInputError,
                     NumericError, ShapeError, TopGeoError)
from .geometry import denormalize, fps, knn, normalize_unit_sphere
from .kernels import BACKEND
from .metrics import chamfer, emd, hausdorff, metric_report
from .pipeline import RecoveryOutput, init_params, recover

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CardinalityError",
    "ConfigError",
    "DataError",
    "DegenerateInputError",
    "ModelConfig",
    "NumericError",
    "RecoveryOutput",
    "ShapeError",
    "TopGeoError",
    "chamfer",
    "denormalize",
    "emd",
    "fps",
    "hausdorff",
    "init_params",
    "knn",
    "metric_report",
    "normalize_unit_sphere",
    "recover",
]
