"""End-to-end recovery: one down-preservation phase and two cascaded up phases."""
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import ModelConfig
from .decoder import add_decoder_params, up_preserve
from .encoder import add_encoder_params, down_preserve
from .nn import ParamStore


@dataclass
class RecoveryOutput:
    r0: T.Tensor
    r1: T.Tensor
    r2: T.Tensor
    k0: T.Tensor
    k1: T.Tensor
    k2: T.Tensor

    def clouds(self):
        return self.r0.data, self.r1.data, self.r2.data


def init_params(cfg=None, seed=0, zero_heads=True):
    """Fresh parameters; with ``zero_heads`` every displacement starts at exactly zero."""
    cfg = cfg or ModelConfig()
    rng = np.random.default_rng(seed)
    params = ParamStore(cfg.as_dict())
    add_encoder_params(params, cfg, rng, zero_head=zero_heads)
    add_decoder_params(params, cfg, rng, zero_head=zero_heads)
    return params


def config_of(params):
    return ModelConfig(**params.metadata)


def recover(params, p, cfg=None, inspect=None):
    """Sample ``p`` down to N/4 points, then restore N/2 and N.

    Only R0 and the up phases' own features cross between phases.
    ``inspect(name, tensor)`` is called on each phase output as it is produced.
    """
    cfg = cfg or config_of(params)
    inspect = inspect or (lambda name, t: None)
    dp = down_preserve(params, cfg, p)
    inspect("k0", dp.k0)
    inspect("r0", dp.r0)
    up1 = up_preserve(params, "up1", cfg, dp.r0, None, 1)
    inspect("k1", up1.k_feat)
    inspect("r1", up1.points)
    up2 = up_preserve(params, "up2", cfg, up1.points, up1.k_feat, 2)
    inspect("k2", up2.k_feat)
    inspect("r2", up2.points)
    return RecoveryOutput(dp.r0, up1.points, up2.points, dp.k0, up1.k_feat, up2.k_feat)
