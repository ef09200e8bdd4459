from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    """Network hyperparameters; defaults are the published N=2048 setting."""

    n_points: int = 2048
    k: int = 16
    c1: int = 128
    c2: int = 256
    c3: int = 512
    c: int = 128
    m: int = 128
    r: int = 2
    lam: float = 1000.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"{f.name} must be positive, got {getattr(self, f.name)}")
        if self.m != self.c:
            # the lifted relations are added directly to C-wide features
            raise ConfigError(f"m must equal c, got m={self.m}, c={self.c}")
        if self.r != 2:
            raise ConfigError("only the 2x2 splitting cascade is supported (r=2)")
        if self.n_points % 16:
            raise ConfigError(f"n_points must be divisible by 16, got {self.n_points}")

    def as_dict(self):
        return asdict(self)
