"""Binary checkpoint format.

Layout, all little-endian::

    b"TGEO" | u32 version
    u32 x 8  n_points k c1 c2 c3 c m r
    f64      lambda
    u32      entry count
    per entry: u16 name length | utf-8 name | u8 ndim | u32 x ndim shape | f32 payload
"""
import struct

import numpy as np

from .config import ModelConfig
from .errors import ConfigError
from .nn import ParamStore

MAGIC = b"TGEO"
VERSION = 1
_HYPER_INT = ("n_points", "k", "c1", "c2", "c3", "c", "m", "r")


def to_bytes(params):
    cfg = ModelConfig(**params.metadata)
    out = [MAGIC, struct.pack("<I", VERSION)]
    out.append(struct.pack("<8I", *(getattr(cfg, f) for f in _HYPER_INT)))
    out.append(struct.pack("<d", cfg.lam))
    out.append(struct.pack("<I", len(params)))
    for name, t in params.items():
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<B", t.data.ndim))
        out.append(struct.pack(f"<{t.data.ndim}I", *t.data.shape))
        out.append(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
    return b"".join(out)


def from_bytes(buf):
    if buf[:4] != MAGIC:
        raise ConfigError("not a checkpoint file (bad magic)")
    pos = 4
    (version,) = struct.unpack_from("<I", buf, pos)
    if version != VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    pos += 4
    ints = struct.unpack_from("<8I", buf, pos)
    pos += 32
    (lam,) = struct.unpack_from("<d", buf, pos)
    pos += 8
    meta = dict(zip(_HYPER_INT, ints), lam=lam)
    ModelConfig(**meta)
    params = ParamStore(meta)
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        if pos + 4 * size > len(buf):
            raise ConfigError(f"truncated payload for {name!r}")
        data = np.frombuffer(buf, dtype="<f4", count=size, offset=pos).reshape(shape)
        pos += 4 * size
        params.add(name, data.astype(np.float64))
    if pos != len(buf):
        raise ConfigError("trailing bytes after the last checkpoint entry")
    return params


def save(params, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(params))


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def round_trip(params):
    """Parameters as they will read back from disk (float32-rounded)."""
    return from_bytes(to_bytes(params))
