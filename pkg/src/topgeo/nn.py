"""Parameter store and the layer primitives the model is assembled from."""
import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Tensor


class ParamStore:
    """Named parameter tensors plus the hyperparameter record they were built for.

    Names are dotted paths such as ``dp.ita.phi.weight``. Linear layers are
    stored as ``<prefix>.weight`` with shape (in, out) and ``<prefix>.bias``.
    """

    def __init__(self, metadata=None):
        self.entries = {}
        self.metadata = dict(metadata or {})

    def add(self, name, value):
        if name in self.entries:
            raise ConfigError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.entries[name] = t
        return t

    def __getitem__(self, name):
        return self.entries[name]

    def __contains__(self, name):
        return name in self.entries

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def items(self):
        return self.entries.items()

    def num_values(self):
        return sum(t.data.size for t in self.entries.values())

    def zero_grad(self):
        for t in self.entries.values():
            t.zero_grad()

    def copy(self):
        out = ParamStore(self.metadata)
        for name, t in self.entries.items():
            out.add(name, t.data.copy())
        return out

    def add_linear(self, prefix, n_in, n_out, rng, zero=False):
        # uniform fan-in scaling, the torch nn.Linear default
        bound = 1.0 / np.sqrt(n_in)
        if zero:
            w, b = np.zeros((n_in, n_out)), np.zeros(n_out)
        else:
            w = rng.uniform(-bound, bound, size=(n_in, n_out))
            b = rng.uniform(-bound, bound, size=n_out)
        self.add(prefix + ".weight", w)
        self.add(prefix + ".bias", b)

    def add_resmlp(self, prefix, n_in, n_out, rng, zero_out=False):
        """Residual block ``proj(x) + fc1(relu(fc0(x)))``.

        ``proj`` is omitted (identity) when the widths match. With
        ``zero_out`` both ``proj`` and ``fc1`` start at zero, so the block
        initially outputs exactly zero.
        """
        if n_in != n_out:
            self.add_linear(prefix + ".proj", n_in, n_out, rng, zero=zero_out)
        self.add_linear(prefix + ".fc0", n_in, n_out, rng)
        self.add_linear(prefix + ".fc1", n_out, n_out, rng, zero=zero_out)


def linear(x, weight, bias):
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"input width {x.shape} does not match weight {weight.shape}")
    return T.matmul(x, weight) + bias


def mlp_apply(params, prefix, x, activation="none"):
    """One affine layer ``x @ W + b`` followed by ``activation``."""
    y = linear(x, params[prefix + ".weight"], params[prefix + ".bias"])
    if activation == "relu":
        return T.relu(y)
    if activation == "tanh":
        return T.tanh(y)
    if activation != "none":
        raise ConfigError(f"unknown activation {activation!r}")
    return y


def resmlp_apply(params, prefix, x):
    h = mlp_apply(params, prefix + ".fc0", x, "relu")
    h = mlp_apply(params, prefix + ".fc1", h)
    if prefix + ".proj.weight" in params:
        return mlp_apply(params, prefix + ".proj", x) + h
    if x.shape[-1] != h.shape[-1]:
        raise ShapeError(f"identity residual needs equal widths, got {x.shape} and {h.shape}")
    return x + h


def point_split_deconv(params, prefix, h, r):
    """Stride-``r`` transposed convolution along the point axis.

    The kernel is stored as one (C, r*C') matrix whose column block ``j``
    produces child ``j``: row ``i*r + j`` of the result is
    ``h[i] @ W[:, j*C':(j+1)*C'] + b[j*C':(j+1)*C']``.
    """
    if r < 2:
        raise ConfigError(f"splitting factor must be >= 2, got {r}")
    if h.ndim != 2:
        raise ShapeError(f"point_split_deconv expects a 2D input, got {h.shape}")
    w = params[prefix + ".weight"]
    if w.shape[1] % r:
        raise ShapeError(f"kernel width {w.shape[1]} is not divisible by r={r}")
    y = linear(h, w, params[prefix + ".bias"])
    return T.reshape(y, (h.shape[0] * r, w.shape[1] // r))


def maxpool_neighbors(x):
    if x.ndim != 3:
        raise ShapeError(f"maxpool_neighbors expects N x k x C, got {x.shape}")
    if x.shape[1] == 0:
        raise ShapeError("empty neighborhood")
    return T.max_reduce(x, axis=1)


softmax_lastdim = T.softmax_lastdim
