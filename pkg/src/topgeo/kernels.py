"""Backend selection for the hot geometric kernels.

The compiled extension is used when it imported cleanly; set
``TOPGEO_KERNELS=python`` to force the numpy fallback.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def _select():
    want = os.environ.get("TOPGEO_KERNELS", "").strip().lower()
    if want:
        if want not in BACKENDS:
            raise ImportError(f"kernel backend {want!r} unavailable; have {sorted(BACKENDS)}")
        return want
    return "cython" if "cython" in BACKENDS else "python"


BACKEND = _select()
_impl = BACKENDS[BACKEND]

fps = _impl.fps
knn = _impl.knn
nearest = _impl.nearest
hungarian = _impl.hungarian
auction = _impl.auction
