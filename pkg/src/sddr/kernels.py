"""Hot-kernel dispatch: the compiled extension when it imports, numpy otherwise.

``BACKEND`` names the active implementation; ``use_backend`` switches it at
runtime (the benchmark and the cross-check tests use this).
"""
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

BACKEND = "cython" if _ckernels is not None else "python"
_impl = _BACKENDS[BACKEND]


def available_backends():
    return tuple(_BACKENDS)


def use_backend(name):
    global BACKEND, _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    BACKEND, _impl = name, _BACKENDS[name]


def os_cfar_1d(x, guard, train, k, scale):
    return _impl.os_cfar_1d(x, int(guard), int(train), int(k), float(scale))


def nearest(P, Q):
    return _impl.nearest(P, Q)


def assignment(cost):
    return _impl.assignment(cost)
