"""Hot numeric kernels with a compiled core and a pure-Python fallback.

The compiled Cython extension is preferred when importable; otherwise the
numpy implementation is used. Selection happens once at import and can be
forced with REGEXPLAIN_KERNELS=compiled|python (default: auto). Both backends
share signatures and cache layout, so callers never need to care which one is
active; `use_backend` exists for tests and benchmarks.
"""

import os

from . import _pykern

_BACKENDS = {"python": _pykern}
try:
    from . import _ckern

    _BACKENDS["compiled"] = _ckern
except ImportError:
    _ckern = None

_requested = os.environ.get("REGEXPLAIN_KERNELS", "auto")
if _requested == "auto":
    _impl = _BACKENDS.get("compiled", _pykern)
elif _requested in _BACKENDS:
    _impl = _BACKENDS[_requested]
else:
    raise ImportError(
        f"REGEXPLAIN_KERNELS={_requested!r} not available; "
        f"choices: auto, {', '.join(sorted(_BACKENDS))}"
    )

HAVE_COMPILED = "compiled" in _BACKENDS


def active_backend():
    return _impl.BACKEND_NAME


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Switch the active backend in-process (tests/benchmarks only)."""
    global _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {sorted(_BACKENDS)}")
    _impl = _BACKENDS[name]


def sym_normalize(w):
    return _impl.sym_normalize(w)


def sym_normalize_vjp(g, cache):
    return _impl.sym_normalize_vjp(g, cache)


def count_triangles(adj):
    return _impl.count_triangles(adj)
