"""Hot loops of the jet engine.

Two implementations of every kernel live here: a numba ``@njit`` version and
a pure-numpy fallback. ``FINSLERPROD_BACKEND`` (``numba`` or ``numpy``) picks
one at import time; :func:`set_backend` switches at runtime. Both produce the
same coefficients up to floating-point summation order.

Kernel arguments are 2-D ``(batch, ncoef)`` float64 arrays plus the product
tables of a jet algebra: ``I``/``J`` are index pairs whose monomials multiply
into monomial ``k``, grouped by ``k`` and delimited by ``starts``.
"""

from __future__ import annotations

import logging
import os

import numpy as np

log = logging.getLogger(__name__)

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _mul_numpy(a, b, I, J, starts):
    prod = a[:, I] * b[:, J]
    return np.add.reduceat(prod, starts, axis=1)


def _compose_numpy(u, taylor, I, J, starts):
    nbatch = u.shape[0]
    size = starts.shape[0]
    order = taylor.shape[1] - 1
    out = np.zeros((nbatch, size))
    out[:, 0] = taylor[:, order]
    for k in range(order - 1, -1, -1):
        out = _mul_numpy(out, u, I, J, starts)
        out[:, 0] += taylor[:, k]
    return out


if numba is not None:

    @numba.njit(cache=True)
    def _mul_numba(a, b, I, J, starts):
        nbatch = a.shape[0]
        size = starts.shape[0]
        total = I.shape[0]
        out = np.empty((nbatch, size))
        for r in range(nbatch):
            for k in range(size):
                lo = starts[k]
                hi = starts[k + 1] if k + 1 < size else total
                acc = 0.0
                for t in range(lo, hi):
                    acc += a[r, I[t]] * b[r, J[t]]
                out[r, k] = acc
        return out

    @numba.njit(cache=True)
    def _compose_numba(u, taylor, I, J, starts):
        nbatch = u.shape[0]
        size = starts.shape[0]
        total = I.shape[0]
        order = taylor.shape[1] - 1
        out = np.zeros((nbatch, size))
        tmp = np.empty(size)
        for r in range(nbatch):
            out[r, 0] = taylor[r, order]
            for step in range(order - 1, -1, -1):
                for k in range(size):
                    lo = starts[k]
                    hi = starts[k + 1] if k + 1 < size else total
                    acc = 0.0
                    for t in range(lo, hi):
                        acc += out[r, I[t]] * u[r, J[t]]
                    tmp[k] = acc
                for k in range(size):
                    out[r, k] = tmp[k]
                out[r, 0] += taylor[r, step]
        return out

else:  # pragma: no cover
    _mul_numba = None
    _compose_numba = None


_IMPLS = {
    "numpy": (_mul_numpy, _compose_numpy),
    "numba": (_mul_numba, _compose_numba),
}

_backend = "numpy"
mul = _mul_numpy
compose = _compose_numpy


def available_backends() -> list[str]:
    return [name for name, impl in _IMPLS.items() if impl[0] is not None]


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` kernels for all subsequent jet arithmetic."""
    global _backend, mul, compose
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; expected one of {sorted(_IMPLS)}")
    if _IMPLS[name][0] is None:
        raise ValueError(f"backend {name!r} is not available (numba not installed)")
    _backend = name
    mul, compose = _IMPLS[name]


def _initial_backend() -> str:
    requested = os.environ.get("FINSLERPROD_BACKEND", "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if numba is not None else "numpy"
    if requested not in _IMPLS:
        log.warning("ignoring FINSLERPROD_BACKEND=%r; using numpy kernels", requested)
        return "numpy"
    if _IMPLS[requested][0] is None:
        log.warning("numba unavailable; using numpy kernels")
        return "numpy"
    return requested


set_backend(_initial_backend())
