"""Polya-Gamma PG(1, c) sampling with a compiled core and a numpy fallback.

The active backend is chosen at import: the Cython extension if it built,
otherwise the vectorized numpy implementation.  Both are exact samplers of
the same alternating-series construction; given one seeded generator their
draw streams differ (scalar vs. array consumption order) but their
distributions are identical.  Set CRXO_SACE_PG_BACKEND=numpy|cython to force
a backend.

A truncated-series sampler (`sample_pg1_series`) is kept as the slow,
independent oracle used by the test suite.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pg_numpy

try:
    from . import _pgcore
except ImportError:  # extension not built: pure-python install
    _pgcore = None

__all__ = ["sample_pg1", "sample_pg1_series", "active_backend", "available_backends"]


def available_backends() -> tuple[str, ...]:
    return ("cython", "numpy") if _pgcore is not None else ("numpy",)


def _default_backend() -> str:
    forced = os.environ.get("CRXO_SACE_PG_BACKEND", "").strip().lower()
    if forced:
        if forced not in ("cython", "numpy"):
            raise ValueError(f"CRXO_SACE_PG_BACKEND={forced!r}; expected cython or numpy")
        if forced == "cython" and _pgcore is None:
            raise ImportError("CRXO_SACE_PG_BACKEND=cython but the extension is not built")
        return forced
    return "cython" if _pgcore is not None else "numpy"


_ACTIVE = _default_backend()


def active_backend() -> str:
    return _ACTIVE


def set_backend(name: str) -> None:
    """Switch the process-wide default backend (tests and benchmarks)."""
    global _ACTIVE
    if name not in ("cython", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "cython" and _pgcore is None:
        raise ValueError("cython backend requested but extension not built")
    _ACTIVE = name


def sample_pg1(c, rng: np.random.Generator, backend: str | None = None):
    """Draw PG(1, c); c may be a scalar or an array (one draw per element).

    The distribution depends on c only through c**2, so negative tilts are
    legal.  Non-finite tilts raise ValueError("invalid tilt").
    """
    arr = np.asarray(c, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("invalid tilt")
    scalar = arr.ndim == 0
    flat = np.ascontiguousarray(np.atleast_1d(arr).ravel())
    which = backend or _ACTIVE
    if which == "cython":
        if _pgcore is None:
            raise ValueError("cython backend requested but extension not built")
        out = np.empty(flat.shape[0])
        with rng.bit_generator.lock:
            _pgcore.pg1_fill(rng.bit_generator, flat, out)
    elif which == "numpy":
        out = _pg_numpy.pg1(flat, rng)
    else:
        raise ValueError(f"unknown backend {which!r}")
    if scalar:
        return float(out[0])
    return out.reshape(arr.shape)


def sample_pg1_series(c, rng: np.random.Generator, terms: int = 2000,
                      chunk: int = 2000):
    """Truncated-series PG(1, c) oracle: (1/2pi^2) sum_k G_k / ((k-1/2)^2 + c^2/(4pi^2)).

    G_k are iid Gamma(1,1).  Truncation at ``terms`` leaves a mean deficit of
    about 1/(2 pi^2 terms), negligible at the default depth.  Kept for testing;
    far too slow for the sweep.
    """
    arr = np.asarray(c, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("invalid tilt")
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()
    k = np.arange(1, terms + 1)
    denom_base = (k - 0.5) ** 2
    out = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], chunk):
        tilt = flat[start:start + chunk]
        denom = denom_base[None, :] + (tilt[:, None] ** 2) / (4.0 * np.pi ** 2)
        g = rng.standard_exponential((tilt.shape[0], terms))
        out[start:start + chunk] = (g / denom).sum(axis=1) / (2.0 * np.pi ** 2)
    if scalar:
        return float(out[0])
    return out.reshape(arr.shape)
