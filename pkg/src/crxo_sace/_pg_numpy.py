"""Vectorized numpy fallback for the Polya-Gamma PG(1, c) sampler.

Same alternating-series accept/reject construction as the compiled kernel,
evaluated over whole arrays with rejection masks.  Exact (no truncation
error); slower than the extension but dependency-free.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

_TRUNC = 0.64


def _igauss_cdf(t: float, z: np.ndarray) -> np.ndarray:
    # CDF at t of inverse-Gaussian(mu=1/z, lambda=1); z >= 0 elementwise,
    # with the Levy limit at z == 0.  Second term in log space.
    rt = 1.0 / np.sqrt(t)
    term1 = ndtr(rt * (t * z - 1.0))
    phi = ndtr(-rt * (t * z + 1.0))
    term2 = np.zeros_like(z)
    pos = phi > 0
    term2[pos] = np.exp(2.0 * z[pos] + np.log(phi[pos]))
    return term1 + term2


def _series_coef(n: int, x: np.ndarray) -> np.ndarray:
    k = n + 0.5
    out = np.empty_like(x)
    left = x <= _TRUNC
    xl = x[left]
    out[left] = np.pi * k * np.exp(-2.0 * k * k / xl) * (2.0 / (np.pi * xl)) ** 1.5
    xr = x[~left]
    out[~left] = np.pi * k * np.exp(-0.5 * k * k * np.pi * np.pi * xr)
    return out


def _rtigauss(z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-Gaussian(mu=1/z, lambda=1) draws truncated to (0, TRUNC]."""
    t = _TRUNC
    out = np.empty_like(z)
    small = z < 1.0 / t  # mu > t: tilted truncated-Levy proposal

    idx = np.flatnonzero(small)
    while idx.size:
        m = idx.size
        e1 = rng.standard_exponential(m)
        e2 = rng.standard_exponential(m)
        ok = e1 * e1 <= 2.0 * e2 / t
        x = t / (1.0 + t * e1) ** 2
        accept = ok & (rng.random(m) <= np.exp(-0.5 * z[idx] ** 2 * x))
        out[idx[accept]] = x[accept]
        idx = idx[~accept]

    idx = np.flatnonzero(~small)
    while idx.size:
        m = idx.size
        mu = 1.0 / z[idx]
        y = rng.standard_normal(m) ** 2
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * np.sqrt(4.0 * mu * y + (mu * y) ** 2)
        flip = rng.random(m) > mu / (mu + x)
        x[flip] = (mu[flip] ** 2) / x[flip]
        accept = x <= t
        out[idx[accept]] = x[accept]
        idx = idx[~accept]
    return out


def _series_accept(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Alternating-series accept/reject decision per candidate in x."""
    s = _series_coef(0, x)
    y = rng.random(x.shape[0]) * s
    accept = np.zeros(x.shape[0], dtype=bool)
    undecided = np.ones(x.shape[0], dtype=bool)
    n = 0
    while undecided.any():
        n += 1
        idx = np.flatnonzero(undecided)
        a_n = _series_coef(n, x[idx])
        if n % 2 == 1:
            s[idx] -= a_n
            hit = y[idx] <= s[idx]
            accept[idx[hit]] = True
            undecided[idx[hit]] = False
        else:
            s[idx] += a_n
            miss = y[idx] > s[idx]
            undecided[idx[miss]] = False
    return accept


def pg1(c: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """PG(1, c[i]) draws for an array of tilts."""
    z = 0.5 * np.abs(np.asarray(c, dtype=np.float64))
    n = z.shape[0]
    out = np.empty(n)

    fz = np.pi * np.pi * 0.125 + 0.5 * z * z
    p = (np.pi / (2.0 * fz)) * np.exp(-fz * _TRUNC)
    q = 2.0 * np.exp(-z) * _igauss_cdf(_TRUNC, z)
    ratio = p / (p + q)

    todo = np.arange(n)
    while todo.size:
        m = todo.size
        zt = z[todo]
        x = np.empty(m)
        right = rng.random(m) < ratio[todo]
        x[right] = _TRUNC + rng.standard_exponential(int(right.sum())) / fz[todo][right]
        x[~right] = _rtigauss(zt[~right], rng)
        accept = _series_accept(x, rng)
        out[todo[accept]] = x[accept]
        todo = todo[~accept]
    return 0.25 * out
