"""Seedable sampler primitives: stream construction, MVN with jittered
Cholesky, and inverse gamma.  Polya-Gamma sampling lives in :mod:`.pg`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RngStream",
    "sample_mvn",
    "sample_invgamma",
    "cholesky_with_jitter",
    "sample_mvn_from_precision",
]

# Jitter ladder for near-singular covariance/precision factorizations:
# start at 1e-10 of the mean diagonal, escalate tenfold up to 1e-6.
_JITTER_START = 1e-10
_JITTER_STOP = 1e-6


@dataclass(frozen=True)
class RngStream:
    """A reproducible, independent random stream.

    Identical (seed, stream_id) pairs give identical draw sequences; distinct
    stream_ids give statistically independent streams (numpy SeedSequence
    spawn keys).
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def cholesky_with_jitter(mat: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding escalating diagonal jitter on failure.

    Raises numpy.linalg.LinAlgError("covariance not SPD") once the ladder is
    exhausted.
    """
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    base = float(np.mean(np.diag(mat)))
    if not np.isfinite(base) or base <= 0:
        raise np.linalg.LinAlgError("covariance not SPD")
    jitter = _JITTER_START
    eye = np.eye(mat.shape[0])
    while jitter <= _JITTER_STOP:
        try:
            return np.linalg.cholesky(mat + (jitter * base) * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise np.linalg.LinAlgError("covariance not SPD")


def sample_mvn(mean, covariance, rng: np.random.Generator) -> np.ndarray:
    """One multivariate normal draw via Cholesky (with jitter fallback)."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(covariance, dtype=np.float64)
    if cov.shape != (mean.shape[0], mean.shape[0]):
        raise ValueError("covariance shape does not match mean")
    chol = cholesky_with_jitter(cov)
    return mean + chol @ rng.standard_normal(mean.shape[0])


def sample_mvn_from_precision(mean: np.ndarray, precision: np.ndarray,
                              rng: np.random.Generator) -> np.ndarray:
    """Draw from MVN(mean, P^-1) given the precision matrix P.

    Used by every coefficient conditional: factor the precision and perturb
    the mean with a back-solved standard normal.
    """
    from scipy.linalg import solve_triangular

    chol = cholesky_with_jitter(precision)
    z = rng.standard_normal(np.asarray(mean).shape[0])
    return mean + solve_triangular(chol, z, lower=True, trans="T")


def sample_invgamma(shape: float, rate: float, rng: np.random.Generator) -> float:
    """One inverse-gamma draw with density proportional to
    x^(-shape-1) exp(-rate/x).

    With very small shapes (the diffuse 0.001 prior on an empty block) the
    underlying gamma draw can underflow to zero; the inverse-gamma draw is
    then effectively unbounded and is returned as inf, which downstream
    density evaluations surface as a recorded chain failure.
    """
    if not (shape > 0 and rate > 0):
        raise ValueError("inverse-gamma shape and rate must be positive")
    g = rng.gamma(shape)
    return float(rate / g) if g > 0 else float("inf")
