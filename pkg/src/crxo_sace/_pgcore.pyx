# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Polya-Gamma PG(1, c) sampler.

Scalar exact sampler (alternating-series accept/reject, Devroye-style) driven
by a numpy BitGenerator.  This is the hot kernel of the Gibbs sweep: two PG
draws per individual per iteration.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport M_PI, cosh, erfc, exp, fabs, log, sqrt

from numpy.random cimport bitgen_t

cdef double TRUNC = 0.64
cdef double LOG_HALF = -0.6931471805599453


cdef inline double _uniform(bitgen_t *rng) noexcept:
    return rng.next_double(rng.state)


cdef inline double _exponential(bitgen_t *rng) noexcept:
    cdef double u = rng.next_double(rng.state)
    while u <= 0.0:
        u = rng.next_double(rng.state)
    return -log(u)


cdef inline double _normal(bitgen_t *rng) noexcept:
    # Box-Muller; one normal per pair of uniforms keeps the stream stateless.
    cdef double u1 = rng.next_double(rng.state)
    cdef double u2 = rng.next_double(rng.state)
    while u1 <= 0.0:
        u1 = rng.next_double(rng.state)
    return sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2)


from libc.math cimport cos


cdef inline double _norm_cdf(double x) noexcept:
    return 0.5 * erfc(-x * 0.7071067811865476)


cdef double _igauss_cdf(double t, double z) noexcept:
    # CDF at t of inverse-Gaussian(mu=1/z, lambda=1); z >= 0, z == 0 is the
    # Levy limit.  Second term evaluated in log space to survive large z.
    cdef double rt = 1.0 / sqrt(t)
    cdef double term1 = _norm_cdf(rt * (t * z - 1.0))
    cdef double phi = _norm_cdf(-rt * (t * z + 1.0))
    cdef double term2
    if phi <= 0.0:
        term2 = 0.0
    else:
        term2 = exp(2.0 * z + log(phi))
    return term1 + term2


cdef double _series_coef(int n, double x) noexcept:
    cdef double k = n + 0.5
    if x <= TRUNC:
        return M_PI * k * exp(-2.0 * k * k / x) * (2.0 / (M_PI * x)) ** 1.5
    return M_PI * k * exp(-0.5 * k * k * M_PI * M_PI * x)


cdef double _rtigauss(double z, double t, bitgen_t *rng) noexcept:
    # Inverse-Gaussian(mu=1/z, lambda=1) truncated to (0, t].
    cdef double e1, e2, x, alpha, mu, y, u
    if z < 1.0 / t:
        # mu > t: tilt a truncated Levy proposal.
        while True:
            while True:
                e1 = _exponential(rng)
                e2 = _exponential(rng)
                if e1 * e1 <= 2.0 * e2 / t:
                    break
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            alpha = exp(-0.5 * z * z * x)
            if _uniform(rng) <= alpha:
                return x
    else:
        mu = 1.0 / z
        while True:
            y = _normal(rng)
            y = y * y
            x = mu + 0.5 * mu * mu * y - 0.5 * mu * sqrt(4.0 * mu * y + (mu * y) * (mu * y))
            u = _uniform(rng)
            if u > mu / (mu + x):
                x = mu * mu / x
            if x <= t:
                return x


cdef double _sample_jstar(double z, bitgen_t *rng) noexcept:
    # J*(1, z) by the alternating-series method; z >= 0.
    cdef double fz = M_PI * M_PI * 0.125 + 0.5 * z * z
    cdef double p = (M_PI / (2.0 * fz)) * exp(-fz * TRUNC)
    cdef double q = 2.0 * exp(-z) * _igauss_cdf(TRUNC, z)
    cdef double ratio = p / (p + q)
    cdef double x, s, y
    cdef int n
    while True:
        if _uniform(rng) < ratio:
            x = TRUNC + _exponential(rng) / fz
        else:
            x = _rtigauss(z, TRUNC, rng)
        s = _series_coef(0, x)
        y = _uniform(rng) * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x)
                if y <= s:
                    return x
            else:
                s += _series_coef(n, x)
                if y > s:
                    break


def pg1_fill(bit_generator, double[::1] c, double[::1] out):
    """Fill ``out`` with PG(1, c[i]) draws consuming ``bit_generator``."""
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator")
    cdef Py_ssize_t i, n = c.shape[0]
    cdef double z
    for i in range(n):
        z = 0.5 * fabs(c[i])
        out[i] = 0.25 * _sample_jstar(z, rng)
    return None
