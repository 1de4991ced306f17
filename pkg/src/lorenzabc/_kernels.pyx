# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: incomplete beta, share simulation, SMC mixture density."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, lgamma, log, log1p, pow, INFINITY

cnp.import_array()

cdef double FPMIN = 1e-300
cdef double EPS = 1e-15
cdef int MAXIT = 10000
cdef double LOG_SQRT_2PI = 0.9189385332046727


cdef double _betacf(double a, double b, double x) noexcept nogil:
    cdef double qab = a + b, qap = a + 1.0, qam = a - 1.0
    cdef double c = 1.0, d = 1.0 - qab * x / qap, h, aa, delta
    cdef int m, m2
    if fabs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < EPS:
            break
    return h


cdef double _betainc(double x, double a, double b) noexcept nogil:
    cdef double log_front
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - exp(log_front) * _betacf(b, a, 1.0 - x) / b


def betainc_flat(const double[::1] x, const double[::1] a, const double[::1] b):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _betainc(x[i], a[i], b[i])
    return out


# xs must already be sorted ascending
cdef void _cumulative_cuts(double* xs, Py_ssize_t n, const cnp.int64_t[::1] cuts,
                           double[::1] shares, double[::1] bounds) noexcept nogil:
    cdef Py_ssize_t i, j = 0, m = cuts.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += xs[i]
        if j < m and i + 1 == cuts[j]:
            shares[j] = acc
            bounds[j] = xs[i]
            j += 1
    for j in range(m):
        shares[j] /= acc


def cut_shares(x, const cnp.int64_t[::1] cuts):
    xs_arr = np.array(x, dtype=np.float64, copy=True, order="C")
    cdef double[::1] xs = xs_arr
    cdef Py_ssize_t m = cuts.shape[0]
    shares = np.empty(m)
    bounds = np.empty(m)
    cdef double[::1] s = shares, bd = bounds
    xs_arr.sort()
    with nogil:
        _cumulative_cuts(&xs[0], xs.shape[0], cuts, s, bd)
    return shares, bounds


def gb_cut_shares(z, double a, double b, double c, const cnp.int64_t[::1] cuts):
    # numpy's SIMD power and sort outrun scalar libm pow and std::sort here
    z = np.asarray(z, dtype=np.float64)
    xs_arr = np.power(z / (1.0 - c * z), 1.0 / a)
    if b != 1.0:
        xs_arr *= b
    xs_arr.sort()
    cdef double[::1] xs = xs_arr
    shares = np.empty(cuts.shape[0])
    bounds = np.empty(cuts.shape[0])
    cdef double[::1] s = shares, bd = bounds
    with nogil:
        _cumulative_cuts(&xs[0], xs.shape[0], cuts, s, bd)
    return shares


def log_mixture_density(const double[:, ::1] new, const double[:, ::1] prev,
                        const double[::1] log_v, const double[::1] h):
    cdef Py_ssize_t i, j, s, n_new = new.shape[0], n_prev = prev.shape[0]
    cdef Py_ssize_t dim = new.shape[1]
    cdef double const_term = -dim * LOG_SQRT_2PI, top, acc, u, q
    out = np.empty(n_new)
    terms_arr = np.empty(n_prev)
    cdef double[::1] o = out, terms = terms_arr
    for s in range(dim):
        const_term -= log(h[s])
    with nogil:
        for i in range(n_new):
            top = -INFINITY
            for j in range(n_prev):
                q = 0.0
                for s in range(dim):
                    u = (new[i, s] - prev[j, s]) / h[s]
                    q += u * u
                terms[j] = log_v[j] - 0.5 * q
                if terms[j] > top:
                    top = terms[j]
            if top == -INFINITY:
                o[i] = -INFINITY
                continue
            acc = 0.0
            for j in range(n_prev):
                acc += exp(terms[j] - top)
            o[i] = top + log(acc) + const_term
    return out
