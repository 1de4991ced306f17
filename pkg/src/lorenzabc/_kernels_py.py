"""Pure-NumPy implementations of the hot kernels.

Used when the compiled extension is unavailable or disabled with
``LORENZABC_PURE_PYTHON=1``.  Signatures match ``_kernels`` and results
agree with it to rounding error.
"""
import numpy as np
from scipy.special import gammaln

_FPMIN = 1e-300
_EPS = 1e-15
_MAXIT = 10000
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta ratio (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    out = np.empty_like(x)
    idx = np.arange(x.size)
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        done = np.abs(delta - 1.0) < _EPS
        if done.any():
            out[idx[done]] = h[done]
            keep = ~done
            if not keep.any():
                return out
            idx, a, b, x, qab, qap, qam = (v[keep] for v in (idx, a, b, x, qab, qap, qam))
            c, d, h = c[keep], d[keep], h[keep]
    out[idx] = h
    return out


def betainc_flat(x, a, b):
    """Regularized incomplete beta ``I_x(a, b)`` on equal-length 1-D arrays."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.where(x <= 0.0, 0.0, 1.0)
    inner = (x > 0.0) & (x < 1.0)
    if not inner.any():
        return out
    xi, ai, bi = x[inner], a[inner], b[inner]
    with np.errstate(divide="ignore"):
        log_front = (gammaln(ai + bi) - gammaln(ai) - gammaln(bi)
                     + ai * np.log(xi) + bi * np.log1p(-xi))
    lower = xi < (ai + 1.0) / (ai + bi + 2.0)
    res = np.empty_like(xi)
    if lower.any():
        al, bl, xl = ai[lower], bi[lower], xi[lower]
        res[lower] = np.exp(log_front[lower]) * _betacf(al, bl, xl) / al
    upper = ~lower
    if upper.any():
        au, bu, xu = ai[upper], bi[upper], xi[upper]
        res[upper] = 1.0 - np.exp(log_front[upper]) * _betacf(bu, au, 1.0 - xu) / bu
    out[inner] = res
    return out


def cut_shares(x, cuts):
    """Sort incomes and return cumulative shares and boundary values at ``cuts``.

    ``cuts`` holds 1-based ranks; the share at rank ``r`` is the sum of the
    ``r`` smallest values over the total, both accumulated left to right.
    """
    xs = np.sort(np.asarray(x, dtype=np.float64))
    cs = np.cumsum(xs)
    cuts = np.asarray(cuts, dtype=np.int64)
    return cs[cuts - 1] / cs[-1], xs[cuts - 1]


def gb_cut_shares(z, a, b, c, cuts):
    """Map Beta draws through the GB transform, then take cumulative shares."""
    z = np.asarray(z, dtype=np.float64)
    x = b * np.power(z / (1.0 - c * z), 1.0 / a)
    return cut_shares(x, cuts)[0]


def log_mixture_density(new, prev, log_v, h):
    """``log sum_j exp(log_v[j]) * prod_s N(new[i, s]; prev[j, s], h[s]**2)``."""
    new = np.asarray(new, dtype=np.float64)
    prev = np.asarray(prev, dtype=np.float64)
    log_v = np.asarray(log_v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    const = -np.sum(np.log(h)) - h.size * _LOG_SQRT_2PI
    out = np.empty(new.shape[0])
    for i in range(new.shape[0]):
        u = (new[i] - prev) / h
        terms = log_v - 0.5 * np.sum(u * u, axis=1)
        top = terms.max()
        if not np.isfinite(top):
            out[i] = -np.inf
            continue
        out[i] = top + np.log(np.sum(np.exp(terms - top))) + const
    return out
