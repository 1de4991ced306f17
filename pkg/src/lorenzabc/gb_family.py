"""The five-parameter generalized beta (GB) income distribution and its submodels.

The density is

    f(x) = |a| x^(ap-1) [1 - (1-c)(x/b)^a]^(q-1) / (b^(ap) B(p,q) [1 + c(x/b)^a]^(p+q))

on ``0 < (x/b)^a < 1/(1-c)``.  With ``Z ~ Beta(p, q)`` the variable
``X = b (Z / (1 - cZ))^(1/a)`` is GB distributed, and every integral below
(mean, Gini) is evaluated in that Beta variable.

Nested special cases: GB1 (c=0), GB2 (c=1), Dagum (c=1, q=1) and
Singh-Maddala (c=1, p=1).
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaincinv, betaln, gammaln, roots_legendre

from ._backend import kernels
from .errors import DivergingMomentError, ParameterDomainError

QUAD_START_NODES = 256
QUAD_MAX_NODES = 8192
QUAD_RTOL = 1e-9
QUAD_MAX_ORDER = 256.0


class SubModel(str, enum.Enum):
    GB = "GB"
    GB1 = "GB1"
    GB2 = "GB2"
    DA = "DA"
    SM = "SM"

    @property
    def fixed(self) -> dict[str, float]:
        """Coordinates pinned by this submodel."""
        return dict(_FIXED[self])

    @property
    def free_names(self) -> tuple[str, ...]:
        """Free coordinates during inference, in vector order (b is always fixed)."""
        return _FREE[self]

    def constrain(self, params: GBParams) -> GBParams:
        return GBParams(**{**params.as_dict(), **_FIXED[self]})

    def satisfied_by(self, params: GBParams) -> bool:
        return all(getattr(params, k) == v for k, v in _FIXED[self].items())

    def params(self, theta, b: float = 1.0) -> GBParams:
        """Build a full parameter vector from the free coordinates ``theta``."""
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != len(self.free_names):
            raise ParameterDomainError(
                f"{self.value} expects {len(self.free_names)} free parameters, got {theta.size}")
        values = {"a": 1.0, "b": b, "c": 1.0, "p": 1.0, "q": 1.0}
        values.update(_FIXED[self])
        values.update(zip(self.free_names, map(float, theta)))
        return GBParams(**values)

    @classmethod
    def coerce(cls, value) -> SubModel:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ParameterDomainError(f"unknown submodel {value!r}") from None


_FIXED = {
    SubModel.GB: {},
    SubModel.GB1: {"c": 0.0},
    SubModel.GB2: {"c": 1.0},
    SubModel.DA: {"c": 1.0, "q": 1.0},
    SubModel.SM: {"c": 1.0, "p": 1.0},
}
_FREE = {
    SubModel.GB: ("a", "c", "p", "q"),
    SubModel.GB1: ("a", "p", "q"),
    SubModel.GB2: ("a", "p", "q"),
    SubModel.DA: ("a", "p"),
    SubModel.SM: ("a", "q"),
}


@dataclass(frozen=True)
class GBParams:
    a: float
    b: float = 1.0
    c: float = 1.0
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.p, self.q)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterDomainError(f"non-finite GB parameters {vals}")
        if self.a == 0:
            raise ParameterDomainError("a must be nonzero")
        if self.a < 0:
            raise ParameterDomainError("negative a is not supported")
        if self.b <= 0:
            raise ParameterDomainError(f"b must be positive, got {self.b}")
        if not 0.0 <= self.c <= 1.0:
            raise ParameterDomainError(f"c must lie in [0, 1], got {self.c}")
        if self.p <= 0 or self.q <= 0:
            raise ParameterDomainError(f"p and q must be positive, got p={self.p}, q={self.q}")

    @property
    def support_upper(self) -> float:
        """Upper end of the support (infinite when c = 1)."""
        if self.c == 1.0:
            return math.inf
        return self.b * (1.0 - self.c) ** (-1.0 / self.a)

    def as_dict(self) -> dict[str, float]:
        return {"a": self.a, "b": self.b, "c": self.c, "p": self.p, "q": self.q}

    def has_mean(self) -> bool:
        return self.c < 1.0 or self.a * self.q > 1.0


@dataclass(frozen=True)
class GiniEstimate:
    value: float
    mean: float
    method: str

    def __post_init__(self):
        if self.method not in ("quadrature", "closed_form", "monte_carlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 <= self.value < 1.0:
            raise ValueError(f"Gini value {self.value} outside [0, 1)")
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise DivergingMomentError(f"mean {self.mean} is not a finite positive number")


def betainc(x, p, q):
    """Regularized incomplete beta ratio ``I_x(p, q)``, broadcasting over inputs."""
    x, p, q = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float), np.asarray(q, float))
    flat = kernels.betainc_flat(np.ascontiguousarray(x.ravel()),
                                np.ascontiguousarray(p.ravel()),
                                np.ascontiguousarray(q.ravel()))
    out = flat.reshape(x.shape)
    return out[()] if out.ndim == 0 else out


def pdf(params: GBParams, x):
    x = np.asarray(x, dtype=float)
    a, b, c, p, q = params.a, params.b, params.c, params.p, params.q
    out = np.zeros_like(x)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.power(x / b, a)
        inside = (x > 0) & ((r * (1.0 - c) < 1.0) if c < 1.0 else np.isfinite(r))
        rr = r[inside]
        xx = x[inside]
        log_f = (math.log(a) + (a * p - 1.0) * np.log(xx) + (q - 1.0) * np.log1p(-(1.0 - c) * rr)
                 - a * p * math.log(b) - betaln(p, q) - (p + q) * np.log1p(c * rr))
        out[inside] = np.exp(log_f)
    return out[()] if out.ndim == 0 else out


def cdf(params: GBParams, x):
    x = np.asarray(x, dtype=float)
    a, b, c = params.a, params.b, params.c
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.power(np.maximum(x, 0.0) / b, a)
        z = np.where(np.isinf(r), 1.0 / c if c > 0 else 1.0, r / (1.0 + c * r))
    z = np.clip(np.nan_to_num(z, nan=1.0), 0.0, 1.0)
    if c < 1.0:
        z = np.where(x >= params.support_upper, 1.0, z)
    out = np.clip(betainc(z, params.p, params.q), 0.0, 1.0)
    out = np.where(x <= 0, 0.0, out)
    return out[()] if np.ndim(out) == 0 else out


def _beta_quantile(p: float, q: float, u):
    z = np.asarray(betaincinv(p, q, u), dtype=float)
    # one Newton step against our own incomplete beta keeps cdf(quantile(u)) = u tight
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        dens = np.exp((p - 1.0) * np.log(z) + (q - 1.0) * np.log1p(-z) - betaln(p, q))
        step = (betainc(z, p, q) - u) / dens
        z_new = z - step
    ok = np.isfinite(z_new) & (z_new > 0) & (z_new < 1)
    return np.where(ok, z_new, z)


def quantile(params: GBParams, u):
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)) or np.any(np.isnan(u)):
        raise ParameterDomainError("quantile level must lie strictly inside (0, 1)")
    z = _beta_quantile(params.p, params.q, u)
    x = params.b * np.power(z / (1.0 - params.c * z), 1.0 / params.a)
    return x[()] if x.ndim == 0 else x


def beta_draws(p: float, q: float, size, rng: np.random.Generator):
    """Beta(p, q) variates; inverse-CDF shortcuts when p or q equals one."""
    if q == 1.0:
        return rng.random(size) ** (1.0 / p)
    if p == 1.0:
        return -np.expm1(np.log1p(-rng.random(size)) / q)
    return rng.beta(p, q, size)


def sample(params: GBParams, rng: np.random.Generator, size=None):
    z = beta_draws(params.p, params.q, size, rng)
    return params.b * np.power(z / (1.0 - params.c * z), 1.0 / params.a)


@lru_cache(maxsize=16)
def _legendre01(n: int):
    t, w = roots_legendre(n)
    return (t + 1.0) / 2.0, w / 2.0


def _flush(log_v, floor=-700.0):
    return np.where(log_v < floor, -np.inf, log_v)


def _beta_integrals(a, c, p, q, n):
    """Integrals of g(z) and g(z) I_z(p, q) over (0, 1) for arrays of parameters.

    g(z) = z^(p+1/a-1) (1-z)^(q-1) (1-cz)^(-1/a) / B(p, q), so the first
    integral is mu / b.  The sigmoidal map z = t^k / (t^k + (1-t)^k) makes
    the algebraic endpoint behaviour of g high order in t before the
    Gauss-Legendre rule is applied.
    """
    t, w = _legendre01(n)
    inv_a = 1.0 / a
    e0 = p + inv_a
    e1 = np.where(c == 1.0, q - inv_a, q)
    k = np.clip(np.ceil(4.0 / np.minimum(e0, e1)), 2.0, QUAD_MAX_ORDER)[:, None]
    lt, l1t = np.log(t), np.log1p(-t)
    log_d = np.logaddexp(k * lt, k * l1t)
    log_z = k * lt - log_d
    log_1mz = k * l1t - log_d
    # values below ~1e-304 are flushed to zero: denormal arithmetic is very slow
    z = np.exp(_flush(log_z))
    one_minus_z = np.exp(_flush(log_1mz))
    log_jac = np.log(k) + (k - 1.0) * (lt + l1t) - 2.0 * log_d
    a_, c_, p_, q_ = (v[:, None] for v in (a, c, p, q))
    with np.errstate(divide="ignore"):
        log_1mcz = np.logaddexp(log_1mz, np.log1p(-c_) + log_z)
    log_g = ((p_ + 1.0 / a_ - 1.0) * log_z + (q_ - 1.0) * log_1mz
             - log_1mcz / a_ - betaln(p_, q_) + log_jac)
    g = np.exp(_flush(log_g)) * w
    # upper half through the complement: z rounds to 1 long before 1 - I_z is negligible
    upper = z > 0.5
    cdf_z = np.where(upper, 1.0 - betainc(np.where(upper, one_minus_z, 0.5), q_, p_),
                     betainc(np.where(upper, 0.5, z), p_, q_))
    i0 = g.sum(axis=1)
    i1 = (g * cdf_z).sum(axis=1)
    return i0, i1


def _beta_integrals_chunked(a, c, p, q, n, max_cells=1 << 20):
    rows = max(1, max_cells // n)
    parts = [_beta_integrals(a[s:s + rows], c[s:s + rows], p[s:s + rows], q[s:s + rows], n)
             for s in range(0, a.size, rows)]
    return np.concatenate([x[0] for x in parts]), np.concatenate([x[1] for x in parts])


def mean_and_gini_many(a, b, c, p, q):
    """Vectorized (mean, Gini) by quadrature; NaN where the mean diverges."""
    a, b, c, p, q = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (a, b, c, p, q))
    a, b, c, p, q = np.broadcast_arrays(a, b, c, p, q)
    mu = np.full(a.shape, np.nan)
    gini = np.full(a.shape, np.nan)
    todo = np.flatnonzero((c < 1.0) | (a * q > 1.0))
    prev = None
    max_abs_g = 1.0  # G lies in [0, 1); small G is judged on the absolute scale
    n = QUAD_START_NODES
    while todo.size:
        i0, i1 = _beta_integrals_chunked(a[todo], c[todo], p[todo], q[todo], n)
        cur_mu = i0
        cur_g = 2.0 * i1 / i0 - 1.0
        if prev is not None:
            pm, pg = prev[0][todo], prev[1][todo]
            done = ((np.abs(cur_mu - pm) <= QUAD_RTOL * np.abs(cur_mu))
                    & (np.abs(cur_g - pg) <= QUAD_RTOL * max_abs_g))
        else:
            done = np.zeros(todo.size, dtype=bool)
        mu[todo] = cur_mu
        gini[todo] = cur_g
        if n >= QUAD_MAX_NODES:
            if not done.all():
                warnings.warn(f"Gini quadrature did not converge at {n} nodes for "
                              f"{int((~done).sum())} parameter vectors", RuntimeWarning)
            break
        prev = (mu.copy(), gini.copy())
        todo = todo[~done]
        n *= 2
    return mu * b, gini


def _require_mean(params: GBParams):
    if not params.has_mean():
        raise DivergingMomentError(
            f"mean is infinite for c=1 with a*q = {params.a * params.q:.4g} <= 1")


def mean(params: GBParams) -> float:
    _require_mean(params)
    mu, _ = mean_and_gini_many(params.a, params.b, params.c, params.p, params.q)
    return float(mu[0])


def gini(params: GBParams) -> GiniEstimate:
    """Gini coefficient G = -1 + (2/mu) * integral of x F(x) f(x), by quadrature."""
    _require_mean(params)
    mu, g = mean_and_gini_many(params.a, params.b, params.c, params.p, params.q)
    return GiniEstimate(value=float(min(max(g[0], 0.0), np.nextafter(1.0, 0.0))),
                        mean=float(mu[0]), method="quadrature")


def _closed_form_submodel(submodel, params: GBParams) -> SubModel:
    sm = SubModel.coerce(submodel)
    if sm not in (SubModel.DA, SubModel.SM):
        raise ParameterDomainError(f"closed forms exist only for DA and SM, not {sm.value}")
    if not sm.satisfied_by(params):
        raise ParameterDomainError(f"{params} does not satisfy the {sm.value} constraints")
    _require_mean(params)
    return sm


def _closed_form_mean(sm: SubModel, params: GBParams) -> float:
    a, b = params.a, params.b
    if sm is SubModel.DA:
        log_mu = betaln(params.p + 1.0 / a, 1.0 - 1.0 / a) - betaln(params.p, 1.0)
    else:
        log_mu = betaln(1.0 + 1.0 / a, params.q - 1.0 / a) - betaln(1.0, params.q)
    return b * math.exp(log_mu)


def gini_closed_form(submodel, params: GBParams) -> GiniEstimate:
    """Gamma-function Gini identities for the Dagum and Singh-Maddala cases."""
    sm = _closed_form_submodel(submodel, params)
    a = params.a
    if sm is SubModel.DA:
        p = params.p
        g = math.exp(gammaln(p) + gammaln(2 * p + 1 / a) - gammaln(2 * p) - gammaln(p + 1 / a)) - 1.0
    else:
        q = params.q
        g = 1.0 - math.exp(gammaln(q) + gammaln(2 * q - 1 / a) - gammaln(q - 1 / a) - gammaln(2 * q))
    return GiniEstimate(value=g, mean=_closed_form_mean(sm, params), method="closed_form")


def lorenz(submodel, params: GBParams, u):
    """Closed-form Lorenz curve L(u) for the Dagum and Singh-Maddala cases."""
    sm = _closed_form_submodel(submodel, params)
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    a = params.a
    if sm is SubModel.DA:
        p = params.p
        w = np.power(u, 1.0 / p)
        out = betainc(w, p + 1.0 / a, 1.0 - 1.0 / a)
    else:
        q = params.q
        with np.errstate(divide="ignore"):
            v = -np.expm1(np.log1p(-u) / q)
        out = betainc(v, 1.0 + 1.0 / a, q - 1.0 / a)
    out = np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, out))
    return out[()] if out.ndim == 0 else out


def gini_monte_carlo(params: GBParams, n: int, rng: np.random.Generator, batches: int = 100):
    """Monte-Carlo Gini E|X1 - X2| / (2 mu) with a batch-means standard error.

    Returns ``(estimate, standard_error)``.
    """
    x = sample(params, rng, n)

    def _g(v):
        v = np.sort(v)
        m = v.size
        ranks = np.arange(1, m + 1)
        mean_diff = 2.0 * np.sum((2 * ranks - m - 1) * v) / (m * (m - 1))
        return mean_diff / (2.0 * v.mean())

    per_batch = np.array([_g(chunk) for chunk in np.array_split(x, batches)])
    return _g(x), per_batch.std(ddof=1) / math.sqrt(batches)
