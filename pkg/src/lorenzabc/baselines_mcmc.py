"""Likelihood-based baselines: Dirichlet Lorenz-curve and selected-order-statistics MH."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from . import gb_family as gb
from ._backend import kernels
from .abc_smc import GammaPrior, PriorSpec, particle_ginis
from .errors import (ConfigError, DivergingMomentError, InitializationError,
                     LikelihoodDomainError, ParameterDomainError, UnsupportedCombinationError)
from .gb_family import GBParams, SubModel
from .grouped_data import GroupedShares, IncomeShares, OrderStatistics, income_shares, order_statistics

DIRICHLET_MODELS = (SubModel.DA, SubModel.SM)


@dataclass(frozen=True)
class DirichletParams:
    submodel: SubModel
    theta: np.ndarray
    lam: float

    def __post_init__(self):
        sm = SubModel.coerce(self.submodel)
        if sm not in DIRICHLET_MODELS:
            raise UnsupportedCombinationError(
                f"the Dirichlet likelihood needs a closed-form Lorenz curve; {sm.value} has none")
        if not self.lam > 0:
            raise ParameterDomainError(f"lambda must be positive, got {self.lam}")
        object.__setattr__(self, "submodel", sm)
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))

    @property
    def params(self) -> GBParams:
        return self.submodel.params(self.theta)


@dataclass(frozen=True)
class MHConfig:
    iterations: int = 40000
    burn_in: int = 10000
    thin: int = 10
    proposal_scales: tuple[float, ...] | float = 0.1
    seed: int = 0
    adapt: bool = True
    adapt_window: int = 50
    target_accept: tuple[float, float] = (0.3, 0.4)

    def __post_init__(self):
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ConfigError(f"need 0 <= burn_in < iterations, got {self.burn_in}, {self.iterations}")
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")
        scales = np.atleast_1d(np.asarray(self.proposal_scales, dtype=float))
        if np.any(scales <= 0):
            raise ConfigError("proposal scales must be positive")

    @property
    def retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class MHChain:
    names: tuple[str, ...]
    draws: np.ndarray
    iterations: np.ndarray
    log_target: np.ndarray
    accepted: int
    proposed: int
    component_accept: np.ndarray
    final_scales: np.ndarray
    gini_draws: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]


# ---------------------------------------------------------------------------
# likelihoods


def _grid(k: int, pop_grid=None) -> np.ndarray:
    if pop_grid is None:
        return np.linspace(0.0, 1.0, k + 1)
    g = np.asarray(pop_grid, dtype=float)
    if g.size != k + 1:
        raise LikelihoodDomainError(f"population grid has {g.size} points for {k} groups")
    return g


def lorenz_increments(submodel, theta, pop_grid) -> np.ndarray:
    """Lorenz increments over ``pop_grid`` (a full grid from 0 to 1)."""
    sm = SubModel.coerce(submodel)
    theta = np.asarray(theta, dtype=float).ravel()
    if sm not in DIRICHLET_MODELS or theta.size != 2:
        raise UnsupportedCombinationError(f"no closed-form Lorenz curve for {sm.value}")
    a, shape = float(theta[0]), float(theta[1])
    if not (a > 0 and shape > 0 and math.isfinite(a) and math.isfinite(shape)):
        raise ParameterDomainError(f"invalid {sm.value} parameters {tuple(theta)}")
    u = np.asarray(pop_grid, dtype=float)[1:-1]
    inv_a = 1.0 / a
    # same identities as gb_family.lorenz, without per-call validation overhead
    if sm is SubModel.DA:
        if a <= 1.0:
            raise DivergingMomentError(f"mean is infinite for a*q = {a:.4g} <= 1")
        w = np.power(u, 1.0 / shape)
        inner = kernels.betainc_flat(w, np.full(u.size, shape + inv_a), np.full(u.size, 1.0 - inv_a))
    else:
        if a * shape <= 1.0:
            raise DivergingMomentError(f"mean is infinite for a*q = {a * shape:.4g} <= 1")
        v = -np.expm1(np.log1p(-u) / shape)
        inner = kernels.betainc_flat(v, np.full(u.size, 1.0 + inv_a), np.full(u.size, shape - inv_a))
    return np.diff(np.concatenate(([0.0], inner, [1.0])))


def dirichlet_loglik(q, theta, lam: float, submodel, pop_grid=None) -> float:
    """log Gamma(lam) + sum_j [(lam dL_j - 1) log q_j - log Gamma(lam dL_j)].

    ``dL_j`` are Lorenz-curve increments over ``pop_grid`` (equal groups by
    default).
    """
    qv = np.asarray(q.q if isinstance(q, IncomeShares) else q, dtype=float)
    if not lam > 0:
        raise LikelihoodDomainError(f"lambda must be positive, got {lam}")
    try:
        dl = lorenz_increments(submodel, theta, _grid(qv.size, pop_grid))
    except (ParameterDomainError, DivergingMomentError) as exc:
        raise LikelihoodDomainError(str(exc)) from exc
    return dirichlet_loglik_increments(qv, dl, lam)


def dirichlet_loglik_increments(q, dl, lam: float) -> float:
    """Dirichlet log density of shares ``q`` with mean vector ``dl`` and precision ``lam``."""
    dl = np.asarray(dl, dtype=float)
    if np.any(~(dl > 0)):
        raise LikelihoodDomainError(f"Lorenz increments must be positive, got {dl}")
    alpha = lam * dl
    return float(gammaln(lam) + np.sum(xlogy(alpha - 1.0, np.asarray(q, dtype=float))
                                       - gammaln(alpha)))


def _cdf_sf(params: GBParams, x: np.ndarray):
    """(F, 1 - F) with the upper tail taken from the complementary ratio."""
    r = np.power(x / params.b, params.a)
    denom = 1.0 + params.c * r
    z = r / denom
    zc = (1.0 - (1.0 - params.c) * r) / denom
    f = gb.betainc(z, params.p, params.q)
    s = gb.betainc(zc, params.q, params.p)
    return np.atleast_1d(f), np.atleast_1d(s)


def _log_pdf(params: GBParams, x: np.ndarray) -> np.ndarray:
    a, b, c, p, q = params.a, params.b, params.c, params.p, params.q
    r = np.power(x / b, a)
    return (math.log(a) + (a * p - 1.0) * np.log(x) + (q - 1.0) * np.log1p(-(1.0 - c) * r)
            - a * p * math.log(b) - gb.betaln(p, q) - (p + q) * np.log1p(c * r))


def sos_loglik(z, theta, submodel, n: int | None = None) -> float:
    """Joint log density of the selected order statistics ``z_j`` at ranks ``n_j``.

    log n! + (n_1 - 1) log F_1 - log (n_1 - 1)!
      + sum_{j>=2} [(n_j - n_{j-1} - 1) log(F_j - F_{j-1}) - log (n_j - n_{j-1} - 1)!]
      + sum_j log f(z_j) + (n - n_{k-1}) log(1 - F_{k-1}) - log (n - n_{k-1})!
    """
    if isinstance(z, OrderStatistics):
        zs, ranks, n = z.z, z.n_js, z.n if n is None else n
    else:
        zs, ranks = (np.asarray(v) for v in z)
        zs = zs.astype(float)
        ranks = ranks.astype(np.int64)
    if n is None:
        raise LikelihoodDomainError("the sample size n is required")
    if zs.ndim != 1 or zs.size == 0 or zs.shape != ranks.shape:
        raise LikelihoodDomainError("order statistics and ranks must be 1-D of equal length")
    if np.any(zs <= 0) or np.any(np.diff(zs) <= 0):
        raise LikelihoodDomainError("order statistics must be positive and strictly increasing")
    gaps = np.diff(np.concatenate(([0], ranks, [n])))
    if np.any(gaps <= 0):
        raise LikelihoodDomainError("ranks must satisfy 0 < n_1 < ... < n_{k-1} < n")
    params = SubModel.coerce(submodel).params(theta)
    if params.c < 1.0 and zs[-1] >= params.support_upper:
        return -math.inf
    F, S = _cdf_sf(params, zs)
    # interval masses; the difference of survival functions is exact-er in the upper tail
    mass = np.where(F[1:] > 0.5, S[:-1] - S[1:], F[1:] - F[:-1])
    cells = np.concatenate(([F[0]], mass, [S[-1]]))
    counts = gaps.astype(float) - np.concatenate((np.ones(ranks.size), [0.0]))
    if np.any((cells <= 0) & (counts > 0)):
        return -math.inf
    with np.errstate(divide="ignore"):
        log_f = _log_pdf(params, zs)
    out = gammaln(n + 1.0) + np.sum(xlogy(counts, cells) - gammaln(counts + 1.0)) + np.sum(log_f)
    return float(out) if np.isfinite(out) else -math.inf


def lambda_prior_density(lam: float, shape: float, rate: float,
                         convention: str = "shape-rate") -> float:
    """Gamma log density of the Dirichlet precision."""
    if not lam > 0:
        raise ParameterDomainError(f"lambda must be positive, got {lam}")
    if not (shape > 0 and rate > 0):
        raise ParameterDomainError("shape and rate must be positive")
    return GammaPrior.from_pair(shape, rate, convention).logpdf(lam)


# ---------------------------------------------------------------------------
# sampler


def _transforms_for(names: Sequence[str]) -> tuple[str, ...]:
    return tuple("logit" if n == "c" else "log" for n in names)


def _to_free(x: np.ndarray, kinds) -> np.ndarray:
    out = np.empty_like(x)
    for i, k in enumerate(kinds):
        if k == "log":
            out[i] = math.log(x[i])
        elif k == "logit":
            out[i] = math.log(x[i]) - math.log1p(-x[i])
        else:
            out[i] = x[i]
    return out


def _from_free(u: float, kind: str) -> float:
    if kind == "log":
        return math.exp(u)
    if kind == "logit":
        return 1.0 / (1.0 + math.exp(-u))
    return u


def _log_jacobian(x: float, kind: str) -> float:
    if kind == "log":
        return math.log(x)
    if kind == "logit":
        return math.log(x) + math.log1p(-x)
    return 0.0


def mh_sample(log_target: Callable[[np.ndarray], float], prior, config: MHConfig, init,
              *, names: Sequence[str] | None = None, transforms: Sequence[str] | None = None,
              gini: Callable[[np.ndarray], np.ndarray] | None = None) -> MHChain:
    """Single-component Gaussian random-walk Metropolis-Hastings.

    Each sweep updates every coordinate once on its transformed scale (log for
    positive parameters, logit for c, identity if requested).  ``prior`` is any
    object with ``logpdf(vector)`` or ``None`` for a flat prior on the original
    scale; ``log_target`` is the log likelihood.  Proposal scales adapt toward
    30-40% acceptance during burn-in and are frozen afterwards.
    """
    x = np.asarray(init, dtype=float).copy()
    d = x.size
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(d))
    kinds = tuple(transforms) if transforms is not None else _transforms_for(names)
    if len(kinds) != d or len(names) != d:
        raise ConfigError("names/transforms must match the parameter dimension")
    scales = np.broadcast_to(np.asarray(config.proposal_scales, dtype=float), (d,)).copy()
    rng = np.random.default_rng(config.seed)

    def log_post(v: np.ndarray) -> float:
        try:
            lp = prior.logpdf(v) if prior is not None else 0.0
            if not math.isfinite(lp):
                return -math.inf
            ll = float(log_target(v))
        except (LikelihoodDomainError, ParameterDomainError, DivergingMomentError):
            return -math.inf
        if math.isnan(ll):
            return -math.inf
        return ll + lp + sum(_log_jacobian(v[i], kinds[i]) for i in range(d))

    try:
        u = _to_free(x, kinds)
    except ValueError:
        raise InitializationError(f"initial point {x} is outside the parameter domain") from None
    cur = log_post(x)
    if not math.isfinite(cur):
        raise InitializationError(f"log target is not finite at the initial point {x}")

    keep = config.retained
    draws = np.empty((keep, d))
    iters = np.empty(keep, dtype=np.int64)
    lts = np.empty(keep)
    acc_comp = np.zeros(d, dtype=np.int64)
    window = np.zeros(d, dtype=np.int64)
    accepted = proposed = 0
    row = 0
    for t in range(1, config.iterations + 1):
        steps = rng.standard_normal(d)
        logu = np.log(rng.random(d))
        for i in range(d):
            u_new = u[i] + scales[i] * steps[i]
            x_new = x.copy()
            x_new[i] = _from_free(u_new, kinds[i])
            if kinds[i] == "logit" and not 0.0 < x_new[i] < 1.0:
                prop = -math.inf
            elif kinds[i] == "log" and not x_new[i] > 0.0:
                prop = -math.inf
            else:
                prop = log_post(x_new)
            ok = logu[i] < prop - cur
            if ok:
                x, u[i], cur = x_new, u_new, prop
                window[i] += 1
            if t > config.burn_in:
                proposed += 1
                if ok:
                    accepted += 1
                    acc_comp[i] += 1
        if t <= config.burn_in and config.adapt and t % config.adapt_window == 0:
            rate = window / config.adapt_window
            lo, hi = config.target_accept
            step = min(0.5, 2.0 / math.sqrt(t / config.adapt_window))
            scales = np.where(rate < lo, scales * math.exp(-step),
                              np.where(rate > hi, scales * math.exp(step), scales))
            window[:] = 0
        if t > config.burn_in and (t - config.burn_in) % config.thin == 0:
            draws[row], iters[row], lts[row] = x, t, cur
            row += 1
    post = config.iterations - config.burn_in
    chain = MHChain(names, draws, iters, lts, accepted, proposed, acc_comp / post, scales)
    if gini is not None:
        chain.gini_draws = np.asarray(gini(draws), dtype=float)
    return chain


class _JointPrior:
    """PriorSpec on theta with an optional Gamma prior on a trailing lambda."""

    def __init__(self, prior: PriorSpec, lam_prior: GammaPrior | None):
        self.prior = prior
        self.lam_prior = lam_prior
        self.d = len(prior.names)

    def logpdf(self, v) -> float:
        lp = self.prior.logpdf(v[:self.d])
        if self.lam_prior is not None:
            lp += self.lam_prior.logpdf(float(v[self.d]))
        return lp


def _gini_fn(submodel: SubModel, d: int):
    return lambda draws: particle_ginis(draws[:, :d], submodel)


def fit_dirichlet(data: GroupedShares | IncomeShares, submodel, prior: PriorSpec,
                  lam_prior: GammaPrior, config: MHConfig, init=None,
                  pop_grid=None) -> MHChain:
    """MH on (theta, lambda) under the Dirichlet likelihood of the income shares."""
    sm = SubModel.coerce(submodel)
    if sm not in DIRICHLET_MODELS:
        raise UnsupportedCombinationError(
            f"the Dirichlet likelihood needs a closed-form Lorenz curve; {sm.value} has none")
    if isinstance(data, GroupedShares):
        q, grid = income_shares(data), data.pop_shares if pop_grid is None else pop_grid
    else:
        q, grid = data, pop_grid
    d = len(sm.free_names)
    if init is None:
        init = np.concatenate((prior.mean, [lam_prior.mean]))
    return mh_sample(lambda v: dirichlet_loglik(q, v[:d], v[d], sm, grid),
                     _JointPrior(prior, lam_prior), config, init,
                     names=(*sm.free_names, "lambda"), gini=_gini_fn(sm, d))


def fit_sos(data: GroupedShares | OrderStatistics, submodel, prior: PriorSpec,
            config: MHConfig, init=None) -> MHChain:
    """MH on theta under the selected-order-statistics likelihood."""
    sm = SubModel.coerce(submodel)
    os_ = data if isinstance(data, OrderStatistics) else order_statistics(data)
    if init is None:
        init = prior.mean
    return mh_sample(lambda v: sos_loglik(os_, v, sm), prior, config, init,
                     names=sm.free_names, gini=_gini_fn(sm, len(sm.free_names)))


def write_chain(chain: MHChain, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        has_g = chain.gini_draws.size == chain.draws.shape[0]
        out.writerow(["iteration", *chain.names, *(["gini"] if has_g else []), "log_target"])
        for r in range(chain.draws.shape[0]):
            g = [repr(float(chain.gini_draws[r]))] if has_g else []
            out.writerow([int(chain.iterations[r]), *map(repr, chain.draws[r].tolist()), *g,
                          repr(float(chain.log_target[r]))])


def read_chain(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body of a chain dump."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


__all__ = [
    "DirichletParams", "MHConfig", "MHChain", "dirichlet_loglik",
    "dirichlet_loglik_increments", "sos_loglik",
    "lambda_prior_density", "lorenz_increments", "mh_sample", "fit_dirichlet", "fit_sos",
    "write_chain", "read_chain",
]
