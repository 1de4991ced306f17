"""Sequential Monte Carlo ABC with adaptive weights for grouped income shares.

Each population step moves N particles ``(theta_i, x_i, w_i)`` to a smaller
tolerance.  Ancestors are chosen with probabilities ``v_i`` proportional to
``w_i`` times a product-normal kernel between the particle's simulated shares
``x_i`` and the observed shares ``y``; the chosen ``theta`` is perturbed with
a product-normal kernel, new shares are simulated, and the proposal is kept
once ``max_j |x_j - y_j| < eps``.  Importance weights are
``pi(theta) / sum_j v_j K(theta | theta_j)``.

Randomness is drawn from PCG64 streams keyed by ``(root, step, particle,
attempt)``, so a run is bit-identical for any number of worker threads.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from . import gb_family as gb
from ._backend import kernels
from .errors import ConfigError, DataError, ParameterDomainError, StallError
from .gb_family import SubModel
from .grouped_data import GroupedShares, cut_ranks

DEFAULT_STALL_CAP = 10**6
BANDWIDTH_FLOOR = 1e-8
LOG_UNDERFLOW = -745.0
_SMC_KEY = 0
_EVIDENCE_KEY = 1


class KernelUnderflowWarning(RuntimeWarning):
    """Every data-kernel value underflowed; ancestor weights fell back to w."""


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class GammaPrior:
    """Gamma(shape, rate); mean shape / rate."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ConfigError(f"Gamma prior needs positive shape and rate, got "
                              f"({self.shape}, {self.rate})")

    @classmethod
    def from_pair(cls, alpha: float, beta: float, convention: str = "shape-rate") -> GammaPrior:
        if convention == "shape-rate":
            return cls(alpha, beta)
        if convention == "shape-scale":
            return cls(alpha, 1.0 / beta)
        raise ConfigError(f"unknown Gamma convention {convention!r}")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def var(self) -> float:
        return self.shape / self.rate**2

    def in_support(self, x: float) -> bool:
        return x > 0.0

    def logpdf(self, x: float) -> float:
        if x <= 0.0:
            return -math.inf
        return (self.shape * math.log(self.rate) - math.lgamma(self.shape)
                + (self.shape - 1.0) * math.log(x) - self.rate * x)

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.gamma(self.shape, 1.0 / self.rate))


@dataclass(frozen=True)
class UniformPrior:
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.high > self.low:
            raise ConfigError(f"Uniform prior needs low < high, got ({self.low}, {self.high})")

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    @property
    def var(self) -> float:
        return (self.high - self.low) ** 2 / 12.0

    def in_support(self, x: float) -> bool:
        return self.low <= x <= self.high

    def logpdf(self, x: float) -> float:
        if not self.low <= x <= self.high:
            return -math.inf
        return -math.log(self.high - self.low)

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class PriorSpec:
    """Independent marginals on the free coordinates of a submodel."""

    submodel: SubModel
    marginals: Mapping[str, GammaPrior | UniformPrior]

    def __post_init__(self):
        sm = SubModel.coerce(self.submodel)
        object.__setattr__(self, "submodel", sm)
        if set(self.marginals) != set(sm.free_names):
            raise ConfigError(f"{sm.value} prior needs marginals for {sm.free_names}, "
                              f"got {tuple(self.marginals)}")
        object.__setattr__(self, "marginals", dict(self.marginals))

    @classmethod
    def default(cls, submodel, shape: float = 3.0, rate: float = 1.0,
                convention: str = "shape-rate") -> PriorSpec:
        """Gamma(shape, rate) on a, p, q and Uniform(0, 1) on c."""
        sm = SubModel.coerce(submodel)
        g = GammaPrior.from_pair(shape, rate, convention)
        return cls(sm, {n: (UniformPrior() if n == "c" else g) for n in sm.free_names})

    @property
    def names(self) -> tuple[str, ...]:
        return self.submodel.free_names

    @property
    def fixed(self) -> dict[str, float]:
        return self.submodel.fixed

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.marginals[n].mean for n in self.names])

    @property
    def var(self) -> np.ndarray:
        return np.array([self.marginals[n].var for n in self.names])

    def in_support(self, theta) -> bool:
        return all(self.marginals[n].in_support(float(v)) for n, v in zip(self.names, theta))

    def logpdf(self, theta) -> float:
        return sum(self.marginals[n].logpdf(float(v)) for n, v in zip(self.names, theta))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([self.marginals[n].sample(rng) for n in self.names])


# ---------------------------------------------------------------------------
# particle containers


@dataclass(frozen=True)
class ToleranceSchedule:
    eps: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        if not eps:
            raise ConfigError("tolerance schedule is empty")
        if any(not (e > 0 and math.isfinite(e)) for e in eps):
            raise ConfigError(f"tolerances must be positive and finite, got {eps}")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"tolerances must strictly decrease, got {eps}")
        object.__setattr__(self, "eps", eps)

    def __len__(self):
        return len(self.eps)

    def __iter__(self):
        return iter(self.eps)

    def __getitem__(self, i):
        return self.eps[i]


@dataclass(frozen=True)
class Particle:
    theta: np.ndarray
    x: np.ndarray
    w: float


@dataclass
class ParticleSystem:
    """A weighted particle population after ``step`` tolerance levels.

    Row ``i`` of ``theta`` and ``x`` with ``w[i]`` is one particle.
    ``rejections`` holds per-particle rejection counts for every step so far.
    """

    submodel: SubModel
    theta: np.ndarray
    x: np.ndarray
    w: np.ndarray
    step: int
    eps_current: float
    eps_history: list[float] = field(default_factory=list)
    rejections: list[np.ndarray] = field(default_factory=list)
    bandwidths: dict[str, np.ndarray] = field(default_factory=dict)
    fallback_steps: list[int] = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.theta.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return self.submodel.free_names

    @property
    def rejection_counts(self) -> list[int]:
        return [int(r.sum()) for r in self.rejections]

    @property
    def particles(self) -> list[Particle]:
        return [Particle(self.theta[i].copy(), self.x[i].copy(), float(self.w[i]))
                for i in range(self.N)]

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.w**2))


@dataclass(frozen=True)
class EvidenceEstimate:
    log_evidence: float
    acceptances: int
    trials: int

    def __post_init__(self):
        if not 0 <= self.acceptances <= self.trials:
            raise ValueError("acceptances must lie in [0, trials]")

    @property
    def rate(self) -> float:
        return self.acceptances / self.trials if self.trials else 0.0


# ---------------------------------------------------------------------------
# simulation


def distance(x, y) -> float:
    """Maximum absolute componentwise difference."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DataError(f"share vectors differ in shape: {x.shape} vs {y.shape}")
    return float(np.max(np.abs(x - y))) if x.size else 0.0


@lru_cache(maxsize=64)
def _cached_cuts(n: int, grid: tuple[float, ...]) -> np.ndarray:
    cuts = cut_ranks(n, grid)
    cuts.setflags(write=False)
    return cuts


def _summary_index(summary) -> np.ndarray | None:
    if summary is None:
        return None
    idx = np.asarray(tuple(summary), dtype=np.int64)
    if idx.size == 0 or np.any(idx < 1):
        raise DataError(f"summary indices must be positive 1-based integers, got {summary}")
    return idx - 1


def simulate_shares(theta, submodel, n: int, pop_grid, summary=None, rng=None) -> np.ndarray:
    """Interior cumulative income shares of ``n`` GB draws with b = 1.

    ``summary`` lists 1-based interior indices to keep.
    """
    params = SubModel.coerce(submodel).params(theta)
    cuts = _cached_cuts(int(n), tuple(float(v) for v in np.asarray(pop_grid, dtype=float)))
    z = gb.beta_draws(params.p, params.q, int(n), rng)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        x = kernels.gb_cut_shares(z, params.a, params.b, params.c, cuts)
    idx = _summary_index(summary)
    if idx is not None:
        if idx[-1] >= x.size:
            raise DataError(f"summary index {idx[-1] + 1} exceeds {x.size} interior shares")
        x = x[idx]
    return x


def observed_vector(data: GroupedShares, summary=None) -> np.ndarray:
    y = data.interior_inc
    idx = _summary_index(summary)
    if idx is not None:
        if idx[-1] >= y.size:
            raise DataError(f"summary index {idx[-1] + 1} exceeds {y.size} interior shares")
        y = y[idx]
    return np.array(y, dtype=float)


def _stream(root: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(root, spawn_key=key)))


def _root(rng) -> int:
    if rng is None:
        raise ConfigError("a seed or numpy Generator is required")
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63))
    return int(rng)


# ---------------------------------------------------------------------------
# kernels and weights


def weighted_var(values, w=None) -> np.ndarray:
    """Reliability-weighted variance per column: sum w (x - m)^2 / (1 - sum w^2)."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] < 2:
        raise DataError("at least two samples are needed for a bandwidth")
    if w is None:
        w = np.full(v.shape[0], 1.0 / v.shape[0])
    else:
        w = np.asarray(w, dtype=float)
        w = w / w.sum()
    m = w @ v
    denom = 1.0 - np.sum(w * w)
    if denom <= 0:
        return np.zeros(v.shape[1])
    return (w @ (v - m) ** 2) / denom


def bandwidths(values, N: int, d: int, weights=None) -> np.ndarray:
    """Rule-of-thumb widths ``h_s = sigma_s * N^(-1/(d+4))``, floored at 1e-8."""
    sd = np.sqrt(weighted_var(values, weights))
    return np.maximum(sd * float(N) ** (-1.0 / (d + 4)), BANDWIDTH_FLOOR)


def _log_normal_product(y, x, h) -> np.ndarray:
    u = (np.asarray(x, float) - np.asarray(y, float)) / h
    return (-0.5 * np.sum(u * u, axis=-1) - np.sum(np.log(h))
            - 0.5 * h.size * math.log(2.0 * math.pi))


def adaptive_weights(system: ParticleSystem, y, data_bandwidths) -> np.ndarray:
    """Ancestor probabilities ``v_i`` proportional to ``w_i prod_s N(y_s; x_is, h_s^2)``.

    When every log kernel lies below -745 the kernel carries no usable
    information and ``w`` is returned with a :class:`KernelUnderflowWarning`.
    """
    h = np.asarray(data_bandwidths, dtype=float)
    log_k = _log_normal_product(y, system.x, h)
    if not np.any(log_k >= LOG_UNDERFLOW):
        warnings.warn(f"data kernel underflow at step {system.step}; using w",
                      KernelUnderflowWarning, stacklevel=2)
        return system.w / system.w.sum()
    with np.errstate(divide="ignore"):
        log_v = np.log(system.w) + log_k
    log_v -= logsumexp(log_v)
    v = np.exp(log_v)
    return v / v.sum()


def importance_log_weights(new_theta, prev_theta, v, h_theta, prior: PriorSpec) -> np.ndarray:
    """``log pi(theta_i) - log sum_j v_j K(theta_i | theta_j)`` for each new particle."""
    with np.errstate(divide="ignore"):
        log_v = np.log(np.asarray(v, dtype=float))
    log_mix = kernels.log_mixture_density(np.ascontiguousarray(new_theta, dtype=float),
                                          np.ascontiguousarray(prev_theta, dtype=float),
                                          np.ascontiguousarray(log_v),
                                          np.ascontiguousarray(h_theta, dtype=float))
    log_prior = np.array([prior.logpdf(t) for t in new_theta])
    return log_prior - log_mix


def _normalize_log(lw) -> np.ndarray:
    lw = np.asarray(lw, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise DataError("all importance weights are zero")
    w = np.exp(lw - np.max(lw))
    return w / w.sum()


# ---------------------------------------------------------------------------
# population steps


@dataclass(frozen=True)
class _StepContext:
    root: int
    step: int
    eps: float
    prior: PriorSpec
    submodel: SubModel
    y: np.ndarray
    n: int
    grid: tuple[float, ...]
    summary: tuple[int, ...] | None
    cap: int
    prev_theta: np.ndarray | None = None
    cum_v: np.ndarray | None = None
    h_theta: np.ndarray | None = None

    def propose(self, rng) -> np.ndarray:
        if self.prev_theta is None:
            return self.prior.sample(rng)
        j = int(np.searchsorted(self.cum_v, rng.random() * self.cum_v[-1], side="right"))
        j = min(j, self.cum_v.size - 1)
        return self.prev_theta[j] + self.h_theta * rng.standard_normal(self.h_theta.size)

    def __call__(self, i: int):
        attempt = 0
        while True:
            rng = _stream(self.root, _SMC_KEY, self.step, i, attempt)
            theta = self.propose(rng)
            if self.prior.in_support(theta):
                x = simulate_shares(theta, self.submodel, self.n, self.grid, self.summary, rng)
                if np.max(np.abs(x - self.y)) < self.eps:
                    return theta, x, attempt
            attempt += 1
            if attempt >= self.cap:
                raise StallError(
                    f"particle {i} at step {self.step} hit {self.cap} rejections "
                    f"at eps={self.eps:g}", step=self.step, epsilon=self.eps)


def _propagate(ctx: _StepContext, N: int, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(ctx, range(N)))
    else:
        out = [ctx(i) for i in range(N)]
    theta = np.array([o[0] for o in out], dtype=float)
    x = np.array([o[1] for o in out], dtype=float)
    rej = np.array([o[2] for o in out], dtype=np.int64)
    return theta, x, rej


def _grid(data: GroupedShares) -> tuple[float, ...]:
    return tuple(float(v) for v in data.pop_shares)


def _summary_tuple(summary):
    return None if summary is None else tuple(int(i) for i in summary)


def _check_prior(prior: PriorSpec, submodel) -> SubModel:
    sm = SubModel.coerce(submodel)
    if prior.submodel is not sm:
        raise ConfigError(f"prior is for {prior.submodel.value}, model is {sm.value}")
    return sm


def _attach_bandwidths(system: ParticleSystem) -> ParticleSystem:
    d = system.theta.shape[1] + system.x.shape[1]
    system.bandwidths = {
        "theta": bandwidths(system.theta, system.N, d, system.w),
        "x": bandwidths(system.x, system.N, d, system.w),
    }
    return system


def init_step(prior: PriorSpec, submodel, data: GroupedShares, eps0: float, N: int, n: int,
              rng, *, summary=None, stall_cap: int = DEFAULT_STALL_CAP,
              threads: int = 1, _root_key: int | None = None) -> ParticleSystem:
    """Rejection sampling from the prior down to ``eps0``; uniform weights."""
    sm = _check_prior(prior, submodel)
    if N < 2:
        raise ConfigError("at least two particles are required")
    root = _root(rng) if _root_key is None else _root_key
    y = observed_vector(data, summary)
    ctx = _StepContext(root, 0, float(eps0), prior, sm, y, int(n), _grid(data),
                       _summary_tuple(summary), int(stall_cap))
    theta, x, rej = _propagate(ctx, int(N), threads)
    system = ParticleSystem(sm, theta, x, np.full(int(N), 1.0 / N), 0, float(eps0),
                            [float(eps0)], [rej])
    return _attach_bandwidths(system)


def smc_step(system: ParticleSystem, data: GroupedShares, eps_next: float, prior: PriorSpec,
             submodel, n: int, rng, *, summary=None, stall_cap: int = DEFAULT_STALL_CAP,
             threads: int = 1, _root_key: int | None = None) -> ParticleSystem:
    """Move the population to tolerance ``eps_next`` (must not exceed the current one)."""
    sm = _check_prior(prior, submodel)
    if sm is not system.submodel:
        raise ConfigError("particle system and model disagree on the submodel")
    if eps_next > system.eps_current:
        raise ConfigError(f"eps_next={eps_next} exceeds current tolerance {system.eps_current}")
    root = _root(rng) if _root_key is None else _root_key
    y = observed_vector(data, summary)
    if not system.bandwidths:
        _attach_bandwidths(system)
    fell_back = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", KernelUnderflowWarning)
        v = adaptive_weights(system, y, system.bandwidths["x"])
        fell_back = any(issubclass(c.category, KernelUnderflowWarning) for c in caught)
    step = system.step + 1
    ctx = _StepContext(root, step, float(eps_next), prior, sm, y, int(n), _grid(data),
                       _summary_tuple(summary), int(stall_cap), system.theta,
                       np.cumsum(v), system.bandwidths["theta"])
    theta, x, rej = _propagate(ctx, system.N, threads)
    lw = importance_log_weights(theta, system.theta, v, system.bandwidths["theta"], prior)
    new = ParticleSystem(sm, theta, x, _normalize_log(lw), step, float(eps_next),
                         system.eps_history + [float(eps_next)],
                         system.rejections + [rej],
                         fallback_steps=system.fallback_steps + ([step] if fell_back else []))
    return _attach_bandwidths(new)


# ---------------------------------------------------------------------------
# summaries


def weighted_quantile(values, w, probs) -> np.ndarray:
    """Inverse of the weighted empirical CDF (smallest value with F >= prob)."""
    values = np.asarray(values, dtype=float)
    w = np.asarray(w, dtype=float)
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(w[order])
    cw /= cw[-1]
    idx = np.searchsorted(cw, np.asarray(probs, dtype=float) - 1e-12, side="left")
    return values[order][np.minimum(idx, values.size - 1)]


@dataclass(frozen=True)
class Interval:
    mean: float
    lower: float
    upper: float
    median: float = math.nan

    def as_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "lower": self.lower, "upper": self.upper,
                "median": self.median}


def _interval(values, w) -> Interval:
    lo, med, hi = weighted_quantile(values, w, (0.025, 0.5, 0.975))
    m = float(np.sum(w * values) / np.sum(w))
    # guard the containment invariant against summation rounding
    return Interval(min(max(m, lo), hi), float(lo), float(hi), float(med))


def particle_ginis(theta, submodel) -> np.ndarray:
    """Gini coefficient of each parameter row (NaN where the mean diverges)."""
    sm = SubModel.coerce(submodel)
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    full = {"a": 1.0, "c": 1.0, "p": 1.0, "q": 1.0, **sm.fixed}
    cols = {k: np.full(theta.shape[0], v) for k, v in full.items()}
    for j, name in enumerate(sm.free_names):
        cols[name] = theta[:, j]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        _, g = gb.mean_and_gini_many(cols["a"], 1.0, cols["c"], cols["p"], cols["q"])
    return g


@dataclass(frozen=True)
class PosteriorSummary:
    submodel: SubModel
    params: dict[str, Interval]
    gini: Interval
    gini_draws: np.ndarray
    weights: np.ndarray
    infinite_mean_mass: float
    ess: float


def posterior_summary(system: ParticleSystem, submodel=None) -> PosteriorSummary:
    """Weighted means and 95% intervals per parameter and for the Gini coefficient.

    Particles whose mean income is infinite have no Gini coefficient; their
    weight is reported as ``infinite_mean_mass`` and the Gini summary is taken
    over the rest.
    """
    sm = system.submodel if submodel is None else SubModel.coerce(submodel)
    params = {n: _interval(system.theta[:, j], system.w) for j, n in enumerate(sm.free_names)}
    g = particle_ginis(system.theta, sm)
    ok = np.isfinite(g)
    bad_mass = float(system.w[~ok].sum())
    if ok.any():
        gi = _interval(g[ok], system.w[ok])
    else:
        gi = Interval(math.nan, math.nan, math.nan, math.nan)
    return PosteriorSummary(sm, params, gi, g, system.w.copy(), bad_mass, system.ess)


def fit_diagnostic(system: ParticleSystem, y) -> np.ndarray:
    """``|E_w[x_j] - y_j|`` per share component."""
    y = np.asarray(y.interior_inc if isinstance(y, GroupedShares) else y, dtype=float)
    if y.shape != system.x.shape[1:]:
        raise DataError(f"observed vector has shape {y.shape}, particles carry {system.x.shape[1:]}")
    return np.abs(system.w @ system.x - y)


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class TrajectoryRow:
    step: int
    epsilon: float
    param: str
    q025: float
    q50: float
    q975: float
    mean: float


@dataclass
class RunResult:
    system: ParticleSystem
    trajectory: list[TrajectoryRow]
    root_seed: int

    @property
    def rejections(self) -> list[tuple[int, int, float]]:
        """(step, total rejections, average per particle) for each step."""
        return [(t, int(r.sum()), float(r.mean())) for t, r in enumerate(self.system.rejections)]


def _trajectory_rows(system: ParticleSystem, with_gini: bool) -> list[TrajectoryRow]:
    rows = []
    cols = [(n, system.theta[:, j], system.w) for j, n in enumerate(system.names)]
    if with_gini:
        g = particle_ginis(system.theta, system.submodel)
        ok = np.isfinite(g)
        if ok.any():
            cols.append(("G", g[ok], system.w[ok]))
    for name, vals, w in cols:
        iv = _interval(vals, w)
        rows.append(TrajectoryRow(system.step, system.eps_current, name,
                                  iv.lower, iv.median, iv.upper, iv.mean))
    return rows


def run(prior: PriorSpec, submodel, data: GroupedShares, schedule, N: int, n: int,
        summary=None, rng=None, *, stall_cap: int = DEFAULT_STALL_CAP, threads: int = 1,
        trajectory_gini: bool = True, callback=None) -> RunResult:
    """Full adaptive-weight SMC-ABC over ``schedule``."""
    sched = schedule if isinstance(schedule, ToleranceSchedule) else ToleranceSchedule(tuple(schedule))
    root = _root(rng)
    kw = dict(summary=summary, stall_cap=stall_cap, threads=threads, _root_key=root)
    system = init_step(prior, submodel, data, sched[0], N, n, None, **kw)
    trajectory = _trajectory_rows(system, trajectory_gini)
    if callback:
        callback(system)
    for eps in sched.eps[1:]:
        system = smc_step(system, data, eps, prior, submodel, n, None, **kw)
        trajectory += _trajectory_rows(system, trajectory_gini)
        if callback:
            callback(system)
    return RunResult(system, trajectory, root)


def evidence(prior: PriorSpec, submodel, data: GroupedShares, eps_T: float, trials: int,
             n: int, summary=None, rng=None, *, threads: int = 1) -> EvidenceEstimate:
    """Rejection-ABC evidence: log of the prior-predictive acceptance rate at ``eps_T``."""
    sm = _check_prior(prior, submodel)
    if trials < 1:
        raise ConfigError("evidence needs at least one trial")
    root = _root(rng)
    y = observed_vector(data, summary)
    grid, summ = _grid(data), _summary_tuple(summary)

    def trial(i):
        r = _stream(root, _EVIDENCE_KEY, i)
        theta = prior.sample(r)
        x = simulate_shares(theta, sm, n, grid, summ, r)
        return bool(np.max(np.abs(x - y)) < eps_T)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(trial, range(trials)))
    else:
        hits = sum(trial(i) for i in range(trials))
    if hits == 0:
        warnings.warn(f"no acceptances for {sm.value} in {trials} trials at eps={eps_T:g}; "
                      "increase the trial count or the tolerance", RuntimeWarning, stacklevel=2)
        return EvidenceEstimate(-math.inf, 0, trials)
    return EvidenceEstimate(math.log(hits / trials), hits, trials)


# ---------------------------------------------------------------------------
# delimited output


def write_trajectory(rows: Sequence[TrajectoryRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "epsilon", "param", "q2.5", "q50", "q97.5", "mean"])
        for r in rows:
            out.writerow([r.step, repr(r.epsilon), r.param, repr(r.q025), repr(r.q50),
                          repr(r.q975), repr(r.mean)])


def read_trajectory(path) -> list[TrajectoryRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [TrajectoryRow(int(r["step"]), float(r["epsilon"]), r["param"], float(r["q2.5"]),
                              float(r["q50"]), float(r["q97.5"]), float(r["mean"]))
                for r in csv.DictReader(fh)]


def write_rejections(result: RunResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "epsilon", "total_rejections", "mean_per_particle"])
        for (t, tot, avg), eps in zip(result.rejections, result.system.eps_history):
            out.writerow([t, repr(eps), tot, repr(avg)])


def write_particles(system: ParticleSystem, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        xs = [f"x{j + 1}" for j in range(system.x.shape[1])]
        out.writerow(["particle", *system.names, *xs, "weight"])
        for i in range(system.N):
            out.writerow([i, *map(repr, system.theta[i].tolist()),
                          *map(repr, system.x[i].tolist()), repr(float(system.w[i]))])


def read_particles(path) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_particles`: (names, theta, x, w)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    nx = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    names = header[1:len(header) - 1 - nx]
    d = len(names)
    return names, body[:, 1:1 + d], body[:, 1 + d:1 + d + nx], body[:, -1]


__all__ = [
    "GammaPrior", "UniformPrior", "PriorSpec", "ToleranceSchedule", "Particle",
    "ParticleSystem", "EvidenceEstimate", "KernelUnderflowWarning", "distance",
    "simulate_shares", "observed_vector", "bandwidths", "weighted_var", "adaptive_weights",
    "importance_log_weights", "init_step", "smc_step", "run", "RunResult", "TrajectoryRow",
    "weighted_quantile", "Interval", "PosteriorSummary", "posterior_summary",
    "particle_ginis", "fit_diagnostic", "evidence", "write_trajectory", "read_trajectory",
    "write_rejections", "write_particles", "read_particles",
]
