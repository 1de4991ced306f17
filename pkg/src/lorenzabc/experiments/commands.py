"""Implementations behind the command-line subcommands.

Each ``cmd_*`` takes a validated :class:`RunConfig`, writes its outputs under
``config.output_dir`` and returns a small result object for callers and tests.
"""
from __future__ import annotations

import csv
import io
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import abc_smc
from .. import baselines_mcmc as mcmc
from .. import gb_family as gb
from .. import grouped_data as gd
from ..errors import (ConfigError, DataError, EmptyStudyError, LorenzABCError, ResolutionError,
                      UnsupportedCombinationError)
from ..gb_family import SubModel
from .config import RunConfig
from .reports import (BoundsSummary, FitReport, ReplicateRecord, StudyResult, dump, load,
                      provenance, read_fit_report, read_study_result, write_fit_report,
                      write_study_result)
from .studies import DIRICHLET_LAMBDA_RATES, STUDY_METHODS, get_study

# spawn-key prefixes; 0 and 1 belong to the SMC engine
_DATA_KEY = 2
_FIT_KEY = 3
_DIAG_KEY = 4
_DIAG_DRAWS = 200


def _out(cfg: RunConfig) -> Path:
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {cfg.output_dir}: {exc.strerror}") from None
    return cfg.output_dir


def _need_submodel(cfg: RunConfig) -> SubModel:
    if cfg.submodel is None:
        raise ConfigError("submodel is required for this command")
    return cfg.submodel


def data_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_DATA_KEY, *key)))


def fit_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(_FIT_KEY, *key)).generate_state(1, np.uint64)[0])


def theta_from(sm: SubModel, params: dict[str, float]) -> np.ndarray:
    free = set(sm.free_names)
    missing = free - set(params)
    extra = set(params) - free - set(sm.fixed)
    if missing or extra:
        raise ConfigError(f"{sm.value} needs parameters {list(sm.free_names)}; "
                          f"got {sorted(params)}")
    for k, v in sm.fixed.items():
        if k in params and params[k] != v:
            raise ConfigError(f"{sm.value} fixes {k}={v}, got {params[k]}")
    return np.array([params[n] for n in sm.free_names], dtype=float)


def simulate_incomes(sm: SubModel, theta, n: int, rng) -> np.ndarray:
    return gb.sample(sm.params(theta), rng, n)


def simulate_grouped(sm: SubModel, theta, n: int, k: int, rng) -> gd.GroupedShares:
    """``n`` GB draws grouped into ``k`` equal population classes."""
    if n < k:
        raise ResolutionError(f"n={n} observations cannot fill k={k} groups")
    return gd.from_sample(simulate_incomes(sm, theta, n, rng), np.linspace(0.0, 1.0, k + 1))


def true_gini(sm: SubModel, theta) -> float:
    return gb.gini(sm.params(theta)).value


def load_data(cfg: RunConfig) -> gd.GroupedShares:
    if cfg.data_file is not None:
        try:
            return gd.load_grouped(cfg.data_file)
        except OSError as exc:
            raise DataError(f"cannot read data file {cfg.data_file}: {exc.strerror}") from None
    if cfg.simulate is not None:
        sm = _need_submodel(cfg)
        r = cfg.simulate
        return simulate_grouped(sm, theta_from(sm, r.params), r.n, r.k, data_rng(cfg.seed))
    raise ConfigError("no data source: give data.file or data.simulate")


# ---------------------------------------------------------------------------
# simulate


@dataclass
class SimulateResult:
    data_path: Path
    truth_path: Path
    data: gd.GroupedShares
    gini: float


def cmd_simulate(cfg: RunConfig, threads: int = 1) -> SimulateResult:
    if cfg.simulate is None:
        raise ConfigError("simulate needs data.simulate (params, n, k)")
    sm = _need_submodel(cfg)
    r = cfg.simulate
    theta = theta_from(sm, r.params)
    data = simulate_grouped(sm, theta, r.n, r.k, data_rng(cfg.seed))
    out = _out(cfg)
    path, side = out / "data.csv", out / "data.truth.yaml"
    try:
        gd.write_grouped(data, path)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None
    g = true_gini(sm, theta)
    dump({"kind": "truth", "submodel": sm.value,
          "params": {n: float(v) for n, v in zip(sm.free_names, theta)},
          "gini": g, "n": r.n, "k": r.k,
          "provenance": provenance(cfg.seed, cfg.hash)}, side)
    return SimulateResult(path, side, data, g)


# ---------------------------------------------------------------------------
# fitting


@dataclass
class FitOutcome:
    method: str
    submodel: SubModel
    params: dict[str, abc_smc.Interval]
    gini: abc_smc.Interval
    gini_draws: np.ndarray
    gini_weights: np.ndarray
    infinite_mean_mass: float
    diagnostic: np.ndarray
    stats: dict
    run: abc_smc.RunResult | None = None
    chain: mcmc.MHChain | None = None

    def estimates(self) -> dict[str, float]:
        out = {k: v.mean for k, v in self.params.items()}
        out["G"] = self.gini.mean
        return out


def _sim_size(data: gd.GroupedShares, n: int | None) -> int:
    if n is not None:
        return n
    if data.n is None:
        raise ConfigError("the data file does not record n; set abc.sample_size")
    return data.n


def fit_abc(data, sm: SubModel, prior: abc_smc.PriorSpec, schedule, N: int, seed: int, *,
            summary=None, n=None, stall_cap=abc_smc.DEFAULT_STALL_CAP, threads=1,
            trajectory_gini=True) -> FitOutcome:
    n = _sim_size(data, n)
    res = abc_smc.run(prior, sm, data, schedule, N, n, summary, seed, stall_cap=stall_cap,
                      threads=threads, trajectory_gini=trajectory_gini)
    s = abc_smc.posterior_summary(res.system)
    y = abc_smc.observed_vector(data, summary)
    stats = {
        "particles": N, "sample_size": n,
        "schedule": [float(e) for e in res.system.eps_history],
        "summary": None if summary is None else [int(i) for i in summary],
        "ess": float(res.system.ess),
        "kernel_fallback_steps": [int(t) for t in res.system.fallback_steps],
        "rejections": [{"step": t, "epsilon": float(e), "total": tot, "mean_per_particle": avg}
                       for (t, tot, avg), e in zip(res.rejections, res.system.eps_history)],
    }
    return FitOutcome("abc", sm, s.params, s.gini, s.gini_draws, s.weights,
                      s.infinite_mean_mass, abc_smc.fit_diagnostic(res.system, y), stats, run=res)


def _chain_diagnostic(chain: mcmc.MHChain, sm: SubModel, data: gd.GroupedShares, seed: int):
    """|posterior-predictive mean of the interior shares - observed| from thinned draws."""
    n = data.n if data.n is not None else 10000
    d = len(sm.free_names)
    idx = np.unique(np.linspace(0, chain.draws.shape[0] - 1, _DIAG_DRAWS).astype(int))
    grid = tuple(data.pop_shares.tolist())
    sims = []
    for j, i in enumerate(idx):
        r = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_DIAG_KEY, j)))
        x = abc_smc.simulate_shares(chain.draws[i, :d], sm, n, grid, None, r)
        if np.all(np.isfinite(x)):
            sims.append(x)
    if not sims:
        return np.full(data.k - 1, math.nan)
    return np.abs(np.mean(sims, axis=0) - data.interior_inc)


def _chain_outcome(method, chain: mcmc.MHChain, sm: SubModel, data, seed: int) -> FitOutcome:
    w = np.full(chain.draws.shape[0], 1.0 / chain.draws.shape[0])
    params = {n: abc_smc._interval(chain.draws[:, j], w) for j, n in enumerate(chain.names)}
    g = chain.gini_draws
    ok = np.isfinite(g)
    gi = (abc_smc._interval(g[ok], w[ok]) if ok.any()
          else abc_smc.Interval(math.nan, math.nan, math.nan, math.nan))
    stats = {
        "iterations": int(chain.iterations[-1]) if chain.iterations.size else 0,
        "retained_draws": int(chain.draws.shape[0]),
        "acceptance_rate": float(chain.acceptance_rate),
        "component_acceptance": {n: float(a) for n, a in zip(chain.names, chain.component_accept)},
        "final_proposal_scales": {n: float(s) for n, s in zip(chain.names, chain.final_scales)},
    }
    return FitOutcome(method, sm, params, gi, g, w, float(w[~ok].sum()),
                      _chain_diagnostic(chain, sm, data, seed), stats, chain=chain)


def _mh_config(settings, seed: int) -> mcmc.MHConfig:
    return mcmc.MHConfig(iterations=settings.iterations, burn_in=settings.burn_in,
                         thin=settings.thin, proposal_scales=settings.proposal_scale,
                         seed=seed % 2**63)


def fit_dirichlet(data, sm, prior, lam_prior, mh_settings, seed) -> FitOutcome:
    if sm not in mcmc.DIRICHLET_MODELS:
        raise UnsupportedCombinationError(
            f"method dirichlet needs a closed-form Lorenz curve; {sm.value} has none")
    chain = mcmc.fit_dirichlet(data, sm, prior, lam_prior, _mh_config(mh_settings, seed))
    return _chain_outcome("dirichlet", chain, sm, data, seed)


def fit_sos(data, sm, prior, mh_settings, seed) -> FitOutcome:
    if data.boundaries is None or data.n is None:
        raise DataError("method sos needs class boundaries and the household count n in the data")
    chain = mcmc.fit_sos(data, sm, prior, _mh_config(mh_settings, seed))
    return _chain_outcome("sos", chain, sm, data, seed)


def _prior(cfg: RunConfig, sm: SubModel) -> abc_smc.PriorSpec:
    a, b = cfg.prior.gamma
    return abc_smc.PriorSpec.default(sm, a, b, cfg.prior.convention)


def _lambda_prior(cfg: RunConfig, pair=None) -> abc_smc.GammaPrior:
    a, b = pair if pair is not None else cfg.mcmc.lambda_prior
    return abc_smc.GammaPrior.from_pair(a, b, cfg.prior.convention)


def fit_with(cfg: RunConfig, data, sm: SubModel, method: str, seed: int, threads: int = 1,
             summary=None, lam_pair=None, trajectory_gini=True) -> FitOutcome:
    prior = _prior(cfg, sm)
    if method == "abc":
        return fit_abc(data, sm, prior, cfg.abc.schedule, cfg.abc.particles, seed,
                       summary=summary, n=cfg.abc.sample_size, stall_cap=cfg.abc.stall_cap,
                       threads=threads, trajectory_gini=trajectory_gini)
    if method == "dirichlet":
        return fit_dirichlet(data, sm, prior, _lambda_prior(cfg, lam_pair), cfg.mcmc, seed)
    if method == "sos":
        return fit_sos(data, sm, prior, cfg.mcmc, seed)
    raise ConfigError(f"unknown method {method!r}")


def prob_inside(draws, weights, lower: float, upper: float | None) -> float:
    draws, weights = np.asarray(draws, float), np.asarray(weights, float)
    ok = np.isfinite(draws)
    if not ok.any():
        return math.nan
    hi = math.inf if upper is None else upper
    inside = (draws[ok] >= lower) & (draws[ok] <= hi)
    p = float(np.sum(weights[ok][inside]) / np.sum(weights[ok]))
    return min(max(p, 0.0), 1.0)


def bounds_summary(data: gd.GroupedShares, draws=None, weights=None) -> BoundsSummary:
    b = gd.gastwirth_bounds(data)
    upper = b.upper if b.upper_available else None
    notes = list(b.notes)
    if upper is None:
        notes.append("upper bound unavailable: reporting the lower bound only")
    p = None
    if draws is not None:
        p = prob_inside(draws, weights, b.lower, upper)
        p = None if math.isnan(p) else p
    return BoundsSummary(b.lower, upper, p, notes)


@dataclass
class FitResult:
    report_path: Path
    report: FitReport
    outcome: FitOutcome
    files: dict[str, Path] = field(default_factory=dict)


def cmd_fit(cfg: RunConfig, threads: int = 1) -> FitResult:
    sm = _need_submodel(cfg)
    if cfg.method == "dirichlet" and sm not in mcmc.DIRICHLET_MODELS:
        raise UnsupportedCombinationError(
            f"method dirichlet needs a closed-form Lorenz curve; {sm.value} has none")
    data = load_data(cfg)
    t0 = time.perf_counter()
    out = fit_with(cfg, data, sm, cfg.method, cfg.seed, threads, summary=cfg.abc.summary)
    elapsed = time.perf_counter() - t0
    ev = None
    if cfg.method == "abc" and cfg.abc.evidence_trials > 0:
        e = abc_smc.evidence(_prior(cfg, sm), sm, data, cfg.abc.schedule[-1],
                             cfg.abc.evidence_trials, _sim_size(data, cfg.abc.sample_size),
                             cfg.abc.summary, cfg.seed, threads=threads)
        ev = {"epsilon": float(cfg.abc.schedule[-1]), "log_evidence": _finite_or_str(e.log_evidence),
              "acceptances": e.acceptances, "trials": e.trials}
    report = FitReport(
        submodel=sm.value, method=cfg.method, params=out.params, gini=out.gini,
        gini_draws=out.gini_draws, gini_weights=out.gini_weights,
        fit_diagnostic=[float(v) for v in out.diagnostic], stats=out.stats,
        provenance=provenance(cfg.seed, cfg.hash),
        bounds=bounds_summary(data, out.gini_draws, out.gini_weights), evidence=ev,
        infinite_mean_mass=out.infinite_mean_mass)
    d = _out(cfg)
    files = {"report": d / "report.yaml", "timing": d / "timing.yaml"}
    write_fit_report(report, files["report"])
    if out.run is not None:
        files.update(trajectory=d / "trajectory.csv", rejections=d / "rejections.csv",
                     particles=d / "particles.csv")
        abc_smc.write_trajectory(out.run.trajectory, files["trajectory"])
        abc_smc.write_rejections(out.run, files["rejections"])
        abc_smc.write_particles(out.run.system, files["particles"])
    if out.chain is not None:
        files["chain"] = d / "chain.csv"
        mcmc.write_chain(out.chain, files["chain"])
    dump({"fit_seconds": round(elapsed, 3), "threads": threads}, files["timing"])
    return FitResult(files["report"], report, out, files)


def _finite_or_str(v: float):
    return v if math.isfinite(v) else "-inf"


# ---------------------------------------------------------------------------
# evidence


@dataclass
class EvidenceRow:
    rank: int
    model: str
    estimate: abc_smc.EvidenceEstimate
    flagged: bool


def rank_evidence(models, estimates) -> list[EvidenceRow]:
    """Descending log evidence; zero-acceptance models are flagged and ranked last."""
    order = sorted(range(len(models)),
                   key=lambda i: (not math.isfinite(estimates[i].log_evidence),
                                  -estimates[i].log_evidence if math.isfinite(estimates[i].log_evidence) else 0.0,
                                  i))
    return [EvidenceRow(r + 1, models[i], estimates[i], estimates[i].acceptances == 0)
            for r, i in enumerate(order)]


def evidence_for(cfg: RunConfig, data, models, epsilon: float, trials: int, seed: int,
                 threads: int = 1) -> list[EvidenceRow]:
    n = _sim_size(data, cfg.abc.sample_size)
    ests = []
    for m in models:
        sm = SubModel.coerce(m)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ests.append(abc_smc.evidence(_prior(cfg, sm), sm, data, epsilon, trials, n,
                                         cfg.abc.summary, seed, threads=threads))
    return rank_evidence([SubModel.coerce(m).value for m in models], ests)


def cmd_evidence(cfg: RunConfig, threads: int = 1) -> list[EvidenceRow]:
    ev = cfg.evidence
    if ev is None or not ev.models:
        raise ConfigError("evidence needs an evidence section with a model list")
    data = load_data(cfg)
    rows = evidence_for(cfg, data, ev.models, ev.epsilon, ev.trials, cfg.seed, threads)
    d = _out(cfg)
    with open(d / "evidence.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "model", "log_evidence", "acceptances", "trials", "zero_acceptance"])
        for r in rows:
            w.writerow([r.rank, r.model, repr(r.estimate.log_evidence), r.estimate.acceptances,
                        r.estimate.trials, int(r.flagged)])
    dump({"kind": "evidence", "epsilon": ev.epsilon, "trials": ev.trials,
          "provenance": provenance(cfg.seed, cfg.hash),
          "ranking": [{"rank": r.rank, "model": r.model,
                       "log_evidence": _finite_or_str(r.estimate.log_evidence),
                       "acceptances": r.estimate.acceptances, "zero_acceptance": r.flagged}
                      for r in rows]}, d / "evidence.yaml")
    return rows


# ---------------------------------------------------------------------------
# bounds


def cmd_bounds(cfg: RunConfig, threads: int = 1) -> BoundsSummary:
    data = load_data(cfg)
    draws = weights = None
    if cfg.bounds_fit_report is not None:
        rep = read_fit_report(cfg.bounds_fit_report)
        draws, weights = rep.gini_draws, rep.gini_weights
    b = bounds_summary(data, draws, weights)
    dump({"kind": "bounds", "lower": b.lower, "upper": b.upper, "prob_inside": b.prob_inside,
          "notes": b.notes, "fit_report": None if cfg.bounds_fit_report is None
          else str(cfg.bounds_fit_report),
          "provenance": provenance(cfg.seed, cfg.hash)}, _out(cfg) / "bounds.yaml")
    return b


def format_bounds(b: BoundsSummary) -> str:
    lines = [f"lower bound: {b.lower:.6f}"]
    lines.append(f"upper bound: {b.upper:.6f}" if b.upper is not None else "upper bound: unavailable")
    lines += [f"note: {n}" for n in b.notes]
    if b.prob_inside is not None:
        lines.append(f"posterior probability inside bounds: {b.prob_inside:.4f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# replicate


def _summary_for(method: str, k: int):
    """Even-indexed interior shares: the nested half-resolution grid."""
    if method != "abc-sum":
        return None
    return tuple(range(2, k - 1, 2))


def _applies(method: str, k: int) -> bool:
    # abc-sum only makes sense when the grid nests a coarser one
    return method != "abc-sum" or (k % 2 == 0 and k >= 6)


@dataclass
class ReplicateOutcome:
    result: StudyResult
    result_path: Path
    table_path: Path

    @property
    def partial(self) -> bool:
        return bool(self.result.failures)


def cmd_replicate(cfg: RunConfig, threads: int = 1) -> ReplicateOutcome:
    st = cfg.study
    if st is None:
        raise ConfigError("replicate needs a study section")
    design = get_study(st.name)
    if st.replicates < 1:
        raise EmptyStudyError("the study has zero replicates")
    bad = [m for m in st.methods if m not in STUDY_METHODS]
    if bad:
        raise ConfigError(f"unknown study methods {bad}; choose from {list(STUDY_METHODS)}")
    sm = design.submodel
    if any(m.startswith("dirichlet") for m in st.methods) and sm not in mcmc.DIRICHLET_MODELS:
        raise UnsupportedCombinationError(f"dirichlet methods are unavailable for {sm.value}")
    settings = design.select(st.settings)
    all_labels = [s.label for s in design.settings]
    truth = {}
    for s in settings:
        th = theta_from(sm, s.params)
        truth[s.label] = {**{n: float(v) for n, v in zip(sm.free_names, th)},
                          "G": true_gini(sm, th)}

    tasks = [(s, rep) for s in settings for rep in range(st.replicates)]

    def one(task):
        s, rep = task
        si = all_labels.index(s.label)
        recs = []
        try:
            x = simulate_incomes(sm, theta_from(sm, s.params), st.n, data_rng(cfg.seed, si, rep))
        except LorenzABCError as exc:
            return [ReplicateRecord(s.label, k, m, rep, 0, False, {}, f"simulation: {exc}")
                    for k in st.k for m in st.methods]
        for k in st.k:
            for m in st.methods:
                if not _applies(m, k):
                    continue
                seed = fit_seed(cfg.seed, si, k, STUDY_METHODS.index(m), rep)
                try:
                    data = gd.from_sample(x, np.linspace(0.0, 1.0, k + 1))
                    base = "abc" if m.startswith("abc") else "dirichlet" if m.startswith("dirichlet") else m
                    lam = (1.0, DIRICHLET_LAMBDA_RATES[m]) if m in DIRICHLET_LAMBDA_RATES else None
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RuntimeWarning)
                        o = fit_with(cfg, data, sm, base, seed, 1, summary=_summary_for(m, k),
                                     lam_pair=lam, trajectory_gini=False)
                    est = o.estimates()
                    if not all(math.isfinite(v) for v in est.values()):
                        raise DataError("non-finite posterior mean")
                    recs.append(ReplicateRecord(s.label, k, m, rep, seed, True, est))
                except LorenzABCError as exc:
                    recs.append(ReplicateRecord(s.label, k, m, rep, seed, False, {},
                                                f"{type(exc).__name__}: {exc}"))
        return recs

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(one, tasks))
    else:
        chunks = [one(t) for t in tasks]
    records = sorted((r for c in chunks for r in c),
                     key=lambda r: (all_labels.index(r.setting), r.k,
                                    STUDY_METHODS.index(r.method), r.replicate))
    result = StudyResult(design.name, truth, records, provenance(cfg.seed, cfg.hash))
    d = _out(cfg)
    table = d / "replicates.csv"
    write_replicates_csv(result, table)
    path = d / "study.yaml"
    write_study_result(result, path)
    return ReplicateOutcome(result, path, table)


def write_replicates_csv(result: StudyResult, path) -> None:
    qs = list(dict.fromkeys(q for t in result.truth.values() for q in t))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["setting", "k", "method", "replicate", "seed", "ok", *qs, "error"])
        for r in result.records:
            w.writerow([r.setting, r.k, r.method, r.replicate, r.seed, int(r.ok),
                        *[repr(r.estimates[q]) if q in r.estimates else "" for q in qs],
                        r.error or ""])


def read_replicates_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# report


def _fmt_iv(iv: abc_smc.Interval) -> str:
    return f"{iv.mean:.4f}  [{iv.lower:.4f}, {iv.upper:.4f}]"


def format_fit_report(rep: FitReport) -> str:
    out = io.StringIO()
    out.write(f"{rep.method} fit of {rep.submodel} (seed {rep.provenance.get('seed')})\n")
    for name, iv in rep.params.items():
        out.write(f"  {name:<8} {_fmt_iv(iv)}\n")
    out.write(f"  {'G':<8} {_fmt_iv(rep.gini)}\n")
    if rep.infinite_mean_mass > 0:
        out.write(f"  posterior mass with infinite mean: {rep.infinite_mean_mass:.4f}\n")
    if rep.bounds is not None:
        up = "n/a" if rep.bounds.upper is None else f"{rep.bounds.upper:.4f}"
        out.write(f"  Gastwirth bounds: [{rep.bounds.lower:.4f}, {up}]")
        if rep.bounds.prob_inside is not None:
            out.write(f"  P(G inside) = {rep.bounds.prob_inside:.3f}")
        out.write("\n")
    if rep.evidence is not None:
        out.write(f"  log evidence at eps={rep.evidence['epsilon']}: {rep.evidence['log_evidence']}\n")
    out.write("  fit diagnostic: " + ", ".join(f"{v:.2e}" for v in rep.fit_diagnostic) + "\n")
    return out.getvalue()


def format_study(res: StudyResult) -> str:
    out = io.StringIO()
    out.write(f"study {res.study}\n")
    for row in res.aggregate():
        out.write(f"  setting {row['setting']} k={row['k']} {row['method']}: "
                  f"{row['completed']} done, {row['failed']} failed\n")
        for q, v in row["quantities"].items():
            out.write(f"    {q:<3} truth {v['truth']:.4f}  mean {v['mean']:.4f}  rmse {v['rmse']:.4f}\n")
    return out.getvalue()


def cmd_report(cfg: RunConfig, threads: int = 1) -> str:
    if not cfg.report_inputs:
        raise ConfigError("report needs report.input naming one or more report files")
    parts = []
    for p in cfg.report_inputs:
        kind = load(p).get("kind")
        if kind == "fit_report":
            parts.append(format_fit_report(read_fit_report(p)))
        elif kind == "study_result":
            parts.append(format_study(read_study_result(p)))
        else:
            raise DataError(f"{p}: unsupported report kind {kind!r}")
    text = "\n".join(parts)
    (_out(cfg) / "summary.txt").write_text(text, encoding="utf-8")
    return text


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "evidence": cmd_evidence,
    "bounds": cmd_bounds,
    "replicate": cmd_replicate,
    "report": cmd_report,
}
