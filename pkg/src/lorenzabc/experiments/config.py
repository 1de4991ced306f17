"""YAML run configuration.

A config is a nested mapping.  Every section is optional except the ones the
chosen command and method need::

    submodel: DA
    seed: 7
    output_dir: out/da
    method: abc                 # abc | dirichlet | sos
    data:
      simulate: {params: {a: 3.8, p: 1.3}, n: 10000, k: 5}
      # or: file: path/to/grouped.csv
    prior: {gamma: [3, 1], convention: shape-rate}
    abc: {particles: 1000, schedule: [0.1, 0.01, 0.005], summary: null,
          stall_cap: 1000000, evidence_trials: 0, sample_size: null}
    mcmc: {iterations: 40000, burn_in: 10000, thin: 10, proposal_scale: 0.1,
           lambda_prior: [1, 0.1]}
    evidence: {models: [GB2, DA, SM], epsilon: 0.02, trials: 10000}
    bounds: {fit_report: out/da/report.yaml}
    study: {name: table1-da, settings: [i], k: [5], methods: [abc], replicates: 10}
    report: {input: out/da/report.yaml}
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
import yaml

from ..errors import ConfigError
from ..gb_family import SubModel

METHODS = ("abc", "dirichlet", "sos")
PRESET_PACKAGE = "lorenzabc.experiments.presets"


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def available_presets() -> list[str]:
    root = resources.files(PRESET_PACKAGE)
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> dict:
    root = resources.files(PRESET_PACKAGE)
    res = root / f"{name}.yaml"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available_presets())}")
    return _parse(res.read_text(encoding="utf-8"), f"preset {name}")


def _parse(text: str, where: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{where}: invalid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: top level must be a mapping")
    return data


def load_mapping(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return _parse(text, str(p))


def config_hash(raw: dict) -> str:
    """sha256 of the canonical JSON form; the output location is not hashed."""
    raw = {k: v for k, v in raw.items() if k != "output_dir"}
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SimulationRecipe:
    params: dict[str, float]
    n: int
    k: int

    def grid(self):
        import numpy as np
        return np.linspace(0.0, 1.0, self.k + 1)


@dataclass(frozen=True)
class ABCSettings:
    particles: int = 1000
    schedule: tuple[float, ...] = (0.1, 0.01, 0.005)
    summary: tuple[int, ...] | None = None
    stall_cap: int = 10**6
    evidence_trials: int = 0
    sample_size: int | None = None


@dataclass(frozen=True)
class MCMCSettings:
    iterations: int = 40000
    burn_in: int = 10000
    thin: int = 10
    proposal_scale: float = 0.1
    lambda_prior: tuple[float, float] = (1.0, 0.1)


@dataclass(frozen=True)
class PriorSettings:
    gamma: tuple[float, float] = (3.0, 1.0)
    convention: str = "shape-rate"


@dataclass(frozen=True)
class EvidenceSettings:
    models: tuple[str, ...] = ()
    epsilon: float = 0.02
    trials: int = 10000


@dataclass(frozen=True)
class StudySettings:
    name: str
    settings: tuple[str, ...] | None = None
    k: tuple[int, ...] = (5,)
    methods: tuple[str, ...] = ("abc",)
    replicates: int = 10
    n: int = 10000


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    submodel: SubModel | None
    seed: int
    output_dir: Path
    method: str
    data_file: Path | None
    simulate: SimulationRecipe | None
    prior: PriorSettings
    abc: ABCSettings
    mcmc: MCMCSettings
    evidence: EvidenceSettings | None
    study: StudySettings | None
    bounds_fit_report: Path | None
    report_inputs: tuple[Path, ...]

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @property
    def has_data(self) -> bool:
        return self.data_file is not None or self.simulate is not None


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return sec


def _known(sec: dict, name: str, allowed: set[str]) -> None:
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {name}: {', '.join(sorted(extra))}")


def _int(v, what: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{what} must be an integer, got {v!r}")
    v = int(v)
    if lo is not None and v < lo:
        raise ConfigError(f"{what} must be at least {lo}, got {v}")
    return v


def _float(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{what} must be a number, got {v!r}")
    return float(v)


def _pair(v, what: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{what} must be a two-element list")
    a, b = _float(v[0], what), _float(v[1], what)
    if a <= 0 or b <= 0:
        raise ConfigError(f"{what} entries must be positive")
    return a, b


def _submodel(v, what="submodel") -> SubModel:
    try:
        return SubModel.coerce(v)
    except Exception:
        raise ConfigError(f"{what}: unknown submodel {v!r}") from None


def parse_config(raw: dict, *, base_dir: Path | None = None) -> RunConfig:
    """Validate a raw mapping into a :class:`RunConfig`."""
    top = {"command", "submodel", "seed", "output_dir", "method", "data", "prior", "abc",
           "mcmc", "evidence", "study", "bounds", "report", "description"}
    _known(raw, "config", top)
    base = base_dir or Path(".")

    def path(v):
        p = Path(str(v))
        return p if p.is_absolute() else base / p

    sm = _submodel(raw["submodel"]) if raw.get("submodel") is not None else None
    seed = _int(raw.get("seed", 0), "seed", 0)
    method = str(raw.get("method", "abc")).lower()
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")

    data = _section(raw, "data")
    _known(data, "data", {"file", "simulate"})
    if "file" in data and "simulate" in data:
        raise ConfigError("data: give exactly one of 'file' or 'simulate'")
    data_file = path(data["file"]) if "file" in data else None
    recipe = None
    if "simulate" in data:
        sim = data["simulate"]
        if not isinstance(sim, dict):
            raise ConfigError("data.simulate must be a mapping")
        _known(sim, "data.simulate", {"params", "n", "k"})
        params = sim.get("params")
        if not isinstance(params, dict) or not params:
            raise ConfigError("data.simulate.params must map parameter names to values")
        recipe = SimulationRecipe({str(k): _float(v, f"params.{k}") for k, v in params.items()},
                                  _int(sim.get("n", 10000), "data.simulate.n", 1),
                                  _int(sim.get("k", 5), "data.simulate.k", 2))

    pr = _section(raw, "prior")
    _known(pr, "prior", {"gamma", "convention"})
    prior = PriorSettings(_pair(pr.get("gamma", (3.0, 1.0)), "prior.gamma"),
                          str(pr.get("convention", "shape-rate")))
    if prior.convention not in ("shape-rate", "shape-scale"):
        raise ConfigError("prior.convention must be shape-rate or shape-scale")

    ab = _section(raw, "abc")
    _known(ab, "abc", {"particles", "schedule", "summary", "stall_cap", "evidence_trials",
                      "sample_size"})
    sched = ab.get("schedule", ABCSettings.schedule)
    if not isinstance(sched, (list, tuple)) or not sched:
        raise ConfigError("abc.schedule must be a nonempty list")
    sched = tuple(_float(e, "abc.schedule") for e in sched)
    if any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
        raise ConfigError(f"abc.schedule must be positive and strictly decreasing, got {sched}")
    summ = ab.get("summary")
    if summ is not None:
        if not isinstance(summ, (list, tuple)) or not summ:
            raise ConfigError("abc.summary must be a nonempty list of 1-based indices")
        summ = tuple(_int(i, "abc.summary", 1) for i in summ)
    abc = ABCSettings(_int(ab.get("particles", 1000), "abc.particles", 2), sched, summ,
                      _int(ab.get("stall_cap", 10**6), "abc.stall_cap", 1),
                      _int(ab.get("evidence_trials", 0), "abc.evidence_trials", 0),
                      None if ab.get("sample_size") is None
                      else _int(ab["sample_size"], "abc.sample_size", 1))

    mc = _section(raw, "mcmc")
    _known(mc, "mcmc", {"iterations", "burn_in", "thin", "proposal_scale", "lambda_prior"})
    mcmc = MCMCSettings(_int(mc.get("iterations", 40000), "mcmc.iterations", 1),
                        _int(mc.get("burn_in", 10000), "mcmc.burn_in", 0),
                        _int(mc.get("thin", 10), "mcmc.thin", 1),
                        _float(mc.get("proposal_scale", 0.1), "mcmc.proposal_scale"),
                        _pair(mc.get("lambda_prior", (1.0, 0.1)), "mcmc.lambda_prior"))
    if mcmc.burn_in >= mcmc.iterations:
        raise ConfigError("mcmc.burn_in must be smaller than mcmc.iterations")
    if mcmc.proposal_scale <= 0:
        raise ConfigError("mcmc.proposal_scale must be positive")

    ev = None
    if raw.get("evidence") is not None:
        e = _section(raw, "evidence")
        _known(e, "evidence", {"models", "epsilon", "trials"})
        models = e.get("models") or ([sm.value] if sm else [])
        if not isinstance(models, (list, tuple)):
            raise ConfigError("evidence.models must be a list")
        ev = EvidenceSettings(tuple(_submodel(m, "evidence.models").value for m in models),
                              _float(e.get("epsilon", 0.02), "evidence.epsilon"),
                              _int(e.get("trials", 10000), "evidence.trials", 1))
        if ev.epsilon <= 0:
            raise ConfigError("evidence.epsilon must be positive")

    st = None
    if raw.get("study") is not None:
        s = _section(raw, "study")
        _known(s, "study", {"name", "settings", "k", "methods", "replicates", "n"})
        if "name" not in s:
            raise ConfigError("study.name is required")
        ks = s.get("k", [5])
        ks = tuple(_int(v, "study.k", 2) for v in (ks if isinstance(ks, (list, tuple)) else [ks]))
        settings = s.get("settings")
        if settings is not None:
            settings = tuple(str(v) for v in (settings if isinstance(settings, (list, tuple))
                                               else [settings]))
        methods = s.get("methods", ["abc"])
        methods = tuple(str(m) for m in (methods if isinstance(methods, (list, tuple)) else [methods]))
        st = StudySettings(str(s["name"]), settings, ks, methods,
                           _int(s.get("replicates", 10), "study.replicates", 0),
                           _int(s.get("n", 10000), "study.n", 1))

    bd = _section(raw, "bounds")
    _known(bd, "bounds", {"fit_report"})
    rp = _section(raw, "report")
    _known(rp, "report", {"input"})
    inputs = rp.get("input") or []
    if not isinstance(inputs, (list, tuple)):
        inputs = [inputs]

    return RunConfig(
        raw=raw, submodel=sm, seed=seed,
        output_dir=path(raw.get("output_dir", "out")), method=method,
        data_file=data_file, simulate=recipe, prior=prior, abc=abc, mcmc=mcmc,
        evidence=ev, study=st,
        bounds_fit_report=path(bd["fit_report"]) if bd.get("fit_report") else None,
        report_inputs=tuple(path(p) for p in inputs),
    )


def resolve(config_path=None, preset: str | None = None, seed: int | None = None,
            out: str | None = None) -> RunConfig:
    """Merge preset, config file and command-line overrides, then validate."""
    if config_path is None and preset is None:
        raise ConfigError("--config is required (or name a built-in --preset)")
    raw: dict = load_preset(preset) if preset else {}
    base = Path(".")
    if config_path is not None:
        raw = deep_merge(raw, load_mapping(config_path))
        base = Path(config_path).resolve().parent
    if seed is not None:
        raw["seed"] = int(seed)
    if out is not None:
        raw["output_dir"] = str(Path(out).resolve())
    return parse_config(raw, base_dir=base)
