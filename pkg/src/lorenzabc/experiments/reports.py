"""Fit and study reports as UTF-8 YAML documents with a provenance block."""
from __future__ import annotations

import math
import platform
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy
import yaml

from .._backend import BACKEND
from ..abc_smc import Interval
from ..errors import DataError


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def provenance(seed: int, config_hash: str) -> dict:
    return {
        "seed": int(seed),
        "config_hash": config_hash,
        "package_version": _version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": BACKEND,
    }


def _f(x) -> float | None:
    x = float(x)
    return None if math.isnan(x) else x


def _interval_out(iv: Interval) -> dict:
    return {k: _f(v) for k, v in iv.as_dict().items()}


def _interval_in(d: dict) -> Interval:
    g = {k: (math.nan if d.get(k) is None else float(d[k])) for k in ("mean", "lower", "upper", "median")}
    return Interval(g["mean"], g["lower"], g["upper"], g["median"])


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


@dataclass
class BoundsSummary:
    lower: float
    upper: float | None
    prob_inside: float | None = None
    notes: list[str] = field(default_factory=list)


@dataclass
class FitReport:
    submodel: str
    method: str
    params: dict[str, Interval]
    gini: Interval
    gini_draws: np.ndarray
    gini_weights: np.ndarray
    fit_diagnostic: list[float]
    stats: dict
    provenance: dict
    bounds: BoundsSummary | None = None
    evidence: dict | None = None
    infinite_mean_mass: float = 0.0

    def __post_init__(self):
        for name, iv in [*self.params.items(), ("G", self.gini)]:
            if not any(math.isnan(v) for v in (iv.mean, iv.lower, iv.upper)):
                if not iv.lower <= iv.mean <= iv.upper:
                    raise DataError(f"interval for {name} does not contain its mean")
        if self.bounds is not None and self.bounds.prob_inside is not None:
            if not 0.0 <= self.bounds.prob_inside <= 1.0:
                raise DataError("posterior probability outside [0, 1]")

    def to_dict(self) -> dict:
        out = {
            "kind": "fit_report",
            "submodel": self.submodel,
            "method": self.method,
            "provenance": dict(self.provenance),
            "parameters": {k: _interval_out(v) for k, v in self.params.items()},
            "gini": _interval_out(self.gini),
            "infinite_mean_mass": float(self.infinite_mean_mass),
            "fit_diagnostic": [float(v) for v in self.fit_diagnostic],
            "stats": self.stats,
        }
        if self.bounds is not None:
            out["bounds"] = {"lower": float(self.bounds.lower),
                             "upper": None if self.bounds.upper is None else float(self.bounds.upper),
                             "prob_inside": self.bounds.prob_inside,
                             "notes": list(self.bounds.notes)}
        if self.evidence is not None:
            out["evidence"] = self.evidence
        out["gini_draws"] = _floats(self.gini_draws)
        out["gini_weights"] = _floats(self.gini_weights)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> FitReport:
        if d.get("kind") != "fit_report":
            raise DataError("not a fit report")
        b = d.get("bounds")
        bounds = None if b is None else BoundsSummary(b["lower"], b["upper"], b["prob_inside"],
                                                      list(b.get("notes", [])))
        return cls(
            submodel=d["submodel"], method=d["method"],
            params={k: _interval_in(v) for k, v in d["parameters"].items()},
            gini=_interval_in(d["gini"]),
            gini_draws=np.asarray(d["gini_draws"], dtype=float),
            gini_weights=np.asarray(d["gini_weights"], dtype=float),
            fit_diagnostic=list(d["fit_diagnostic"]), stats=d["stats"],
            provenance=d["provenance"], bounds=bounds, evidence=d.get("evidence"),
            infinite_mean_mass=float(d.get("infinite_mean_mass", 0.0)),
        )


@dataclass
class ReplicateRecord:
    setting: str
    k: int
    method: str
    replicate: int
    seed: int
    ok: bool
    estimates: dict[str, float]
    error: str | None = None


@dataclass
class StudyResult:
    study: str
    truth: dict[str, dict[str, float]]
    records: list[ReplicateRecord]
    provenance: dict

    def cells(self) -> list[tuple[str, int, str]]:
        seen: dict[tuple[str, int, str], None] = {}
        for r in self.records:
            seen.setdefault((r.setting, r.k, r.method))
        return list(seen)

    def aggregate(self) -> list[dict]:
        """Mean and RMSE per cell and quantity over completed replicates."""
        rows = []
        for setting, k, method in self.cells():
            recs = [r for r in self.records if (r.setting, r.k, r.method) == (setting, k, method)]
            done = [r for r in recs if r.ok]
            truth = self.truth[setting]
            row = {"setting": setting, "k": k, "method": method,
                   "completed": len(done), "failed": len(recs) - len(done), "quantities": {}}
            for q, t in truth.items():
                vals = np.array([r.estimates[q] for r in done if q in r.estimates], dtype=float)
                if vals.size == 0:
                    continue
                row["quantities"][q] = {"truth": float(t), "mean": float(vals.mean()),
                                        "rmse": float(np.sqrt(np.mean((vals - t) ** 2)))}
            rows.append(row)
        return rows

    @property
    def failures(self) -> list[ReplicateRecord]:
        return [r for r in self.records if not r.ok]

    def to_dict(self) -> dict:
        return {
            "kind": "study_result",
            "study": self.study,
            "provenance": dict(self.provenance),
            "truth": self.truth,
            "aggregate": self.aggregate(),
            "failures": [{"setting": r.setting, "k": r.k, "method": r.method,
                          "replicate": r.replicate, "error": r.error} for r in self.failures],
            "replicates": [{"setting": r.setting, "k": r.k, "method": r.method,
                            "replicate": r.replicate, "seed": r.seed, "ok": r.ok,
                            "estimates": r.estimates, "error": r.error} for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> StudyResult:
        if d.get("kind") != "study_result":
            raise DataError("not a study result")
        recs = [ReplicateRecord(r["setting"], int(r["k"]), r["method"], int(r["replicate"]),
                                int(r["seed"]), bool(r["ok"]),
                                {k: float(v) for k, v in r["estimates"].items()}, r.get("error"))
                for r in d["replicates"]]
        return cls(d["study"], d["truth"], recs, d["provenance"])


def dump(doc: dict, path) -> None:
    text = yaml.safe_dump(doc, sort_keys=False, allow_unicode=True, default_flow_style=None,
                          width=100)
    Path(path).write_text(text, encoding="utf-8")


def load(path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc.strerror}") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path} is not a report")
    return doc


def write_fit_report(report: FitReport, path) -> None:
    dump(report.to_dict(), path)


def read_fit_report(path) -> FitReport:
    return FitReport.from_dict(load(path))


def write_study_result(result: StudyResult, path) -> None:
    dump(result.to_dict(), path)


def read_study_result(path) -> StudyResult:
    return StudyResult.from_dict(load(path))
