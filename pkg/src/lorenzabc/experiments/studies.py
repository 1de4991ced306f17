"""Simulation-study designs for the DA/SM and GB2/GB tables.

``printed_gini`` is the value printed alongside each setting; the truth used
for RMSE is always recomputed from the parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from ..gb_family import SubModel


@dataclass(frozen=True)
class Setting:
    label: str
    params: dict[str, float]
    printed_gini: float


@dataclass(frozen=True)
class StudyDesign:
    name: str
    submodel: SubModel
    settings: tuple[Setting, ...]

    def select(self, labels) -> tuple[Setting, ...]:
        if labels is None:
            return self.settings
        by = {s.label: s for s in self.settings}
        missing = [l for l in labels if l not in by]
        if missing:
            raise ConfigError(f"{self.name} has no setting(s) {missing}; "
                              f"choose from {sorted(by)}")
        return tuple(by[l] for l in labels)


def _s(label, printed, **params):
    return Setting(label, params, printed)


STUDIES = {
    "table1-da": StudyDesign("table1-da", SubModel.DA, (
        _s("i", 0.2482, a=3.8, p=1.3),
        _s("ii", 0.3087, a=3.0, p=1.5),
        _s("iii", 0.3518, a=2.5, p=2.5),
        _s("iv", 0.4077, a=2.3, p=1.5),
    )),
    "table1-sm": StudyDesign("table1-sm", SubModel.SM, (
        _s("i", 0.2429, a=3.5, q=1.5),
        _s("ii", 0.3041, a=2.3, q=3.0),
        _s("iii", 0.3567, a=2.0, q=2.5),
        _s("iv", 0.4052, a=1.6, q=3.5),
    )),
    "table2-gb2": StudyDesign("table2-gb2", SubModel.GB2, (
        _s("i", 0.2572, a=2.5, p=2.3, q=1.7),
        _s("ii", 0.3037, a=2.1, p=1.8, q=2.0),
        _s("iii", 0.3536, a=1.8, p=3.0, q=1.5),
        _s("iv", 0.4064, a=1.5, p=2.5, q=1.8),
    )),
    "table2-gb": StudyDesign("table2-gb", SubModel.GB, (
        _s("i", 0.2456, a=2.0, c=0.95, p=3.0, q=2.0),
        _s("ii", 0.3062, a=1.2, c=0.4, p=1.7, q=2.5),
        _s("iii", 0.3589, a=1.5, c=0.9, p=1.7, q=1.7),
        _s("iv", 0.3397, a=1.2, c=0.1, p=1.3, q=3.5),
        _s("v", 0.4105, a=1.5, c=0.99, p=1.2, q=3.0),
    )),
}


def get_study(name: str) -> StudyDesign:
    try:
        return STUDIES[name]
    except KeyError:
        raise ConfigError(f"unknown study {name!r}; choose from {sorted(STUDIES)}") from None


# Method labels inside a study.  "abc-sum" is ABC on deciles reduced to the
# even-indexed shares; "dirichlet-1/2/3" use Gamma(1, 0.1 / 0.5 / 1) on lambda.
STUDY_METHODS = ("abc", "abc-sum", "sos", "dirichlet-1", "dirichlet-2", "dirichlet-3")
DIRICHLET_LAMBDA_RATES = {"dirichlet-1": 0.1, "dirichlet-2": 0.5, "dirichlet-3": 1.0}
