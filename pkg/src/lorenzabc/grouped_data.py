"""Grouped income data: cumulative shares, ingestion, and Gastwirth Gini bounds."""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ._backend import kernels
from .errors import BoundUnavailable, DataError, IngestionError, ResolutionError

_TOL = 1e-12


@dataclass(frozen=True)
class GroupedShares:
    """Cumulative population shares ``pop_shares`` and income shares ``inc_shares``.

    Both vectors run from 0 to 1 and have ``k + 1`` entries.  ``boundaries``
    optionally holds the ``k - 1`` interior class boundaries (for data
    simulated here these are the cut order statistics), and ``mean_income``
    the overall mean; both are needed only for the Gastwirth upper bound and
    the order-statistics likelihood.
    """

    pop_shares: np.ndarray
    inc_shares: np.ndarray
    n: int | None = None
    boundaries: np.ndarray | None = None
    mean_income: float | None = None
    lower_support: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.pop_shares, dtype=float)
        y = np.asarray(self.inc_shares, dtype=float)
        object.__setattr__(self, "pop_shares", p)
        object.__setattr__(self, "inc_shares", y)
        if p.ndim != 1 or p.shape != y.shape:
            raise DataError("population and income share vectors must be 1-D of equal length")
        if p.size < 3:
            raise DataError("need at least two groups")
        if p[0] != 0.0 or y[0] != 0.0 or p[-1] != 1.0 or y[-1] != 1.0:
            raise DataError("cumulative shares must start at 0 and end at 1")
        if np.any(np.diff(p) <= 0):
            raise DataError("cumulative population shares must be strictly increasing")
        if np.any(np.diff(y) < 0):
            raise DataError("cumulative income shares must be nondecreasing")
        bad = np.flatnonzero(y > p + _TOL)
        if bad.size:
            j = int(bad[0])
            raise DataError(f"Lorenz dominance violated at group {j}: y={y[j]} > p={p[j]}")
        if self.boundaries is not None:
            z = np.asarray(self.boundaries, dtype=float)
            object.__setattr__(self, "boundaries", z)
            if z.shape != (p.size - 2,):
                raise DataError(f"expected {p.size - 2} interior boundaries, got {z.size}")
            if np.any(np.diff(z) < 0) or np.any(z < self.lower_support):
                raise DataError("class boundaries must be nondecreasing and above the lower support")
        if self.mean_income is not None and not (self.mean_income > 0 and math.isfinite(self.mean_income)):
            raise DataError(f"mean income must be finite and positive, got {self.mean_income}")
        if self.n is not None and self.n < self.k:
            raise ResolutionError(f"n={self.n} households cannot fill k={self.k} groups")

    @property
    def k(self) -> int:
        return self.pop_shares.size - 1

    @property
    def interior_pop(self) -> np.ndarray:
        return self.pop_shares[1:-1]

    @property
    def interior_inc(self) -> np.ndarray:
        return self.inc_shares[1:-1]


@dataclass(frozen=True)
class IncomeShares:
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "q", q)
        if np.any(q < 0):
            raise DataError("income shares must be nonnegative")
        if abs(q.sum() - 1.0) > 1e-12:
            raise DataError(f"income shares sum to {q.sum()!r}, not 1")


@dataclass(frozen=True)
class OrderStatistics:
    z: np.ndarray
    n_js: np.ndarray
    n: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        n_js = np.asarray(self.n_js, dtype=np.int64)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "n_js", n_js)
        if z.shape != n_js.shape or z.ndim != 1:
            raise DataError("order statistics and ranks must be 1-D of equal length")
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise DataError("selected order statistics must be positive and strictly increasing")
        ranks = np.concatenate(([0], n_js, [self.n]))
        if np.any(np.diff(ranks) <= 0):
            raise ResolutionError("cut ranks must satisfy 0 < n_1 < ... < n_{k-1} < n")


@dataclass(frozen=True)
class GastwirthBounds:
    lower: float
    upper: float = math.nan
    upper_available: bool = False
    notes: list[str] = field(default_factory=list)


class SelectedShares(NamedTuple):
    values: np.ndarray
    pop: np.ndarray
    indices: tuple[int, ...]


def income_shares(shares: GroupedShares) -> IncomeShares:
    q = np.diff(shares.inc_shares)
    q = np.clip(q, 0.0, None)
    return IncomeShares(q / q.sum())


def _interior_grid(pop_grid) -> np.ndarray:
    g = np.asarray(pop_grid, dtype=float).ravel()
    if g.size and g[0] == 0.0:
        g = g[1:]
    if g.size and g[-1] == 1.0:
        g = g[:-1]
    if g.size == 0:
        raise DataError("population grid has no interior points")
    if np.any(g <= 0) or np.any(g >= 1) or np.any(np.diff(g) <= 0):
        raise DataError("population grid must be strictly increasing inside (0, 1)")
    return g


def cut_ranks(n: int, pop_grid) -> np.ndarray:
    """Cut ranks ``n_j = floor(n * p_j)`` for the interior grid points.

    A 1e-7 guard absorbs representation error in products such as 0.3 * 10.
    """
    g = _interior_grid(pop_grid)
    ranks = np.floor(n * g + 1e-7).astype(np.int64)
    full = np.concatenate(([0], ranks, [n]))
    if np.any(np.diff(full) <= 0):
        raise ResolutionError(f"n={n} is too small to separate {g.size + 1} groups")
    return ranks


def from_sample(incomes, pop_grid) -> GroupedShares:
    """Group a sample into cumulative shares at ``floor(n * p_j)`` order statistics."""
    x = np.asarray(incomes, dtype=float).ravel()
    if x.size == 0 or np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DataError("incomes must be finite and strictly positive")
    g = _interior_grid(pop_grid)
    if x.size < g.size + 1:
        raise ResolutionError(f"n={x.size} observations cannot fill {g.size + 1} groups")
    cuts = cut_ranks(x.size, g)
    y, bounds = kernels.cut_shares(x, cuts)
    return GroupedShares(
        pop_shares=np.concatenate(([0.0], g, [1.0])),
        inc_shares=np.concatenate(([0.0], y, [1.0])),
        n=int(x.size),
        boundaries=bounds,
        mean_income=float(x.mean()),
    )


def order_statistics(shares: GroupedShares) -> OrderStatistics:
    """Selected order statistics (cut incomes and ranks) recorded with the data."""
    if shares.boundaries is None or shares.n is None:
        raise DataError("order statistics need the class boundaries and the household count n")
    return OrderStatistics(z=shares.boundaries, n_js=cut_ranks(shares.n, shares.interior_pop),
                           n=shares.n)


def summary_select(shares: GroupedShares, keep) -> SelectedShares:
    """Interior cumulative income shares at the 1-based indices in ``keep``."""
    idx = tuple(int(i) for i in keep)
    if not idx:
        raise DataError("summary index set is empty")
    if any(i < 1 or i > shares.k - 1 for i in idx):
        raise DataError(f"summary indices must lie in 1..{shares.k - 1}, got {idx}")
    arr = np.asarray(idx)
    return SelectedShares(shares.inc_shares[arr], shares.pop_shares[arr], idx)


def gini_lower_bound(shares: GroupedShares) -> float:
    """Gini of the piecewise-linear Lorenz interpolant (Gastwirth lower bound)."""
    p, y = shares.pop_shares, shares.inc_shares
    return float(1.0 - np.sum(np.diff(p) * (y[1:] + y[:-1])))


def _realised(shares: GroupedShares) -> GroupedShares:
    """Shares on the realised class proportions ``n_j / n`` when ``n`` is known.

    A nominal grid such as quintiles cannot be met exactly when ``n * p_j`` is
    fractional; the class means behind the bounds must use the actual counts.
    """
    if shares.n is None:
        return shares
    p = np.concatenate(([0.0], cut_ranks(shares.n, shares.interior_pop) / shares.n, [1.0]))
    if np.allclose(p, shares.pop_shares, rtol=0, atol=1e-12):
        return shares
    return replace(shares, pop_shares=p)


def _full_boundaries(shares: GroupedShares, boundaries) -> np.ndarray:
    z = np.asarray(boundaries, dtype=float).ravel()
    k = shares.k
    if z.size == k - 1:
        z = np.concatenate(([shares.lower_support], z, [math.inf]))
    if z.size != k + 1:
        raise DataError(f"expected {k - 1} interior or {k + 1} full class boundaries, got {z.size}")
    if np.any(np.diff(z) < 0):
        raise DataError("class boundaries must be nondecreasing")
    return z


def gini_upper_bound(shares: GroupedShares, boundaries=None, mean_income=None) -> float:
    """Gastwirth upper bound: lower bound plus the largest mean-preserving within-class spread.

    Within class j on ``[z_{j-1}, z_j]`` with mean ``m_j`` the spread is
    largest when all mass sits on the two endpoints, contributing
    ``pi_j**2 (z_j - m_j)(m_j - z_{j-1}) / (mu (z_j - z_{j-1}))`` to the Gini.
    An open top class (``z_k = inf``) contributes ``pi_j**2 (m_j - z_{j-1}) / mu``.
    """
    boundaries = shares.boundaries if boundaries is None else boundaries
    mean_income = shares.mean_income if mean_income is None else mean_income
    if boundaries is None or mean_income is None:
        raise BoundUnavailable("upper bound needs class boundaries and the overall mean income")
    shares = _realised(shares)
    z = _full_boundaries(shares, boundaries)
    mu = float(mean_income)
    pi = np.diff(shares.pop_shares)
    m = mu * np.diff(shares.inc_shares) / pi
    lo, hi = z[:-1], z[1:]
    slack = 1e-9 * np.maximum(1.0, np.abs(m))
    outside = (m < lo - slack) | (m > hi + slack)
    if outside.any():
        j = int(np.flatnonzero(outside)[0]) + 1
        raise DataError(f"class {j} mean {m[j - 1]:.6g} lies outside [{lo[j - 1]:.6g}, {hi[j - 1]:.6g}]")
    m = np.clip(m, lo, hi)
    width = hi - lo
    spread = np.zeros_like(m)
    open_top = np.isinf(hi)
    closed = ~open_top & (width > 0)
    spread[closed] = (hi[closed] - m[closed]) * (m[closed] - lo[closed]) / width[closed]
    spread[open_top] = m[open_top] - lo[open_top]
    return gini_lower_bound(shares) + float(np.sum(pi ** 2 * spread)) / mu


def gastwirth_bounds(shares: GroupedShares, boundaries=None, mean_income=None) -> GastwirthBounds:
    shares = _realised(shares)
    lower = gini_lower_bound(shares)
    try:
        upper = gini_upper_bound(shares, boundaries, mean_income)
    except BoundUnavailable as exc:
        return GastwirthBounds(lower=lower, notes=[str(exc)])
    return GastwirthBounds(lower=lower, upper=upper, upper_available=True)


# ---------------------------------------------------------------------------
# delimited-text ingestion and writing

_POP_COUNT_KEYS = ("count", "households", "freq", "number")
_POP_KEYS = ("pop", "household", "population", "p")
_INC_MEAN_KEYS = ("mean",)
_INC_KEYS = ("inc", "income", "share", "y")
_BOUNDARY_KEYS = ("boundary", "upper", "limit", "z")


@dataclass(frozen=True)
class GroupedFormat:
    """Column roles for ``load_grouped``; ``None`` fields are inferred from headers.

    ``pop_kind`` is one of ``share``, ``cumulative``, ``count``;
    ``inc_kind`` one of ``share``, ``cumulative``, ``mean``.
    """

    pop_column: str | None = None
    inc_column: str | None = None
    boundary_column: str | None = None
    pop_kind: str | None = None
    inc_kind: str | None = None
    delimiter: str | None = None


def _match(headers, keys, exclude=()):
    for h in headers:
        low = h.lower()
        if h in exclude:
            continue
        if any(k == low or k in low.replace("-", "_").split("_") or (len(k) > 2 and k in low)
               for k in keys):
            return h
    return None


def _detect_kind(values: np.ndarray, what: str, first_row: int) -> tuple[str, np.ndarray]:
    vals = values.copy()
    total, last = vals.sum(), vals[-1]
    for scale in (1.0, 100.0):
        cumulative = abs(last - scale) <= 1e-6 * scale and np.all(np.diff(vals) >= -1e-12 * scale)
        per_group = abs(total - scale) <= 1e-6 * scale
        if cumulative:
            return "cumulative", vals / scale
        if per_group:
            return "share", vals / scale
    raise IngestionError(
        f"{what} column neither sums to 1 nor ends at 1 (sum={total:.8g}, last={last:.8g})",
        row=first_row)


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    with open(os.fspath(source), newline="", encoding="utf-8") as fh:
        return fh.read()


def load_grouped(source, fmt: GroupedFormat | None = None) -> GroupedShares:
    """Read a comma- or tab-delimited grouped table into cumulative shares.

    Columns: group index, population share (per-group or cumulative) or
    household count, income share (per-group or cumulative) or class mean
    income, and optionally the upper class boundary.  Leading ``# key: value``
    lines may carry ``n``, ``mean_income`` and ``lower_support``.
    """
    fmt = fmt or GroupedFormat()
    text = _read_text(source)
    lines = text.splitlines()
    meta: dict[str, str] = {}
    body: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition(":")
            if sep:
                meta[key.strip().lower()] = value.strip()
            continue
        body.append((lineno, line))
    if not body:
        raise IngestionError("file is empty")
    delimiter = fmt.delimiter or ("\t" if "\t" in body[0][1] else ",")
    reader = csv.reader(io.StringIO("\n".join(line for _, line in body)), delimiter=delimiter)
    rows = list(reader)
    headers = [h.strip() for h in rows[0]]
    data_rows = rows[1:]
    line_numbers = [ln for ln, _ in body[1:]]
    if not data_rows:
        raise IngestionError("no data rows after the header", row=body[0][0])

    pop_col = fmt.pop_column or _match(headers[1:], _POP_COUNT_KEYS) or _match(headers[1:], _POP_KEYS)
    inc_col = fmt.inc_column or _match(headers[1:], _INC_MEAN_KEYS + _INC_KEYS, exclude=(pop_col,))
    bnd_col = fmt.boundary_column or _match(headers[1:], _BOUNDARY_KEYS, exclude=(pop_col, inc_col))
    if pop_col is None or inc_col is None:
        if len(headers) < 3:
            raise IngestionError(f"cannot identify population and income columns in {headers}")
        pop_col, inc_col = pop_col or headers[1], inc_col or headers[2]
    if pop_col not in headers or inc_col not in headers:
        raise IngestionError(f"columns {pop_col!r}/{inc_col!r} not in header {headers}")
    ip, ii = headers.index(pop_col), headers.index(inc_col)
    ib = headers.index(bnd_col) if bnd_col in headers else None

    pops, incs, bnds = [], [], []
    for row, ln in zip(data_rows, line_numbers):
        if len(row) < len(headers):
            raise IngestionError(f"expected {len(headers)} fields, found {len(row)}", row=ln)
        try:
            pops.append(float(row[ip]))
            incs.append(float(row[ii]))
        except ValueError:
            raise IngestionError(f"non-numeric value in {row}", row=ln) from None
        if ib is not None:
            cell = row[ib].strip()
            bnds.append(math.inf if cell in ("", "inf", "Inf", "NA") else float(cell))
    pops_a, incs_a = np.asarray(pops), np.asarray(incs)
    if np.any(~np.isfinite(pops_a)) or np.any(~np.isfinite(incs_a)) or np.any(pops_a < 0) or np.any(incs_a < 0):
        bad = int(np.flatnonzero(~np.isfinite(pops_a) | ~np.isfinite(incs_a) | (pops_a < 0) | (incs_a < 0))[0])
        raise IngestionError("values must be finite and nonnegative", row=line_numbers[bad])

    n = int(meta["n"]) if "n" in meta else None
    pop_kind = fmt.pop_kind or ("count" if _match([pop_col], _POP_COUNT_KEYS) else None)
    if pop_kind == "count":
        n = int(round(pops_a.sum())) if n is None else n
        pop_group = pops_a / pops_a.sum()
        cum_pop = np.concatenate(([0.0], np.cumsum(pop_group)))
    else:
        kind, vals = (pop_kind, pops_a) if pop_kind else _detect_kind(pops_a, "population", line_numbers[0])
        if kind == "cumulative":
            cum_pop = np.concatenate(([0.0], vals))
            pop_group = np.diff(cum_pop)
        else:
            pop_group = vals
            cum_pop = np.concatenate(([0.0], np.cumsum(vals)))

    mean_income = float(meta["mean_income"]) if "mean_income" in meta else None
    inc_kind = fmt.inc_kind or ("mean" if _match([inc_col], _INC_MEAN_KEYS) else None)
    if inc_kind == "mean":
        totals = pop_group * incs_a
        if mean_income is None:
            mean_income = float(totals.sum())
        cum_inc = np.concatenate(([0.0], np.cumsum(totals) / totals.sum()))
    else:
        kind, vals = (inc_kind, incs_a) if inc_kind else _detect_kind(incs_a, "income", line_numbers[0])
        if kind == "cumulative":
            cum_inc = np.concatenate(([0.0], vals))
        else:
            cum_inc = np.concatenate(([0.0], np.cumsum(vals)))
    cum_pop[-1] = 1.0
    cum_inc[-1] = 1.0

    for j in range(1, cum_pop.size):
        ln = line_numbers[j - 1]
        if cum_pop[j] <= cum_pop[j - 1]:
            raise IngestionError("cumulative population shares are not strictly increasing", row=ln)
        if cum_inc[j] < cum_inc[j - 1]:
            raise IngestionError("cumulative income shares decrease", row=ln)
        if cum_inc[j] > cum_pop[j] + _TOL:
            raise IngestionError(
                f"Lorenz dominance violated: income share {cum_inc[j]:.6g} exceeds "
                f"population share {cum_pop[j]:.6g}", row=ln)

    boundaries = None
    if ib is not None:
        b = np.asarray(bnds)
        boundaries = b[:-1]
        if np.any(~np.isfinite(boundaries)):
            raise IngestionError("interior class boundaries must be finite", row=line_numbers[0])
    lower_support = float(meta.get("lower_support", 0.0))
    try:
        return GroupedShares(cum_pop, cum_inc, n=n, boundaries=boundaries,
                             mean_income=mean_income, lower_support=lower_support)
    except DataError as exc:
        raise IngestionError(str(exc)) from exc


def write_grouped(shares: GroupedShares, dest) -> None:
    """Write the canonical cumulative form; ``load_grouped`` reads it back exactly."""
    out = io.StringIO()
    if shares.n is not None:
        out.write(f"# n: {shares.n}\n")
    if shares.mean_income is not None:
        out.write(f"# mean_income: {shares.mean_income!r}\n")
    if shares.lower_support != 0.0:
        out.write(f"# lower_support: {shares.lower_support!r}\n")
    has_b = shares.boundaries is not None
    out.write("group,cum_pop,cum_income" + (",boundary" if has_b else "") + "\n")
    for j in range(1, shares.k + 1):
        row = [str(j), repr(float(shares.pop_shares[j])), repr(float(shares.inc_shares[j]))]
        if has_b:
            row.append(repr(float(shares.boundaries[j - 1])) if j < shares.k else "inf")
        out.write(",".join(row) + "\n")
    if hasattr(dest, "write"):
        dest.write(out.getvalue())
    else:
        with open(os.fspath(dest), "w", encoding="utf-8", newline="") as fh:
            fh.write(out.getvalue())
