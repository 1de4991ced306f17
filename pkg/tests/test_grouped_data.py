import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lorenzabc import gb_family as gb
from lorenzabc import grouped_data as gd
from lorenzabc.errors import BoundUnavailable, DataError, IngestionError, ResolutionError
from lorenzabc.gb_family import SubModel

QUINTILES = np.linspace(0, 1, 6)
DECILES = np.linspace(0, 1, 11)


def shares(y, p=None, **kw):
    y = np.asarray(y, float)
    p = np.linspace(0, 1, y.size) if p is None else np.asarray(p, float)
    return gd.GroupedShares(p, y, **kw)


# ---------------------------------------------------------------- construction

def test_hand_computed_quintiles():
    s = gd.from_sample([1, 2, 3, 4, 10], QUINTILES)
    assert np.allclose(s.inc_shares, [0, 0.05, 0.15, 0.30, 0.50, 1.0], atol=1e-15)
    assert np.array_equal(s.boundaries, [1, 2, 3, 4])
    assert s.n == 5 and s.mean_income == 4.0


def test_equal_incomes_give_equality():
    s = gd.from_sample(np.full(1000, 3.7), DECILES)
    assert np.allclose(s.inc_shares, s.pop_shares, atol=1e-14)


def test_from_sample_matches_lorenz():
    params = SubModel.DA.params([3.8, 1.3])
    s = gd.from_sample(gb.sample(params, np.random.default_rng(2), 100_000), QUINTILES)
    L = gb.lorenz("DA", params, QUINTILES[1:-1])
    assert np.max(np.abs(s.interior_inc - L)) < 0.005


def test_from_sample_errors():
    with pytest.raises(DataError):
        gd.from_sample([1.0, -2.0, 3.0, 4.0, 5.0], QUINTILES)
    with pytest.raises(ResolutionError):
        gd.from_sample([1.0, 2.0, 3.0], QUINTILES)
    with pytest.raises(ResolutionError):
        gd.from_sample(np.arange(1.0, 11.0), [0, 0.31, 0.35, 1])


@pytest.mark.parametrize("bad", [
    dict(p=[0, 0.5, 0.4, 1], y=[0, 0.1, 0.2, 1]),
    dict(p=[0, 0.5, 1], y=[0, 0.6, 1]),
    dict(p=[0, 0.5, 1], y=[0, 0.3, 0.9]),
    dict(p=[0, 0.5, 0.7, 1], y=[0, 0.3, 0.2, 1]),
])
def test_invariants_enforced(bad):
    with pytest.raises(DataError):
        gd.GroupedShares(bad["p"], bad["y"])


def test_income_shares_sum_to_one():
    q = gd.income_shares(shares([0, 0.05, 0.15, 0.30, 0.50, 1.0]))
    assert np.allclose(q.q, [0.05, 0.10, 0.15, 0.20, 0.50])
    with pytest.raises(DataError):
        gd.IncomeShares([0.5, 0.6])


def test_order_statistics_invariants():
    s = gd.from_sample(np.arange(1.0, 101.0), QUINTILES)
    os_ = gd.order_statistics(s)
    assert np.array_equal(os_.n_js, [20, 40, 60, 80])
    assert np.array_equal(os_.z, [20, 40, 60, 80])
    with pytest.raises(ResolutionError):
        gd.OrderStatistics([1.0, 2.0], [3, 3], 10)


def test_cut_ranks_absorb_representation_error():
    assert np.array_equal(gd.cut_ranks(10, [0.3, 0.6, 0.7000000000000001]), [3, 6, 7])
    assert np.array_equal(gd.cut_ranks(10_000, DECILES[1:-1]), np.arange(1000, 10_000, 1000))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-3, 1e6), min_size=10, max_size=300), st.floats(1e-3, 1e3))
def test_from_sample_properties(xs, scale):
    s = gd.from_sample(xs, QUINTILES)
    assert np.all(np.diff(s.inc_shares) >= 0) and np.all(s.inc_shares <= s.pop_shares + 1e-12)
    t = gd.from_sample(np.asarray(xs) * scale, QUINTILES)
    assert np.max(np.abs(s.inc_shares - t.inc_shares)) < 1e-12


# ---------------------------------------------------------------- summary selection

def test_summary_select_paper_indices():
    s = gd.from_sample(np.random.default_rng(0).gamma(2, size=1000), DECILES)
    sel = gd.summary_select(s, [1, 3, 5, 7, 9])
    assert np.array_equal(sel.values, s.inc_shares[[1, 3, 5, 7, 9]])
    assert np.array_equal(sel.pop, s.pop_shares[[1, 3, 5, 7, 9]])


def test_summary_select_identity():
    s = gd.from_sample(np.random.default_rng(0).gamma(2, size=1000), DECILES)
    assert np.array_equal(gd.summary_select(s, range(1, 10)).values, s.interior_inc)


@settings(max_examples=25, deadline=None)
@given(st.integers(10, 20_000), st.integers(0, 2**31))
def test_even_deciles_equal_quintiles_exactly(n, seed):
    x = np.random.default_rng(seed).lognormal(size=n)
    dec = gd.from_sample(x, DECILES)
    quin = gd.from_sample(x, QUINTILES)
    assert np.array_equal(gd.summary_select(dec, [2, 4, 6, 8]).values, quin.interior_inc)


def test_summary_select_out_of_range():
    s = shares([0, 0.05, 0.15, 0.30, 0.50, 1.0])
    for bad in ([0], [5], []):
        with pytest.raises(DataError):
            gd.summary_select(s, bad)


# ---------------------------------------------------------------- Gastwirth bounds

def test_lower_bound_examples():
    assert gd.gini_lower_bound(shares(QUINTILES)) == pytest.approx(0.0, abs=1e-15)
    assert gd.gini_lower_bound(shares([0, 0.05, 0.15, 0.30, 0.50, 1.0])) == pytest.approx(0.4, abs=1e-15)


def test_lower_bound_below_true_gini_sm():
    params = SubModel.SM.params([2.3, 3.0])
    s = gd.from_sample(gb.sample(params, np.random.default_rng(4), 100_000), DECILES)
    assert gd.gini_lower_bound(s) <= 0.3041


def _brute_lorenz_gini(p, y, m=200_001):
    u = np.union1d(np.linspace(0, 1, m), p)
    L = np.interp(u, p, y)
    return 1 - 2 * np.sum((L[1:] + L[:-1]) / 2 * np.diff(u))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=12))
def test_lower_bound_is_gini_of_interpolant(q):
    inc = np.concatenate(([0], np.cumsum(np.sort(q)) / np.sum(q)))
    inc[-1] = 1.0
    s = shares(inc)
    # trapezoid over a grid containing the kinks is exact for a piecewise-linear curve
    assert gd.gini_lower_bound(s) == pytest.approx(_brute_lorenz_gini(s.pop_shares, s.inc_shares), abs=1e-12)


def _toy():
    z = np.array([0.0, 1.0, 2.0, 4.0])
    pi = np.array([0.5, 0.3, 0.2])
    m = np.array([0.5, 1.5, 3.0])
    mu = float(pi @ m)
    s = gd.GroupedShares(np.concatenate(([0], np.cumsum(pi))),
                         np.concatenate(([0], np.cumsum(pi * m) / mu)),
                         boundaries=z[1:3], mean_income=mu)
    return s, z, pi, m, mu


def test_upper_bound_brute_force_toy():
    s, z, pi, m, mu = _toy()

    def two_point(j, g=7):
        out = []
        for lo in np.linspace(z[j], m[j], g):
            for hi in np.linspace(m[j], z[j + 1], g):
                if hi - lo < 1e-12:
                    out.append(((m[j],), (1.0,)))
                else:
                    w = (hi - m[j]) / (hi - lo)
                    out.append(((lo, hi), (w, 1 - w)))
        return out

    best = 0.0
    for combo in itertools.product(*(two_point(j) for j in range(3))):
        xs = np.array([x for j, (pts, _) in enumerate(combo) for x in pts])
        ws = np.array([pi[j] * w for j, (_, wts) in enumerate(combo) for w in wts])
        g = np.sum(ws[:, None] * ws[None, :] * np.abs(xs[:, None] - xs[None, :])) / (2 * mu)
        best = max(best, g)
    assert gd.gini_upper_bound(s, boundaries=z) == pytest.approx(best, abs=1e-6)


def test_upper_bound_degenerate_classes():
    x = np.repeat([1.0, 2.0, 3.0, 4.0, 5.0], 20)
    s = gd.from_sample(x, QUINTILES)
    assert gd.gini_upper_bound(s, boundaries=[1, 2, 3, 4, 5, 5]) == pytest.approx(gd.gini_lower_bound(s), abs=1e-12)


def test_upper_bound_requires_boundaries():
    s = shares([0, 0.05, 0.15, 0.30, 0.50, 1.0])
    with pytest.raises(BoundUnavailable):
        gd.gini_upper_bound(s)
    b = gd.gastwirth_bounds(s)
    assert not b.upper_available and math.isnan(b.upper) and b.notes


def test_upper_bound_class_mean_outside():
    s, z, *_ = _toy()
    with pytest.raises(DataError):
        gd.gini_upper_bound(s, boundaries=[0.0, 0.2, 2.0, 4.0])


@pytest.mark.parametrize("theta", [(3.0, 1.5)])
def test_bounds_bracket_da(theta):
    params = SubModel.DA.params(theta)
    rng = np.random.default_rng(21)
    hits = 0
    for _ in range(100):
        s = gd.from_sample(gb.sample(params, rng, 10_000), QUINTILES)
        b = gd.gastwirth_bounds(s)
        assert b.upper_available and 0 <= b.lower <= b.upper < 1
        hits += b.lower <= 0.3087 <= b.upper
    assert hits >= 95


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=20, max_size=200))
def test_lower_below_upper(xs):
    s = gd.from_sample(xs, QUINTILES)
    b = gd.gastwirth_bounds(s)
    assert b.lower <= b.upper + 1e-12


def test_lower_bound_converges_from_below():
    params = SubModel.SM.params([2.3, 3.0])
    x = gb.sample(params, np.random.default_rng(6), 1_000_000)
    s = gd.from_sample(x, np.linspace(0, 1, 101))
    lb = gd.gini_lower_bound(s)
    xs = np.sort(x)
    ranks = np.arange(1, xs.size + 1)
    sample_gini = np.sum((2 * ranks - xs.size - 1) * xs) / (xs.size * xs.sum())
    assert lb <= sample_gini
    assert abs(gb.gini(params).value - lb) < 0.001


# ---------------------------------------------------------------- ingestion

def test_load_per_group_shares():
    text = "group,pop_share,income_share\n" + "\n".join(
        f"{j},0.2,{q}" for j, q in enumerate([0.05, 0.10, 0.20, 0.25, 0.40], 1))
    s = gd.load_grouped(io.StringIO(text))
    assert np.allclose(s.inc_shares, [0, 0.05, 0.15, 0.35, 0.60, 1.0])
    assert np.allclose(s.pop_shares, QUINTILES)


def test_load_counts_and_means_tab_delimited():
    text = "group\thouseholds\tmean_income\n1\t50\t1.0\n2\t30\t2.0\n3\t20\t5.0\n"
    s = gd.load_grouped(io.StringIO(text))
    assert s.n == 100
    assert s.mean_income == pytest.approx(2.1)
    assert np.allclose(s.inc_shares, [0, 0.5 / 2.1, 1.1 / 2.1, 1.0])


def test_load_percentages():
    text = "group,pop,income\n1,50,20\n2,50,80\n"
    s = gd.load_grouped(io.StringIO(text))
    assert np.allclose(s.inc_shares, [0, 0.2, 1.0])


def test_load_empty_and_malformed():
    with pytest.raises(IngestionError):
        gd.load_grouped(io.StringIO(""))
    with pytest.raises(IngestionError, match="row 3"):
        gd.load_grouped(io.StringIO("group,pop,income\n1,0.5,0.2\n2,x,0.8\n"))
    with pytest.raises(IngestionError):
        gd.load_grouped(io.StringIO("group,pop,income\n1,0.5,0.2\n2,0.4,0.7\n"))


def test_load_lorenz_violation_reports_row():
    text = "group,cum_pop,cum_income\n1,0.2,0.1\n2,0.4,0.3\n3,0.6,0.65\n4,0.8,0.8\n5,1.0,1.0\n"
    with pytest.raises(IngestionError, match="row 4"):
        gd.load_grouped(io.StringIO(text))


def test_write_load_round_trip(tmp_path):
    params = SubModel.DA.params([3.8, 1.3])
    s = gd.from_sample(gb.sample(params, np.random.default_rng(1), 10_000), DECILES)
    path = tmp_path / "d.csv"
    gd.write_grouped(s, path)
    t = gd.load_grouped(path)
    assert np.array_equal(s.pop_shares, t.pop_shares)
    assert np.array_equal(s.inc_shares, t.inc_shares)
    assert np.array_equal(s.boundaries, t.boundaries)
    assert (s.n, s.mean_income) == (t.n, t.mean_income)
    assert gd.gastwirth_bounds(s) == gd.gastwirth_bounds(t)


def test_bounds_use_realised_class_sizes():
    # n = 21 cannot fill quintiles evenly: classes hold 4, 4, 4, 4, 5 households
    s = gd.from_sample(np.ones(21), QUINTILES)
    b = gd.gastwirth_bounds(s)
    assert b.lower == pytest.approx(0.0, abs=1e-15) and b.upper == pytest.approx(0.0, abs=1e-15)
    x = np.random.default_rng(3).lognormal(size=23)
    s = gd.from_sample(x, QUINTILES)
    b = gd.gastwirth_bounds(s)
    xs = np.sort(x)
    ranks = np.arange(1, xs.size + 1)
    sample_gini = np.sum((2 * ranks - xs.size - 1) * xs) / (xs.size * xs.sum())
    assert b.lower <= sample_gini <= b.upper
