import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lorenzabc import abc_smc as abc
from lorenzabc import gb_family as gb
from lorenzabc import grouped_data as gd
from lorenzabc.errors import ConfigError, DataError, StallError
from lorenzabc.gb_family import SubModel

QUINTILES = np.linspace(0, 1, 6)
DECILES = np.linspace(0, 1, 11)
DA_I = np.array([3.8, 1.3])


@pytest.fixture(scope="module")
def da_data():
    x = gb.sample(SubModel.DA.params(DA_I), np.random.default_rng(100), 10_000)
    return gd.from_sample(x, QUINTILES)


@pytest.fixture(scope="module")
def da_prior():
    return abc.PriorSpec.default("DA")


def _system(theta, x, w, sm="DA", eps=0.1):
    theta, x, w = (np.asarray(v, float) for v in (theta, x, w))
    return abc.ParticleSystem(SubModel(sm), theta, x, w, 0, eps, [eps], [np.zeros(len(w), int)])


# ---------------------------------------------------------------- priors and schedules

def test_prior_covers_free_coordinates():
    p = abc.PriorSpec.default("GB")
    assert p.names == ("a", "c", "p", "q")
    assert isinstance(p.marginals["c"], abc.UniformPrior)
    assert np.allclose(p.mean, [3, 0.5, 3, 3])
    with pytest.raises(ConfigError):
        abc.PriorSpec(SubModel.DA, {"a": abc.GammaPrior(3, 1)})
    with pytest.raises(ConfigError):
        abc.GammaPrior(0, 1)


def test_gamma_prior_density_matches_scipy():
    g = abc.GammaPrior(3.0, 2.0)
    assert g.logpdf(1.3) == pytest.approx(stats.gamma(3.0, scale=0.5).logpdf(1.3), rel=1e-12)
    assert g.logpdf(-1.0) == -math.inf
    assert abc.GammaPrior.from_pair(3, 2, "shape-scale").rate == 0.5


def test_tolerance_schedule_must_decrease():
    assert len(abc.ToleranceSchedule((0.1, 0.01, 0.005))) == 3
    for bad in [(), (0.1, 0.1), (0.01, 0.1), (0.1, 0.0), (math.inf,)]:
        with pytest.raises(ConfigError):
            abc.ToleranceSchedule(bad)


# ---------------------------------------------------------------- distance and simulation

def test_distance_examples():
    assert abc.distance([0.1, 0.3], [0.1, 0.3]) == 0.0
    assert abc.distance([0.1, 0.3, 0.6], [0.12, 0.29, 0.55]) == pytest.approx(0.05, abs=1e-15)
    with pytest.raises(DataError):
        abc.distance([0.1], [0.1, 0.2])


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=9), st.integers(0, 1000))
def test_distance_symmetric_nonnegative(x, seed):
    y = np.random.default_rng(seed).random(len(x))
    assert abc.distance(x, y) == abc.distance(y, x) >= 0


def test_simulate_shares_near_lorenz():
    x = abc.simulate_shares(DA_I, "DA", 10_000, QUINTILES, rng=np.random.default_rng(1))
    L = gb.lorenz("DA", SubModel.DA.params(DA_I), QUINTILES[1:-1])
    assert x.shape == (4,) and np.max(np.abs(x - L)) < 0.02


def test_simulate_shares_deterministic_and_summary_exact():
    a = abc.simulate_shares(DA_I, "DA", 10_000, QUINTILES, rng=np.random.default_rng(5))
    b = abc.simulate_shares(DA_I, "DA", 10_000, QUINTILES, rng=np.random.default_rng(5))
    c = abc.simulate_shares(DA_I, "DA", 10_000, DECILES, summary=(2, 4, 6, 8), rng=np.random.default_rng(5))
    assert np.array_equal(a, b) and np.array_equal(a, c)


def test_simulate_shares_matches_grouping_pipeline():
    rng1, rng2 = np.random.default_rng(9), np.random.default_rng(9)
    params = SubModel.SM.params([2.3, 3.0])
    x = abc.simulate_shares([2.3, 3.0], "SM", 5000, DECILES, rng=rng1)
    ref = gd.from_sample(gb.sample(params, rng2, 5000), DECILES).interior_inc
    assert np.allclose(x, ref, rtol=0, atol=1e-14)


# ---------------------------------------------------------------- bandwidths and weights

def test_bandwidth_examples():
    h = abc.bandwidths(np.array([[0.0], [math.sqrt(2.0)]]), 3000, 8)
    assert h[0] == pytest.approx(3000 ** (-1 / 12), abs=1e-12)
    assert h[0] == pytest.approx(0.5130, abs=5e-4)
    assert abc.bandwidths(np.ones((5, 2)), 100, 4)[0] == abc.BANDWIDTH_FLOOR


@settings(max_examples=30)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30))
def test_bandwidth_scale_equivariance(vals):
    v = np.array(vals)[:, None]
    h1 = abc.bandwidths(v, 50, 5)[0]
    if h1 <= abc.BANDWIDTH_FLOOR * 10:
        return
    assert abc.bandwidths(2 * v, 50, 5)[0] == pytest.approx(2 * h1, rel=1e-12)


def test_weighted_var_reliability_form():
    v = np.array([1.0, 2.0, 4.0])
    assert abc.weighted_var(v)[0] == pytest.approx(np.var(v, ddof=1))
    w = np.array([0.2, 0.3, 0.5])
    m = w @ v
    assert abc.weighted_var(v, w)[0] == pytest.approx(np.sum(w * (v - m) ** 2) / (1 - np.sum(w**2)))


def test_adaptive_weights_identical_x_returns_w():
    s = _system([[1, 1], [2, 2], [3, 3]], np.full((3, 2), 0.4), [0.2, 0.3, 0.5])
    assert np.allclose(abc.adaptive_weights(s, [0.1, 0.7], np.array([0.05, 0.05])), s.w, atol=1e-15)


def test_adaptive_weights_hand_case():
    w = np.array([0.2, 0.3, 0.5])
    xs = np.array([0.1, 0.5, 1.7])
    y = 0.4
    s = _system([[1, 1]] * 3, xs[:, None], w)
    v = abc.adaptive_weights(s, [y], np.array([1.0]))
    ref = w * np.exp(-((y - xs) ** 2) / 2)
    assert np.allclose(v, ref / ref.sum(), atol=1e-12)


def test_adaptive_weights_prefers_close_particle():
    s = _system([[1, 1], [2, 2]], [[0.3], [0.9]], [0.5, 0.5])
    v = abc.adaptive_weights(s, [0.3], np.array([0.1]))
    assert v[0] > v[1]


def test_adaptive_weights_underflow_falls_back():
    s = _system([[1, 1], [2, 2]], [[0.0], [0.001]], [0.4, 0.6])
    with pytest.warns(abc.KernelUnderflowWarning):
        v = abc.adaptive_weights(s, [1.0], np.array([1e-8]))
    assert np.array_equal(v, s.w)


def test_importance_weights_two_particle_hand_case():
    prior = abc.PriorSpec.default("DA")
    prev = np.array([[3.0, 1.0], [4.0, 2.0]])
    new = np.array([[3.2, 1.1], [3.9, 1.8]])
    v = np.array([0.3, 0.7])
    h = np.array([0.5, 0.25])
    lw = abc.importance_log_weights(new, prev, v, h, prior)
    for i in range(2):
        mix = sum(v[j] * np.prod(stats.norm.pdf(new[i], prev[j], h)) for j in range(2))
        pi = stats.gamma(3).pdf(new[i, 0]) * stats.gamma(3).pdf(new[i, 1])
        assert math.exp(lw[i]) == pytest.approx(pi / mix, rel=1e-12)


# ---------------------------------------------------------------- steps

def test_init_step_vacuous_tolerance(da_data, da_prior):
    s = abc.init_step(da_prior, "DA", da_data, 1.0, 50, 200, 3)
    assert s.rejection_counts == [0]
    assert np.all(s.w == 1 / 50)


def test_init_step_postcondition(da_data, da_prior):
    s = abc.init_step(da_prior, "DA", da_data, 0.1, 100, 10_000, 4)
    y = da_data.interior_inc
    assert s.N == 100 and all(abc.distance(x, y) < 0.1 for x in s.x)
    assert all(da_prior.in_support(t) for t in s.theta)


def test_init_step_stalls(da_data, da_prior):
    # a reduced cap keeps the test fast; any cap fails at this tolerance
    with pytest.raises(StallError) as exc:
        abc.init_step(da_prior, "DA", da_data, 1e-9, 5, 200, 5, stall_cap=300)
    assert exc.value.epsilon == 1e-9 and exc.value.step == 0


def test_smc_step_rejects_larger_tolerance(da_data, da_prior):
    s = abc.init_step(da_prior, "DA", da_data, 0.1, 20, 1000, 6)
    with pytest.raises(ConfigError):
        abc.smc_step(s, da_data, 0.2, da_prior, "DA", 1000, 7)


def test_smc_step_same_tolerance_sanity(da_data, da_prior):
    s = abc.init_step(da_prior, "DA", da_data, 1.0, 200, 200, 8)
    t = abc.smc_step(s, da_data, 1.0, da_prior, "DA", 200, 9)
    # only perturbations leaving the prior support can be rejected at a vacuous tolerance
    assert all(da_prior.in_support(th) for th in t.theta)
    assert t.w.sum() == pytest.approx(1.0, abs=1e-12)


def test_flat_kernel_limit_recovers_prior(da_data, da_prior):
    N = 10_000
    s = abc.init_step(da_prior, "DA", da_data, 1.0, N, 20, 10)
    s.bandwidths["x"] = np.full(4, 1e6)
    t = abc.smc_step(s, da_data, 1.0, da_prior, "DA", 20, 11)
    mean = t.w @ t.theta
    ess = t.ess
    se = np.sqrt(da_prior.var / ess)
    assert np.all(np.abs(mean - da_prior.mean) < 3 * se)


def test_run_schedule_length_one_equals_init(da_data, da_prior):
    r = abc.run(da_prior, "DA", da_data, [0.1], 30, 2000, rng=12)
    s = abc.init_step(da_prior, "DA", da_data, 0.1, 30, 2000, None, _root_key=12)
    assert np.array_equal(r.system.theta, s.theta) and np.array_equal(r.system.w, s.w)


@pytest.fixture(scope="module")
def da_run(da_data, da_prior):
    return abc.run(da_prior, "DA", da_data, [0.1, 0.01, 0.005], 300, 10_000, rng=13)


def test_run_invariants(da_run, da_data):
    s = da_run.system
    y = da_data.interior_inc
    assert np.all(np.max(np.abs(s.x - y), axis=1) < 0.005)
    assert s.w.sum() == pytest.approx(1.0, abs=1e-12) and np.all(s.w >= 0)
    assert all(b < a for a, b in zip(s.eps_history, s.eps_history[1:]))
    assert len(s.rejections) == 3 and all(np.isfinite(r).all() for r in s.rejections)


def test_run_recovers_gini(da_run):
    summ = abc.posterior_summary(da_run.system)
    assert summ.gini.mean == pytest.approx(0.2482, abs=0.01)
    assert summ.gini.lower <= summ.gini.mean <= summ.gini.upper


def test_fit_diagnostic_bounded_by_tolerance(da_run, da_data):
    d = abc.fit_diagnostic(da_run.system, da_data)
    assert d.shape == (4,) and np.all(d <= 0.005)


def test_run_thread_count_does_not_change_results(da_data, da_prior):
    a = abc.run(da_prior, "DA", da_data, [0.1, 0.01], 60, 2000, rng=14, threads=1)
    b = abc.run(da_prior, "DA", da_data, [0.1, 0.01], 60, 2000, rng=14, threads=3)
    for f in ("theta", "x", "w"):
        assert np.array_equal(getattr(a.system, f), getattr(b.system, f))
    assert a.trajectory == b.trajectory


def test_run_sm_setting_iv():
    params = SubModel.SM.params([1.6, 3.5])
    data = gd.from_sample(gb.sample(params, np.random.default_rng(15), 10_000), QUINTILES)
    r = abc.run(abc.PriorSpec.default("SM"), "SM", data, [0.1, 0.01, 0.005], 300, 10_000, rng=16)
    assert abc.posterior_summary(r.system).gini.mean == pytest.approx(0.4052, abs=0.01)


@pytest.mark.slow
def test_gini_band_narrows_over_steps(da_prior):
    narrowing = 0
    for rep in range(5):
        x = gb.sample(SubModel.DA.params(DA_I), np.random.default_rng(200 + rep), 10_000)
        data = gd.from_sample(x, QUINTILES)
        r = abc.run(da_prior, "DA", data, [0.1, 0.01, 0.005], 200, 10_000, rng=300 + rep)
        widths = [row.q975 - row.q025 for row in r.trajectory if row.param == "G"]
        narrowing += all(b <= a for a, b in zip(widths, widths[1:]))
    assert narrowing >= 4


# ---------------------------------------------------------------- summaries

def test_posterior_summary_identical_particles():
    s = _system([[3.0, 1.5]] * 4, np.full((4, 4), 0.3), [0.25] * 4)
    summ = abc.posterior_summary(s)
    iv = summ.params["a"]
    assert iv.mean == iv.lower == iv.upper == 3.0
    g = gb.gini(SubModel.DA.params([3.0, 1.5])).value
    assert summ.gini.mean == pytest.approx(g, abs=1e-12) and summ.gini.upper - summ.gini.lower == 0


def test_weighted_mean_of_gini_values():
    w = np.array([0.5, 0.5])
    assert float(w @ np.array([0.2, 0.4])) == pytest.approx(0.3)
    iv = abc._interval(np.array([0.2, 0.4]), w)
    assert iv.mean == pytest.approx(0.3)


def test_weighted_quantile_equal_weights():
    v = np.random.default_rng(0).normal(size=999)
    w = np.full(v.size, 1 / v.size)
    srt = np.sort(v)
    for p in (0.025, 0.5, 0.975):
        q = abc.weighted_quantile(v, w, [p])[0]
        k = int(np.searchsorted(srt, q))
        assert abs(k - p * v.size) <= 1


def test_infinite_mean_particles_are_excluded():
    s = _system([[2.0, 3.0], [2.0, 0.4]], np.full((2, 4), 0.3), [0.5, 0.5], sm="SM")
    summ = abc.posterior_summary(s)
    assert summ.infinite_mean_mass == pytest.approx(0.5)
    assert summ.gini.mean == pytest.approx(gb.gini(SubModel.SM.params([2.0, 3.0])).value)


def test_fit_diagnostic_zero_when_x_equals_y(da_data):
    y = da_data.interior_inc
    s = _system([[3.0, 1.5]] * 3, np.tile(y, (3, 1)), [0.2, 0.3, 0.5])
    assert np.all(abc.fit_diagnostic(s, da_data) == 0)


# ---------------------------------------------------------------- evidence

def test_evidence_vacuous_and_deterministic(da_data, da_prior):
    e = abc.evidence(da_prior, "DA", da_data, 1.0, 50, 500, rng=17)
    assert e.log_evidence == 0.0 and e.rate == 1.0
    a = abc.evidence(da_prior, "DA", da_data, 0.05, 200, 2000, rng=18)
    b = abc.evidence(da_prior, "DA", da_data, 0.05, 200, 2000, rng=18, threads=2)
    assert a == b and a.log_evidence == pytest.approx(math.log(a.acceptances / 200))


def test_evidence_zero_acceptances(da_data, da_prior):
    with pytest.warns(RuntimeWarning, match="no acceptances"):
        e = abc.evidence(da_prior, "DA", da_data, 1e-9, 20, 200, rng=19)
    assert e.log_evidence == -math.inf and e.acceptances == 0


# ---------------------------------------------------------------- delimited output

def test_dumps_round_trip(tmp_path, da_run):
    abc.write_trajectory(da_run.trajectory, tmp_path / "t.csv")
    assert abc.read_trajectory(tmp_path / "t.csv") == da_run.trajectory
    abc.write_particles(da_run.system, tmp_path / "p.csv")
    names, theta, x, w = abc.read_particles(tmp_path / "p.csv")
    assert names == ["a", "p"]
    s = da_run.system
    assert np.array_equal(theta, s.theta) and np.array_equal(x, s.x) and np.array_equal(w, s.w)
    abc.write_rejections(da_run, tmp_path / "r.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "step,epsilon,total_rejections,mean_per_particle" and len(rows) == 4
