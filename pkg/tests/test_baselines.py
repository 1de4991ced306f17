import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from lorenzabc import baselines_mcmc as mc
from lorenzabc import gb_family as gb
from lorenzabc import grouped_data as gd
from lorenzabc.abc_smc import GammaPrior, PriorSpec
from lorenzabc.errors import (ConfigError, InitializationError, LikelihoodDomainError,
                              ParameterDomainError, UnsupportedCombinationError)
from lorenzabc.gb_family import SubModel

UNIFORM = [1.0, 1.0, 1.0]  # GB1 with a = p = q = 1


def batch_se(x, batches=20):
    m = np.asarray(x)[: len(x) // batches * batches].reshape(batches, -1).mean(axis=1)
    return m.std(ddof=1) / math.sqrt(batches)


# ---------------------------------------------------------------- Dirichlet likelihood

def test_dirichlet_equality_case():
    q = np.full(5, 0.2)
    dl = np.full(5, 0.2)
    assert mc.dirichlet_loglik_increments(q, dl, 5.0) == pytest.approx(math.log(24), abs=1e-12)


def test_dirichlet_flat_case_independent_of_q():
    dl = np.full(4, 0.25)
    rng = np.random.default_rng(0)
    vals = {round(mc.dirichlet_loglik_increments(rng.dirichlet(np.ones(4)), dl, 4.0), 12)
            for _ in range(5)}
    assert vals == {round(special.gammaln(4.0), 12)}


def test_dirichlet_matches_scipy_and_lorenz():
    theta = [3.8, 1.3]
    grid = np.linspace(0, 1, 6)
    dl = mc.lorenz_increments("DA", theta, grid)
    L = gb.lorenz("DA", SubModel.DA.params(theta), grid[1:-1])
    assert np.allclose(np.cumsum(dl)[:-1], L, atol=1e-12)
    q = np.random.default_rng(1).dirichlet(30 * dl)
    ref = stats.dirichlet(30 * dl).logpdf(q)
    assert mc.dirichlet_loglik(q, theta, 30.0, "DA") == pytest.approx(ref, rel=1e-10)


def test_dirichlet_permutation_invariance():
    rng = np.random.default_rng(2)
    dl = rng.dirichlet(np.ones(6))
    q = rng.dirichlet(np.ones(6))
    perm = rng.permutation(6)
    assert mc.dirichlet_loglik_increments(q[perm], dl[perm], 7.0) == pytest.approx(
        mc.dirichlet_loglik_increments(q, dl, 7.0), rel=1e-13)


def test_dirichlet_moment_identities():
    dl = mc.lorenz_increments("SM", [2.3, 3.0], np.linspace(0, 1, 6))
    lam = 20.0
    draws = np.random.default_rng(3).dirichlet(lam * dl, size=1_000_000)
    n = draws.shape[0]
    mean, var = draws.mean(0), draws.var(0, ddof=1)
    assert np.all(np.abs(mean - dl) < 3 * np.sqrt(var / n))
    target = dl * (1 - dl) / (lam + 1)
    se_var = np.sqrt(np.var((draws - mean) ** 2, axis=0) / n)
    assert np.all(np.abs(var - target) < 3 * se_var)


def test_dirichlet_domain_errors():
    with pytest.raises(UnsupportedCombinationError):
        mc.lorenz_increments("GB2", [2, 2, 2], np.linspace(0, 1, 6))
    with pytest.raises(UnsupportedCombinationError):
        mc.DirichletParams("GB", [1, 0.5, 1, 1], 2.0)
    with pytest.raises(ParameterDomainError):
        mc.DirichletParams("DA", [2, 2], 0.0)
    with pytest.raises(LikelihoodDomainError):
        mc.dirichlet_loglik(np.full(5, 0.2), [0.8, 1.0], 5.0, "DA")
    with pytest.raises(LikelihoodDomainError):
        mc.dirichlet_loglik_increments(np.full(2, 0.5), [1.0, 0.0], 5.0)


# ---------------------------------------------------------------- SOS likelihood

def test_sos_single_order_statistic_closed_form():
    z, n, r = 0.3, 5, 2
    brute = math.factorial(n) / (math.factorial(r - 1) * math.factorial(n - r)) * z * (1 - z) ** 3
    got = mc.sos_loglik(([z], [r]), UNIFORM, "GB1", n)
    assert got == pytest.approx(math.log(brute), abs=1e-10)
    assert got == pytest.approx(stats.beta(r, n - r + 1).logpdf(z), abs=1e-10)


def test_sos_single_order_statistic_dagum():
    params = SubModel.DA.params([2.5, 1.4])
    z, n, r = 1.1, 40, 13
    F, f = gb.cdf(params, z), gb.pdf(params, z)
    ref = (special.gammaln(n + 1) - special.gammaln(r) - special.gammaln(n - r + 1)
           + (r - 1) * math.log(F) + (n - r) * math.log1p(-F) + math.log(f))
    assert mc.sos_loglik(([z], [r]), [2.5, 1.4], "DA", n) == pytest.approx(ref, abs=1e-10)


def test_sos_density_normalizes():
    def dens(z2, z1):
        return math.exp(mc.sos_loglik(([z1, z2], [2, 4]), UNIFORM, "GB1", 6)) if z2 > z1 else 0.0
    total, _ = integrate.dblquad(dens, 1e-12, 1 - 1e-12, lambda z1: z1, lambda z1: 1 - 1e-12)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_sos_rejects_bad_order_statistics():
    with pytest.raises(LikelihoodDomainError):
        mc.sos_loglik(([0.5, 0.3], [2, 4]), UNIFORM, "GB1", 6)
    with pytest.raises(LikelihoodDomainError):
        mc.sos_loglik(([0.3, 0.5], [4, 2]), UNIFORM, "GB1", 6)
    assert mc.sos_loglik(([0.3, 1.5], [2, 4]), UNIFORM, "GB1", 6) == -math.inf


# ---------------------------------------------------------------- lambda prior

def test_lambda_prior_identities():
    assert mc.lambda_prior_density(2.0, 1.0, 0.5) == pytest.approx(math.log(0.5) - 1.0)
    assert GammaPrior(1.0, 0.1).mean == pytest.approx(10.0)
    total, _ = integrate.quad(lambda x: math.exp(mc.lambda_prior_density(x, 1.0, 0.1)), 0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ParameterDomainError):
        mc.lambda_prior_density(0.0, 1.0, 1.0)


# ---------------------------------------------------------------- sampler

def test_mh_config_validation():
    for bad in [dict(iterations=10, burn_in=10), dict(thin=0), dict(proposal_scales=-1.0)]:
        with pytest.raises(ConfigError):
            mc.MHConfig(**bad)


def test_mh_gaussian_toy_target():
    cfg = mc.MHConfig(iterations=40_000, burn_in=4000, thin=2, proposal_scales=1.0, seed=4)
    ch = mc.mh_sample(lambda v: -0.5 * ((v[0] - 2.0) / 1.5) ** 2, None, cfg, [0.0],
                      names=("x",), transforms=("identity",))
    x = ch.column("x")
    assert x.size == cfg.retained
    assert abs(x.mean() - 2.0) < 3 * batch_se(x)
    assert abs(x.var() - 2.25) < 3 * batch_se((x - 2.0) ** 2)
    assert ch.accepted <= ch.proposed and 0 <= ch.acceptance_rate <= 1


def test_mh_prior_recovery():
    prior = PriorSpec.default("DA")
    cfg = mc.MHConfig(iterations=40_000, burn_in=4000, thin=2, seed=5)
    ch = mc.mh_sample(lambda v: 0.0, prior, cfg, prior.mean, names=("a", "p"))
    for name in ("a", "p"):
        x = ch.column(name)
        assert abs(x.mean() - 3.0) < 3 * batch_se(x)


def test_mh_tiny_steps_always_accept():
    cfg = mc.MHConfig(iterations=300, burn_in=0, thin=1, proposal_scales=1e-9, adapt=False, seed=6)
    ch = mc.mh_sample(lambda v: -v[0], None, cfg, [1.0], names=("x",))
    assert ch.acceptance_rate == 1.0


def test_mh_initialization_error():
    cfg = mc.MHConfig(iterations=10, burn_in=0)
    with pytest.raises(InitializationError):
        mc.mh_sample(lambda v: -math.inf, None, cfg, [1.0], names=("x",))
    with pytest.raises(InitializationError):
        mc.mh_sample(lambda v: 0.0, None, cfg, [-1.0], names=("x",))


@pytest.fixture(scope="module")
def da_quintiles():
    x = gb.sample(SubModel.DA.params([3.8, 1.3]), np.random.default_rng(7), 10_000)
    return gd.from_sample(x, np.linspace(0, 1, 11))


def test_sos_fit_recovers_gini(da_quintiles):
    cfg = mc.MHConfig(iterations=6000, burn_in=2000, thin=5, seed=8)
    ch = mc.fit_sos(da_quintiles, "DA", PriorSpec.default("DA"), cfg)
    assert ch.draws.shape == (cfg.retained, 2)
    assert ch.gini_draws.mean() == pytest.approx(0.2482, abs=0.01)


def test_dirichlet_fit_runs_and_rejects_gb(da_quintiles, tmp_path):
    cfg = mc.MHConfig(iterations=3000, burn_in=1000, thin=5, seed=9)
    ch = mc.fit_dirichlet(da_quintiles, "DA", PriorSpec.default("DA"), GammaPrior(1, 0.1), cfg)
    assert ch.names == ("a", "p", "lambda") and np.all(ch.draws > 0)
    assert np.all((ch.gini_draws > 0) & (ch.gini_draws < 1))
    with pytest.raises(UnsupportedCombinationError):
        mc.fit_dirichlet(da_quintiles, "GB", PriorSpec.default("GB"), GammaPrior(1, 0.1), cfg)

    mc.write_chain(ch, tmp_path / "chain.csv")
    header, body = mc.read_chain(tmp_path / "chain.csv")
    assert header == ["iteration", "a", "p", "lambda", "gini", "log_target"]
    assert np.array_equal(body[:, 1:4], ch.draws) and np.array_equal(body[:, 4], ch.gini_draws)
    assert np.array_equal(body[:, 0], ch.iterations)
