"""Inference tests: marginal likelihood oracles, sampler behavior,
conditional draws, summaries and density grids."""

import math
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from priorforest.assembly import build_prior, sample_prior
from priorforest.examples import example_setup, random_intercept_data
from priorforest import inference as inf

# 1% critical value of the two-sample KS statistic at n = m = 5000
KS_CRIT = 1.63 * math.sqrt(2.0 / 5000.0)


def model1_prior():
    kw = example_setup("model1")
    return build_prior(kw.pop("formula"), kw.pop("data"), **kw)


@pytest.fixture(scope="module")
def m1():
    return model1_prior()


@pytest.fixture(scope="module")
def m1_fit(m1):
    return inf.run_mcmc(m1, iterations=6000, warmup=2000, latent_draws=300, seed=4)


# ---------------------------------------------------------------------------
# marginal likelihood


def test_gaussian_marginal_matches_dense_oracle():
    rng = np.random.default_rng(8)
    y = rng.normal(0, 1, 20)
    prior = build_prior(
        "y ~ -1 + mc(a)",
        {"y": y, "a": (np.arange(20) % 4) + 1},
        tree="s = (a, eps)",
        variances={"s": ("pc0", 3, 0.05)},
    )
    for lv in ([0.0, 0.0], [0.4, -0.3], [-1.0, 0.8]):
        lv = np.array(lv)
        cov = sum(
            math.exp(lv[j]) * prior.obs_covariances[k]
            for j, k in enumerate(prior.component_order)
        )
        oracle = stats.multivariate_normal(mean=np.zeros(20), cov=cov).logpdf(y)
        assert inf.gaussian_marginal_loglik(prior, lv) == pytest.approx(
            oracle, abs=1e-8
        )


def test_gaussian_marginal_oracle_with_fixed_effects(m1):
    # the vague effect priors put the covariance near condition 1e8, so
    # agreement is limited by roundoff rather than the method
    mats = inf._Matrices(m1)
    for lv in ([0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [-1.0, 0.8, -0.4]):
        lv = np.array(lv)
        cov = mats.fixed_cov.copy()
        for j, label in enumerate(m1.component_order):
            cov += math.exp(lv[j]) * m1.obs_covariances[label]
        oracle = stats.multivariate_normal(mean=mats.mu0, cov=cov).logpdf(
            m1.data.response
        )
        assert inf.gaussian_marginal_loglik(m1, lv) == pytest.approx(
            oracle, abs=1e-7
        )


def test_gaussian_marginal_zero_variance_limit():
    # with the component variance pushed to zero the data are plain
    # independent noise around zero (no fixed effects in this model)
    rng = np.random.default_rng(2)
    y = rng.normal(0, 1, 30)
    prior = build_prior(
        "y ~ -1 + mc(a)",
        {"y": y, "a": (np.arange(30) % 3) + 1},
        tree="(a); (eps)",
        variances={"a": ("pc0", 3, 0.05), "eps": ("pc0", 3, 0.05)},
    )
    lv = np.zeros(2)
    lv[prior.component_order.index("a")] = -60.0
    lv[prior.component_order.index("eps")] = math.log(1.3)
    want = float(np.sum(stats.norm.logpdf(y, 0.0, math.sqrt(1.3))))
    assert inf.gaussian_marginal_loglik(prior, lv) == pytest.approx(want, abs=1e-8)


def test_laplace_equals_exact_for_gaussian(m1):
    for lv in ([0.0, 0.0, 0.0], [0.5, -0.5, 0.2], [-1.2, 0.4, -0.1]):
        exact = inf.gaussian_marginal_loglik(m1, lv)
        assert inf.laplace_marginal_loglik(m1, lv) == pytest.approx(exact, abs=1e-8)


def spanning_binomial_prior():
    # one iid level per observation makes the latent field span the
    # observation space, so both approximation routes are available
    rng = np.random.default_rng(5)
    n = 12
    data = {
        "y": rng.integers(0, 10, n),
        "a": np.arange(1, n + 1),
        "b": np.tile([1, 2, 3], 4),
    }
    return build_prior(
        "y ~ mc(a) + mc(b)",
        data,
        likelihood="binomial",
        trials=np.full(n, 10),
        tree="s = (a, b)",
        variances={"s": ("pc0", 1.6, 0.05)},
    )


def test_laplace_routes_agree():
    prior = spanning_binomial_prior()
    lap = inf._LaplaceMarginal(prior)
    assert lap.route == "obs"
    assert lap.m.z_dim > lap.m.n
    for lv in ([0.0, 0.0], [0.7, -0.4], [-1.2, 0.9]):
        lv = np.array(lv)
        lap._warm = None
        via_obs = lap._value_obs(lv)
        lap._warm = None
        via_latent = lap._value_latent(lv)
        assert via_obs == pytest.approx(via_latent, abs=1e-6)


def test_binomial_laplace_against_quadrature():
    # three groups of two observations: the marginal likelihood factors
    # into three one-dimensional integrals we can do by quadrature
    y = np.array([3, 5, 20, 22, 11, 14])
    groups = np.array([1, 1, 2, 2, 3, 3])
    with pytest.warns(UserWarning, match="default tree"):
        prior = build_prior(
            "y ~ -1 + mc(a)",
            {"y": y, "a": groups},
            likelihood="binomial",
            trials=np.full(6, 25),
        )
    sd = math.sqrt(0.8)

    def group_integral(ys):
        def f(u):
            p = 1.0 / (1.0 + math.exp(-u))
            lik = np.prod(
                [math.comb(25, int(t)) * p**t * (1 - p) ** (25 - t) for t in ys]
            )
            return lik * math.exp(-0.5 * (u / sd) ** 2) / (sd * math.sqrt(2 * math.pi))

        return integrate.quad(f, -12 * sd, 12 * sd, limit=200)[0]

    oracle = sum(
        math.log(group_integral(y[groups == g])) for g in (1, 2, 3)
    )
    approx = inf.laplace_marginal_loglik(prior, [math.log(0.8)])
    assert abs(approx - oracle) / abs(oracle) < 1.5e-3


def test_poisson_all_zero_counts_stays_finite():
    data = {"y": np.zeros(9, dtype=int), "a": np.repeat([1, 2, 3], 3)}
    with pytest.warns(UserWarning):
        prior = build_prior("y ~ mc(a)", data, likelihood="poisson")
    val = inf.laplace_marginal_loglik(prior, [0.0])
    assert math.isfinite(val)


# ---------------------------------------------------------------------------
# the sampler


def crossed_prior(weights=None):
    return build_prior(
        "y ~ mc(a) + mc(b)",
        {"y": np.zeros(4), "a": [1, 2, 1, 2], "b": [1, 1, 2, 2]},
        tree="s = (a, b); (eps)",
        weights=weights or {},
        variances={"s": ("pc0", 3, 0.05), "eps": ("pc0", 3, 0.05)},
    )


def test_prior_only_chain_matches_direct_sampling():
    prior = crossed_prior(weights={"s": "dirichlet"})
    res = inf.run_mcmc(prior, prior_only=True, iterations=55000, warmup=5000, seed=7)
    idx = np.linspace(0, res.n_draws - 1, 5000).round().astype(int)
    chain = res.log_variances[idx]
    direct = sample_prior(prior, 5000, seed=12).log_variances
    for j in range(chain.shape[1]):
        ks = stats.ks_2samp(chain[:, j], direct[:, j]).statistic
        assert ks < KS_CRIT


def test_prior_only_chain_recovers_weight_median():
    prior = crossed_prior(weights={"s": ("pc0", 0.25)})
    res = inf.run_mcmc(prior, prior_only=True, iterations=40000, warmup=5000, seed=3)
    names, draws = inf._tree_draws(prior, res.log_variances)
    w = draws[:, names.index("w[a/a_b]")]
    assert np.median(w) == pytest.approx(0.25, abs=0.01)


def test_prior_only_refuses_improper_priors():
    kw = example_setup("model1")
    prior = build_prior(
        kw.pop("formula"), kw.pop("data"),
        **{**kw, "variances": {"eps_a_b": "jeffreys"}},
    )
    with pytest.raises(inf.InferenceError, match="improper"):
        inf.run_mcmc(prior, prior_only=True, iterations=200, warmup=100)


def test_sampler_is_deterministic(m1):
    a = inf.run_mcmc(m1, iterations=1500, warmup=500, latent_draws=40, seed=4)
    b = inf.run_mcmc(m1, iterations=1500, warmup=500, latent_draws=40, seed=4)
    assert np.array_equal(a.log_variances, b.log_variances)
    assert np.array_equal(a.fixed_effects, b.fixed_effects)
    assert all(np.array_equal(a.latent[k], b.latent[k]) for k in a.latent)


def test_multiple_chains_are_stacked(m1):
    res = inf.run_mcmc(m1, iterations=1200, warmup=400, chains=2, latent=False, seed=5)
    assert res.log_variances.shape == (1600, 3)
    assert np.bincount(res.chain_ids).tolist() == [800, 800]
    # the two chains use different streams
    assert not np.array_equal(res.log_variances[:800], res.log_variances[800:])


def test_acceptance_rate_in_window(m1_fit):
    assert 0.1 <= m1_fit.acceptance_rate <= 0.5


def test_settings_validation(m1):
    with pytest.raises(inf.InferenceError):
        inf.run_mcmc(m1, iterations=100, warmup=100)
    with pytest.raises(inf.InferenceError):
        inf.run_mcmc(m1, iterations=100, warmup=10, chains=0)


def test_random_intercept_weight_posterior():
    data = random_intercept_data(m=10, p=10, seed=7)
    prior = build_prior(
        "y ~ mc(a)", data, tree="s = (a, eps)",
        variances={"s": ("pc0", 3, 0.05)},
    )
    res = inf.run_mcmc(prior, iterations=8000, warmup=2000, latent=False, seed=2)
    names, draws = inf._tree_draws(prior, res.log_variances)
    omega_a = 1.0 - draws[:, names.index("w[eps/eps_a]")]
    assert 0.1 < float(np.median(omega_a)) < 0.5


def test_jeffreys_posterior_scales_with_data():
    # scale-free total variance prior: multiplying the data by c multiplies
    # the posterior total variance by c^2 and leaves the weights alone
    c = 3.0
    base = random_intercept_data(m=10, p=10, seed=7)

    def fit(scale):
        data = {"y": np.asarray(base["y"]) * scale, "a": base["a"]}
        prior = build_prior(
            "y ~ mc(a)", data, tree="s = (a, eps)", variances={"s": "jeffreys"}
        )
        res = inf.run_mcmc(prior, iterations=55000, warmup=5000, latent=False, seed=11)
        names, draws = inf._tree_draws(prior, res.log_variances)
        idx = np.linspace(0, res.n_draws - 1, 5000).round().astype(int)
        return draws[idx]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        at_one = fit(1.0)
        at_c = fit(c)
    assert stats.ks_2samp(c * c * at_one[:, 0], at_c[:, 0]).statistic < KS_CRIT
    assert stats.ks_2samp(at_one[:, 1], at_c[:, 1]).statistic < KS_CRIT


# ---------------------------------------------------------------------------
# conditional draws


def test_conditional_draws_match_conjugate_posterior():
    # two groups, known variances: the group means shrink by
    # var_a / (var_a + var_eps / n_per)
    rng = np.random.default_rng(11)
    groups = np.repeat([1, 2], 50)
    y = np.array([1.0, -0.5])[groups - 1] + rng.normal(0, 0.6, 100)
    prior = build_prior(
        "y ~ -1 + mc(a)", {"y": y, "a": groups}, tree="(a); (eps)",
        variances={"a": ("pc0", 3, 0.05), "eps": ("pc0", 3, 0.05)},
    )
    var_a, var_eps = 0.8, 0.36
    lv = np.zeros(2)
    lv[prior.component_order.index("a")] = math.log(var_a)
    lv[prior.component_order.index("eps")] = math.log(var_eps)
    fixed, comps, names = inf.conditional_latent_draws(prior, lv, 4000, seed=9)
    assert fixed.shape == (4000, 0) and names == []
    ybar = np.array([y[groups == g].mean() for g in (1, 2)])
    closed = (var_a / (var_a + var_eps / 50)) * ybar
    got = comps["a"].mean(axis=0)
    mc_err = 4.0 * comps["a"].std(axis=0).max() / math.sqrt(4000)
    assert np.abs(got - closed).max() < mc_err


def rw2_fit():
    rng = np.random.default_rng(4)
    t = np.tile(np.arange(1, 13), 3)
    y = np.sin(t / 2.0) + rng.normal(0, 0.4, 36)
    prior = build_prior(
        "y ~ mc(t, model='rw2')", {"y": y, "t": t},
        tree="s = (t, eps)", weights={"s": ("pc0", 0.25)},
        variances={"s": ("pc0", 3, 0.05)},
    )
    return prior, inf.run_mcmc(prior, iterations=3000, warmup=1000, latent_draws=200, seed=2)


@pytest.fixture(scope="module")
def rw2():
    return rw2_fit()


def test_latent_draws_keep_constraints(rw2):
    _, res = rw2
    u = res.latent["t"]
    assert u.shape == (200, 12)
    assert np.abs(u.sum(axis=1)).max() < 1e-10


def test_latent_draws_shapes(m1_fit):
    assert m1_fit.fixed_effects.shape == (300, 2)
    assert m1_fit.fixed_effect_names == ["intercept", "x"]
    assert m1_fit.latent["a"].shape == (300, 10)
    assert m1_fit.latent["b"].shape == (300, 10)


# ---------------------------------------------------------------------------
# summaries and extraction


def test_summary_scales_and_monotone_identity(m1):
    # odd number of kept draws so the sample median is an actual draw and
    # monotone reparameterizations commute with it exactly
    res = inf.run_mcmc(m1, iterations=2101, warmup=100, latent=False, seed=6)
    s_var = inf.posterior_summaries(res, "variance")
    s_sd = inf.posterior_summaries(res, "stdev")
    s_prec = inf.posterior_summaries(res, "precision")
    assert s_var.index.tolist() == [f"sigma^2[{k}]" for k in m1.component_order]
    np.testing.assert_allclose(
        np.sqrt(s_var["median"].to_numpy()), s_sd["median"].to_numpy(), rtol=1e-12
    )
    np.testing.assert_allclose(
        1.0 / s_var["median"].to_numpy(), s_prec["median"].to_numpy(), rtol=1e-12
    )
    with pytest.raises(inf.InferenceError, match="unknown scale"):
        inf.posterior_summaries(res, "logit")


def test_tree_scale_summary_rows(m1_fit, m1):
    table = inf.posterior_summaries(m1_fit, "tree")
    assert table.index.tolist() == [
        "V[eps_a_b]", "w[a/a_b]", "w[eps/eps_a_b]", "intercept", "x",
    ]
    assert table.columns.tolist() == ["mean", "median", "sd"]
    # weights live in (0, 1)
    assert 0.0 < table.loc["w[a/a_b]", "median"] < 1.0


def test_posterior_text_layout(m1_fit):
    text = inf.posterior_text(m1_fit)
    assert text.startswith("Model: y ~ x + mc(a) + mc(b)\n")
    assert "Tree structure: a_b = (a,b); eps_a_b = (eps,a_b)" in text
    assert " Param." in text and " mean " in text
    assert " V[eps_a_b] " in text and " w[a/a_b] " in text


def test_extract_posterior_effect(m1_fit):
    assert inf.extract_posterior_effect(m1_fit, "a").shape == (300, 10)
    assert inf.extract_posterior_effect(m1_fit, "intercept").shape == (300, 1)
    with pytest.raises(inf.InferenceError, match="no latent component"):
        inf.extract_posterior_effect(m1_fit, "zz")


# ---------------------------------------------------------------------------
# density grids


def test_prior_grid_pc0_sd_closed_form(m1):
    x, dens, scale = inf.prior_density_grid(m1, "V[eps_a_b]")
    assert scale == "sd"
    assert x[0] == 0.0 and x[-1] == pytest.approx(5.0)
    lam = -math.log(0.05) / 3.0
    np.testing.assert_allclose(dens, lam * np.exp(-lam * x), atol=1e-10)


def test_prior_grid_weight_matches_logpdf(rw2):
    prior, _ = rw2
    x, dens, scale = inf.prior_density_grid(prior, "w[t/s]")
    assert scale == "weight"
    wp = prior.weight_priors[prior.forest.resolve("s")]
    inner = slice(100, 901)
    # the split stores the eps-first orientation, so the t weight is 1 - w
    np.testing.assert_allclose(
        dens[inner], np.exp(wp.logpdf(1.0 - x[inner])), rtol=1e-12
    )


def test_prior_grid_pcm_interior_mode():
    data = random_intercept_data(m=6, p=4, seed=3)
    prior = build_prior(
        "y ~ mc(a)", data, tree="s = (a, eps)",
        weights={"s": ("pcM", 0.25, 0.85)},
        variances={"s": ("pc0", 3, 0.05)},
    )
    x, dens, _ = inf.prior_density_grid(prior, "w[a/s]")
    mode = x[5 + int(np.argmax(dens[5:-5]))]
    assert mode == pytest.approx(0.25, abs=0.02)


def test_prior_grid_dirichlet_marginal():
    prior = crossed_prior(weights={"s": "dirichlet"})
    tree3 = build_prior(
        "y ~ mc(a) + mc(b)",
        {"y": np.zeros(4), "a": [1, 2, 1, 2], "b": [1, 1, 2, 2]},
        tree="s = (a, b, eps)",
    )
    x, dens, _ = inf.prior_density_grid(tree3, "w[a/s]")
    wp = tree3.weight_priors[tree3.forest.resolve("s")]
    expected = stats.beta.pdf(
        np.clip(x, 1e-5, 1 - 1e-5), wp.alpha, (wp.p - 1) * wp.alpha
    )
    np.testing.assert_allclose(dens[50:-50], expected[50:-50], rtol=1e-9)
    # all children share the same marginal
    _, dens_b, _ = inf.prior_density_grid(tree3, "w[eps/s]")
    np.testing.assert_allclose(dens, dens_b)


def test_prior_grid_jeffreys_refused():
    kw = example_setup("model1")
    prior = build_prior(
        kw.pop("formula"), kw.pop("data"),
        **{**kw, "variances": {"eps_a_b": "jeffreys"}},
    )
    with pytest.raises(inf.InferenceError, match="improper"):
        inf.prior_density_grid(prior, "V[eps_a_b]")


def test_prior_grid_name_errors(m1):
    with pytest.raises(inf.InferenceError, match="not a tree root"):
        inf.prior_density_grid(m1, "V[a_b]")
    with pytest.raises(inf.InferenceError, match="not a child"):
        inf.prior_density_grid(m1, "w[eps/a_b]")
    with pytest.raises(inf.InferenceError, match="cannot parse"):
        inf.prior_density_grid(m1, "sigma")


def test_posterior_grid_integrates_to_one(rw2):
    _, res = rw2
    for name in ("w[t/s]", "V[s]", "intercept"):
        x, dens, _ = inf.posterior_density_grid(res, name)
        assert float(np.trapezoid(dens, x)) == pytest.approx(1.0, abs=2e-2)


def test_posterior_grid_weight_complement(rw2):
    _, res = rw2
    x, d_t, _ = inf.posterior_density_grid(res, "w[t/s]")
    _, d_eps, _ = inf.posterior_density_grid(res, "w[eps/s]")
    np.testing.assert_allclose(d_t, d_eps[::-1], rtol=1e-9)


def test_posterior_grid_unknown_name(rw2):
    _, res = rw2
    with pytest.raises(inf.InferenceError):
        inf.posterior_density_grid(res, "w[zz/s]")
