"""Joint prior assembly: defaults, orientation, parameterizations, rendering."""

import math
import warnings
from pathlib import Path

import numpy as np
import pytest

from priorforest.assembly import (
    DEFAULT_TREE_WARNING,
    AssemblyError,
    TreeParameterization,
    WeightChoice,
    as_variance_choice,
    as_weight_choice,
    build_prior,
    component_variances,
    from_log_variances,
    log_prior_logvar,
    log_prior_tree_param,
    print_text,
    prior_block,
    sample_prior,
    summary_text,
    to_log_variances,
)
from priorforest.examples import example_setup
from priorforest.kernels import pc_sd_rate

GOLDENS = Path(__file__).parent / "goldens"


def golden(name: str) -> str:
    # fixtures carry a single trailing newline
    return (GOLDENS / name).read_text().rstrip("\n")


def build_example(name: str):
    kw = example_setup(name)
    return build_prior(kw.pop("formula"), kw.pop("data"), **kw)


@pytest.fixture(scope="module")
def m1():
    return build_example("model1")


@pytest.fixture(scope="module")
def crossed_default():
    # two crossed effects, no tree given: default tree, jeffreys top
    a = np.repeat(np.arange(1, 5), 4)
    b = np.tile(np.arange(1, 5), 4)
    data = {"y": np.sin(np.arange(16.0)), "a": a, "b": b}
    with pytest.warns(UserWarning, match="default tree"):
        return build_prior("y ~ mc(a) + mc(b)", data)


# ---------------------------------------------------------------------------
# golden output


def test_model1_print_golden(m1):
    assert print_text(m1) == golden("model1_print.txt")
    assert str(m1) == print_text(m1)


def test_model1_summary_golden(m1):
    assert summary_text(m1) == golden("model1_summary.txt")


def test_latin_block_golden():
    assert prior_block(build_example("latin")) == golden("latin_block.txt")


def test_wheat_block_golden():
    assert prior_block(build_example("wheat")) == golden("wheat_block.txt")


def test_neonatal_block_golden():
    assert prior_block(build_example("neonatal")) == golden("neonatal_block.txt")


# ---------------------------------------------------------------------------
# defaults


def test_default_tree_gets_jeffreys_and_dirichlet(crossed_default):
    forest = crossed_default.forest
    assert forest.roots == ["eps_a_b"]
    assert forest.nodes["eps_a_b"].children == ("eps", "a", "b")
    assert crossed_default.variance_priors["eps_a_b"].kind == "jeffreys"
    wp = crossed_default.weight_priors["eps_a_b"]
    assert wp.p == 3


def test_binomial_default_top_is_proper():
    a = np.repeat(np.arange(1, 5), 4)
    data = {"y": np.ones(16), "a": a}
    with pytest.warns(UserWarning):
        prior = build_prior(
            "y ~ mc(a)", data, likelihood="binomial", trials=np.full(16, 5)
        )
    vp = prior.variance_priors[prior.forest.roots[0]]
    assert vp.kind == "pc0"
    assert vp.params == (1.6, 0.05)


def test_singleton_roots_get_proper_priors():
    # eps declared as a singleton: two roots, so no jeffreys anywhere
    a = np.repeat(np.arange(1, 5), 4)
    b = np.tile(np.arange(1, 5), 4)
    data = {"y": np.cos(np.arange(16.0)), "a": a, "b": b}
    prior = build_prior("y ~ mc(a) + mc(b)", data, tree="s = (a, b); (eps)")
    assert set(prior.forest.roots) == {"a_b", "eps"}
    for root in prior.forest.roots:
        vp = prior.variance_priors[root]
        assert vp.kind == "pc0"
        assert vp.params == (3, 0.05)


def test_explicit_jeffreys_rejected_on_singleton():
    a = np.repeat(np.arange(1, 5), 4)
    data = {"y": np.zeros(16), "a": a}
    with pytest.raises(AssemblyError, match="singletons always need a proper"):
        build_prior(
            "y ~ mc(a)",
            data,
            tree="(a); (eps)",
            variances={"a": "jeffreys"},
        )


def test_explicit_jeffreys_rejected_for_binomial():
    a = np.repeat(np.arange(1, 5), 4)
    b = np.tile(np.arange(1, 5), 4)
    data = {"y": np.ones(16), "a": a, "b": b}
    with pytest.raises(AssemblyError, match="gaussian likelihood"):
        build_prior(
            "y ~ mc(a) + mc(b)",
            data,
            likelihood="binomial",
            trials=np.full(16, 5),
            tree="s = (a, b)",
            variances={"s": "jeffreys"},
        )


# ---------------------------------------------------------------------------
# weight prior orientation

CROSSED = {
    "y": np.linspace(-1, 1, 16),
    "a": np.repeat(np.arange(1, 5), 4),
    "b": np.tile(np.arange(1, 5), 4),
}


def test_choice_follows_declared_first_child(m1):
    # tree says s2 = (s1, eps) with pc0 on s1; canonically eps comes first,
    # so the stored prior is the mirrored pc1
    wp = m1.weight_priors["eps_a_b"]
    assert wp.variant == "pc1"
    assert wp.median == pytest.approx(0.75)
    np.testing.assert_allclose(wp.base_weights, [1.0, 0.0])


def test_pcm_median_flips_with_declared_order():
    flipped = build_prior(
        "y ~ mc(a) + mc(b)",
        dict(CROSSED),
        tree="s1 = (b, a); s2 = (s1, eps)",
        weights={"s1": ("pcM", 0.7, 0.5)},
    )
    wp = flipped.weight_priors["a_b"]
    assert wp.variant == "pcM"
    assert wp.median == pytest.approx(0.3)


def test_equivalent_declarations_build_identical_priors():
    # same intent written two ways around must agree exactly
    one = build_prior(
        "y ~ mc(a) + mc(b)",
        dict(CROSSED),
        tree="s1 = (a, b); s2 = (eps, s1)",
        weights={"s2": ("pc0", 0.25)},
    )
    two = build_prior(
        "y ~ mc(a) + mc(b)",
        dict(CROSSED),
        tree="s1 = (b, a); s2 = (s1, eps)",
        weights={"s2": ("pc1", 0.75)},
    )
    for prior in (one, two):
        wp = prior.weight_priors["eps_a_b"]
        assert wp.variant == "pc0"
        assert wp.median == pytest.approx(0.25)
    t1 = one.weight_priors["eps_a_b"].table
    t2 = two.weight_priors["eps_a_b"].table
    np.testing.assert_allclose(t1.log_density, t2.log_density, atol=1e-12)


def test_weight_choice_validation():
    with pytest.raises(AssemblyError, match="not a split"):
        build_prior(
            "y ~ mc(a) + mc(b)",
            dict(CROSSED),
            tree="s1 = (a, b); s2 = (s1, eps)",
            weights={"a": ("pc0", 0.25)},
        )
    with pytest.raises(AssemblyError, match="dual split"):
        build_prior(
            "y ~ mc(a) + mc(b)",
            dict(CROSSED),
            tree="s = (a, b, eps)",
            weights={"s": ("pc0", 0.25)},
        )
    with pytest.raises(AssemblyError, match="not a tree root"):
        build_prior(
            "y ~ mc(a) + mc(b)",
            dict(CROSSED),
            tree="s1 = (a, b); s2 = (s1, eps)",
            variances={"s1": ("pc0", 3, 0.05)},
        )


# ---------------------------------------------------------------------------
# choice coercion


def test_weight_choice_coercion():
    assert as_weight_choice("dirichlet") == WeightChoice("dirichlet")
    assert as_weight_choice(("pc0", 0.25)) == WeightChoice("pc0", 0.25)
    assert as_weight_choice(("pcM", 0.7, 0.5)) == WeightChoice("pcM", 0.7, 0.5)
    assert as_weight_choice({"prior": "pc1", "param": 0.75}) == WeightChoice("pc1", 0.75)
    ch = WeightChoice("pc0", 0.25)
    assert as_weight_choice(ch) is ch


def test_weight_choice_errors():
    with pytest.raises(AssemblyError, match="unknown weight prior"):
        as_weight_choice(("cauchy", 0.5))
    with pytest.raises(AssemblyError, match="needs a concentration"):
        as_weight_choice(("pcM", 0.7))
    with pytest.raises(AssemblyError, match="takes only a median"):
        as_weight_choice(("pc0", 0.25, 0.5))
    with pytest.raises(AssemblyError, match="takes no parameters"):
        as_weight_choice(("dirichlet", 3))


def test_variance_choice_coercion():
    assert as_variance_choice("jeffreys").kind == "jeffreys"
    ch = as_variance_choice(("pc", 3, 0.05))
    assert ch.kind == "pc" and ch.params == (3.0, 0.05)
    ch = as_variance_choice({"prior": "invgam", "param": (1, 5e-5)})
    assert ch.kind == "invgam" and ch.params == (1.0, 5e-5)


def test_covariate_and_intercept_validation():
    with pytest.raises(AssemblyError, match="not a covariate"):
        build_prior(
            "y ~ mc(a) + mc(b)",
            dict(CROSSED),
            tree="s1 = (a, b); s2 = (s1, eps)",
            covariate_priors={"z": (0, 10)},
        )
    with pytest.raises(AssemblyError, match="no intercept"):
        build_prior(
            "y ~ -1 + mc(a) + mc(b)",
            dict(CROSSED),
            tree="s1 = (a, b); s2 = (s1, eps)",
            intercept_prior=(0, 10),
        )


# ---------------------------------------------------------------------------
# parameterizations


def theta_model1() -> TreeParameterization:
    return TreeParameterization(
        total_variances={"eps_a_b": 1.7},
        weights={
            "eps_a_b": np.array([0.55, 0.45]),
            "a_b": np.array([0.3, 0.7]),
        },
    )


def test_component_variances_multiply_down_the_tree(m1):
    v = component_variances(m1, theta_model1())
    assert v["eps"] == pytest.approx(1.7 * 0.55)
    assert v["a"] == pytest.approx(1.7 * 0.45 * 0.3)
    assert v["b"] == pytest.approx(1.7 * 0.45 * 0.7)


def test_log_variance_round_trip(m1):
    theta = theta_model1()
    lv, _ = to_log_variances(m1, theta)
    back = from_log_variances(m1, lv)
    assert back.total_variances["eps_a_b"] == pytest.approx(1.7, rel=1e-12)
    for s in ("eps_a_b", "a_b"):
        np.testing.assert_allclose(back.weights[s], theta.weights[s], rtol=1e-12)
    lv2, _ = to_log_variances(m1, back)
    np.testing.assert_allclose(lv2, lv, rtol=1e-12)


def _free_coords(prior, theta):
    xs = [theta.total_variances[r] for r in prior.forest.roots]
    for s in prior.forest.splits():
        xs.extend(np.asarray(theta.weights[s])[:-1])
    return np.array(xs)


def _from_free_coords(prior, x):
    i = 0
    totals = {}
    for r in prior.forest.roots:
        totals[r] = float(x[i])
        i += 1
    weights = {}
    for s in prior.forest.splits():
        p = len(prior.forest.nodes[s].children)
        head = np.asarray(x[i : i + p - 1], dtype=float)
        i += p - 1
        weights[s] = np.append(head, 1.0 - head.sum())
    return TreeParameterization(total_variances=totals, weights=weights)


def _numerical_log_jacobian(prior, theta, h=1e-6):
    x0 = _free_coords(prior, theta)
    k = len(x0)
    J = np.empty((k, k))
    for j in range(k):
        hi, lo = x0.copy(), x0.copy()
        hi[j] += h
        lo[j] -= h
        lv_hi, _ = to_log_variances(prior, _from_free_coords(prior, hi))
        lv_lo, _ = to_log_variances(prior, _from_free_coords(prior, lo))
        J[:, j] = (lv_hi - lv_lo) / (2 * h)
    sign, logdet = np.linalg.slogdet(J)
    assert sign != 0
    return logdet


def test_log_jacobian_dual_splits(m1):
    theta = theta_model1()
    _, log_jac = to_log_variances(m1, theta)
    assert log_jac == pytest.approx(_numerical_log_jacobian(m1, theta), abs=1e-6)


def test_log_jacobian_multiway_split(crossed_default):
    theta = TreeParameterization(
        total_variances={"eps_a_b": 2.3},
        weights={"eps_a_b": np.array([0.5, 0.2, 0.3])},
    )
    _, log_jac = to_log_variances(crossed_default, theta)
    assert log_jac == pytest.approx(
        _numerical_log_jacobian(crossed_default, theta), abs=1e-6
    )


def test_log_prior_matches_closed_form_at_root(m1):
    # top level: exponential on the sd, change of variables to the variance
    theta = theta_model1()
    lam = pc_sd_rate(3, 0.05)
    v = 1.7
    expected_root = math.log(lam) - lam * math.sqrt(v) - math.log(2 * math.sqrt(v))
    total = expected_root
    total += m1.weight_priors["eps_a_b"].logpdf(0.55)
    total += m1.weight_priors["a_b"].logpdf(0.3)
    assert log_prior_tree_param(m1, theta) == pytest.approx(total, abs=1e-10)


def test_log_prior_boundary_is_minus_inf(m1):
    theta = theta_model1()
    theta.weights["a_b"] = np.array([0.0, 1.0])
    assert log_prior_tree_param(m1, theta) == -math.inf
    theta = theta_model1()
    theta.total_variances["eps_a_b"] = -1.0
    assert log_prior_tree_param(m1, theta) == -math.inf


def test_log_prior_logvar_consistency(m1):
    theta = theta_model1()
    lv, log_jac = to_log_variances(m1, theta)
    assert log_prior_logvar(m1, lv) == pytest.approx(
        log_prior_tree_param(m1, theta) - log_jac, abs=1e-10
    )


def test_jeffreys_prior_is_shift_invariant(crossed_default):
    # scaling every variance by a constant leaves the density in the
    # log-variance parameterization unchanged under a jeffreys top
    lv = np.array([0.3, -0.7, 0.1])
    shift = math.log(3.0)
    assert log_prior_logvar(crossed_default, lv + shift) == pytest.approx(
        log_prior_logvar(crossed_default, lv), abs=1e-10
    )


# ---------------------------------------------------------------------------
# prior sampling


def test_sample_prior_is_deterministic(m1):
    s1 = sample_prior(m1, 50, seed=9)
    s2 = sample_prior(m1, 50, seed=9)
    np.testing.assert_array_equal(s1.log_variances, s2.log_variances)
    assert s1.pinned_roots == []


def test_sample_prior_hits_the_requested_medians(m1):
    s = sample_prior(m1, 40_000, seed=3)
    assert np.median(s.weights["a_b"]) == pytest.approx(0.7, abs=0.01)
    assert np.median(s.weights["eps_a_b"]) == pytest.approx(0.75, abs=0.01)
    lam = pc_sd_rate(3, 0.05)
    assert np.median(np.sqrt(s.total_variances["eps_a_b"])) == pytest.approx(
        math.log(2) / lam, rel=0.02
    )


def test_sampled_leaf_variances_sum_to_the_total(m1):
    s = sample_prior(m1, 200, seed=5)
    total = np.exp(s.log_variances).sum(axis=1)
    np.testing.assert_allclose(total, s.total_variances["eps_a_b"], rtol=1e-10)


def test_sample_prior_pins_jeffreys_roots(crossed_default):
    s = sample_prior(crossed_default, 1000, seed=2)
    assert s.pinned_roots == ["eps_a_b"]
    np.testing.assert_array_equal(s.total_variances["eps_a_b"], np.ones(1000))
    means = s.weights["eps_a_b"].mean(axis=0)
    np.testing.assert_allclose(means, [1 / 3, 1 / 3, 1 / 3], atol=0.02)


def test_parameter_names_follow_tree_order(m1):
    assert m1.parameter_names() == ["V[eps_a_b]", "w[a/a_b]", "w[eps/eps_a_b]"]
    assert m1.component_order == ["a", "b", "eps"]
