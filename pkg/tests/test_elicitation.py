"""Interval search and the guided question walk."""

from pathlib import Path

import numpy as np
import pytest

from priorforest.assembly import VarianceChoice, WeightChoice, build_prior, print_text
from priorforest.elicitation import (
    ElicitationError,
    Guide,
    GuideError,
    default_prior_for,
    find_pc_prior_param,
)
from priorforest.examples import example_setup
from priorforest.formula import parse_formula
from priorforest.tree import parse_tree

GOLDENS = Path(__file__).parent / "goldens"


# ---------------------------------------------------------------------------
# find_pc_prior_param


def test_interval_search_matches_reference_bracket():
    r = find_pc_prior_param(0.1, 10, 0.9)
    assert 3.30 <= r.scale <= 3.40
    assert r.coverage == pytest.approx(0.9, abs=0.005)
    assert r.alpha == 0.05


def test_interval_search_seed_stability():
    for seed in (2, 5, 11):
        r = find_pc_prior_param(0.1, 10, 0.9, seed=seed)
        assert 3.30 <= r.scale <= 3.40


def test_log_symmetric_interval_coverage():
    # when lower * upper == 1 the interval is symmetric for eta and the
    # achieved coverage should sit on the requested probability
    r = find_pc_prior_param(0.2, 5.0, 0.8)
    assert r.coverage == pytest.approx(0.8, abs=0.005)
    lo, hi = r.interval
    assert lo < 1.0 < hi


def test_larger_probability_needs_smaller_scale():
    tight = find_pc_prior_param(0.1, 10, 0.95)
    loose = find_pc_prior_param(0.1, 10, 0.8)
    assert tight.scale < loose.scale


def test_unattainable_interval_errors():
    # exp(eta) concentrates at 1 for small scales, so an interval away
    # from 1 cannot reach a high probability for any scale
    with pytest.raises(ElicitationError, match="no scale reaches"):
        find_pc_prior_param(2.0, 3.0, 0.5)


def test_interval_search_validation():
    with pytest.raises(ElicitationError, match="lower < upper"):
        find_pc_prior_param(10, 0.1, 0.9)
    with pytest.raises(ElicitationError, match="inside"):
        find_pc_prior_param(0.1, 10, 1.5)
    with pytest.raises(ElicitationError, match="draws"):
        find_pc_prior_param(0.1, 10, 0.9, n=100)


def test_interval_search_deterministic_and_printable():
    a = find_pc_prior_param(0.1, 10, 0.9, seed=4)
    b = find_pc_prior_param(0.1, 10, 0.9, seed=4)
    assert a == b
    assert a.text.startswith("U = ")
    assert "< exp(eta) <" in a.text


# ---------------------------------------------------------------------------
# defaults lookup


def test_default_prior_lookup():
    assert default_prior_for("split", "gaussian") == WeightChoice("dirichlet")
    assert default_prior_for("tree-root", "gaussian", single_tree=True) == VarianceChoice(
        "jeffreys"
    )
    assert default_prior_for("tree-root", "gaussian") == VarianceChoice(
        "pc0", (3.0, 0.05)
    )
    assert default_prior_for("singleton-root", "poisson") == VarianceChoice(
        "pc0", (1.6, 0.05)
    )
    assert default_prior_for("singleton-root", "gaussian", single_tree=True) == (
        VarianceChoice("pc0", (3.0, 0.05))
    )
    with pytest.raises(ElicitationError, match="no default"):
        default_prior_for("leaf", "gaussian")


# ---------------------------------------------------------------------------
# guided walk


def model1_forest():
    spec = parse_formula("y ~ x + mc(a) + mc(b)", "gaussian")
    return parse_tree("s1 = (a, b); s2 = (s1, eps)", spec)


def run_walk(guide, answers):
    asked = []
    q = guide.current_question()
    for a in answers:
        assert q is not None, f"ran out of questions before answer {a!r}"
        asked.append(q)
        q = guide.answer(a)
    assert q is None and guide.finished
    return asked


def test_scripted_walk_reproduces_the_worked_example():
    g = Guide(model1_forest(), "gaussian")
    run_walk(
        g,
        ["yes", "no", 0.7, 0.5,  # a_b: knowledge, both present, median, conc
         "yes", "yes", "a_b", 0.25,  # eps_a_b: a_b might be absent
         "yes", "direct", 3.0],  # root: sd upper limit
    )
    ch = g.choices()
    assert ch["weights"]["a_b"] == WeightChoice("pcM", 0.7, 0.5)
    assert ch["weights"]["eps_a_b"] == WeightChoice("pc0", 0.25)
    assert ch["variances"]["eps_a_b"] == VarianceChoice("pc0", (3.0, 0.05))

    kw = example_setup("model1")
    prior = build_prior(
        kw["formula"], kw["data"], tree=kw["tree"],
        covariate_priors=kw["covariate_priors"], **ch,
    )
    golden = (GOLDENS / "model1_print.txt").read_text().rstrip("\n")
    assert print_text(prior) == golden


def test_no_knowledge_walk_gives_the_defaults():
    g = Guide(model1_forest(), "gaussian")
    run_walk(g, ["no", "no", "no"])
    ch = g.choices()
    assert all(c == WeightChoice("dirichlet") for c in ch["weights"].values())
    # single gaussian tree: ignorance about the scale ends in jeffreys
    assert ch["variances"]["eps_a_b"] == VarianceChoice("jeffreys")


def test_no_knowledge_walk_binomial_top_is_proper():
    spec = parse_formula("y ~ mc(a) + mc(b)", "binomial")
    forest = parse_tree("s = (a, b)", spec)
    g = Guide(forest, "binomial")
    run_walk(g, ["no", "no"])
    assert g.choices()["variances"]["a_b"] == VarianceChoice("pc0", (1.6, 0.05))


def test_multiway_split_only_offers_dirichlet():
    spec = parse_formula("y ~ mc(a) + mc(b)", "gaussian")
    forest = parse_tree("s = (a, b, eps)", spec)
    g = Guide(forest, "gaussian")
    q = g.current_question()
    assert q.options == ("yes",)
    assert q.note is not None
    run_walk(g, ["yes", "no"])
    assert g.choices()["weights"]["eps_a_b"] == WeightChoice("dirichlet")


def test_interval_elicitation_path():
    g = Guide(model1_forest(), "gaussian")
    run_walk(g, ["no", "no", "yes", "interval", 0.1, 10, 0.9])
    choice = g.choices()["variances"]["eps_a_b"]
    assert choice.kind == "pc0"
    u, alpha = choice.params
    assert 3.30 <= u <= 3.40
    assert alpha == 0.05


def test_walk_visits_splits_then_roots_once():
    spec = parse_formula("y ~ mc(a) + mc(b) + mc(c)", "gaussian")
    forest = parse_tree("s = (a, b); (c); (eps)", spec)
    g = Guide(forest, "gaussian")
    asked = run_walk(g, ["no", "no", "no", "no"])
    assert [q.node for q in asked] == ["a_b", "a_b", "c", "eps"]
    variances = g.choices()["variances"]
    # two extra roots: jeffreys is off the table everywhere
    assert all(v.kind == "pc0" for v in variances.values())


def test_invalid_answers_are_rejected():
    g = Guide(model1_forest(), "gaussian")
    with pytest.raises(GuideError, match="not among"):
        g.answer("maybe")
    g.answer("yes")
    g.answer("no")
    with pytest.raises(GuideError, match="expected a number"):
        g.answer("lots")
    with pytest.raises(GuideError, match="inside"):
        g.answer(1.5)
    g.answer(0.7)
    with pytest.raises(GuideError, match="concentration"):
        g.answer(0.2)


def test_tree_edit_resets_every_split():
    g = Guide(model1_forest(), "gaussian")
    run_walk(g, ["yes", "no", 0.7, 0.5, "no", "no"])
    assert g.choices()["weights"]["a_b"] == WeightChoice("pcM", 0.7, 0.5)

    spec = parse_formula("y ~ x + mc(a) + mc(b)", "gaussian")
    edited = parse_tree("s1 = (b, a); s2 = (s1, eps)", spec)
    g.note_tree_edit(edited)
    assert not g.finished
    assert all(
        c == WeightChoice("dirichlet") for c in g.weights.values()
    )
    assert g.variances == {}


def test_finished_guide_rejects_more_answers():
    g = Guide(model1_forest(), "gaussian")
    run_walk(g, ["no", "no", "no"])
    with pytest.raises(GuideError, match="already finished"):
        g.answer("yes")
    with pytest.raises(GuideError, match="not finished"):
        Guide(model1_forest(), "gaussian").choices()
