import pytest

from priorforest.formula import FormulaError, parse_formula


def test_basic_gaussian_formula():
    spec = parse_formula("y ~ x + mc(a) + mc(b)")
    assert spec.response == "y"
    assert spec.covariates == ["x"]
    assert spec.component_labels() == ["a", "b", "eps"]
    assert spec.has_intercept
    assert spec.likelihood == "gaussian"


def test_residual_only_for_gaussian():
    spec = parse_formula("y ~ mc(nu) + mc(v)", likelihood="binomial")
    assert spec.component_labels() == ["nu", "v"]
    spec = parse_formula("y ~ mc(nu) + mc(v)", likelihood="poisson")
    assert "eps" not in spec.component_labels()


def test_intercept_removal():
    spec = parse_formula("y ~ -1 + mc(a)")
    assert not spec.has_intercept
    assert spec.covariates == []
    assert spec.component_labels() == ["a", "eps"]


def test_component_options():
    spec = parse_formula(
        'y ~ lin + mc(row) + mc(col) + mc(iid) + '
        'mc(rw2, model = "rw2", constr = TRUE, lin_constr = TRUE)'
    )
    decl = spec.component("rw2")
    assert decl.kind == "rw2"
    assert decl.options["constr"] is True
    assert decl.options["lin_constr"] is True
    assert spec.component("row").kind == "iid"


def test_besag_options_with_reference():
    spec = parse_formula(
        'y ~ urban + mc(nu) + mc(v) + '
        'mc(u, model = "besag", graph = graph_path, scale.model = TRUE)',
        likelihood="binomial",
    )
    decl = spec.component("u")
    assert decl.kind == "besag"
    assert decl.options["graph"] == "graph_path"
    assert decl.options["scale.model"] is True


def test_generic0_needs_matrix():
    spec = parse_formula('y ~ mc(a, model = "generic0", Cmatrix = Q_a, constr = TRUE)')
    assert spec.component("a").options["Cmatrix"] == "Q_a"
    with pytest.raises(FormulaError):
        parse_formula('y ~ mc(a, model = "generic0")')


def test_positions_follow_formula_order():
    spec = parse_formula("y ~ mc(nu) + mc(v) + mc(u, model = \"besag\", graph = g)",
                         likelihood="binomial")
    assert [spec.position(l) for l in ("nu", "v", "u")] == [0, 1, 2]


@pytest.mark.parametrize(
    "bad",
    [
        "y ~ x",                      # no components
        "y ~ mc(eps)",                # reserved label
        "y ~ mc(a) + mc(a)",          # duplicate
        "y ~ mc(a) + a",              # label reused as covariate
        "y ~ mc(a, model = \"phony\")",
        "y ~ mc(a, whatever = 1)",
        "y mc(a)",                    # no tilde
        "y ~ mc(a",                   # unbalanced
    ],
)
def test_malformed_formulas(bad):
    with pytest.raises(FormulaError):
        parse_formula(bad)
