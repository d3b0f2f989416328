"""Model formula parsing.

A model formula names the response, fixed effects and random-effect
components in R-like syntax::

    y ~ x + mc(a) + mc(b)
    y ~ -1 + mc(a)
    y ~ urban + mc(nu) + mc(v) + mc(u, model = "besag", graph = g, scale.model = TRUE)

``mc(label, ...)`` declares a model component.  Everything else on the
right-hand side is a covariate, except ``-1`` which removes the intercept.
For a gaussian likelihood a residual component ``eps`` is appended
automatically; the label ``eps`` is reserved for it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

RESIDUAL = "eps"

COMPONENT_KINDS = ("iid", "rw1", "rw2", "besag", "generic0")

LIKELIHOODS = ("gaussian", "binomial", "poisson")

_IDENT = re.compile(r"^[A-Za-z][A-Za-z0-9_.]*$")


class FormulaError(ValueError):
    """Raised when a model formula cannot be parsed or validated."""


@dataclass
class ComponentDecl:
    """One ``mc(...)`` term.

    ``options`` keeps the raw keyword arguments: ``model``, ``graph``,
    ``Cmatrix``, ``constr``, ``lin_constr``, ``scale.model``.  Values are
    python bools/numbers/strings; bare identifiers stay strings and are
    resolved against the bundle when structures are built.
    """

    label: str
    kind: str = "iid"
    options: dict = field(default_factory=dict)


@dataclass
class ModelSpec:
    """Parsed model description.

    Component order follows the formula, with ``eps`` appended last for
    gaussian likelihoods.  That order is load-bearing: the canonical child
    order of prior trees is derived from it.
    """

    response: str
    covariates: list[str]
    components: list[ComponentDecl]
    has_intercept: bool
    likelihood: str
    text: str

    def component_labels(self) -> list[str]:
        return [c.label for c in self.components]

    def component(self, label: str) -> ComponentDecl:
        for c in self.components:
            if c.label == label:
                return c
        raise KeyError(label)

    def position(self, label: str) -> int:
        """Formula position of a component label (0-based)."""
        return self.component_labels().index(label)


def _split_top_level(text: str, sep: str) -> list[str]:
    """Split on ``sep`` outside parentheses and quotes."""
    parts, depth, quote, cur = [], 0, None, []
    for ch in text:
        if quote:
            cur.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in "\"'":
            quote = ch
            cur.append(ch)
        elif ch == "(":
            depth += 1
            cur.append(ch)
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise FormulaError("unbalanced parentheses in formula")
            cur.append(ch)
        elif ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise FormulaError("unbalanced parentheses in formula")
    parts.append("".join(cur))
    return parts


def _parse_value(raw: str):
    raw = raw.strip()
    if raw in ("TRUE", "T", "True"):
        return True
    if raw in ("FALSE", "F", "False"):
        return False
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    try:
        f = float(raw)
        return int(f) if f.is_integer() else f
    except ValueError:
        pass
    if _IDENT.match(raw):
        return raw
    raise FormulaError(f"cannot parse option value {raw!r}")


def _parse_mc(term: str) -> ComponentDecl:
    inner = term[len("mc(") : -1]
    args = [a.strip() for a in _split_top_level(inner, ",")]
    if not args or not args[0]:
        raise FormulaError(f"mc() needs a component label: {term!r}")
    label = args[0]
    if not _IDENT.match(label) or "." in label:
        raise FormulaError(f"invalid component label {label!r}")
    if label == RESIDUAL:
        raise FormulaError(f"component label {RESIDUAL!r} is reserved for the residual")
    options: dict = {}
    for arg in args[1:]:
        if "=" not in arg:
            raise FormulaError(f"mc() option without '=': {arg!r}")
        key, _, raw = arg.partition("=")
        key = key.strip()
        if key not in ("model", "graph", "Cmatrix", "constr", "lin_constr", "scale.model"):
            raise FormulaError(f"unknown mc() option {key!r}")
        options[key] = _parse_value(raw)
    kind = options.pop("model", "iid")
    if kind not in COMPONENT_KINDS:
        raise FormulaError(f"unknown component model {kind!r}")
    if kind == "generic0" and "Cmatrix" not in options:
        raise FormulaError("generic0 components need a Cmatrix option")
    if kind == "besag" and "graph" not in options:
        raise FormulaError("besag components need a graph option")
    return ComponentDecl(label=label, kind=kind, options=options)


def parse_formula(text: str, likelihood: str = "gaussian") -> ModelSpec:
    """Parse a model formula into a :class:`ModelSpec`.

    Parameters
    ----------
    text : str
        Formula such as ``"y ~ x + mc(a) + mc(b)"``.
    likelihood : str
        One of ``gaussian``, ``binomial``, ``poisson``.  Gaussian models
        get a residual component ``eps`` appended.
    """
    if likelihood not in LIKELIHOODS:
        raise FormulaError(f"unknown likelihood {likelihood!r}")
    if "~" not in text:
        raise FormulaError("formula needs '~' separating response and terms")
    lhs, _, rhs = text.partition("~")
    response = lhs.strip()
    if not _IDENT.match(response):
        raise FormulaError(f"invalid response name {response!r}")

    covariates: list[str] = []
    components: list[ComponentDecl] = []
    has_intercept = True
    seen: set[str] = set()
    for rawterm in _split_top_level(rhs, "+"):
        term = rawterm.strip()
        if not term:
            raise FormulaError("empty term in formula")
        if term in ("-1", "- 1"):
            has_intercept = False
            continue
        if term.startswith("mc(") and term.endswith(")"):
            decl = _parse_mc(term)
            if decl.label in seen:
                raise FormulaError(f"duplicate term {decl.label!r}")
            seen.add(decl.label)
            components.append(decl)
        else:
            if not _IDENT.match(term) or "." in term:
                raise FormulaError(f"cannot parse formula term {term!r}")
            if term == RESIDUAL:
                raise FormulaError(f"{RESIDUAL!r} is reserved for the residual")
            if term in seen:
                raise FormulaError(f"duplicate term {term!r}")
            seen.add(term)
            covariates.append(term)
    if response in seen:
        raise FormulaError("response name reused on the right-hand side")
    if not components:
        raise FormulaError("formula declares no mc() components")
    if likelihood == "gaussian":
        components = components + [ComponentDecl(label=RESIDUAL, kind="iid")]
    return ModelSpec(
        response=response,
        covariates=covariates,
        components=components,
        has_intercept=has_intercept,
        likelihood=likelihood,
        text=" ".join(text.split()),
    )
