"""Assembly of the joint variance-decomposition prior.

A model formula, a data table and a prior tree turn into an
:class:`HDJointPrior`: one weight prior per split, one variance prior per
tree root or singleton, and Gaussian priors on fixed effects.  The class
supports density evaluation in both the tree parameterization (total
variances and weights) and the log-variance parameterization used by the
sampler, prior sampling, and the printable summary.

Weight priors on dual splits are oriented by the first child as the user
declared the split; canonicalization may reverse the children, which turns
a PC0 into the mirrored PC1 and vice versa.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import DataError, ModelData, design_matrix, model_data
from .formula import RESIDUAL, ModelSpec, parse_formula
from .kernels import (
    DirichletPrior,
    PriorConstructionError,
    VariancePrior,
    WeightPrior,
    build_weight_prior,
    dirichlet_prior,
    split_context,
    unit_covariance,
)
from .structures import (
    LatentStructure,
    constrained_covariance,
    read_graph_file,
    scale_to_typical_variance,
    structure_besag,
    structure_generic0,
    structure_iid,
    structure_rw1,
    structure_rw2,
)
from .tree import PriorForest, default_forest, parse_tree, render_tree

DEFAULT_TREE_WARNING = "Did not find a tree, using default tree structure instead."

_GAUSSIAN_SD_PRIOR = (3.0, 0.05)
_COUNT_SD_PRIOR = (1.6, 0.05)
_DEFAULT_EFFECT_PRIOR = (0.0, 1000.0)


class AssemblyError(ValueError):
    """Raised for invalid prior choices or inconsistent inputs."""


# ---------------------------------------------------------------------------
# user choices


@dataclass(frozen=True)
class WeightChoice:
    variant: str
    median: float | None = None
    concentration: float | None = None

    def __post_init__(self):
        if self.variant not in ("pc0", "pc1", "pcM", "dirichlet"):
            raise AssemblyError(f"unknown weight prior {self.variant!r}")
        if self.variant == "dirichlet":
            if self.median is not None or self.concentration is not None:
                raise AssemblyError("dirichlet takes no parameters")
        elif self.median is None:
            raise AssemblyError(f"{self.variant} needs a median")
        if self.variant == "pcM" and self.concentration is None:
            raise AssemblyError("pcM needs a concentration")
        if self.variant in ("pc0", "pc1") and self.concentration is not None:
            raise AssemblyError(f"{self.variant} takes only a median")


@dataclass(frozen=True)
class VarianceChoice:
    kind: str
    params: tuple[float, ...] = ()


def as_weight_choice(value) -> WeightChoice:
    """Coerce a tuple or ``{"prior": ..., "param": ...}`` mapping."""
    if isinstance(value, WeightChoice):
        return value
    if isinstance(value, str):
        return WeightChoice(value)
    if isinstance(value, dict):
        params = value.get("param", ())
        if isinstance(params, (int, float)):
            params = (params,)
        return as_weight_choice((value["prior"], *params))
    variant, *params = value
    if variant == "dirichlet":
        if params:
            raise AssemblyError("dirichlet takes no parameters")
        return WeightChoice("dirichlet")
    if len(params) == 1:
        return WeightChoice(variant, float(params[0]))
    if len(params) == 2:
        return WeightChoice(variant, float(params[0]), float(params[1]))
    raise AssemblyError(f"weight prior {variant!r} takes one or two parameters")


def as_variance_choice(value) -> VarianceChoice:
    if isinstance(value, VarianceChoice):
        return value
    if isinstance(value, str):
        return VarianceChoice(value)
    if isinstance(value, dict):
        params = value.get("param", ())
        if isinstance(params, (int, float)):
            params = (params,)
        return VarianceChoice(value["prior"], tuple(float(p) for p in params))
    kind, *params = value
    return VarianceChoice(kind, tuple(float(p) for p in params))


# ---------------------------------------------------------------------------
# latent structures from component declarations


def _load_matrix(value, resources):
    if resources and value in resources:
        return np.asarray(resources[value], dtype=float)
    if isinstance(value, str) and os.path.exists(value):
        with open(value) as fh:
            first = fh.readline()
        delim = "," if "," in first else None
        return np.loadtxt(value, delimiter=delim)
    raise AssemblyError(f"cannot resolve structure matrix {value!r}")


def _load_graph(value, resources):
    if resources and value in resources:
        res = resources[value]
        if isinstance(res, (str, os.PathLike)):
            return read_graph_file(res)
        return [list(map(int, row)) for row in res]
    return read_graph_file(value)


def component_structures(
    spec: ModelSpec, data: ModelData, resources=None
) -> dict[str, LatentStructure]:
    """Latent structure per component; structured kinds scaled to typical
    variance 1 unless ``scale.model`` says otherwise."""
    out: dict[str, LatentStructure] = {}
    for decl in spec.components:
        opts = decl.options
        label = decl.label
        if label == RESIDUAL:
            out[label] = structure_iid(label, data.n_obs)
            continue
        if decl.kind == "iid":
            st = structure_iid(label, data.levels(label), constr=opts.get("constr", False))
            scale = opts.get("scale.model", False)
        elif decl.kind == "rw1":
            st = structure_rw1(label, data.levels(label), constr=opts.get("constr", True))
            scale = opts.get("scale.model", True)
        elif decl.kind == "rw2":
            st = structure_rw2(
                label,
                data.levels(label),
                constr=opts.get("constr", True),
                lin_constr=opts.get("lin_constr", False),
            )
            scale = opts.get("scale.model", True)
        elif decl.kind == "besag":
            neighbors = _load_graph(opts["graph"], resources)
            st = structure_besag(label, neighbors, constr=opts.get("constr", True))
            scale = opts.get("scale.model", True)
        else:  # generic0
            Q = _load_matrix(opts["Cmatrix"], resources)
            st = structure_generic0(label, Q, constr=opts.get("constr", False))
            scale = opts.get("scale.model", False)
        if label in data.indices and int(data.indices[label].max()) > st.n:
            raise DataError(
                f"component {label!r} indexes level {int(data.indices[label].max())}"
                f" beyond dimension {st.n}"
            )
        out[label] = scale_to_typical_variance(st) if scale else st
    return out


# ---------------------------------------------------------------------------
# the assembled prior


@dataclass
class HDJointPrior:
    spec: ModelSpec
    data: ModelData
    forest: PriorForest
    structures: dict[str, LatentStructure]
    component_covariances: dict[str, np.ndarray]
    obs_covariances: dict[str, np.ndarray]
    weight_priors: dict[str, WeightPrior | DirichletPrior]
    variance_priors: dict[str, VariancePrior]
    intercept_prior: tuple[float, float] | None
    covariate_priors: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def component_order(self) -> list[str]:
        return self.spec.component_labels()

    def split_children(self, name: str) -> tuple[str, ...]:
        return self.forest.nodes[name].children

    def parameter_names(self) -> list[str]:
        """Free hyperparameters: V per root, then weights per split."""
        names = [f"V[{r}]" for r in self.forest.roots]
        for s in self.forest.splits():
            names.extend(self.weight_names(s))
        return names

    def weight_names(self, split: str) -> list[str]:
        children = self.split_children(split)
        wp = self.weight_priors[split]
        if isinstance(wp, DirichletPrior):
            return [f"w[{c}/{split}]" for c in children[:-1]]
        return [f"w[{children[0]}/{split}]"]

    def __str__(self) -> str:
        return print_text(self)


def _orient_choice(choice: WeightChoice, declared_first: str, canonical_first: str) -> WeightChoice:
    if choice.variant == "dirichlet" or declared_first == canonical_first:
        return choice
    flipped = {"pc0": "pc1", "pc1": "pc0", "pcM": "pcM"}[choice.variant]
    return WeightChoice(flipped, 1.0 - choice.median, choice.concentration)


def build_prior(
    formula,
    data,
    *,
    likelihood: str = "gaussian",
    tree=None,
    weights=None,
    variances=None,
    intercept_prior=None,
    covariate_priors=None,
    resources=None,
    trials=None,
    offset=None,
) -> HDJointPrior:
    """Assemble the joint prior; unset choices fall back to defaults.

    ``weights`` maps split names (user aliases or canonical) to
    :class:`WeightChoice` or coercible values; ``variances`` likewise for
    tree roots and singletons.  ``resources`` resolves structure-matrix
    and graph references from the formula.
    """
    spec = formula if isinstance(formula, ModelSpec) else parse_formula(formula, likelihood)
    if not isinstance(data, ModelData):
        data = model_data(spec, data, trials=trials, offset=offset)

    if tree is None:
        forest = default_forest(spec)
        warnings.warn(DEFAULT_TREE_WARNING)
    elif isinstance(tree, PriorForest):
        forest = tree
    else:
        forest = parse_tree(tree, spec)

    structures = component_structures(spec, data, resources)
    component_covariances = {
        label: constrained_covariance(st) for label, st in structures.items()
    }
    obs_covariances: dict[str, np.ndarray] = {}
    for label in spec.component_labels():
        if label == RESIDUAL:
            obs_covariances[label] = np.eye(data.n_obs)
        else:
            A = design_matrix(data.indices[label], structures[label].n)
            obs_covariances[label] = A @ component_covariances[label] @ A.T

    weight_choices = {}
    for name, value in (weights or {}).items():
        canonical = forest.resolve(name)
        if not forest.nodes[canonical].children:
            raise AssemblyError(f"{name!r} is not a split")
        if canonical in weight_choices:
            raise AssemblyError(f"two weight priors for split {name!r}")
        weight_choices[canonical] = as_weight_choice(value)

    weight_priors: dict[str, WeightPrior | DirichletPrior] = {}
    effective_cache: dict[str, np.ndarray] = {}

    def effective(name: str) -> np.ndarray:
        # covariance of the subtree at its base model, unit typical variance
        if name in effective_cache:
            return effective_cache[name]
        node = forest.nodes[name]
        if not node.children:
            C = unit_covariance(obs_covariances[name])
        else:
            base = weight_priors[name].base_weights
            C = np.zeros((data.n_obs, data.n_obs))
            for b, child in zip(base, node.children):
                if b > 0.0:
                    C = C + b * effective(child)
            C = unit_covariance(C)
        effective_cache[name] = C
        return C

    for split in forest.splits():
        children = forest.nodes[split].children
        choice = weight_choices.get(split, WeightChoice("dirichlet"))
        if choice.variant == "dirichlet":
            weight_priors[split] = dirichlet_prior(len(children))
            continue
        if len(children) != 2:
            raise AssemblyError(
                f"{choice.variant} needs a dual split; {split!r} has {len(children)} children"
            )
        oriented = _orient_choice(
            choice, forest.declared_children(split)[0], children[0]
        )
        ctx = split_context(list(children), [effective(c) for c in children])
        weight_priors[split] = build_weight_prior(
            ctx, oriented.variant, oriented.median, oriented.concentration
        )

    variance_choices = {}
    for name, value in (variances or {}).items():
        canonical = forest.resolve(name)
        if forest.nodes[canonical].parent is not None:
            raise AssemblyError(f"{name!r} is not a tree root or singleton")
        if canonical in variance_choices:
            raise AssemblyError(f"two variance priors for {name!r}")
        variance_choices[canonical] = as_variance_choice(value)

    single_tree = len(forest.roots) == 1 and bool(
        forest.nodes[forest.roots[0]].children
    )
    jeffreys_legal = spec.likelihood == "gaussian" and single_tree
    default_sd = _GAUSSIAN_SD_PRIOR if spec.likelihood == "gaussian" else _COUNT_SD_PRIOR

    variance_priors: dict[str, VariancePrior] = {}
    for root in forest.roots:
        kind = forest.node_kind(root)
        choice = variance_choices.get(root)
        if choice is None:
            if jeffreys_legal and kind == "tree-root":
                variance_priors[root] = VariancePrior("jeffreys")
            else:
                variance_priors[root] = VariancePrior("pc0", default_sd)
            continue
        vp = VariancePrior(choice.kind, tuple(choice.params))
        if vp.kind == "jeffreys":
            if kind == "singleton-root":
                raise AssemblyError("singletons always need a proper variance prior")
            if not jeffreys_legal:
                raise AssemblyError(
                    "jeffreys needs a gaussian likelihood and a single tree"
                )
        variance_priors[root] = vp

    covariates: dict[str, tuple[float, float]] = {
        name: _DEFAULT_EFFECT_PRIOR for name in spec.covariates
    }
    for name, pair in (covariate_priors or {}).items():
        if name not in covariates:
            raise AssemblyError(f"{name!r} is not a covariate of the model")
        mean, sd = float(pair[0]), float(pair[1])
        if sd <= 0:
            raise AssemblyError("covariate prior needs a positive stdev")
        covariates[name] = (mean, sd)

    intercept: tuple[float, float] | None = None
    if spec.has_intercept:
        intercept = _DEFAULT_EFFECT_PRIOR
        if intercept_prior is not None:
            mean, sd = float(intercept_prior[0]), float(intercept_prior[1])
            if sd <= 0:
                raise AssemblyError("intercept prior needs a positive stdev")
            intercept = (mean, sd)
    elif intercept_prior is not None:
        raise AssemblyError("the model has no intercept")

    return HDJointPrior(
        spec=spec,
        data=data,
        forest=forest,
        structures=structures,
        component_covariances=component_covariances,
        obs_covariances=obs_covariances,
        weight_priors=weight_priors,
        variance_priors=variance_priors,
        intercept_prior=intercept,
        covariate_priors=covariates,
    )


# ---------------------------------------------------------------------------
# parameterizations


@dataclass
class TreeParameterization:
    """Total variance per tree root plus a weight simplex per split."""

    total_variances: dict[str, float]
    weights: dict[str, np.ndarray]


def component_variances(prior: HDJointPrior, theta: TreeParameterization) -> dict[str, float]:
    """Variance of each leaf: the root variance times the path weights."""
    out: dict[str, float] = {}

    def walk(name: str, value: float) -> None:
        node = prior.forest.nodes[name]
        if not node.children:
            out[name] = value
            return
        w = np.asarray(theta.weights[name], dtype=float)
        for wi, child in zip(w, node.children):
            walk(child, value * wi)

    for root in prior.forest.roots:
        walk(root, float(theta.total_variances[root]))
    return out


def _split_variances(prior: HDJointPrior, theta: TreeParameterization) -> dict[str, float]:
    # variance flowing into each split node
    out: dict[str, float] = {}

    def walk(name: str, value: float) -> None:
        node = prior.forest.nodes[name]
        if not node.children:
            return
        out[name] = value
        w = np.asarray(theta.weights[name], dtype=float)
        for wi, child in zip(w, node.children):
            walk(child, value * wi)

    for root in prior.forest.roots:
        walk(root, float(theta.total_variances[root]))
    return out


def to_log_variances(
    prior: HDJointPrior, theta: TreeParameterization
) -> tuple[np.ndarray, float]:
    """Map to log component variances; returns the log |Jacobian| of the map
    from (V, free weights) to the log-variance vector."""
    variances = component_variances(prior, theta)
    lv = np.array([math.log(variances[k]) for k in prior.component_order])
    split_vars = _split_variances(prior, theta)
    log_jac = 0.0
    for s, v in split_vars.items():
        p = len(prior.forest.nodes[s].children)
        log_jac += (p - 1) * math.log(v)
    log_jac -= float(np.sum(lv))
    return lv, log_jac


def from_log_variances(prior: HDJointPrior, log_var) -> TreeParameterization:
    lv = np.asarray(log_var, dtype=float)
    order = prior.component_order
    if lv.shape != (len(order),):
        raise AssemblyError(f"expected {len(order)} log-variances")
    leaf_var = dict(zip(order, np.exp(lv)))

    def subtree_sum(name: str) -> float:
        node = prior.forest.nodes[name]
        if not node.children:
            return leaf_var[name]
        return sum(subtree_sum(c) for c in node.children)

    totals = {r: subtree_sum(r) for r in prior.forest.roots}
    weights = {}
    for s in prior.forest.splits():
        parts = np.array([subtree_sum(c) for c in prior.forest.nodes[s].children])
        weights[s] = parts / parts.sum()
    return TreeParameterization(total_variances=totals, weights=weights)


def log_prior_tree_param(prior: HDJointPrior, theta: TreeParameterization) -> float:
    """Joint log density: variance priors at the roots plus weight priors."""
    total = 0.0
    for root in prior.forest.roots:
        v = float(theta.total_variances[root])
        total += float(prior.variance_priors[root].logpdf_variance(v))
    for s in prior.forest.splits():
        w = np.asarray(theta.weights[s], dtype=float)
        if np.any(w <= 0.0) or np.any(w >= 1.0):
            return -math.inf
        wp = prior.weight_priors[s]
        if isinstance(wp, DirichletPrior):
            total += wp.logpdf(w)
        else:
            total += float(wp.logpdf(w[0]))
    return total


def log_prior_logvar(prior: HDJointPrior, log_var) -> float:
    """Joint log density in the log component-variance parameterization."""
    theta = from_log_variances(prior, log_var)
    base = log_prior_tree_param(prior, theta)
    if not math.isfinite(base):
        return base
    _, log_jac = to_log_variances(prior, theta)
    return base - log_jac


# ---------------------------------------------------------------------------
# prior sampling


@dataclass
class PriorSample:
    total_variances: dict[str, np.ndarray]
    weights: dict[str, np.ndarray]
    log_variances: np.ndarray
    pinned_roots: list[str]

    @property
    def n(self) -> int:
        return self.log_variances.shape[0]


def sample_prior(prior: HDJointPrior, n: int, seed: int = 1) -> PriorSample:
    """Draw from the joint prior.

    Roots with the improper jeffreys prior cannot be sampled; their total
    variance is pinned at 1 and reported in ``pinned_roots`` so callers can
    flag the output as weights-only visualization.
    """
    rng = np.random.default_rng(seed)
    totals: dict[str, np.ndarray] = {}
    pinned: list[str] = []
    for root in prior.forest.roots:
        vp = prior.variance_priors[root]
        if vp.proper:
            totals[root] = vp.sample_variance(n, rng)
        else:
            totals[root] = np.ones(n)
            pinned.append(root)
    weights: dict[str, np.ndarray] = {}
    for s in prior.forest.splits():
        weights[s] = prior.weight_priors[s].sample(n, rng)

    log_var = np.empty((n, len(prior.component_order)))
    for j, label in enumerate(prior.component_order):
        value = totals[prior.forest.root_of(label)].copy()
        name = label
        while prior.forest.nodes[name].parent is not None:
            parent = prior.forest.nodes[name].parent
            pos = prior.forest.nodes[parent].children.index(name)
            w = weights[parent]
            if w.ndim == 1:
                value = value * (w if pos == 0 else 1.0 - w)
            else:
                value = value * w[:, pos]
            name = parent
        log_var[:, j] = np.log(value)
    return PriorSample(
        total_variances=totals,
        weights=weights,
        log_variances=log_var,
        pinned_roots=pinned,
    )


# ---------------------------------------------------------------------------
# text rendering


def _num(x: float) -> str:
    return f"{x:g}"


def weight_prior_label(wp) -> str:
    if isinstance(wp, DirichletPrior):
        return f"Dirichlet({wp.p})"
    name = {"pc0": "PC0", "pc1": "PC1", "pcM": "PCM"}[wp.variant]
    if wp.variant == "pcM":
        return f"{name}({_num(wp.median)}, {_num(wp.concentration)})"
    return f"{name}({_num(wp.median)})"


def variance_prior_label(vp: VariancePrior) -> tuple[str, str]:
    """(parameter form, distribution text); form "sd" means sqrt(V)."""
    if vp.kind == "jeffreys":
        return "var", "Jeffreys'"
    if vp.kind == "pc0":
        u, alpha = vp.params
        return "sd", f"PC0({_num(u)}, {_num(alpha)})"
    if vp.kind == "invgam":
        a, b = vp.params
        return "var", f"InvGam({_num(a)}, {_num(b)})"
    (s,) = vp.params
    return "sd", f"HC({_num(s)})"


def prior_block(prior: HDJointPrior) -> str:
    """Tree line plus weight and total-variance prior lines."""
    lines = [f"Tree structure: {render_tree(prior.forest)}", "", "Weight priors:"]
    for s in prior.forest.splits():
        wp = prior.weight_priors[s]
        children = prior.split_children(s)
        if isinstance(wp, DirichletPrior) and wp.p > 2:
            heads = ", ".join(f"w[{c}/{s}]" for c in children[:-1])
            lines.append(f"\t({heads}) ~ {weight_prior_label(wp)}")
        else:
            lines.append(f"\tw[{children[0]}/{s}] ~ {weight_prior_label(wp)}")
    lines.append("Total variance priors:")
    for root in prior.forest.roots:
        form, text = variance_prior_label(prior.variance_priors[root])
        head = f"sqrt(V)[{root}]" if form == "sd" else f"V[{root}]"
        lines.append(f"\t{head} ~ {text}")
    return "\n".join(lines)


def covariate_line(prior: HDJointPrior) -> str | None:
    entries = []
    if prior.intercept_prior is not None:
        mean, sd = prior.intercept_prior
        entries.append(f"intercept ~ N({_num(mean)}, {_num(sd)}^2)")
    for name in prior.spec.covariates:
        mean, sd = prior.covariate_priors[name]
        entries.append(f"{name} ~ N({_num(mean)}, {_num(sd)}^2)")
    if not entries:
        return None
    return "Covariate priors: " + ", ".join(entries)

def print_text(prior: HDJointPrior) -> str:
    """The object's print form: model line first."""
    parts = [f"Model: {prior.spec.text}", prior_block(prior)]
    cov = covariate_line(prior)
    if cov:
        parts.append("\n" + cov)
    return "\n".join(parts)


def summary_text(prior: HDJointPrior) -> str:
    """The summary form: prior block first, model formula last."""
    parts = [prior_block(prior)]
    cov = covariate_line(prior)
    if cov:
        parts.append("\n" + cov)
    parts.append("\n" + prior.spec.text)
    return "\n".join(parts)
