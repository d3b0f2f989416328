"""Turning informal knowledge into hyperparameters.

Two entry points: :func:`find_pc_prior_param` searches for the scale
parameter of an exponential sd prior so that a multiplicative effect lands
in a credible interval, and :class:`Guide` walks the prior tree node by
node asking scripted questions until every split and root has a choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    _COUNT_SD_PRIOR,
    _GAUSSIAN_SD_PRIOR,
    VarianceChoice,
    WeightChoice,
)
from .kernels import pc_sd_rate
from .tree import PriorForest

__all__ = [
    "ElicitationError",
    "Guide",
    "GuideError",
    "IntervalSearch",
    "Question",
    "default_prior_for",
    "find_pc_prior_param",
]


class ElicitationError(ValueError):
    """Raised when a request cannot be satisfied (e.g. unattainable prob)."""


class GuideError(ValueError):
    """Raised for answers that do not fit the current question."""


# ---------------------------------------------------------------------------
# credible-interval search for the sd scale parameter


@dataclass(frozen=True)
class IntervalSearch:
    """Result of :func:`find_pc_prior_param`."""

    scale: float  # the U in PC0(U, alpha)
    alpha: float
    coverage: float  # achieved P(lower < exp(eta) < upper) at the solution
    interval: tuple[float, float]  # achieved equal-tailed interval for exp(eta)
    prob: float

    @property
    def text(self) -> str:
        lo, hi = self.interval
        return (
            f"U = {self.scale:.7g} \n"
            f"Prob({lo:.7g} < exp(eta) < {hi:.7g}) = {self.prob:g}"
        )


def find_pc_prior_param(
    lower: float,
    upper: float,
    prob: float = 0.9,
    n: int = 200_000,
    seed: int = 1,
    alpha: float = 0.05,
) -> IntervalSearch:
    """Find U so that exp(eta) lands in (lower, upper) with probability prob.

    The effect is eta | sigma ~ N(0, sigma^2) with sigma ~ PC0(U, alpha),
    i.e. exponential on the sd with P(sigma > U) = alpha.  Coverage of a
    fixed interval shrinks as U grows, so the root is found by bisection
    on a common set of Monte-Carlo draws.
    """
    if not 0.0 < lower < upper:
        raise ElicitationError("need 0 < lower < upper")
    if not 0.0 < prob < 1.0:
        raise ElicitationError("prob must be inside (0, 1)")
    if n < 10_000:
        raise ElicitationError("need at least 10000 draws for a stable search")

    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    # exponential draws with unit rate, rescaled per candidate (common
    # random numbers keep the coverage curve monotone during the search)
    e = rng.exponential(size=n)
    lo_log, hi_log = math.log(lower), math.log(upper)

    def eta(u: float) -> np.ndarray:
        return (e / pc_sd_rate(u, alpha)) * z

    def coverage(u: float) -> float:
        t = eta(u)
        return float(np.mean((t > lo_log) & (t < hi_log)))

    u_lo = 1e-3
    if coverage(u_lo) < prob:
        raise ElicitationError(
            f"no scale reaches probability {prob:g} for ({lower:g}, {upper:g})"
        )
    u_hi = 1.0
    while coverage(u_hi) >= prob:
        u_hi *= 2.0
        if u_hi > 1e6:
            raise ElicitationError("interval search failed to bracket")
    for _ in range(80):
        mid = 0.5 * (u_lo + u_hi)
        if coverage(mid) >= prob:
            u_lo = mid
        else:
            u_hi = mid
        if u_hi - u_lo < 1e-9 * max(1.0, u_hi):
            break
    u = 0.5 * (u_lo + u_hi)
    draws = np.exp(eta(u))
    tail = 0.5 * (1.0 - prob)
    achieved = np.quantile(draws, [tail, 1.0 - tail])
    return IntervalSearch(
        scale=u,
        alpha=alpha,
        coverage=coverage(u),
        interval=(float(achieved[0]), float(achieved[1])),
        prob=prob,
    )


# ---------------------------------------------------------------------------
# default lookup


def default_prior_for(kind: str, likelihood: str, single_tree: bool = False):
    """Default choice for a node kind under a likelihood."""
    if kind == "split":
        return WeightChoice("dirichlet")
    if kind not in ("tree-root", "singleton-root"):
        raise ElicitationError(f"no default prior for node kind {kind!r}")
    if kind == "tree-root" and likelihood == "gaussian" and single_tree:
        return VarianceChoice("jeffreys")
    params = _GAUSSIAN_SD_PRIOR if likelihood == "gaussian" else _COUNT_SD_PRIOR
    return VarianceChoice("pc0", params)


# ---------------------------------------------------------------------------
# guided walk


@dataclass(frozen=True)
class Question:
    id: str
    node: str
    text: str
    kind: str  # "choice" or "number"
    options: tuple[str, ...] = ()
    note: str | None = None

    def check(self, answer):
        if self.kind == "choice":
            if answer not in self.options:
                raise GuideError(
                    f"answer {answer!r} not among {list(self.options)}"
                )
            return answer
        try:
            value = float(answer)
        except (TypeError, ValueError):
            raise GuideError(f"expected a number, got {answer!r}") from None
        if not math.isfinite(value):
            raise GuideError("expected a finite number")
        return value


_MULTI_SPLIT_NOTE = (
    "splits with more than two children only take the symmetric Dirichlet; "
    "break the split in two for more detailed control"
)


class Guide:
    """Step-wise elicitation over the nodes of a prior forest.

    Walks every split (children before parents) and then every root,
    collecting one choice per node.  The walk is deterministic: the same
    answers always produce the same choices.
    """

    def __init__(self, forest: PriorForest, likelihood: str = "gaussian"):
        self.forest = forest
        self.likelihood = likelihood
        self.phase = "node-walk"
        self.weights: dict[str, WeightChoice] = {}
        self.variances: dict[str, VarianceChoice] = {}
        self._restart()

    # -- walk bookkeeping ---------------------------------------------------

    def _restart(self) -> None:
        self.weights = {s: WeightChoice("dirichlet") for s in self.forest.splits()}
        self.variances = {}
        # a tree root is visited twice: once for its weights, once for its
        # total variance, so queue entries carry the role explicitly
        self._queue = [(s, "split") for s in self.forest.splits()]
        self._queue += [(r, "root") for r in self.forest.roots]
        self._pos = 0
        self._step: str | None = None
        self._scratch: dict = {}
        self._advance()

    def note_tree_edit(self, forest: PriorForest) -> None:
        """Swap in an edited forest; every split falls back to Dirichlet."""
        self.forest = forest
        self._restart()

    @property
    def single_tree(self) -> bool:
        roots = self.forest.roots
        return len(roots) == 1 and bool(self.forest.nodes[roots[0]].children)

    @property
    def finished(self) -> bool:
        return self._pos >= len(self._queue)

    @property
    def node(self) -> str | None:
        return None if self.finished else self._queue[self._pos][0]

    def choices(self) -> dict:
        """Keyword arguments for the final assembly."""
        if not self.finished:
            raise GuideError("the walk has not finished")
        return {"weights": dict(self.weights), "variances": dict(self.variances)}

    def _advance(self) -> None:
        # enter the next node; multi-way splits are informational only
        # (Dirichlet is the single option)
        self._scratch = {}
        if self.finished:
            self._step = None
            return
        name, role = self._queue[self._pos]
        if role == "split":
            many = len(self.forest.nodes[name].children) > 2
            self._step = "multi-note" if many else "knowledge"
        else:
            self._step = "scale-knowledge"

    def _next_node(self) -> None:
        self._pos += 1
        self._advance()

    # -- question script ----------------------------------------------------

    def current_question(self) -> Question | None:
        if self.finished:
            return None
        name = self._queue[self._pos][0]
        step = self._step
        qid = f"{name}:{step}"
        if step == "multi-note":
            children = ", ".join(self.forest.nodes[name].children)
            return Question(
                qid, name,
                f"The split {name} divides its variance between {children}. "
                "Keep the symmetric Dirichlet prior?",
                "choice", ("yes",), note=_MULTI_SPLIT_NOTE,
            )
        if step == "knowledge":
            c1, c2 = self.forest.declared_children(name)
            return Question(
                qid, name,
                f"Do you have knowledge about how the variance of {name} "
                f"is divided between {c1} and {c2}?",
                "choice", ("yes", "no"),
            )
        if step == "absent":
            return Question(
                qid, name,
                "Could one of the two effects turn out to be absent?",
                "choice", ("yes", "no"),
            )
        if step == "absent-side":
            return Question(
                qid, name,
                "Which effect might be absent?",
                "choice", self.forest.declared_children(name),
            )
        if step == "median":
            c1 = self.forest.declared_children(name)[0]
            return Question(
                qid, name,
                f"What is your median for the share w[{c1}/{name}]?",
                "number",
            )
        if step == "concentration":
            return Question(
                qid, name,
                "How concentrated around the median should the share be "
                "(probability of landing within a factor 3 in odds, at least 0.5)?",
                "number",
            )
        if step == "scale-knowledge":
            return Question(
                qid, name,
                f"Do you have knowledge about the size of the variance {name}?",
                "choice", ("yes", "no"),
            )
        if step == "scale-how":
            return Question(
                qid, name,
                "State an upper limit for the standard deviation directly, "
                "or describe a credible interval for a multiplicative effect?",
                "choice", ("direct", "interval"),
            )
        if step == "scale-upper":
            return Question(
                qid, name,
                "Upper limit U for the standard deviation "
                "(it is exceeded with probability 0.05)?",
                "number",
            )
        if step == "interval-lower":
            return Question(qid, name, "Lower end of the interval for exp(eta)?", "number")
        if step == "interval-upper":
            return Question(qid, name, "Upper end of the interval for exp(eta)?", "number")
        if step == "interval-prob":
            return Question(qid, name, "Probability for that interval?", "number")
        raise AssertionError(f"unknown step {step!r}")

    def answer(self, value) -> Question | None:
        """Consume one answer, return the next question (None when done)."""
        question = self.current_question()
        if question is None:
            raise GuideError("the walk has already finished")
        value = question.check(value)
        name = question.node
        step = self._step

        if step == "multi-note":
            self._next_node()
        elif step == "knowledge":
            if value == "no":
                self._next_node()
            else:
                self._step = "absent"
        elif step == "absent":
            self._step = "absent-side" if value == "yes" else "median"
            self._scratch["pc"] = value == "yes"
        elif step == "absent-side":
            # medians refer to the declared first child, like user choices
            first = self.forest.declared_children(name)[0]
            self._scratch["variant"] = "pc0" if value == first else "pc1"
            self._step = "median"
        elif step == "median":
            if not 0.0 < value < 1.0:
                raise GuideError("the median must be inside (0, 1)")
            if self._scratch.get("pc"):
                self.weights[name] = WeightChoice(self._scratch["variant"], value)
                self._next_node()
            else:
                self._scratch["median"] = value
                self._step = "concentration"
        elif step == "concentration":
            if not 0.5 <= value < 1.0:
                raise GuideError("the concentration must be in [0.5, 1)")
            self.weights[name] = WeightChoice("pcM", self._scratch["median"], value)
            self._next_node()
        elif step == "scale-knowledge":
            if value == "no":
                kind = self.forest.node_kind(name)
                self.variances[name] = default_prior_for(
                    kind, self.likelihood, self.single_tree
                )
                self._next_node()
            else:
                self._step = "scale-how"
        elif step == "scale-how":
            self._step = "scale-upper" if value == "direct" else "interval-lower"
        elif step == "scale-upper":
            if value <= 0:
                raise GuideError("the upper limit must be positive")
            self.variances[name] = VarianceChoice("pc0", (value, 0.05))
            self._next_node()
        elif step == "interval-lower":
            self._scratch["lower"] = value
            self._step = "interval-upper"
        elif step == "interval-upper":
            self._scratch["upper"] = value
            self._step = "interval-prob"
        elif step == "interval-prob":
            found = find_pc_prior_param(
                self._scratch["lower"], self._scratch["upper"], value
            )
            self.variances[name] = VarianceChoice("pc0", (found.scale, found.alpha))
            self._next_node()
        else:
            raise AssertionError(f"unknown step {step!r}")
        return self.current_question()
