"""Numerical construction of priors on variance proportions and variances.

A split divides a variance between child components.  Shrinkage priors on
the split weight are built from the Kullback-Leibler distance between the
mixed covariance at weight ``w`` and the mixed covariance at a chosen base
weight,

    d(w) = sqrt(2 * KLD(N(0, S(w)) || N(0, S(w0)))),

with an exponential kernel on the distance scale, truncated where the
distance to the far end of the simplex edge is finite.  When the base
model sits at a corner whose covariance is rank deficient the distance is
taken in the regularized limit, which collapses to sqrt of the weight on
the non-base side; that limit is also what forces the shrinkage median to
lie within 0.25 of a singular base.

Weight priors are tabulated on a fixed logit grid; variances use closed
forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg, optimize, special, stats
from scipy.interpolate import PchipInterpolator

LOGIT_SPAN = 12.0
N_KNOTS = 1000
RATE_MIN = 1e-8
RATE_MAX = 1e8
SUPPORT_CUTOFF = 1e-10
MEDIAN_SLACK = 1e-9  # tolerance on the 0.25 rule for singular bases


class PriorConstructionError(ValueError):
    """Raised when a requested weight prior cannot be constructed."""


# ---------------------------------------------------------------------------
# split contexts


def unit_covariance(C: np.ndarray) -> np.ndarray:
    """Scale a PSD matrix so the geometric mean of its diagonal is one."""
    d = np.diag(C)
    pos = d[d > 1e-300]
    if pos.size == 0:
        raise PriorConstructionError("covariance has an all-zero diagonal")
    return C / np.exp(np.mean(np.log(pos)))


@dataclass
class SplitContext:
    """Observation-level covariances of the children of one split.

    Children lower in the tree are already collapsed onto their base
    models.  Every covariance is scaled to typical variance one.
    """

    children: list[str]
    covariances: list[np.ndarray]

    def __post_init__(self):
        shapes = {C.shape for C in self.covariances}
        if len(self.children) != len(self.covariances) or len(self.children) < 2:
            raise PriorConstructionError("context needs one covariance per child, two or more")
        if len(shapes) != 1:
            raise PriorConstructionError("child covariances differ in shape")

    @property
    def p(self) -> int:
        return len(self.children)

    def reversed(self) -> "SplitContext":
        return SplitContext(list(self.children[::-1]), list(self.covariances[::-1]))

    def mixture(self, weights) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        return sum(wi * Ci for wi, Ci in zip(w, self.covariances))

    def support_basis(self) -> np.ndarray:
        M = self.mixture(np.full(self.p, 1.0 / self.p))
        vals, vecs = np.linalg.eigh(M)
        return vecs[:, vals > SUPPORT_CUTOFF * max(vals.max(), 1e-300)]


def split_context(children: list[str], covariances: list[np.ndarray]) -> SplitContext:
    return SplitContext(children, [unit_covariance(np.asarray(C, float)) for C in covariances])


def split_distance(ctx: SplitContext, weights, base_weights) -> float:
    """KL-based distance between two weightings of a split.

    Computed on the common support of the children.  Raises if the base
    mixture is singular there (use the corner-aware table builders for
    shrinkage toward singular corners).
    """
    B = ctx.support_basis()
    S1 = B.T @ ctx.mixture(weights) @ B
    S0 = B.T @ ctx.mixture(base_weights) @ B
    r = S0.shape[0]
    try:
        c0 = linalg.cho_factor(S0, lower=True)
    except linalg.LinAlgError as exc:
        raise PriorConstructionError("base mixture is singular on the split support") from exc
    sign1, logdet1 = np.linalg.slogdet(S1)
    if sign1 <= 0:
        raise PriorConstructionError("mixture is singular on the split support")
    logdet0 = 2.0 * np.sum(np.log(np.diag(c0[0])))
    tr = np.trace(linalg.cho_solve(c0, S1))
    kld = 0.5 * (tr - r + logdet0 - logdet1)
    return math.sqrt(max(2.0 * kld, 0.0))


# ---------------------------------------------------------------------------
# distance profiles along a dual split edge


@dataclass
class _EdgeProfile:
    """Distance from the base weighting, as a function of the first-child weight.

    ``mu`` holds the eigenvalues of the first child's covariance whitened
    by the base mixture; the mixture at weight w then has whitened
    eigenvalues a(w) mu + b(w) and the KL divergence reduces to a sum over
    them.  ``mu`` is None when the base corner itself is singular, where
    the regularized limit d(w) = sqrt(w) applies.
    """

    base: float                     # base weight of the first child; 0 or interior
    mu: np.ndarray | None

    @property
    def singular_base(self) -> bool:
        return self.mu is None

    def _gvals(self, w):
        m = self.base
        w = np.asarray(w, dtype=float)
        a = (w - m) / (1.0 - m)
        b = (1.0 - w) / (1.0 - m)
        if w.ndim:
            return np.outer(a, self.mu) + b[:, None]
        return a * self.mu + b

    def d2(self, w):
        if self.singular_base:
            return np.asarray(w, dtype=float)
        g = np.clip(self._gvals(w), 1e-300, None)
        return np.sum(g - 1.0 - np.log(g), axis=-1)

    def d(self, w):
        return np.sqrt(np.clip(self.d2(w), 0.0, None))

    def dprime(self, w):
        """|d'(w)|, the distance-scale Jacobian."""
        if self.singular_base:
            t = np.clip(np.asarray(w, dtype=float), 1e-300, None)
            return 0.5 / np.sqrt(t)
        g = np.clip(self._gvals(w), 1e-300, None)
        gp = (self.mu - 1.0) / (1.0 - self.base)
        dd2 = np.sum(gp * (1.0 - 1.0 / g), axis=-1)
        dval = np.sqrt(np.clip(self.d2(w), 1e-300, None))
        return np.abs(dd2) / (2.0 * dval)

    def endpoint_distance(self, w_end: float) -> float:
        """Distance to a simplex corner; inf when that corner is singular."""
        if self.singular_base:
            return math.sqrt(w_end)
        g = self._gvals(w_end)
        if np.min(g) < 1e-12 * max(np.max(g), 1.0):
            return math.inf
        return float(np.sqrt(np.clip(np.sum(g - 1.0 - np.log(g)), 0.0, None)))


def _edge_profile(ctx: SplitContext, base: float) -> _EdgeProfile:
    """Pencil eigenvalues for the mixture path on a dual split."""
    if ctx.p != 2:
        raise PriorConstructionError("shrinkage priors need a dual split")
    B = ctx.support_basis()
    C1 = B.T @ ctx.covariances[0] @ B
    C2 = B.T @ ctx.covariances[1] @ B
    S0 = base * C1 + (1.0 - base) * C2
    vals0 = np.linalg.eigvalsh(S0)
    if vals0.min() < 1e-12 * max(vals0.max(), 1.0):
        if 0.0 < base < 1.0:
            raise PriorConstructionError("interior base mixture unexpectedly singular")
        return _EdgeProfile(base=base, mu=None)
    L = np.linalg.cholesky(S0)
    Linv = linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    T = Linv @ C1 @ Linv.T
    mu = np.clip(np.linalg.eigvalsh(0.5 * (T + T.T)), 0.0, None)
    return _EdgeProfile(base=base, mu=mu)


# ---------------------------------------------------------------------------
# truncated exponential on the distance scale


def _texp_cdf(t, tmax: float, rate: float):
    """CDF of an exponential-in-distance kernel truncated at tmax.

    Valid for positive and (when tmax is finite) negative rates; the
    rate -> 0 limit is the uniform distribution on (0, tmax).
    """
    t = np.asarray(t, dtype=float)
    if not math.isfinite(tmax):
        return -np.expm1(-rate * t)
    if abs(rate) * tmax < 1e-12:
        return t / tmax
    if rate > 0:
        return np.expm1(-rate * t) / math.expm1(-rate * tmax)
    # negative rate: rescale to avoid overflow
    s = -rate
    return np.exp(s * (t - tmax)) * np.expm1(-s * t) / math.expm1(-s * tmax)


def _texp_logpdf(t, tmax: float, rate: float):
    t = np.asarray(t, dtype=float)
    if not math.isfinite(tmax):
        if rate <= 0:
            raise PriorConstructionError("unbounded distance needs a positive rate")
        return math.log(rate) - rate * t
    if abs(rate) * tmax < 1e-12:
        return np.full_like(t, -math.log(tmax))
    lognorm = math.log(abs(math.expm1(-rate * tmax)))
    return math.log(abs(rate)) - rate * t - lognorm


# ---------------------------------------------------------------------------
# tabulated densities on the logit grid


@dataclass
class DensityTable:
    """Log-density of a (0, 1) variable tabulated on a logit grid.

    ``log_density`` is taken with respect to the logit measure and is
    normalized so the table integrates to one; monotone cubic
    interpolation between knots.
    """

    grid: np.ndarray
    log_density: np.ndarray
    raw_integral: float = 1.0
    _interp: PchipInterpolator | None = field(default=None, repr=False, compare=False)
    _cdf: np.ndarray | None = field(default=None, repr=False, compare=False)

    def _interpolant(self) -> PchipInterpolator:
        if self._interp is None:
            object.__setattr__(self, "_interp", PchipInterpolator(self.grid, self.log_density))
        return self._interp

    def _cdf_knots(self) -> np.ndarray:
        if self._cdf is None:
            dens = np.exp(self.log_density)
            steps = np.diff(self.grid) * 0.5 * (dens[1:] + dens[:-1])
            cdf = np.concatenate([[0.0], np.cumsum(steps)])
            cdf /= cdf[-1]
            object.__setattr__(self, "_cdf", cdf)
        return self._cdf

    def logpdf_logit(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.grid[0], self.grid[-1])
        return self._interpolant()(x)

    def pdf_weight(self, w):
        """Density with respect to the weight itself."""
        w = np.asarray(w, dtype=float)
        wc = np.clip(w, special.expit(self.grid[0]), special.expit(self.grid[-1]))
        x = special.logit(wc)
        return np.exp(self.logpdf_logit(x)) / (wc * (1.0 - wc))

    def logpdf_weight(self, w):
        w = np.asarray(w, dtype=float)
        wc = np.clip(w, special.expit(self.grid[0]), special.expit(self.grid[-1]))
        x = special.logit(wc)
        return self.logpdf_logit(x) - np.log(wc) - np.log1p(-wc)

    def cdf(self, w):
        w = np.asarray(w, dtype=float)
        wc = np.clip(w, special.expit(self.grid[0]), special.expit(self.grid[-1]))
        return np.interp(special.logit(wc), self.grid, self._cdf_knots())

    def ppf(self, u):
        x = np.interp(np.asarray(u, dtype=float), self._cdf_knots(), self.grid)
        return special.expit(x)

    def sample(self, n: int, rng: np.random.Generator):
        return self.ppf(rng.uniform(size=n))

    def integral(self) -> float:
        return float(np.trapezoid(np.exp(self.log_density), self.grid))

    def mirrored(self) -> "DensityTable":
        """Table of 1 - w; exact because the grid is symmetric."""
        return DensityTable(
            grid=self.grid.copy(),
            log_density=self.log_density[::-1].copy(),
            raw_integral=self.raw_integral,
        )


def _make_table(logdens_of_weight) -> DensityTable:
    """Tabulate a weight density (callable of w) on the standard grid."""
    x = np.linspace(-LOGIT_SPAN, LOGIT_SPAN, N_KNOTS)
    w = special.expit(x)
    logd = logdens_of_weight(w) + np.log(w) + np.log1p(-w)
    logd = np.asarray(logd, dtype=float)
    if not np.all(np.isfinite(logd)):
        finite = logd[np.isfinite(logd)]
        if finite.size == 0:
            raise PriorConstructionError("weight density is degenerate on the grid")
        logd = np.where(np.isfinite(logd), logd, finite.min() - 700.0)
    raw = float(np.trapezoid(np.exp(logd), x))
    if not 0.98 < raw < 1.02:
        raise PriorConstructionError(
            f"weight density integrates to {raw:.4f}; construction is inconsistent"
        )
    return DensityTable(grid=x, log_density=logd - math.log(raw), raw_integral=raw)


# ---------------------------------------------------------------------------
# weight priors


@dataclass
class WeightPrior:
    """Tabulated shrinkage prior on the first-child weight of a dual split."""

    variant: str                 # pc0 | pc1 | pcM
    median: float
    concentration: float | None
    rate: float
    table: DensityTable
    base_weights: np.ndarray     # base model weights over the children

    def logpdf(self, w):
        return self.table.logpdf_weight(w)

    def sample(self, n: int, rng: np.random.Generator):
        return self.table.sample(n, rng)


def _solve_rate_median(d_m: float, d_max: float) -> float:
    """Rate of the truncated exponential putting mass 1/2 below d_m."""
    lo, hi = RATE_MIN, RATE_MAX

    def f(lam):
        return float(_texp_cdf(d_m, d_max, lam)) - 0.5

    flo = f(lo)
    if flo > 0.0:
        # uniform limit already puts more than half the mass below d_m
        if flo <= 1e-6:
            return lo
        raise PriorConstructionError(
            "median not attainable: it is too far from the base model"
        )
    if f(hi) < 0.0:
        raise PriorConstructionError("rate search failed to bracket the median condition")
    return float(optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-12))


def _build_pc0(ctx: SplitContext, median: float) -> WeightPrior:
    if not 0.0 < median < 1.0:
        raise PriorConstructionError("shrinkage median must be inside (0, 1)")
    prof = _edge_profile(ctx, base=0.0)
    if prof.singular_base and median > 0.25 + MEDIAN_SLACK:
        raise PriorConstructionError(
            "base model is singular: the median must lie within 0.25 of it "
            f"(requested {median})"
        )
    d_m = float(prof.d(median))
    d_max = prof.endpoint_distance(1.0)
    if not math.isfinite(d_max):
        # a rank deficient far corner sits at infinite distance; truncate at
        # the representable edge of the logit grid instead
        d_max = float(prof.d(special.expit(LOGIT_SPAN)))
    rate = _solve_rate_median(d_m, d_max)

    def logdens(w):
        return _texp_logpdf(prof.d(w), d_max, rate) + np.log(prof.dprime(w))

    table = _make_table(logdens)
    return WeightPrior(
        variant="pc0",
        median=median,
        concentration=None,
        rate=rate,
        table=table,
        base_weights=np.array([0.0, 1.0]),
    )


def _build_pcm(ctx: SplitContext, median: float, concentration: float) -> WeightPrior:
    if not 0.0 < median < 1.0:
        raise PriorConstructionError("shrinkage median must be inside (0, 1)")
    if not 0.5 <= concentration < 1.0:
        raise PriorConstructionError("concentration must lie in [0.5, 1)")
    m = median
    prof = _edge_profile(ctx, base=m)
    # cap each side at the distance reached at the table's logit range, not at
    # the corner: a rank deficient corner sits at infinite distance and the
    # mass past the grid would otherwise be lost to renormalization
    dL = min(prof.endpoint_distance(0.0), float(prof.d(special.expit(-LOGIT_SPAN))))
    dR = min(prof.endpoint_distance(1.0), float(prof.d(special.expit(LOGIT_SPAN))))
    ln3 = math.log(3.0)
    lo = special.expit(special.logit(m) - ln3)
    hi = special.expit(special.logit(m) + ln3)
    d_lo = float(prof.d(lo))
    d_hi = float(prof.d(hi))

    def mass(lam):
        return 0.5 * (float(_texp_cdf(d_lo, dL, lam)) + float(_texp_cdf(d_hi, dR, lam)))

    f_min = mass(RATE_MIN) - concentration
    if f_min > 0.0:
        # spread wider than the uniform-in-distance limit: negative rate
        if mass(-RATE_MAX) - concentration > 0.0:
            raise PriorConstructionError("rate search failed to bracket concentration")
        rate = float(
            optimize.brentq(lambda l: mass(l) - concentration, -RATE_MAX, RATE_MIN,
                            xtol=1e-14, rtol=1e-12)
        )
    else:
        if mass(RATE_MAX) - concentration < 0.0:
            raise PriorConstructionError("rate search failed to bracket concentration")
        rate = float(
            optimize.brentq(lambda l: mass(l) - concentration, RATE_MIN, RATE_MAX,
                            xtol=1e-14, rtol=1e-12)
        )

    def logdens(w):
        w = np.asarray(w, dtype=float)
        t = prof.d(w)
        side_max = np.where(w < m, dL, dR)
        out = np.empty_like(t)
        for smax in (dL, dR):
            mask = side_max == smax
            if np.any(mask):
                out[mask] = _texp_logpdf(t[mask], smax, rate)
        return math.log(0.5) + out + np.log(prof.dprime(w))

    table = _make_table(logdens)
    return WeightPrior(
        variant="pcM",
        median=median,
        concentration=concentration,
        rate=rate,
        table=table,
        base_weights=np.array([m, 1.0 - m]),
    )


def build_weight_prior(
    ctx: SplitContext, variant: str, median: float, concentration: float | None = None
) -> WeightPrior:
    """Construct a shrinkage prior on the first-child weight of a dual split.

    ``pc0`` shrinks toward first-child weight 0, ``pc1`` toward 1, ``pcM``
    toward an interior base at the median.  ``pc1`` is built as ``pc0`` on
    the reversed split and mirrored back, which is the defining
    equivalence between the two.
    """
    if variant == "pc0":
        return _build_pc0(ctx, median)
    if variant == "pc1":
        inner = _build_pc0(ctx.reversed(), 1.0 - median)
        return WeightPrior(
            variant="pc1",
            median=median,
            concentration=None,
            rate=inner.rate,
            table=inner.table.mirrored(),
            base_weights=np.array([1.0, 0.0]),
        )
    if variant == "pcM":
        if concentration is None:
            raise PriorConstructionError("pcM needs a concentration parameter")
        return _build_pcm(ctx, median, concentration)
    raise PriorConstructionError(f"unknown weight prior variant {variant!r}")


# ---------------------------------------------------------------------------
# symmetric Dirichlet with calibrated concentration


@lru_cache(maxsize=None)
def dirichlet_concentration(p: int) -> float:
    """Concentration making each weight's logit stay within log(3) of the
    even split with probability 1/2.

    The marginal of one weight under Dirichlet(alpha, ..., alpha) is
    Beta(alpha, (p-1) alpha).  p = 2 gives alpha = 1, the uniform.
    """
    if p < 2:
        raise PriorConstructionError("a split needs at least two children")
    ln3 = math.log(3.0)
    lo = special.expit(special.logit(1.0 / p) - ln3)
    hi = special.expit(special.logit(1.0 / p) + ln3)

    def f(alpha):
        return (
            stats.beta.cdf(hi, alpha, (p - 1) * alpha)
            - stats.beta.cdf(lo, alpha, (p - 1) * alpha)
            - 0.5
        )

    return float(optimize.brentq(f, 1e-4, 1e4, xtol=1e-12, rtol=8.882e-16))


@dataclass
class DirichletPrior:
    """Symmetric Dirichlet over all p weights of a split."""

    p: int
    alpha: float

    @property
    def base_weights(self) -> np.ndarray:
        return np.full(self.p, 1.0 / self.p)

    def logpdf(self, weights) -> float:
        w = np.asarray(weights, dtype=float)
        if w.shape[-1] != self.p:
            raise ValueError(f"expected {self.p} weights")
        a = self.alpha
        lognorm = special.gammaln(self.p * a) - self.p * special.gammaln(a)
        return float(lognorm + (a - 1.0) * np.sum(np.log(w), axis=-1))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.dirichlet(np.full(self.p, self.alpha), size=n)


def dirichlet_prior(p: int) -> DirichletPrior:
    return DirichletPrior(p=p, alpha=dirichlet_concentration(p))


# ---------------------------------------------------------------------------
# variance priors (closed forms)


def pc_sd_rate(u: float, alpha: float) -> float:
    if u <= 0 or not 0.0 < alpha < 1.0:
        raise PriorConstructionError("scale prior needs u > 0 and 0 < alpha < 1")
    return -math.log(alpha) / u


def pc_sd_logpdf(sd, u: float, alpha: float):
    """Exponential density on the standard deviation: P(sd > u) = alpha."""
    lam = pc_sd_rate(u, alpha)
    sd = np.asarray(sd, dtype=float)
    return np.where(sd >= 0, math.log(lam) - lam * sd, -np.inf)


@dataclass
class VariancePrior:
    """Prior on a total variance or singleton variance.

    Kinds: ``pc0`` (exponential on the sd), ``jeffreys`` (improper,
    scale-free), ``invgam`` (shape, scale), ``hc`` (half-Cauchy on the sd).
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        kind = {"pc": "pc0"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        need = {"pc0": 2, "jeffreys": 0, "invgam": 2, "hc": 1}
        if kind not in need:
            raise PriorConstructionError(f"unknown variance prior {self.kind!r}")
        if len(self.params) != need[kind]:
            raise PriorConstructionError(
                f"variance prior {kind!r} takes {need[kind]} parameters"
            )
        if kind == "pc0":
            pc_sd_rate(*self.params)
        if kind in ("invgam", "hc") and any(p <= 0 for p in self.params):
            raise PriorConstructionError(f"{kind} parameters must be positive")

    @property
    def proper(self) -> bool:
        return self.kind != "jeffreys"

    def logpdf_variance(self, v):
        """Log density with respect to the variance (jeffreys unnormalized)."""
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "jeffreys":
                out = -np.log(v)
            elif self.kind == "pc0":
                sd = np.sqrt(v)
                out = pc_sd_logpdf(sd, *self.params) - np.log(2.0 * sd)
            elif self.kind == "invgam":
                a, b = self.params
                out = a * math.log(b) - special.gammaln(a) - (a + 1.0) * np.log(v) - b / v
            else:  # hc
                (s,) = self.params
                sd = np.sqrt(v)
                out = (
                    math.log(2.0) - math.log(math.pi * s) - np.log1p(v / s**2)
                    - np.log(2.0 * sd)
                )
        return np.where(v > 0, out, -np.inf)

    def sample_variance(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "pc0":
            lam = pc_sd_rate(*self.params)
            return (rng.exponential(scale=1.0 / lam, size=n)) ** 2
        if self.kind == "invgam":
            a, b = self.params
            return b / rng.gamma(shape=a, size=n)
        if self.kind == "hc":
            (s,) = self.params
            return (np.abs(s * rng.standard_cauchy(size=n))) ** 2
        raise PriorConstructionError("cannot sample an improper variance prior")
