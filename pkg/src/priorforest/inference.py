"""Posterior inference for models carrying a hierarchical variance prior.

The sampler works on the log component variances, whose joint prior density
comes from the assembly module.  For gaussian likelihoods the latent field
and fixed effects are integrated out exactly; binomial and poisson models
use a Laplace approximation at the conditional mode.  Latent and fixed
effect draws are recovered afterwards from the kept hyperparameter draws.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import linalg, special, stats

from .assembly import HDJointPrior, log_prior_logvar
from .data import design_matrix, fixed_effects_matrix
from .kernels import DirichletPrior, pc_sd_rate
from .tree import RESIDUAL, TreeError

__all__ = [
    "InferenceError",
    "InferenceResult",
    "SamplerSettings",
    "conditional_latent_draws",
    "extract_posterior_effect",
    "gaussian_marginal_loglik",
    "laplace_marginal_loglik",
    "posterior_density_grid",
    "posterior_summaries",
    "posterior_text",
    "prior_density_grid",
    "run_mcmc",
]


class InferenceError(RuntimeError):
    """Raised for numerical failures and invalid inference requests."""


# ---------------------------------------------------------------------------
# dense linear algebra helpers

_JITTER = (0.0, 1e-10, 1e-8, 1e-6)


def _chol(mat: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor with an escalating diagonal jitter."""
    scale = float(np.mean(np.diag(mat))) or 1.0
    for jit in _JITTER:
        try:
            return linalg.cholesky(
                mat + (jit * scale) * np.eye(mat.shape[0]), lower=True
            )
        except linalg.LinAlgError:
            continue
    raise InferenceError("covariance matrix is not positive definite")


def _logdet(chol_l: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol_l))))


def _chol_solve(chol_l: np.ndarray, b: np.ndarray) -> np.ndarray:
    return linalg.cho_solve((chol_l, True), b)


# ---------------------------------------------------------------------------
# model matrices shared by every inference route


class _Matrices:
    """Design, loading and prior matrices fixed across the sampler run."""

    def __init__(self, prior: HDJointPrior):
        self.prior = prior
        spec, data = prior.spec, prior.data
        self.n = data.n_obs
        self.gaussian = spec.likelihood == "gaussian"

        self.X, self.effect_names = fixed_effects_matrix(spec, data)
        pairs = []
        for i, name in enumerate(self.effect_names):
            if spec.has_intercept and i == 0:
                pairs.append(prior.intercept_prior)
            else:
                pairs.append(prior.covariate_priors[name])
        self.effect_means = np.array([p[0] for p in pairs], dtype=float)
        self.effect_sds = np.array([p[1] for p in pairs], dtype=float)
        self.mu0 = self.X @ self.effect_means
        Xs = self.X * self.effect_sds
        self.fixed_cov = Xs @ Xs.T
        self.fixed_load = Xs  # prior-whitened fixed-effect block

        # component loadings M with M M^T equal to the observation covariance
        self.order = list(prior.component_order)
        self.obs_cov = {k: prior.obs_covariances[k] for k in self.order}
        self.latent_labels = [
            k for k in self.order if not (self.gaussian and k == RESIDUAL)
        ]
        self.loading: dict[str, np.ndarray] = {}
        self.comp_load: dict[str, np.ndarray] = {}
        for label in self.latent_labels:
            C = prior.component_covariances[label]
            lam, vec = linalg.eigh(C)
            keep = lam > 1e-9 * max(lam[-1], 1.0)
            L = vec[:, keep] * np.sqrt(lam[keep])
            self.comp_load[label] = L
            if label == RESIDUAL:
                A = np.eye(self.n)
            else:
                A = design_matrix(data.indices[label], prior.structures[label].n)
            self.loading[label] = A @ L
        self.z_dim = self.X.shape[1] + sum(
            self.loading[k].shape[1] for k in self.latent_labels
        )

    def index_of(self, label: str) -> int:
        return self.order.index(label)

    def marginal_cov(self, log_var: np.ndarray, skip: str | None = None) -> np.ndarray:
        cov = self.fixed_cov.copy()
        for j, label in enumerate(self.order):
            if label == skip:
                continue
            cov += math.exp(log_var[j]) * self.obs_cov[label]
        return cov

    def design(self, log_var: np.ndarray) -> np.ndarray:
        """Whitened latent design: eta = mu0 + design @ z with z ~ N(0, I)."""
        blocks = [self.fixed_load]
        for label in self.latent_labels:
            sd = math.exp(0.5 * log_var[self.index_of(label)])
            blocks.append(sd * self.loading[label])
        return np.hstack(blocks)

    def split_z(self, log_var: np.ndarray, z: np.ndarray):
        """Map whitened coordinates back to fixed effects and components."""
        p = self.X.shape[1]
        fixed = self.effect_means + self.effect_sds * z[..., :p]
        out: dict[str, np.ndarray] = {}
        at = p
        for label in self.latent_labels:
            L = self.comp_load[label]
            r = L.shape[1]
            sd = math.exp(0.5 * log_var[self.index_of(label)])
            out[label] = sd * (z[..., at : at + r] @ L.T)
            at += r
        return fixed, out


# ---------------------------------------------------------------------------
# likelihood families for the Laplace route


class _Family:
    def __init__(self, prior: HDJointPrior):
        data = prior.data
        self.kind = prior.spec.likelihood
        self.y = np.asarray(data.response, dtype=float)
        if self.kind == "binomial":
            self.trials = np.asarray(data.trials, dtype=float)
            self.const = float(
                np.sum(
                    special.gammaln(self.trials + 1)
                    - special.gammaln(self.y + 1)
                    - special.gammaln(self.trials - self.y + 1)
                )
            )
        elif self.kind == "poisson":
            self.offset = (
                np.zeros(len(self.y)) if data.offset is None else np.asarray(data.offset)
            )
            self.const = -float(np.sum(special.gammaln(self.y + 1)))

    def loglik(self, eta: np.ndarray, obs_var: float | None = None) -> float:
        if self.kind == "gaussian":
            r = self.y - eta
            n = len(self.y)
            return -0.5 * (
                n * math.log(2.0 * math.pi * obs_var) + float(r @ r) / obs_var
            )
        if self.kind == "binomial":
            return float(
                np.sum(self.y * eta - self.trials * np.logaddexp(0.0, eta))
            ) + self.const
        lam = eta + self.offset
        return float(np.sum(self.y * lam - np.exp(lam))) + self.const

    def grad(self, eta: np.ndarray, obs_var: float | None = None) -> np.ndarray:
        if self.kind == "gaussian":
            return (self.y - eta) / obs_var
        if self.kind == "binomial":
            return self.y - self.trials * special.expit(eta)
        return self.y - np.exp(eta + self.offset)

    def weight(self, eta: np.ndarray, obs_var: float | None = None) -> np.ndarray:
        # negative second derivative of the log likelihood in eta
        if self.kind == "gaussian":
            return np.full(len(self.y), 1.0 / obs_var)
        if self.kind == "binomial":
            p = special.expit(eta)
            w = self.trials * p * (1.0 - p)
        else:
            w = np.exp(eta + self.offset)
        return np.clip(w, 1e-12, 1e12)


# ---------------------------------------------------------------------------
# marginal likelihood routes

_NEWTON_TOL = 1e-8
_NEWTON_MAX = 50


class _GaussianMarginal:
    """Exact marginal: latent field and fixed effects integrated in closed form."""

    def __init__(self, prior: HDJointPrior, matrices: _Matrices | None = None):
        if prior.spec.likelihood != "gaussian":
            raise InferenceError("exact marginalization needs a gaussian likelihood")
        self.m = matrices or _Matrices(prior)
        self.y = np.asarray(prior.data.response, dtype=float)

    def __call__(self, log_var: np.ndarray) -> float:
        cov = self.m.marginal_cov(log_var)
        L = _chol(cov)
        r = self.y - self.m.mu0
        alpha = _chol_solve(L, r)
        n = len(self.y)
        return -0.5 * (n * math.log(2.0 * math.pi) + _logdet(L) + float(r @ alpha))


class _LaplaceMarginal:
    """Gaussian approximation of the latent integral at the conditional mode.

    Works in whichever space is smaller: the whitened latent coordinates, or
    the linear predictor when the components span the observation space.
    """

    def __init__(self, prior: HDJointPrior, matrices: _Matrices | None = None):
        self.m = matrices or _Matrices(prior)
        self.family = _Family(prior)
        self.gaussian = self.m.gaussian
        cover = self.m.marginal_cov(np.zeros(len(self.m.order)), skip=RESIDUAL if self.gaussian else None)
        eigs = linalg.eigvalsh(cover)
        spans = eigs[0] > 1e-8 * max(eigs[-1], 1.0)
        self.route = "obs" if (self.m.z_dim > self.m.n and spans) else "latent"
        self._warm: np.ndarray | None = None

    def _obs_var(self, log_var: np.ndarray) -> float | None:
        if not self.gaussian:
            return None
        return math.exp(log_var[self.m.index_of(RESIDUAL)])

    def _newton(self, value, grad_f, hess_solve, x0):
        """Maximize a concave objective; returns the mode."""
        x = x0
        fx = value(x)
        if not math.isfinite(fx):
            x = np.zeros_like(x0)
            fx = value(x)
        for _ in range(_NEWTON_MAX):
            g = grad_f(x)
            if float(np.max(np.abs(g))) < _NEWTON_TOL:
                return x
            step = hess_solve(x, g)
            new = x + step
            fnew = value(new)
            # step halving keeps early iterations from overshooting
            halves = 0
            while not (math.isfinite(fnew) and fnew >= fx - 1e-12) and halves < 30:
                step *= 0.5
                new = x + step
                fnew = value(new)
                halves += 1
            x, fx = new, fnew
        g = grad_f(x)
        if float(np.max(np.abs(g))) < 1e-5:
            return x
        raise InferenceError("mode search did not converge")

    def mode_latent(self, log_var: np.ndarray):
        """Latent-space mode and curvature: (z_hat, design, weights)."""
        B = self.m.design(log_var)
        v = self._obs_var(log_var)
        fam, mu0 = self.family, self.m.mu0

        def value(z):
            return fam.loglik(mu0 + B @ z, v) - 0.5 * float(z @ z)

        def grad_f(z):
            return B.T @ fam.grad(mu0 + B @ z, v) - z

        def hess_solve(z, g):
            w = fam.weight(mu0 + B @ z, v)
            H = (B.T * w) @ B
            H[np.diag_indices_from(H)] += 1.0
            return _chol_solve(_chol(H), g)

        warm = self._warm if self._warm is not None and len(self._warm) == B.shape[1] else np.zeros(B.shape[1])
        z_hat = self._newton(value, grad_f, hess_solve, warm)
        self._warm = z_hat
        return z_hat, B, fam.weight(mu0 + B @ z_hat, v)

    def _value_latent(self, log_var: np.ndarray) -> float:
        z_hat, B, w = self.mode_latent(log_var)
        v = self._obs_var(log_var)
        H = (B.T * w) @ B
        H[np.diag_indices_from(H)] += 1.0
        return (
            self.family.loglik(self.m.mu0 + B @ z_hat, v)
            - 0.5 * float(z_hat @ z_hat)
            - 0.5 * _logdet(_chol(H))
        )

    def _value_obs(self, log_var: np.ndarray) -> float:
        cov = self.m.marginal_cov(log_var, skip=RESIDUAL if self.gaussian else None)
        L = _chol(cov)
        prec = _chol_solve(L, np.eye(len(cov)))
        v = self._obs_var(log_var)
        fam, mu0 = self.family, self.m.mu0

        def value(eta):
            d = eta - mu0
            return fam.loglik(eta, v) - 0.5 * float(d @ (prec @ d))

        def grad_f(eta):
            return fam.grad(eta, v) - prec @ (eta - mu0)

        def hess_solve(eta, g):
            H = prec.copy()
            H[np.diag_indices_from(H)] += fam.weight(eta, v)
            return _chol_solve(_chol(H), g)

        warm = self._warm if self._warm is not None and len(self._warm) == len(mu0) else mu0.copy()
        eta_hat = self._newton(value, grad_f, hess_solve, warm)
        self._warm = eta_hat
        H = prec.copy()
        H[np.diag_indices_from(H)] += fam.weight(eta_hat, v)
        d = eta_hat - mu0
        return (
            fam.loglik(eta_hat, v)
            - 0.5 * float(d @ (prec @ d))
            - 0.5 * _logdet(L)
            - 0.5 * _logdet(_chol(H))
        )

    def __call__(self, log_var: np.ndarray) -> float:
        if self.route == "obs":
            return self._value_obs(log_var)
        return self._value_latent(log_var)


def gaussian_marginal_loglik(prior: HDJointPrior, log_var) -> float:
    """Exact log marginal likelihood of the data given log variances."""
    return _GaussianMarginal(prior)(np.asarray(log_var, dtype=float))


def laplace_marginal_loglik(prior: HDJointPrior, log_var) -> float:
    """Laplace-approximated log marginal likelihood (exact for gaussian)."""
    return _LaplaceMarginal(prior)(np.asarray(log_var, dtype=float))


# ---------------------------------------------------------------------------
# conditional draws of the latent field and fixed effects


def _draw_z(matrices: _Matrices, family: _Family, log_var: np.ndarray, rng,
            laplace: _LaplaceMarginal | None = None) -> np.ndarray:
    if matrices.gaussian:
        v = math.exp(log_var[matrices.index_of(RESIDUAL)])
        B = matrices.design(log_var)
        Q = B.T @ B / v
        Q[np.diag_indices_from(Q)] += 1.0
        L = _chol(Q)
        mean = _chol_solve(L, B.T @ (family.y - matrices.mu0) / v)
        return mean + linalg.solve_triangular(
            L.T, rng.standard_normal(len(mean)), lower=False
        )
    z_hat, B, w = laplace.mode_latent(log_var)
    H = (B.T * w) @ B
    H[np.diag_indices_from(H)] += 1.0
    L = _chol(H)
    return z_hat + linalg.solve_triangular(
        L.T, rng.standard_normal(len(z_hat)), lower=False
    )


def conditional_latent_draws(
    prior: HDJointPrior, log_var, n: int, seed: int = 1
) -> tuple[np.ndarray, dict[str, np.ndarray], list[str]]:
    """Draw fixed effects and latent components given fixed log variances.

    Exact conditional for gaussian likelihoods, Gaussian approximation at
    the Laplace mode otherwise.  Returns (fixed draws, component draws,
    fixed effect names).
    """
    lv = np.asarray(log_var, dtype=float)
    m = _Matrices(prior)
    fam = _Family(prior)
    lap = None if m.gaussian else _LaplaceMarginal(prior, m)
    rng = np.random.default_rng(seed)
    fixed = np.empty((n, m.X.shape[1]))
    comps = {k: np.empty((n, m.comp_load[k].shape[0])) for k in m.latent_labels}
    for i in range(n):
        z = _draw_z(m, fam, lv, rng, lap)
        f, parts = m.split_z(lv, z)
        fixed[i] = f
        for k, u in parts.items():
            comps[k][i] = u
    return fixed, comps, m.effect_names


# ---------------------------------------------------------------------------
# the sampler


@dataclass(frozen=True)
class SamplerSettings:
    iterations: int = 15000
    warmup: int = 5000
    chains: int = 1
    seed: int = 1
    latent_draws: int = 2000
    step_scale: float | None = None

    def __post_init__(self):
        if not 0 < self.warmup < self.iterations:
            raise InferenceError("need 0 < warmup < iterations")
        if self.chains < 1:
            raise InferenceError("need at least one chain")


@dataclass
class InferenceResult:
    prior: HDJointPrior
    settings: SamplerSettings
    prior_only: bool
    log_variances: np.ndarray  # kept draws, all chains stacked
    chain_ids: np.ndarray
    acceptance_rate: float
    fixed_effects: np.ndarray | None = None
    fixed_effect_names: list[str] = field(default_factory=list)
    latent: dict[str, np.ndarray] = field(default_factory=dict)
    latent_rows: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return self.log_variances.shape[0]


def _target(prior: HDJointPrior, prior_only: bool):
    if prior_only:
        improper = [
            r for r, vp in prior.variance_priors.items() if not vp.proper
        ]
        if improper:
            raise InferenceError(
                "prior-only sampling is undefined for the improper variance prior "
                f"on {improper[0]!r}; draw from the prior directly instead"
            )
        return lambda lv: log_prior_logvar(prior, lv)
    if prior.spec.likelihood == "gaussian":
        marginal = _GaussianMarginal(prior)
    else:
        marginal = _LaplaceMarginal(prior)

    def target(lv):
        base = log_prior_logvar(prior, lv)
        if not math.isfinite(base):
            return -math.inf
        return base + marginal(lv)

    return target


_TARGET_ACCEPT = 0.3


def _run_chain(target, dim, iterations, warmup, seed_key, step_scale):
    rng = np.random.default_rng(seed_key)
    lv = np.zeros(dim)
    cur = target(lv)
    if not math.isfinite(cur):
        raise InferenceError("the sampler cannot start: zero density at the origin")
    log_s = math.log(step_scale if step_scale is not None else 0.1**2)
    base_chol = np.eye(dim) / math.sqrt(dim)
    prop_chol = math.sqrt(math.exp(log_s)) * base_chol
    mean = np.zeros(dim)
    m2 = np.zeros((dim, dim))
    count = 0
    kept = np.empty((iterations - warmup, dim))
    accepted = 0
    for it in range(iterations):
        prop = lv + prop_chol @ rng.standard_normal(dim)
        new = target(prop)
        ratio = new - cur
        took = ratio > math.log(rng.random())
        if took:
            lv, cur = prop, new
            if it >= warmup:
                accepted += 1
        if it < warmup:
            # adapt only during warmup so the kept chain is Markov: the scale
            # chases the target acceptance rate and the shape follows the
            # streaming covariance of the visited states
            log_s += (3.0 / max(200.0, it + 1.0) ** 0.7) * (
                min(1.0, math.exp(min(ratio, 0.0))) - _TARGET_ACCEPT
            )
            if it == warmup // 2:
                # forget the transient from the fixed starting point
                mean[:] = 0.0
                m2[:] = 0.0
                count = 0
            count += 1
            delta = lv - mean
            mean += delta / count
            m2 += np.outer(delta, lv - mean)
            if count >= max(50, 2 * dim) and (it + 1) % 50 == 0:
                cov = m2 / (count - 1) + 1e-9 * np.eye(dim)
                base_chol = _chol(cov)
            prop_chol = math.sqrt(math.exp(log_s)) * base_chol
        else:
            kept[it - warmup] = lv
    return kept, accepted / (iterations - warmup)


def run_mcmc(
    prior: HDJointPrior,
    settings: SamplerSettings | None = None,
    prior_only: bool = False,
    latent: bool = True,
    **overrides,
) -> InferenceResult:
    """Adaptive random-walk Metropolis over the log component variances."""
    settings = settings or SamplerSettings()
    if overrides:
        settings = replace(settings, **overrides)
    dim = len(prior.component_order)
    target = _target(prior, prior_only)

    chains = []
    rates = []
    for chain in range(settings.chains):
        kept, rate = _run_chain(
            target, dim, settings.iterations, settings.warmup,
            [settings.seed, chain], settings.step_scale,
        )
        chains.append(kept)
        rates.append(rate)
    draws = np.vstack(chains)
    chain_ids = np.repeat(np.arange(settings.chains), settings.iterations - settings.warmup)

    if any(not vp.proper for vp in prior.variance_priors.values()):
        if float(np.max(np.abs(draws))) > 30.0:
            warnings.warn(
                "log-variance trace drifted very far; the posterior may be "
                "improper (too little data for the scale-free prior)"
            )

    result = InferenceResult(
        prior=prior,
        settings=settings,
        prior_only=prior_only,
        log_variances=draws,
        chain_ids=chain_ids,
        acceptance_rate=float(np.mean(rates)),
    )
    if latent and not prior_only:
        _attach_latent_draws(result)
    return result


def _attach_latent_draws(result: InferenceResult) -> None:
    prior, settings = result.prior, result.settings
    m = _Matrices(prior)
    fam = _Family(prior)
    lap = None if m.gaussian else _LaplaceMarginal(prior, m)
    total = result.n_draws
    n_lat = min(settings.latent_draws, total)
    rows = np.unique(np.linspace(0, total - 1, n_lat).round().astype(int))
    rng = np.random.default_rng([settings.seed, 104729])
    fixed = np.empty((len(rows), m.X.shape[1]))
    comps = {k: np.empty((len(rows), m.comp_load[k].shape[0])) for k in m.latent_labels}
    for i, row in enumerate(rows):
        lv = result.log_variances[row]
        z = _draw_z(m, fam, lv, rng, lap)
        f, parts = m.split_z(lv, z)
        fixed[i] = f
        for k, u in parts.items():
            comps[k][i] = u
    result.fixed_effects = fixed
    result.fixed_effect_names = m.effect_names
    result.latent = comps
    result.latent_rows = rows


# ---------------------------------------------------------------------------
# summaries


def _tree_draws(prior: HDJointPrior, log_variances: np.ndarray):
    """Total variances and first-child weights per draw, named like the
    printed parameter list."""
    lv = np.asarray(log_variances, dtype=float)
    var = np.exp(lv)
    order = prior.component_order
    cols: list[np.ndarray] = []
    names: list[str] = []

    def subtree(name: str) -> np.ndarray:
        node = prior.forest.nodes[name]
        if not node.children:
            return var[:, order.index(name)]
        return sum(subtree(c) for c in node.children)

    for root in prior.forest.roots:
        names.append(f"V[{root}]")
        cols.append(subtree(root))
    for s in prior.forest.splits():
        parent = subtree(s)
        children = prior.forest.nodes[s].children
        wp = prior.weight_priors[s]
        first = children[:-1] if isinstance(wp, DirichletPrior) else children[:1]
        for c in first:
            names.append(f"w[{c}/{s}]")
            cols.append(subtree(c) / parent)
    return names, np.column_stack(cols)


_SCALES = ("tree", "variance", "stdev", "precision")


def _scale_draws(prior: HDJointPrior, log_variances: np.ndarray, scale: str):
    if scale == "tree":
        return _tree_draws(prior, log_variances)
    var = np.exp(np.asarray(log_variances, dtype=float))
    order = prior.component_order
    if scale == "variance":
        return [f"sigma^2[{k}]" for k in order], var
    if scale == "stdev":
        return [f"sigma[{k}]" for k in order], np.sqrt(var)
    if scale == "precision":
        return [f"1/sigma^2[{k}]" for k in order], 1.0 / var
    raise InferenceError(f"unknown scale {scale!r}; pick one of {_SCALES}")


def posterior_summaries(result: InferenceResult, scale: str = "tree") -> pd.DataFrame:
    """Mean, median and sd per parameter on the requested scale."""
    if result.n_draws < 100:
        raise InferenceError("too few draws for a summary")
    names, draws = _scale_draws(result.prior, result.log_variances, scale)
    if scale == "tree" and result.fixed_effects is not None:
        names = names + result.fixed_effect_names
        pad = result.fixed_effects
        # hyperparameter and effect draws differ in count; summarize each
        rows = [
            (np.mean(c), np.median(c), np.std(c, ddof=1))
            for c in draws.T
        ] + [(np.mean(c), np.median(c), np.std(c, ddof=1)) for c in pad.T]
    else:
        rows = [(np.mean(c), np.median(c), np.std(c, ddof=1)) for c in draws.T]
    return pd.DataFrame(rows, index=names, columns=["mean", "median", "sd"]).rename_axis(
        "Param."
    )


def _format_table(frame: pd.DataFrame) -> str:
    width = max(len(str(i)) for i in frame.index)
    width = max(width, len("Param."))
    lines = [f" {'Param.'.ljust(width)}  mean   median sd   "]
    for name, row in frame.iterrows():
        nums = " ".join(f"{v:6.3f}" for v in row)
        lines.append(f" {str(name).ljust(width)} {nums}")
    return "\n".join(lines)


def posterior_text(result: InferenceResult) -> str:
    """Human summary: the model, the sampler, and the tree-scale table."""
    from .assembly import prior_block  # deferred to keep imports one-way

    head = f"Model: {result.prior.spec.text}\n"
    head += prior_block(result.prior).split("\n\n")[0] + "\n\n"
    head += (
        "Inference by adaptive random-walk Metropolis "
        f"({result.settings.chains} chain(s), {result.n_draws} kept draws, "
        f"acceptance {result.acceptance_rate:.2f}).\n\n"
    )
    return head + _format_table(posterior_summaries(result, "tree"))


def extract_posterior_effect(result: InferenceResult, label: str) -> np.ndarray:
    """Draws for one latent component or fixed effect (draws x dimension)."""
    if label in result.latent:
        return result.latent[label]
    if label in result.fixed_effect_names:
        j = result.fixed_effect_names.index(label)
        return result.fixed_effects[:, j : j + 1]
    raise InferenceError(f"no latent component or fixed effect named {label!r}")


# ---------------------------------------------------------------------------
# density grids for plotting


_WEIGHT_GRID = np.round(np.arange(0.0, 1.0 + 1e-9, 0.001), 3)
_SD_GRID = np.round(np.arange(0.0, 5.0 + 1e-9, 0.05), 2)
_EDGE = special.expit(-12.0)  # representable weight range of the tables


def _weight_density(prior: HDJointPrior, split: str, child: str, x: np.ndarray):
    wp = prior.weight_priors[split]
    children = prior.forest.nodes[split].children
    pos = children.index(child)
    # evaluation clamps at the representable edge of the tables, so the
    # endpoint values of a grid can spike when mass piles up near 0 or 1
    inner = np.clip(x, _EDGE, 1.0 - _EDGE)
    if isinstance(wp, DirichletPrior):
        a = wp.alpha
        b = (wp.p - 1) * a
        return stats.beta.pdf(inner, a, b)
    w = inner if pos == 0 else 1.0 - inner
    return np.exp(wp.logpdf(w))


def _root_sd_density(prior: HDJointPrior, root: str, sd: np.ndarray) -> np.ndarray:
    vp = prior.variance_priors[root]
    if not vp.proper:
        raise InferenceError(
            f"the variance prior on {root!r} is improper and has no plottable density"
        )
    if vp.kind == "pc0":
        lam = pc_sd_rate(*vp.params)
        return lam * np.exp(-lam * sd)
    if vp.kind == "hc":
        (s,) = vp.params
        return 2.0 / (math.pi * s * (1.0 + (sd / s) ** 2))
    # change of variables from the variance density
    v = np.maximum(sd, 1e-12) ** 2
    return np.exp(vp.logpdf_variance(v)) * 2.0 * np.maximum(sd, 1e-12)


def _parse_param(prior: HDJointPrior, name: str):
    try:
        if name.startswith("w[") and name.endswith("]"):
            child, split = name[2:-1].split("/", 1)
            split = prior.forest.resolve(split)
            child = prior.forest.resolve(child)
            if child not in prior.forest.nodes[split].children:
                raise InferenceError(f"{child!r} is not a child of {split!r}")
            return ("weight", split, child)
        if name.startswith("V[") and name.endswith("]"):
            root = prior.forest.resolve(name[2:-1])
            if prior.forest.nodes[root].parent is not None:
                raise InferenceError(f"{root!r} is not a tree root")
            return ("root", root, None)
    except TreeError as err:
        raise InferenceError(str(err)) from err
    raise InferenceError(f"cannot parse parameter name {name!r}")


def prior_density_grid(
    prior: HDJointPrior, name: str, scale: str | None = None, grid=None
):
    """Density of one prior parameter on a plotting grid.

    Weight parameters use the unit grid; total variances are plotted on
    the sd scale by default.  Returns (x, density, scale label).
    """
    kind, node, child = _parse_param(prior, name)
    if kind == "weight":
        x = _WEIGHT_GRID if grid is None else np.asarray(grid, dtype=float)
        return x, _weight_density(prior, node, child, x), "weight"
    scale = scale or "sd"
    x = _SD_GRID if grid is None else np.asarray(grid, dtype=float)
    if scale == "sd":
        return x, _root_sd_density(prior, node, x), "sd"
    if scale == "variance":
        vp = prior.variance_priors[node]
        if not vp.proper:
            raise InferenceError(
                f"the variance prior on {node!r} is improper and has no plottable density"
            )
        return x, np.exp(vp.logpdf_variance(np.maximum(x, 1e-300))), "variance"
    raise InferenceError(f"unknown scale {scale!r} for a total variance")


def _posterior_sample(result: InferenceResult, name: str):
    """Draws for one tree parameter or fixed effect; (sample, support)."""
    prior = result.prior
    var = np.exp(result.log_variances)
    order = prior.component_order

    def subtree(node_name: str) -> np.ndarray:
        node = prior.forest.nodes[node_name]
        if not node.children:
            return var[:, order.index(node_name)]
        return sum(subtree(c) for c in node.children)

    if name in result.fixed_effect_names:
        col = result.fixed_effect_names.index(name)
        return result.fixed_effects[:, col], "real"
    kind, node, child = _parse_param(prior, name)
    if kind == "root":
        return subtree(node), "positive"
    return subtree(child) / subtree(node), "weight"


def posterior_density_grid(result: InferenceResult, name: str, grid=None):
    """Kernel density of one posterior parameter on a plotting grid."""
    sample, support = _posterior_sample(result, name)
    kde = stats.gaussian_kde(sample)
    if grid is None:
        if support == "weight":
            grid = _WEIGHT_GRID
        else:
            pad = 3.0 * float(np.std(sample))
            hi = float(np.max(sample)) + pad
            lo = float(np.min(sample)) - pad
            if support == "positive":
                lo = max(0.0, lo)
            grid = np.linspace(lo, hi, 501)
    x = np.asarray(grid, dtype=float)
    return x, kde(x), "posterior"
