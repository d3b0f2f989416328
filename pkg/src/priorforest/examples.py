"""Synthetic datasets and ready-made model setups.

Each ``*_setup`` function returns a dict of keyword arguments for
:func:`priorforest.assembly.build_prior`, with freshly simulated data.
``EXAMPLES`` registers them by name for the CLI.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .structures import (
    constrained_covariance,
    scale_to_typical_variance,
    structure_besag,
    structure_generic0,
)

__all__ = [
    "EXAMPLES",
    "example_setup",
    "latin_setup",
    "model1_setup",
    "neonatal_graph",
    "neonatal_setup",
    "random_intercept_data",
    "wheat_setup",
]


def random_intercept_data(
    m: int = 10, p: int = 10, seed: int = 1, sigma_a: float = 0.5, sigma_eps: float = 1.0
) -> dict:
    """One iid group effect with m levels, p observations per level."""
    rng = np.random.default_rng(seed)
    a = np.repeat(np.arange(1, m + 1), p)
    effect = rng.normal(0.0, sigma_a, size=m)
    y = effect[a - 1] + rng.normal(0.0, sigma_eps, size=m * p)
    return {"y": y, "a": a}


def model1_setup(m: int = 10, p: int = 10, seed: int = 1) -> dict:
    """Two crossed iid effects and one covariate (the running example)."""
    rng = np.random.default_rng(seed)
    i = np.repeat(np.arange(1, m + 1), p)
    j = np.tile(np.arange(1, p + 1), m)
    x = rng.normal(size=m)[i - 1]  # year covariate, constant within i
    y = (
        1.0
        + 0.5 * x
        + rng.normal(0.0, 0.5, size=m)[i - 1]
        + rng.normal(0.0, 0.5, size=p)[j - 1]
        + rng.normal(0.0, 1.0, size=m * p)
    )
    return {
        "formula": "y ~ x + mc(a) + mc(b)",
        "data": {"y": y, "x": x, "a": i, "b": j},
        "tree": "s1 = (a, b); s2 = (s1, eps)",
        "weights": {"s1": ("pcM", 0.7, 0.5), "s2": ("pc0", 0.25)},
        "variances": {"s2": ("pc0", 3, 0.05)},
        "covariate_priors": {"x": (0, 100)},
    }


def latin_setup(seed: int = 1) -> dict:
    """9x9 latin square with a quadratic treatment effect.

    True standard deviations are all 0.1; the treatment curve
    0.02((k-5)^2 - 20/3) has no linear component over the balanced design,
    so the rw2 effect (with sum and linear constraints) has to absorb it.
    """
    rng = np.random.default_rng(seed)
    n = 9
    i = np.repeat(np.arange(1, n + 1), n)
    j = np.tile(np.arange(1, n + 1), n)
    k = ((i - 1) + (j - 1)) % n + 1  # cyclic latin square
    c1 = 0.02 * ((k - 5.0) ** 2 - 20.0 / 3.0)
    row = rng.normal(0.0, 0.1, size=n)[i - 1]
    col = rng.normal(0.0, 0.1, size=n)[j - 1]
    c2 = rng.normal(0.0, 0.1, size=n)[k - 1]
    y = c1 + c2 + row + col + rng.normal(0.0, 0.1, size=n * n)
    return {
        "formula": 'y ~ lin + mc(row) + mc(col) + mc(iid) + '
        'mc(rw2, model = "rw2", constr = TRUE, lin_constr = TRUE)',
        "data": {
            "y": y,
            "lin": k.astype(float),
            "row": i,
            "col": j,
            "iid": k,
            "rw2": k,
        },
        "tree": "s1 = (rw2, iid); s2 = (row, col, s1); s3 = (s2, eps)",
        "weights": {
            "s1": ("pc0", 0.25),
            "s2": "dirichlet",
            "s3": ("pc0", 0.25),
        },
    }


def _relationship_matrices(n: int, n_loci: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # additive/dominance/epistasis relationship matrices from random markers
    freq = rng.uniform(0.1, 0.9, size=n_loci)
    geno = rng.binomial(2, freq, size=(n, n_loci)).astype(float)
    Za = geno - 2.0 * freq
    A = Za @ Za.T / np.sum(2.0 * freq * (1.0 - freq))
    het = (geno == 1).astype(float)
    Zd = het - 2.0 * freq * (1.0 - freq)
    D = Zd @ Zd.T / np.sum((2.0 * freq * (1.0 - freq)) ** 2)
    X = A * A  # pairwise epistasis as the Hadamard square
    eye = np.eye(n)
    return A + 1e-4 * eye, D + 1e-4 * eye, X + 1e-4 * eye


def wheat_setup(n: int = 100, seed: int = 1) -> dict:
    """Genomic model: additive, dominance and epistasis effects.

    The precision matrices are scaled to typical variance 1 before use,
    mirroring the recommended workflow for generic0 components.
    """
    rng = np.random.default_rng(seed)
    A, D, X = _relationship_matrices(n, 4 * n, rng)
    resources = {}
    covs = {}
    for name, C in (("Q_a", A), ("Q_d", D), ("Q_x", X)):
        st = structure_generic0(name, np.linalg.inv(C))
        scaled = scale_to_typical_variance(st)
        resources[name] = scaled.precision
        covs[name] = constrained_covariance(scaled)
    heritability = 0.25
    shares = np.array([0.85, 0.10, 0.05]) * heritability
    chol = {k: np.linalg.cholesky(v + 1e-10 * np.eye(n)) for k, v in covs.items()}
    g = (
        np.sqrt(shares[0]) * chol["Q_a"] @ rng.normal(size=n)
        + np.sqrt(shares[1]) * chol["Q_d"] @ rng.normal(size=n)
        + np.sqrt(shares[2]) * chol["Q_x"] @ rng.normal(size=n)
    )
    y = g + rng.normal(0.0, np.sqrt(1.0 - heritability), size=n)
    ids = np.arange(1, n + 1)
    return {
        "formula": 'y ~ mc(a, model = "generic0", Cmatrix = "Q_a") + '
        'mc(d, model = "generic0", Cmatrix = "Q_d") + '
        'mc(x, model = "generic0", Cmatrix = "Q_x")',
        "data": {"y": y, "a": ids, "d": ids, "x": ids},
        "tree": "s1 = (d, x); s2 = (a, s1); s3 = (s2, eps)",
        "weights": {
            "s1": ("pcM", 0.67, 0.8),
            "s2": ("pcM", 0.85, 0.8),
            "s3": ("pc0", 0.25),
        },
        "resources": resources,
    }


def neonatal_graph() -> list[list[int]]:
    """A connected 47-region neighbor graph laid out on a 7x7 grid minus
    two corners (0-based neighbor lists)."""
    side = 7
    cells = [(r, c) for r in range(side) for c in range(side)]
    cells.remove((0, side - 1))
    cells.remove((side - 1, 0))
    index = {cell: i for i, cell in enumerate(cells)}
    neighbors: list[list[int]] = [[] for _ in cells]
    for (r, c), i in index.items():
        for dr, dc in ((1, 0), (0, 1)):
            other = (r + dr, c + dc)
            if other in index:
                neighbors[i].append(index[other])
                neighbors[index[other]].append(i)
    return [sorted(nb) for nb in neighbors]


def neonatal_setup(seed: int = 1) -> dict:
    """Binomial cluster survey over 47 areas: iid cluster effect (nu),
    iid area effect (v) and a structured besag area effect (u)."""
    rng = np.random.default_rng(seed)
    neighbors = neonatal_graph()
    n_area = len(neighbors)
    clusters_per_area = np.full(n_area, 7)
    clusters_per_area[:2] = 6  # 2 x 6 + 45 x 7 = 327 clusters
    area = np.repeat(np.arange(1, n_area + 1), clusters_per_area)
    n_cluster = area.size
    cluster = np.arange(1, n_cluster + 1)
    urban = (np.arange(n_cluster) % 7 < 2).astype(float)

    st_u = scale_to_typical_variance(structure_besag("u", neighbors))
    Su = constrained_covariance(st_u)
    vals, vecs = np.linalg.eigh(Su)
    u = vecs @ (np.sqrt(np.clip(vals, 0.0, None)) * rng.normal(size=n_area))
    v = rng.normal(size=n_area)
    nu = rng.normal(size=n_cluster)
    eta = (
        -4.0
        + 0.1 * urban
        + np.sqrt(0.5) * u[area - 1]
        + np.sqrt(0.1) * v[area - 1]
        + np.sqrt(0.2) * nu
    )
    trials = np.full(n_cluster, 25)
    y = rng.binomial(trials, special.expit(eta)).astype(float)
    return {
        "formula": 'y ~ urban + mc(nu) + mc(v) + '
        'mc(u, model = "besag", graph = "neonatal.graph", scale.model = TRUE)',
        "likelihood": "binomial",
        "data": {"y": y, "urban": urban, "nu": cluster, "v": area, "u": area},
        "trials": trials,
        "tree": "s1 = (u, v); s2 = (s1, nu)",
        "weights": {"s1": ("pc0", 0.25), "s2": ("pc1", 0.75)},
        "variances": {"s2": ("pc", 3.35, 0.05)},
        "resources": {"neonatal.graph": neighbors},
    }


EXAMPLES = {
    "model1": model1_setup,
    "latin": latin_setup,
    "wheat": wheat_setup,
    "neonatal": neonatal_setup,
}


def example_setup(name: str, seed: int = 1) -> dict:
    try:
        builder = EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None
    return builder(seed=seed)
