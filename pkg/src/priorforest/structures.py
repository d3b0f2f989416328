"""Latent Gaussian structure matrices.

Each model component carries a precision matrix, optional linear
constraints and a known rank deficiency:

====================  =============================  ===============
kind                  precision                      rank deficiency
====================  =============================  ===============
iid                   identity                       0
rw1                   first-difference D'D           1
rw2                   second-difference D2'D2        2
besag                 degree minus adjacency         # connected comp.
generic0              user supplied                  0 (assumed)
====================  =============================  ===============

Scaling multiplies the precision by the typical variance (geometric mean
of the diagonal of the constraint-respecting generalized-inverse
covariance) so the scaled structure has typical variance one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

EIG_CUTOFF = 1e-10  # relative eigenvalue cutoff for generalized inverses


class StructureError(ValueError):
    """Raised for invalid structure matrices, graphs or constraints."""


@dataclass
class LatentStructure:
    label: str
    kind: str
    n: int
    precision: np.ndarray      # (n, n) symmetric PSD
    constraints: np.ndarray    # (m, n); m may be 0
    rank_deficiency: int
    scaled: bool = False


def structure_iid(label: str, n: int, constr: bool = False) -> LatentStructure:
    A = np.ones((1, n)) if constr else np.zeros((0, n))
    return LatentStructure(label, "iid", n, np.eye(n), A, 0)


def structure_rw1(label: str, n: int, constr: bool = True) -> LatentStructure:
    if n < 2:
        raise StructureError("rw1 needs length >= 2")
    D = np.diff(np.eye(n), axis=0)
    A = np.ones((1, n)) if constr else np.zeros((0, n))
    return LatentStructure(label, "rw1", n, D.T @ D, A, 1)


def structure_rw2(label: str, n: int, constr: bool = True, lin_constr: bool = False) -> LatentStructure:
    if n < 3:
        raise StructureError("rw2 needs length >= 3")
    D2 = np.diff(np.eye(n), n=2, axis=0)
    rows = []
    if constr:
        rows.append(np.ones(n))
    if lin_constr:
        rows.append(np.arange(1.0, n + 1.0))
    A = np.vstack(rows) if rows else np.zeros((0, n))
    return LatentStructure(label, "rw2", n, D2.T @ D2, A, 2)


def structure_generic0(label: str, Q: np.ndarray, constr: bool = False) -> LatentStructure:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise StructureError("generic0 matrix must be square")
    if not np.allclose(Q, Q.T, atol=1e-8 * max(1.0, np.abs(Q).max())):
        raise StructureError("generic0 matrix must be symmetric")
    n = Q.shape[0]
    A = np.ones((1, n)) if constr else np.zeros((0, n))
    return LatentStructure(label, "generic0", n, 0.5 * (Q + Q.T), A, 0)


def _connected_components(neighbors: list[list[int]]) -> list[list[int]]:
    n = len(neighbors)
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in neighbors[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def structure_besag(label: str, neighbors: list[list[int]], constr: bool = True) -> LatentStructure:
    """Intrinsic autoregression on a region graph.

    ``neighbors`` holds 0-based adjacency lists.  With ``constr`` a
    sum-to-zero constraint is added per connected component.
    """
    n = len(neighbors)
    if n < 2:
        raise StructureError("besag needs at least two regions")
    Q = np.zeros((n, n))
    for i, nbs in enumerate(neighbors):
        Q[i, i] = len(nbs)
        for j in nbs:
            Q[i, j] -= 1.0
    if not np.allclose(Q, Q.T):
        raise StructureError("adjacency is not symmetric")
    comps = _connected_components(neighbors)
    if constr:
        A = np.zeros((len(comps), n))
        for k, comp in enumerate(comps):
            A[k, comp] = 1.0
    else:
        A = np.zeros((0, n))
    return LatentStructure(label, "besag", n, Q, A, len(comps))


def read_graph_file(path) -> list[list[int]]:
    """Read a region graph file.

    First line: number of regions.  Then one line per region:
    ``id  k  nb_1 ... nb_k`` with 1-based ids.  The adjacency must be
    symmetric.  Returns 0-based neighbor lists.
    """
    with open(path) as fh:
        tokens_per_line = [line.split() for line in fh if line.strip()]
    if not tokens_per_line:
        raise StructureError(f"empty graph file {path}")
    try:
        n = int(tokens_per_line[0][0])
    except ValueError as exc:
        raise StructureError(f"bad region count in {path}") from exc
    if len(tokens_per_line[0]) != 1:
        raise StructureError("first line must hold only the region count")
    neighbors: list[list[int] | None] = [None] * n
    for tok in tokens_per_line[1:]:
        try:
            vals = [int(t) for t in tok]
        except ValueError as exc:
            raise StructureError(f"non-integer entry in graph line {tok}") from exc
        rid, k, nbs = vals[0], vals[1], vals[2:]
        if not 1 <= rid <= n:
            raise StructureError(f"region id {rid} out of range 1..{n}")
        if len(nbs) != k:
            raise StructureError(f"region {rid} declares {k} neighbors, lists {len(nbs)}")
        if any(not 1 <= j <= n for j in nbs):
            raise StructureError(f"region {rid} has a neighbor out of range")
        if rid in nbs:
            raise StructureError(f"region {rid} lists itself as a neighbor")
        if neighbors[rid - 1] is not None:
            raise StructureError(f"region {rid} defined twice")
        neighbors[rid - 1] = sorted(j - 1 for j in nbs)
    missing = [i + 1 for i, v in enumerate(neighbors) if v is None]
    if missing:
        raise StructureError(f"regions missing from graph file: {missing}")
    for i, nbs in enumerate(neighbors):
        for j in nbs:
            if i not in neighbors[j]:
                raise StructureError(
                    f"asymmetric adjacency: {i + 1} lists {j + 1} but not vice versa"
                )
    return [list(v) for v in neighbors]


def write_graph_file(path, neighbors: list[list[int]]) -> None:
    with open(path, "w") as fh:
        fh.write(f"{len(neighbors)}\n")
        for i, nbs in enumerate(neighbors):
            ids = " ".join(str(j + 1) for j in sorted(nbs))
            fh.write(f"{i + 1} {len(nbs)}{' ' + ids if nbs else ''}\n")


def generalized_inverse(Q: np.ndarray) -> np.ndarray:
    """Moore-Penrose inverse via eigendecomposition with relative cutoff."""
    vals, vecs = np.linalg.eigh(Q)
    cutoff = EIG_CUTOFF * max(vals.max(), 0.0)
    inv = np.where(vals > cutoff, 1.0 / np.where(vals > cutoff, vals, 1.0), 0.0)
    return (vecs * inv) @ vecs.T


def constrained_covariance(structure: LatentStructure) -> np.ndarray:
    """Covariance under the structure's constraints.

    Generalized-inverse covariance conditioned on ``A x = 0`` by the
    usual kriging correction; constraint rows lying in the precision's
    null space are already satisfied by the generalized inverse.
    """
    S = generalized_inverse(structure.precision)
    A = structure.constraints
    if A.shape[0] == 0:
        return S
    SA = S @ A.T
    keep = [j for j in range(A.shape[0]) if np.linalg.norm(SA[:, j]) > 1e-12 * max(1.0, np.linalg.norm(S))]
    if not keep:
        return S
    SA = SA[:, keep]
    M = A[keep] @ SA
    return S - SA @ np.linalg.solve(M, SA.T)


def typical_variance(structure: LatentStructure) -> float:
    """Geometric mean of the constrained covariance diagonal."""
    d = np.diag(constrained_covariance(structure))
    if np.any(d <= 0):
        raise StructureError(
            f"component {structure.label!r} has non-positive marginal variances; "
            "check constraints"
        )
    return float(np.exp(np.mean(np.log(d))))


def scale_to_typical_variance(structure: LatentStructure) -> LatentStructure:
    """Rescale the precision so the typical variance becomes one."""
    tv = typical_variance(structure)
    return replace(structure, precision=structure.precision * tv, scaled=True)


def subspace_basis(structure: LatentStructure) -> np.ndarray:
    """Orthonormal basis of the proper subspace.

    Columns span the complement of the constraint rows and of the
    precision null space, so the restricted precision is positive
    definite.  Intrinsic null directions without explicit constraints
    are pinned to zero, matching the generalized-inverse convention.
    """
    n = structure.n
    vals, vecs = np.linalg.eigh(structure.precision)
    cutoff = EIG_CUTOFF * max(vals.max(), 0.0)
    null = vecs[:, vals <= cutoff]
    drop = np.hstack([structure.constraints.T, null]) if structure.constraints.shape[0] else null
    if drop.shape[1] == 0:
        return np.eye(n)
    q, r = np.linalg.qr(drop)
    rank = int(np.sum(np.abs(np.diag(r)) > 1e-10 * max(1.0, np.abs(r).max())))
    # complement via full eigendecomposition of the projector
    P = np.eye(n) - q[:, :rank] @ q[:, :rank].T if rank else np.eye(n)
    w, u = np.linalg.eigh(P)
    return u[:, w > 0.5]


def apply_constraints(samples: np.ndarray, constraints: np.ndarray,
                      covariance: np.ndarray | None = None) -> np.ndarray:
    """Correct samples to satisfy ``A x = 0`` by conditioning.

    ``samples`` has one sample per row.  ``covariance`` is the sampling
    covariance; identity when omitted.  Idempotent.
    """
    A = np.asarray(constraints, dtype=float)
    if A.shape[0] == 0:
        return np.array(samples, dtype=float)
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    SA = A.T if covariance is None else covariance @ A.T
    M = A @ SA
    corr = X @ A.T @ np.linalg.solve(M, SA.T)
    out = X - corr
    return out if np.asarray(samples).ndim > 1 else out[0]
