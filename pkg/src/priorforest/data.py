"""Observation-level data for latent Gaussian models.

Covariates are numeric columns; each model component has an index column of
1-based integers mapping observations to effect levels.  Binomial models
carry a trials vector, poisson models an additive log-scale offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .formula import RESIDUAL, ModelSpec


class DataError(ValueError):
    """Raised for missing columns or malformed data values."""


@dataclass(frozen=True)
class ModelData:
    n_obs: int
    response: np.ndarray
    covariates: dict[str, np.ndarray]
    indices: dict[str, np.ndarray] = field(default_factory=dict)
    trials: np.ndarray | None = None
    offset: np.ndarray | None = None

    def levels(self, label: str) -> int:
        """Number of distinct levels observed for a component column."""
        return int(self.indices[label].max())


def _column(table, name: str) -> np.ndarray:
    try:
        col = table[name]
    except (KeyError, IndexError, TypeError):
        raise DataError(f"data has no column {name!r}") from None
    return np.asarray(col)


def model_data(
    spec: ModelSpec,
    table,
    *,
    trials=None,
    offset=None,
) -> ModelData:
    """Assemble :class:`ModelData` for ``spec`` from a table of columns.

    ``table`` is any mapping from column name to sequence (a dict of arrays
    or a pandas DataFrame).  ``trials``/``offset`` may be a column name or
    an array; trials are required for binomial models.
    """
    y = _column(table, spec.response).astype(float)
    if y.ndim != 1 or y.size == 0:
        raise DataError("response must be a non-empty 1-d column")
    n = y.size

    def aligned(name: str, values) -> np.ndarray:
        arr = np.asarray(values)
        if arr.shape != (n,):
            raise DataError(f"column {name!r} has length {arr.shape}, expected ({n},)")
        return arr

    covariates = {}
    for name in spec.covariates:
        covariates[name] = aligned(name, _column(table, name)).astype(float)

    indices = {}
    for label in spec.component_labels():
        if label == RESIDUAL:
            continue
        raw = aligned(label, _column(table, label))
        idx = raw.astype(int)
        if not np.array_equal(idx, raw):
            raise DataError(f"component column {label!r} must hold integers")
        if idx.min() < 1:
            raise DataError(f"component column {label!r} must be 1-based")
        indices[label] = idx

    trials_arr = None
    if spec.likelihood == "binomial":
        if trials is None:
            raise DataError("binomial models need a trials column")
        values = _column(table, trials) if isinstance(trials, str) else trials
        trials_arr = aligned("trials", values).astype(int)
        if trials_arr.min() < 1:
            raise DataError("trials must be positive integers")
        if np.any(y < 0) or np.any(y > trials_arr):
            raise DataError("binomial response must lie in [0, trials]")
    elif trials is not None:
        raise DataError("trials only apply to binomial models")

    offset_arr = None
    if offset is not None:
        if spec.likelihood != "poisson":
            raise DataError("offset only applies to poisson models")
        values = _column(table, offset) if isinstance(offset, str) else offset
        offset_arr = aligned("offset", values).astype(float)
    if spec.likelihood == "poisson" and np.any(y < 0):
        raise DataError("poisson response must be non-negative")

    return ModelData(
        n_obs=n,
        response=y,
        covariates=covariates,
        indices=indices,
        trials=trials_arr,
        offset=offset_arr,
    )


def design_matrix(index: np.ndarray, n_levels: int) -> np.ndarray:
    """Incidence matrix mapping effect levels to observations (0/1 entries)."""
    idx = np.asarray(index, dtype=int)
    if idx.max() > n_levels:
        raise DataError(f"index {idx.max()} exceeds component dimension {n_levels}")
    A = np.zeros((idx.size, n_levels))
    A[np.arange(idx.size), idx - 1] = 1.0
    return A


def fixed_effects_matrix(spec: ModelSpec, data: ModelData) -> tuple[np.ndarray, list[str]]:
    """Design matrix of intercept and covariates, with column names."""
    cols: list[np.ndarray] = []
    names: list[str] = []
    if spec.has_intercept:
        cols.append(np.ones(data.n_obs))
        names.append("intercept")
    for name in spec.covariates:
        cols.append(data.covariates[name])
        names.append(name)
    if not cols:
        return np.zeros((data.n_obs, 0)), []
    return np.column_stack(cols), names
