"""Project files: a JSON bundle holding everything needed to rebuild a
model and its prior, plus the sampler settings to run it.

A bundle stores inputs (formula, data, tree, prior choices, resources),
not derived objects, so reopening one and rebuilding gives back an
identical prior.  Data columns are stored inline or as a CSV reference.
"""

from __future__ import annotations

import json
import os

import numpy as np
import pandas as pd

from .assembly import HDJointPrior, build_prior
from .inference import SamplerSettings
from .tree import render_tree

__all__ = [
    "BUNDLE_VERSION",
    "BundleError",
    "build_from_bundle",
    "load_bundle",
    "make_bundle",
    "save_bundle",
    "set_bundle_tree",
]

BUNDLE_VERSION = 1


class BundleError(ValueError):
    pass


def _plain(value):
    """JSON-ready copy: numpy scalars and arrays become python values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _plain_choices(mapping):
    out = {}
    for key, value in (mapping or {}).items():
        if isinstance(value, str):
            out[key] = value
        elif isinstance(value, dict):
            out[key] = _plain(value)
        elif isinstance(value, (list, tuple)):
            out[key] = [_plain(v) for v in value]
        else:
            # dataclass-style choice objects from the assembly module
            if hasattr(value, "variant"):
                parts = [value.variant]
                if value.median is not None:
                    parts.append(value.median)
                if value.concentration is not None:
                    parts.append(value.concentration)
            else:
                parts = [value.kind, *value.params]
            out[key] = _plain(parts)
    return out


def make_bundle(
    *,
    formula: str,
    data,
    likelihood: str = "gaussian",
    tree: str | None = None,
    weights=None,
    variances=None,
    intercept_prior=None,
    covariate_priors=None,
    trials=None,
    offset=None,
    resources=None,
    sampler: SamplerSettings | dict | None = None,
) -> dict:
    """Normalize model inputs into a JSON-ready project dictionary."""
    if isinstance(data, pd.DataFrame):
        data = {c: data[c].to_numpy() for c in data.columns}
    if isinstance(sampler, SamplerSettings):
        sampler = {
            "iterations": sampler.iterations,
            "warmup": sampler.warmup,
            "chains": sampler.chains,
            "seed": sampler.seed,
            "latent_draws": sampler.latent_draws,
        }
    data_spec = {"csv": data} if isinstance(data, str) else {"columns": _plain(data)}
    return {
        "version": BUNDLE_VERSION,
        "formula": formula,
        "likelihood": likelihood,
        "tree": tree,
        "weights": _plain_choices(weights),
        "variances": _plain_choices(variances),
        "intercept_prior": _plain(intercept_prior),
        "covariate_priors": _plain(covariate_priors or {}),
        "data": data_spec,
        "trials": _plain(trials),
        "offset": _plain(offset),
        "resources": _plain(resources or {}),
        "sampler": _plain(sampler) if sampler else None,
    }


def save_bundle(bundle: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(bundle, fh, indent=1)
        fh.write("\n")


def load_bundle(path: str) -> dict:
    with open(path) as fh:
        try:
            bundle = json.load(fh)
        except json.JSONDecodeError as err:
            raise BundleError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(bundle, dict) or "formula" not in bundle:
        raise BundleError(f"{path} is not a project bundle")
    version = bundle.get("version")
    if version != BUNDLE_VERSION:
        raise BundleError(f"unsupported bundle version {version!r}")
    return bundle


def _bundle_data(bundle: dict, base_dir: str | None):
    spec = bundle.get("data") or {}
    if "columns" in spec:
        return {k: np.asarray(v) for k, v in spec["columns"].items()}
    if "csv" in spec:
        path = spec["csv"]
        if base_dir and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise BundleError(f"bundle data file not found: {path}")
        frame = pd.read_csv(path)
        return {c: frame[c].to_numpy() for c in frame.columns}
    raise BundleError("bundle has no data (expected 'columns' or 'csv')")


def _tuple_choices(mapping):
    out = {}
    for key, value in (mapping or {}).items():
        out[key] = tuple(value) if isinstance(value, list) else value
    return out


def build_from_bundle(
    bundle: dict, base_dir: str | None = None
) -> tuple[HDJointPrior, SamplerSettings]:
    """Rebuild the prior and sampler settings a bundle describes."""
    data = _bundle_data(bundle, base_dir)
    # graph and matrix payloads stay as nested lists; the structure
    # loaders coerce them according to the component option they serve
    resources = bundle.get("resources") or None
    intercept = bundle.get("intercept_prior")
    prior = build_prior(
        bundle["formula"],
        data,
        likelihood=bundle.get("likelihood", "gaussian"),
        tree=bundle.get("tree"),
        weights=_tuple_choices(bundle.get("weights")),
        variances=_tuple_choices(bundle.get("variances")),
        intercept_prior=tuple(intercept) if intercept else None,
        covariate_priors={
            k: tuple(v) for k, v in (bundle.get("covariate_priors") or {}).items()
        },
        trials=bundle.get("trials"),
        offset=bundle.get("offset"),
        resources=resources,
    )
    raw = bundle.get("sampler") or {}
    settings = SamplerSettings(**raw)
    return prior, settings


def set_bundle_tree(bundle: dict, prior: HDJointPrior) -> None:
    """Pin the canonical tree so rebuilding skips the default-tree path."""
    bundle["tree"] = render_tree(prior.forest)
