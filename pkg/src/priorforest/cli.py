"""Command line front end: validate project bundles, export prior grids
and samples, run inference, start the HTTP service."""

from __future__ import annotations

import os
import warnings

import click
import numpy as np
import pandas as pd

from .assembly import print_text, sample_prior, summary_text
from .bundle import BundleError, build_from_bundle, load_bundle
from .inference import (
    InferenceError,
    posterior_summaries,
    posterior_text,
    prior_density_grid,
    run_mcmc,
)


def _open_bundle(path: str):
    base_dir = os.path.dirname(os.path.abspath(path))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prior, settings = build_from_bundle(load_bundle(path), base_dir=base_dir)
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)
    return prior, settings


def _fail(err: Exception) -> None:
    raise click.ClickException(str(err))


def _grid_filename(name: str) -> str:
    return name.replace("/", "_over_").replace("[", "_").replace("]", "") + ".csv"


@click.group()
def main():
    """Tree-structured joint priors for the variance parameters of latent
    Gaussian models: build, inspect, sample and fit them from a project
    bundle."""


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
def validate(bundle_path):
    """Check a project bundle and print the prior it describes."""
    try:
        prior, _ = _open_bundle(bundle_path)
    except (BundleError, ValueError) as err:
        _fail(err)
    click.echo(summary_text(prior))


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--export", "export_what", type=click.Choice(["grids", "samples"]),
              default=None, help="Write density grids or prior draws as CSV.")
@click.option("--out", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for exported files.")
@click.option("--n", default=10000, show_default=True,
              help="Number of prior draws for --export samples.")
@click.option("--seed", default=1, show_default=True)
def prior(bundle_path, export_what, out, n, seed):
    """Print the assembled prior; optionally export grids or samples."""
    try:
        prior_obj, _ = _open_bundle(bundle_path)
    except (BundleError, ValueError) as err:
        _fail(err)
    click.echo(print_text(prior_obj))
    if export_what is None:
        return
    os.makedirs(out, exist_ok=True)
    if export_what == "grids":
        _export_grids(prior_obj, out)
    else:
        _export_samples(prior_obj, out, n, seed)


def _export_grids(prior_obj, out):
    for name in prior_obj.parameter_names():
        if name.startswith("V["):
            root = name[2:-1]
            if not prior_obj.variance_priors[root].proper:
                click.echo(
                    f"note: {name} has an improper prior with no density grid; skipped"
                )
                continue
        x, dens, scale = prior_density_grid(prior_obj, name)
        path = os.path.join(out, _grid_filename(name))
        pd.DataFrame({f"{name} ({scale})": x, "density": dens}).to_csv(
            path, index=False
        )
        click.echo(f"wrote {path}")


def _export_samples(prior_obj, out, n, seed):
    draws = sample_prior(prior_obj, n, seed=seed)
    for root in draws.pinned_roots:
        click.echo(
            f"note: V[{root}] has an improper prior; its draws are pinned at 1"
        )
    columns: dict[str, np.ndarray] = {}
    for root, values in draws.total_variances.items():
        columns[f"V[{root}]"] = values
    for split, values in draws.weights.items():
        for j, head in enumerate(prior_obj.weight_names(split)):
            columns[head] = values[:, j] if values.ndim == 2 else values
    path = os.path.join(out, "prior_samples.csv")
    pd.DataFrame(columns).to_csv(path, index=False)
    click.echo(f"wrote {path}")


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--iterations", type=int, default=None, help="Override the bundle.")
@click.option("--warmup", type=int, default=None)
@click.option("--chains", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--latent-draws", type=int, default=None)
@click.option("--prior-only", is_flag=True, help="Sample the prior instead of the posterior.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for summary and draw CSV files.")
def infer(bundle_path, iterations, warmup, chains, seed, latent_draws, prior_only, out):
    """Run MCMC for the model a bundle describes and print summaries."""
    try:
        prior_obj, settings = _open_bundle(bundle_path)
    except (BundleError, ValueError) as err:
        _fail(err)
    overrides = {
        key: value
        for key, value in {
            "iterations": iterations, "warmup": warmup, "chains": chains,
            "seed": seed, "latent_draws": latent_draws,
        }.items()
        if value is not None
    }
    try:
        result = run_mcmc(prior_obj, settings, prior_only=prior_only, **overrides)
    except InferenceError as err:
        _fail(err)
    if prior_only:
        table = posterior_summaries(result, "tree")
        click.echo("Prior-only chain (no data used):")
        click.echo(table.to_string(float_format=lambda v: f"{v:.3f}"))
    else:
        click.echo(posterior_text(result))
    if out is not None:
        os.makedirs(out, exist_ok=True)
        table = posterior_summaries(result, "tree")
        spath = os.path.join(out, "summary.csv")
        table.to_csv(spath)
        from .inference import _tree_draws  # shared naming with the summaries

        names, draws = _tree_draws(prior_obj, result.log_variances)
        frame = pd.DataFrame(draws, columns=names)
        if result.fixed_effects is not None:
            eff = pd.DataFrame(
                np.nan, index=frame.index, columns=result.fixed_effect_names
            )
            eff.iloc[result.latent_rows] = result.fixed_effects
            frame = pd.concat([frame, eff], axis=1)
        dpath = os.path.join(out, "draws.csv")
        frame.to_csv(dpath, index=False)
        click.echo(f"wrote {spath}")
        click.echo(f"wrote {dpath}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8700, show_default=True)
@click.option("--session-dir", envvar="PRIORFOREST_SESSION_DIR", default=None,
              type=click.Path(file_okay=False),
              help="Persist sessions as bundle files in this directory.")
@click.option("--ui-dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Serve these built front-end assets at the root path. "
                   "Defaults to ./frontend/dist when that directory exists.")
def serve(host, port, session_dir, ui_dir):
    """Serve the HTTP API used by the browser front end."""
    import uvicorn

    from .service import create_app

    if ui_dir is None and os.path.isdir(os.path.join("frontend", "dist")):
        ui_dir = os.path.join("frontend", "dist")
    if ui_dir:
        click.echo(f"serving UI from {ui_dir}")
    uvicorn.run(create_app(session_dir, ui_dir=ui_dir), host=host, port=port,
                log_level="info")


if __name__ == "__main__":
    main()
