"""Command-line interface: simulate, montecarlo and plot."""

from __future__ import annotations

import sys

import click

from .config import load_config
from .harness import run_episode, run_montecarlo, write_episode_csvs


@click.group()
def main():
    """Sound-speed-profile estimation experiments."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--sensors", type=click.Choice(["ctd", "tl", "both"]), default=None)
@click.option("--steering", type=click.Choice(["straight", "planned"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def simulate(config_path, sensors, steering, seed, steps, out_dir):
    """Run a single episode and write its CSV logs."""
    try:
        cfg = load_config(config_path, {"sensors": sensors, "steering": steering,
                                        "seed": seed, "steps": steps})
        rec = run_episode(cfg, run_id=0)
        write_episode_csvs(cfg, rec, out_dir)
    except Exception as exc:          # noqa: BLE001 - single diagnostic line
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"episode written to {out_dir}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--sensors", type=click.Choice(["ctd", "tl", "both"]), default=None)
@click.option("--steering", type=click.Choice(["straight", "planned"]), default=None)
@click.option("--runs", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def montecarlo(config_path, sensors, steering, runs, steps, seed, workers, out_dir):
    """Run a Monte-Carlo set and write aggregate metric tables."""
    try:
        cfg = load_config(config_path, {
            "sensors": sensors, "steering": steering, "runs": runs,
            "steps": steps, "seed": seed, "workers": workers})
        summary = run_montecarlo(cfg, out_dir)
    except Exception as exc:          # noqa: BLE001
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"{summary['n_runs']} runs written to {out_dir} "
               f"({summary['n_failed']} failed)")


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def plot(in_dir, out_dir):
    """Render metric curves and field heatmaps as SVG."""
    from .plots import render
    try:
        written = render(in_dir, out_dir)
    except Exception as exc:          # noqa: BLE001
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
