from pathlib import Path

import click

from slicemotion.acquisition import load_stack
from slicemotion.cli.commands.markers import (
    mark_common_options,
    mark_exit_codes,
    stack_dirs_argument,
)
from slicemotion.sda import sda_reconstruct
from slicemotion.svr import SrrConfig, srr_grid, srr_least_squares
from slicemotion.volume import save_volume


@click.command()
@stack_dirs_argument()
@click.option(
    "--method",
    type=click.Choice(["sda", "srr"]),
    default="sda",
    show_default=True,
    help="Scattered data approximation or least-squares super-resolution.",
)
@click.option(
    "--sigma",
    type=click.FloatRange(min=0, min_open=True),
    default=1.2,
    show_default=True,
    help="SDA kernel width (mm).",
)
@click.option(
    "--spacing",
    type=click.FloatRange(min=0, min_open=True),
    default=2.4,
    show_default=True,
    help="Output voxel spacing (mm).",
)
@click.option(
    "--regularization",
    type=click.FloatRange(min=0),
    default=0.01,
    show_default=True,
    help="SRR Laplacian weight.",
)
@click.option(
    "--iterations",
    type=click.IntRange(min=1),
    default=50,
    show_default=True,
    help="SRR conjugate gradient iterations.",
)
@mark_common_options(seed=False)
@mark_exit_codes()
def reconstruct(
    stack_dirs: tuple[Path, ...],
    method: str,
    sigma: float,
    spacing: float,
    regularization: float,
    iterations: int,
    out: Path,
) -> None:
    """Reconstruct a volume from stacks using their current slice estimates."""
    stacks = [load_stack(d) for d in stack_dirs]
    grid = srr_grid(stacks, spacing)

    if method == "srr":
        cfg = SrrConfig(
            regularization_weight=regularization,
            max_cg_iterations=iterations,
            target_spacing_mm=spacing,
        )
        volume = srr_least_squares(stacks, None, None, cfg, grid=grid).volume
    else:
        volume = sda_reconstruct(stacks, None, sigma, grid)

    path = out / f"{method}.raw"
    save_volume(volume, path)
    click.secho(f"Wrote {volume.dims} volume to {path}", fg="green")
