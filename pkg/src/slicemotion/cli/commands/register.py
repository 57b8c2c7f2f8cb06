from pathlib import Path

import click

from slicemotion.acquisition import SliceStack, load_stack, save_stack
from slicemotion.cli.commands.markers import (
    mark_common_options,
    mark_exit_codes,
    stack_dirs_argument,
)
from slicemotion.estimator import load_checkpoint
from slicemotion.geometry import dump_transforms
from slicemotion.svr import PipelineConfig, PipelineResult, run_coarse_to_fine
from slicemotion.volume import load_volume, save_volume


@click.command()
@stack_dirs_argument()
@click.option(
    "--coarse",
    type=click.Choice(["affirm", "none"]),
    default="none",
    show_default=True,
    help="Run the learned estimator before slice-to-volume registration.",
)
@click.option(
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Estimator checkpoint, required with --coarse affirm.",
)
@click.option(
    "--atlas",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Atlas volume for reference selection and volume initialization.",
)
@click.option(
    "--init",
    type=click.Choice(["identity", "volume"]),
    default="identity",
    show_default=True,
    help="Initial poses without the learned pass.",
)
@click.option(
    "--refresh",
    type=click.Choice(["sda", "srr"]),
    default="sda",
    show_default=True,
    help="Reference refresh between registration rounds.",
)
@click.option("--n-outer", type=click.IntRange(min=0), default=3, show_default=True)
@click.option(
    "--reject/--no-reject",
    default=True,
    show_default=True,
    help="Reject outlier slices.",
)
@mark_common_options(seed=False)
@mark_exit_codes()
def register(
    stack_dirs: tuple[Path, ...],
    coarse: str,
    checkpoint: Path | None,
    atlas: Path | None,
    init: str,
    refresh: str,
    n_outer: int,
    reject: bool,
    out: Path,
) -> None:
    """Correct slice motion by coarse-to-fine registration."""
    if coarse == "affirm" and checkpoint is None:
        raise click.BadOptionUsage("--checkpoint", "--coarse affirm needs --checkpoint")

    stacks = [load_stack(d) for d in stack_dirs]
    params = load_checkpoint(checkpoint).params if checkpoint is not None else None
    cfg = PipelineConfig(
        coarse=coarse,
        init=init,
        refresh=refresh,
        n_outer=n_outer,
        reject=reject,
    )
    result = run_coarse_to_fine(
        stacks,
        params,
        cfg,
        atlas=load_volume(atlas) if atlas is not None else None,
    )
    write_pipeline_outputs(stacks, result, out)


def write_pipeline_outputs(stacks: list[SliceStack], result: PipelineResult, out: Path) -> None:
    (out / "transforms").mkdir(parents=True, exist_ok=True)
    for stack in result.corrected_stacks(stacks):
        name = stack.orientation.value
        (out / "transforms" / f"{name}.json").write_bytes(dump_transforms(stack.est_transforms))
        save_stack(stack, out / "stacks" / name)

    kept = sum(int(m.sum()) for m in result.keep_masks)
    total = sum(s.n_slices for s in stacks)
    save_volume(result.volume, out / "volume.raw")
    click.secho(f"Kept {kept}/{total} slices, wrote {out / 'volume.raw'}", fg="green")
