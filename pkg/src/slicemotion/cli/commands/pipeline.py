from pathlib import Path

import click

from slicemotion.cli.commands.evaluate import write_evaluation
from slicemotion.cli.commands.markers import (
    manifest_option,
    mark_common_options,
    mark_exit_codes,
    resolve_manifest,
)
from slicemotion.cli.commands.register import write_pipeline_outputs
from slicemotion.estimator import load_checkpoint
from slicemotion.evaluation import build_report
from slicemotion.manifest import archive_manifest, simulate_experiment
from slicemotion.svr import run_coarse_to_fine
from slicemotion.volume import save_volume


@click.command()
@manifest_option()
@click.option(
    "--coarse",
    type=click.Choice(["affirm", "none"]),
    default=None,
    help="Override the manifest's coarse pass.",
)
@click.option(
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Estimator checkpoint for the learned coarse pass.",
)
@mark_common_options()
@mark_exit_codes()
def pipeline(
    manifest_path: Path | None,
    coarse: str | None,
    checkpoint: Path | None,
    seed: int | None,
    out: Path,
) -> None:
    """Simulate, correct and reconstruct, then score against ground truth."""
    manifest = resolve_manifest(manifest_path, seed, out)
    if coarse is not None:
        manifest = manifest.model_copy(
            update={"pipeline": manifest.pipeline.model_copy(update={"coarse": coarse})}
        )
    if manifest.pipeline.coarse == "affirm" and checkpoint is None:
        raise click.BadOptionUsage("--checkpoint", "The learned coarse pass needs --checkpoint")

    archive_manifest(manifest, out)
    sim = simulate_experiment(manifest)
    save_volume(sim.phantom, out / "phantom.raw")

    params = load_checkpoint(checkpoint).params if checkpoint is not None else None
    result = run_coarse_to_fine(sim.stacks, params, manifest.pipeline, atlas=sim.phantom)
    write_pipeline_outputs(sim.stacks, result, out)

    report, dssim = build_report(result.corrected_stacks(sim.stacks), result.volume, sim.phantom)
    write_evaluation(report, dssim, out)
