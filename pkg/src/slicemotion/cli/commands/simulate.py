from pathlib import Path

import click

from slicemotion.acquisition import save_stack
from slicemotion.cli.commands.markers import (
    manifest_option,
    mark_common_options,
    mark_exit_codes,
    resolve_manifest,
)
from slicemotion.graph import create_trajectory_graph
from slicemotion.manifest import archive_manifest, simulate_experiment
from slicemotion.motionsim import validate_bounds, write_trajectory_csv
from slicemotion.volume import save_volume


@click.command()
@manifest_option()
@click.option("--static", is_flag=True, help="Acquire without motion.")
@click.option("--plot/--no-plot", default=True, show_default=True, help="Write trajectory plots.")
@mark_common_options()
@mark_exit_codes()
def simulate(
    manifest_path: Path | None,
    static: bool,
    plot: bool,
    seed: int | None,
    out: Path,
) -> None:
    """Acquire motion-corrupted stacks of a phantom with ground-truth motion."""
    manifest = resolve_manifest(manifest_path, seed, out)
    if static:
        manifest = manifest.model_copy(update={"static": True})

    sim = simulate_experiment(manifest)
    (out / "trajectories").mkdir(parents=True, exist_ok=True)
    save_volume(sim.phantom, out / "phantom.raw")

    for stack, traj in zip(sim.stacks, sim.trajectories):
        name = stack.orientation.value
        save_stack(stack, out / "stacks" / name)
        write_trajectory_csv(traj, out / "trajectories" / f"{name}.csv")
        if plot:
            graph = create_trajectory_graph(traj, title=f"{name} motion")
            (out / "trajectories" / f"{name}.png").write_bytes(graph.getvalue())

        violations = [] if manifest.static else validate_bounds(traj, manifest.seeded().trajectory)
        if violations:
            for v in violations:
                click.secho(f"{name}: {v}", fg="yellow")
        else:
            kept = int(stack.brain_mask.sum())
            click.secho(f"{name}: {kept}/{stack.n_slices} object slices, bounds clean", fg="green")

    archive_manifest(manifest, out)
