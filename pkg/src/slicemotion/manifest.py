"""Experiment manifests and the simulation they describe.

A manifest pins every configuration and the seed, so that the outputs of a
command are fully determined by it. It is archived as ``manifest.json``
beside those outputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from pydantic import BaseModel, ConfigDict, ValidationError

from slicemotion.acquisition import AcquisitionConfig, Orientation, SliceStack, acquire_stack
from slicemotion.errors import InvalidInputError
from slicemotion.motionsim import MotionTrajectory, TrajectoryConfig, simulate_trajectory
from slicemotion.svr import PipelineConfig
from slicemotion.volume import PhantomSpec, Volume3D, make_phantom

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class ManifestError(InvalidInputError):
    """The experiment manifest is invalid."""


class ExperimentManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = 0
    phantom: PhantomSpec = PhantomSpec()
    trajectory: TrajectoryConfig = TrajectoryConfig()
    acquisition: AcquisitionConfig = AcquisitionConfig()
    pipeline: PipelineConfig = PipelineConfig()
    orientations: tuple[Orientation, ...] = tuple(Orientation)
    static: bool = False
    """Acquire without motion."""
    output_dir: Path = Path("out")

    def seeded(self) -> ExperimentManifest:
        """Propagate the experiment seed into every nested config."""
        return self.model_copy(
            update={
                "phantom": self.phantom.model_copy(update={"feature_seed": self.seed}),
                "trajectory": self.trajectory.model_copy(update={"seed": self.seed}),
                "acquisition": self.acquisition.model_copy(update={"seed": self.seed}),
            }
        )

    def with_overrides(self, *, seed: int | None = None, output_dir: Path | None = None) -> ExperimentManifest:
        update = {}
        if seed is not None:
            update["seed"] = seed
        if output_dir is not None:
            update["output_dir"] = Path(output_dir)
        return self.model_copy(update=update)


def load_manifest(path: Path) -> ExperimentManifest:
    try:
        return ExperimentManifest.model_validate_json(Path(path).read_bytes())
    except ValidationError as e:
        raise ManifestError(f"Invalid manifest {path}: {e}") from e


def archive_manifest(manifest: ExperimentManifest, directory: Path | None = None) -> Path:
    directory = Path(directory or manifest.output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


@dataclass
class Simulation:
    phantom: Volume3D
    stacks: list[SliceStack]
    trajectories: list[MotionTrajectory]


def simulate_experiment(manifest: ExperimentManifest) -> Simulation:
    """Build the phantom and acquire one moving stack per orientation."""
    manifest = manifest.seeded()
    phantom = make_phantom(manifest.phantom)
    n = manifest.acquisition.n_slices

    stacks = []
    trajectories = []
    for orientation in manifest.orientations:
        if manifest.static:
            traj = MotionTrajectory.static(n, manifest.trajectory.slice_interval_s)
        else:
            traj = simulate_trajectory(manifest.trajectory, n, orientation.value)
        stacks.append(acquire_stack(phantom, traj, orientation, manifest.acquisition))
        trajectories.append(traj)
        log.info("Simulated %s stack of %d slices", orientation.value, n)

    return Simulation(phantom, stacks, trajectories)
