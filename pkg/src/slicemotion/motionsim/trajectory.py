from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from slicemotion.errors import RetryBudgetExhaustedError
from slicemotion.geometry import RigidTransform
from slicemotion.rng import substream

from .errors import TrajectoryError
from .spline import fit_smoothing_spline

if TYPE_CHECKING:
    from slicemotion.acquisition import Orientation

log = logging.getLogger(__name__)

PARAMETER_NAMES = ("theta_x", "theta_y", "theta_z", "d_x", "d_y", "d_z")
CSV_COLUMNS = (
    "time_s",
    "theta_x_deg",
    "theta_y_deg",
    "theta_z_deg",
    "d_x_mm",
    "d_y_mm",
    "d_z_mm",
)


class TrajectoryConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_control: int = Field(default=5, ge=2)
    delta_rot_bound: float = Field(default=math.radians(10.0), ge=0)
    delta_trans_bound: float = Field(default=3.0, ge=0)
    mean_rot_bound: float = Field(default=math.pi / 4, ge=0)
    mean_trans_bound: float = Field(default=2.0, ge=0)
    trans_bound: float = Field(default=10.0, gt=0)
    max_angular_velocity: float = Field(default=math.radians(5.0), gt=0)
    """Cap on the per-axis mean angular speed over the stack (rad/s)."""
    max_instant_angular_velocity: float = Field(default=math.radians(15.0), gt=0)
    """Cap on the angular speed between consecutive slices (rad/s)."""
    slice_interval_s: float = Field(default=0.8, gt=0)
    smoothing: float | None = Field(default=None, ge=0)
    """Spline smoothing; None selects it per curve by cross-validation."""
    seed: int = 0
    max_retries: int = Field(default=1000, ge=1)


@dataclass(frozen=True, eq=False)
class MotionTrajectory:
    """Six motion parameters sampled at slice acquisition times.

    ``params`` has shape (N, 6): (θx, θy, θz) in radians then (dx, dy, dz) in mm.
    ``curves`` holds the continuous curves the samples came from, if known.

    """

    times_s: np.ndarray
    params: np.ndarray
    curves: tuple[Callable[[np.ndarray], np.ndarray], ...] | None = field(default=None)

    def __post_init__(self) -> None:
        times = np.asarray(self.times_s, dtype=float)
        params = np.asarray(self.params, dtype=float).reshape(len(times), 6)
        object.__setattr__(self, "times_s", times)
        object.__setattr__(self, "params", params)

    @classmethod
    def static(cls, n_slices: int, interval_s: float = 0.8) -> MotionTrajectory:
        return cls(np.arange(n_slices) * interval_s, np.zeros((n_slices, 6)))

    @property
    def n_samples(self) -> int:
        return len(self.times_s)

    @property
    def samples(self) -> list[RigidTransform]:
        return [RigidTransform(theta=p[:3], d=p[3:]) for p in self.params]

    @property
    def rotations(self) -> np.ndarray:
        return self.params[:, :3]

    @property
    def translations(self) -> np.ndarray:
        return self.params[:, 3:]


class ParameterCurve:
    """A fitted curve shifted by a constant offset."""

    def __init__(self, spline: Callable, shift: float) -> None:
        self.spline = spline
        self.shift = shift

    def __call__(self, t) -> np.ndarray:
        return self.spline(t) + self.shift


@dataclass(frozen=True)
class BoundViolation:
    name: str
    axis: str
    value: float
    limit: float

    def __str__(self) -> str:
        return f"{self.name} on {self.axis}: {self.value:.6g} exceeds {self.limit:.6g}"


def angular_speeds(traj: MotionTrajectory) -> np.ndarray:
    """Finite-difference angular speed per interval and axis, shape (N-1, 3)."""
    if traj.n_samples < 2:
        return np.zeros((0, 3))
    dt = np.diff(traj.times_s)
    return np.abs(np.diff(traj.rotations, axis=0)) / dt[:, None]


def validate_bounds(traj: MotionTrajectory, cfg: TrajectoryConfig) -> list[BoundViolation]:
    """Report every bound the trajectory violates; empty when compliant."""
    violations: list[BoundViolation] = []
    rot_names, trans_names = PARAMETER_NAMES[:3], PARAMETER_NAMES[3:]

    for axis, mean in zip(rot_names, traj.rotations.mean(axis=0)):
        if abs(mean) > cfg.mean_rot_bound + 1e-12:
            violations.append(BoundViolation("mean_rot_bound", axis, abs(mean), cfg.mean_rot_bound))

    for axis, mean in zip(trans_names, traj.translations.mean(axis=0)):
        if abs(mean) > cfg.mean_trans_bound + 1e-12:
            violations.append(
                BoundViolation("mean_trans_bound", axis, abs(mean), cfg.mean_trans_bound)
            )

    for axis, peak in zip(trans_names, np.abs(traj.translations).max(axis=0)):
        if peak >= cfg.trans_bound:
            violations.append(BoundViolation("trans_bound", axis, peak, cfg.trans_bound))

    speeds = angular_speeds(traj)
    if len(speeds):
        for axis, mean in zip(rot_names, speeds.mean(axis=0)):
            if mean > cfg.max_angular_velocity:
                violations.append(
                    BoundViolation("max_angular_velocity", axis, mean, cfg.max_angular_velocity)
                )
        for axis, peak in zip(rot_names, speeds.max(axis=0)):
            if peak > cfg.max_instant_angular_velocity:
                violations.append(
                    BoundViolation(
                        "max_instant_angular_velocity",
                        axis,
                        peak,
                        cfg.max_instant_angular_velocity,
                    )
                )

    return violations


def _draw_curve(
    rng: np.random.Generator,
    control_times: np.ndarray,
    times: np.ndarray,
    delta_bound: float,
    mean_bound: float,
    smoothing: float | None,
) -> tuple[ParameterCurve, np.ndarray]:
    steps = rng.uniform(-delta_bound, delta_bound, size=len(control_times))
    controls = np.cumsum(steps)
    spline = fit_smoothing_spline(control_times, controls, smoothing)

    samples = spline(times)
    offset = rng.uniform(-mean_bound, mean_bound)
    curve = ParameterCurve(spline, offset - float(np.mean(samples)))
    return curve, curve(times)


def simulate_trajectory(
    cfg: TrajectoryConfig,
    n_slices: int,
    *labels: int | str,
) -> MotionTrajectory:
    """Draw a random-walk trajectory satisfying every configured bound.

    Each parameter takes P₁ and n_control-1 uniform increments, accumulates
    them, fits a smoothing spline through the control points, demeans the
    curve over the slice times and adds a uniform offset. Draws that violate
    a bound are rejected and redrawn. labels select an independent stream
    for the same seed (e.g. one per stack).

    """
    if n_slices < 1:
        raise TrajectoryError("A trajectory needs at least one slice")

    times = np.arange(n_slices) * cfg.slice_interval_s
    duration = max(n_slices - 1, 1) * cfg.slice_interval_s
    control_times = np.linspace(0.0, duration, cfg.n_control)

    for attempt in range(cfg.max_retries):
        rng = substream(cfg.seed, "trajectory", *labels, attempt)
        curves = []
        params = np.empty((n_slices, 6))
        for k in range(6):
            rotational = k < 3
            curve, values = _draw_curve(
                rng,
                control_times,
                times,
                cfg.delta_rot_bound if rotational else cfg.delta_trans_bound,
                cfg.mean_rot_bound if rotational else cfg.mean_trans_bound,
                cfg.smoothing,
            )
            curves.append(curve)
            params[:, k] = values

        traj = MotionTrajectory(times, params, tuple(curves))
        violations = validate_bounds(traj, cfg)
        if not violations:
            if attempt:
                log.debug("Trajectory accepted after %d rejections", attempt)
            return traj

        log.debug("Rejected trajectory draw %d: %s", attempt, "; ".join(map(str, violations)))

    raise RetryBudgetExhaustedError(
        f"No trajectory satisfied the bounds within {cfg.max_retries} draws"
    )


def slice_normals(traj: MotionTrajectory, orientation: Orientation) -> np.ndarray:
    """Slice-plane normals (N, 3) after applying each sampled rotation."""
    from slicemotion.acquisition import Orientation

    normal = Orientation(orientation).normal
    return np.stack([T.rotation @ normal for T in traj.samples])


def trajectory_to_csv(traj: MotionTrajectory) -> str:
    f = io.StringIO()
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for t, p in zip(traj.times_s, traj.params):
        row = [t, *np.degrees(p[:3]), *p[3:]]
        writer.writerow(f"{x:.9g}" for x in row)
    return f.getvalue()


def write_trajectory_csv(traj: MotionTrajectory, path: Path) -> None:
    Path(path).write_text(trajectory_to_csv(traj), encoding="utf-8")


def read_trajectory_csv(path: Path) -> MotionTrajectory:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))

    if not rows or tuple(rows[0].keys()) != CSV_COLUMNS:
        raise TrajectoryError(f"{path} is not a trajectory CSV")

    times = np.array([float(r["time_s"]) for r in rows])
    params = np.array([[float(r[c]) for c in CSV_COLUMNS[1:]] for r in rows])
    params[:, :3] = np.radians(params[:, :3])
    return MotionTrajectory(times, params)
