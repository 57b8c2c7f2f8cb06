from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel

from slicemotion.acquisition import SliceStack
from slicemotion.geometry import RigidTransform
from slicemotion.volume import Volume3D, resample

from .image import ImageQualityReport, align_to_reference, dssim_map, image_quality
from .motion import MotionErrorReport, motion_errors

PER_SLICE_COLUMNS = (
    "stack",
    "index",
    "rot_x_deg",
    "rot_y_deg",
    "rot_z_deg",
    "trans_x_mm",
    "trans_y_mm",
    "trans_z_mm",
    "geodesic_deg",
)


class EvaluationReport(BaseModel):
    motion: dict[str, MotionErrorReport] = {}
    """Motion errors keyed by stack orientation, plus "all"."""
    image: ImageQualityReport | None = None


def write_report_json(report: BaseModel, path: Path) -> None:
    Path(path).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


def report_to_csv(report: EvaluationReport) -> str:
    f = io.StringIO()
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(PER_SLICE_COLUMNS)
    for stack, motion in report.motion.items():
        if stack == "all":
            continue
        for row in motion.per_slice:
            writer.writerow(
                [
                    stack,
                    row.index,
                    *(f"{x:.6f}" for x in row.rot_error_deg),
                    *(f"{x:.6f}" for x in row.trans_error_mm),
                    f"{row.geodesic_deg:.6f}",
                ]
            )
    return f.getvalue()


def write_report_csv(report: EvaluationReport, path: Path) -> None:
    Path(path).write_text(report_to_csv(report), encoding="utf-8")


def build_report(
    stacks: Sequence[SliceStack] = (),
    volume: Volume3D | None = None,
    truth: Volume3D | None = None,
    *,
    align: bool = True,
) -> tuple[EvaluationReport, Volume3D | None]:
    """Motion errors of every stack with ground truth, and image quality of volume.

    Returns the report and the DSSIM map (None without a volume and truth).

    """
    motion: dict[str, MotionErrorReport] = {}
    true_all, est_all, mask_all = [], [], []
    for stack in stacks:
        if stack.true_transforms is None:
            continue
        motion[stack.orientation.value] = motion_errors(
            stack.true_transforms, stack.est_transforms, stack.brain_mask
        )
        true_all.extend(stack.true_transforms)
        est_all.extend(stack.est_transforms)
        mask_all.extend(stack.brain_mask)
    if len(motion) > 1:
        motion["all"] = motion_errors(true_all, est_all, np.array(mask_all))

    image = None
    dssim = None
    if volume is not None and truth is not None:
        if align:
            volume, _ = align_to_reference(volume, truth)
        else:
            volume = resample(volume, RigidTransform.identity(truth.grid.center), truth.grid)
        image = image_quality(volume, truth)
        dssim = dssim_map(volume, truth)

    return EvaluationReport(motion=motion, image=image), dssim
