import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .rotation import matrix_log_rotation
from .transform import RigidTransform


class LossConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    gamma: float = Field(default=1.0, gt=0)
    """Weight of the squared displacement error (mm²) against rotation (rad²)."""
    lambda_: float = Field(default=0.1, ge=0, alias="lambda")
    """Weight of the volume consistency term."""


def geodesic_slice_loss(
    T: RigidTransform,
    T_hat: RigidTransform,
    cfg: LossConfig = LossConfig(),
) -> float:
    """(‖log(R̂ᵀR)‖²_F + γ‖d̂ - d‖²)^½ for a single slice."""
    rel = T_hat.rotation.T @ T.rotation
    rot = float(np.sum(matrix_log_rotation(rel) ** 2))
    trans = float(np.sum((T_hat.d - T.d) ** 2))
    return math.sqrt(rot + cfg.gamma * trans)
