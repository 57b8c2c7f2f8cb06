from .errors import GeometryError as GeometryError
from .loss import LossConfig as LossConfig, geodesic_slice_loss as geodesic_slice_loss
from .rotation import (
    check_rotation as check_rotation,
    euler_jacobian as euler_jacobian,
    euler_to_matrix as euler_to_matrix,
    is_rotation as is_rotation,
    matrix_log_rotation as matrix_log_rotation,
    matrix_to_euler as matrix_to_euler,
    matrix_to_quaternion as matrix_to_quaternion,
    rotation_angle as rotation_angle,
    rotation_exp as rotation_exp,
    rotation_vector as rotation_vector,
    skew as skew,
    vee as vee,
)
from .transform import (
    RigidTransform as RigidTransform,
    TransformRecord as TransformRecord,
    apply_to_point as apply_to_point,
    compose as compose,
    dump_transforms as dump_transforms,
    invert as invert,
    load_transforms as load_transforms,
    transform_list_adapter as transform_list_adapter,
)
