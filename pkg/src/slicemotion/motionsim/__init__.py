from .errors import (
    DuplicateAbscissaError as DuplicateAbscissaError,
    SplineError as SplineError,
    TooFewPointsError as TooFewPointsError,
    TrajectoryError as TrajectoryError,
)
from .spline import (
    SmoothingSpline as SmoothingSpline,
    fit_smoothing_spline as fit_smoothing_spline,
    gcv_score as gcv_score,
    select_smoothing as select_smoothing,
)
from .trajectory import (
    CSV_COLUMNS as CSV_COLUMNS,
    BoundViolation as BoundViolation,
    MotionTrajectory as MotionTrajectory,
    TrajectoryConfig as TrajectoryConfig,
    angular_speeds as angular_speeds,
    read_trajectory_csv as read_trajectory_csv,
    simulate_trajectory as simulate_trajectory,
    slice_normals as slice_normals,
    trajectory_to_csv as trajectory_to_csv,
    validate_bounds as validate_bounds,
    write_trajectory_csv as write_trajectory_csv,
)
