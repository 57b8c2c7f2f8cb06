from .errors import (
    EmptyImageError as EmptyImageError,
    NoKeptSlicesError as NoKeptSlicesError,
    ReconstructionError as ReconstructionError,
    RegistrationError as RegistrationError,
    SimilarityError as SimilarityError,
)
from .optimizer import coordinate_search as coordinate_search
from .pipeline import (
    PipelineConfig as PipelineConfig,
    PipelineResult as PipelineResult,
    affirm_initialization as affirm_initialization,
    refresh_reference as refresh_reference,
    register_all_slices as register_all_slices,
    run_coarse_to_fine as run_coarse_to_fine,
    select_initial_reference as select_initial_reference,
    volume_initialization as volume_initialization,
)
from .registration import (
    WORST_SIMILARITY as WORST_SIMILARITY,
    RegistrationConfig as RegistrationConfig,
    RegistrationResult as RegistrationResult,
    downsample_volume as downsample_volume,
    principal_axes as principal_axes,
    principal_axes_candidates as principal_axes_candidates,
    register_slice_to_volume as register_slice_to_volume,
    register_volume_to_volume as register_volume_to_volume,
    simulate_slice as simulate_slice,
    smooth_volume as smooth_volume,
)
from .rejection import (
    outlier_threshold as outlier_threshold,
    reject_outlier_slices as reject_outlier_slices,
    slice_scores as slice_scores,
)
from .similarity import mse as mse, ncc as ncc, similarity as similarity
from .srr import (
    SrrConfig as SrrConfig,
    SrrResult as SrrResult,
    acquisition_operator as acquisition_operator,
    laplacian as laplacian,
    slice_operator_rows as slice_operator_rows,
    srr_grid as srr_grid,
    srr_least_squares as srr_least_squares,
)
