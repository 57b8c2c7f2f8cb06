from .errors import (
    AcquisitionError as AcquisitionError,
    StackFormatError as StackFormatError,
    StackTooShortError as StackTooShortError,
    TrajectoryLengthError as TrajectoryLengthError,
)
from .forward import (
    AcquisitionConfig as AcquisitionConfig,
    acquire_slice as acquire_slice,
    acquire_stack as acquire_stack,
    contains_object as contains_object,
    project_slice as project_slice,
    render_slice as render_slice,
)
from .io import StackManifest as StackManifest, load_stack as load_stack, save_stack as save_stack
from .stack import (
    Orientation as Orientation,
    SliceStack as SliceStack,
    deinterleave as deinterleave,
    in_plane_points as in_plane_points,
    interleave as interleave,
    interleaved_order as interleaved_order,
    psf_quadrature as psf_quadrature,
    slice_positions as slice_positions,
)
