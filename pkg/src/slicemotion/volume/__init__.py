from .errors import (
    MalformedHeaderError as MalformedHeaderError,
    PayloadSizeMismatchError as PayloadSizeMismatchError,
    UnsupportedDatatypeError as UnsupportedDatatypeError,
    VolumeError as VolumeError,
    VolumeFormatError as VolumeFormatError,
)
from .grid import (
    Grid as Grid,
    Volume3D as Volume3D,
    resample as resample,
    trilinear_sample as trilinear_sample,
    trilinear_weights as trilinear_weights,
)
from .io import (
    VolumeHeader as VolumeHeader,
    load_volume as load_volume,
    save_volume as save_volume,
)
from .phantom import PhantomSpec as PhantomSpec, make_phantom as make_phantom
