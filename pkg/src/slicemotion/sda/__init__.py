from .errors import (
    EmptyInputError as EmptyInputError,
    ScheduleIndexError as ScheduleIndexError,
    SdaError as SdaError,
)
from .reconstruct import (
    SdaConfig as SdaConfig,
    deposit as deposit,
    sda_reconstruct as sda_reconstruct,
    sigma_schedule as sigma_schedule,
)
