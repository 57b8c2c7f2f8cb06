from .errors import ConstantReferenceError as ConstantReferenceError, MetricError as MetricError
from .image import (
    ImageQualityReport as ImageQualityReport,
    align_to_reference as align_to_reference,
    dssim_map as dssim_map,
    image_quality as image_quality,
    nrmse as nrmse,
    ssim as ssim,
    ssim_map as ssim_map,
)
from .motion import (
    MotionErrorReport as MotionErrorReport,
    SliceError as SliceError,
    motion_errors as motion_errors,
    wrap_degrees as wrap_degrees,
)
from .report import (
    EvaluationReport as EvaluationReport,
    build_report as build_report,
    report_to_csv as report_to_csv,
    write_report_csv as write_report_csv,
    write_report_json as write_report_json,
)
from .stats import PairedComparison as PairedComparison, paired_comparison as paired_comparison
