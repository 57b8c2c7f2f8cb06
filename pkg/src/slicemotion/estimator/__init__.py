from .checkpoint import (
    Checkpoint as Checkpoint,
    dump_checkpoint as dump_checkpoint,
    load_checkpoint as load_checkpoint,
    parse_checkpoint as parse_checkpoint,
    save_checkpoint as save_checkpoint,
)
from .errors import (
    CheckpointError as CheckpointError,
    EmptySequenceError as EmptySequenceError,
    EstimatorError as EstimatorError,
    MissingOrientationError as MissingOrientationError,
    ShapeMismatchError as ShapeMismatchError,
    TrainingDivergedError as TrainingDivergedError,
)
from .fusion import (
    FusionParams as FusionParams,
    affinity_attention as affinity_attention,
    affinity_fusion as affinity_fusion,
    late_fusion as late_fusion,
)
from .gru import (
    GruParams as GruParams,
    bigru_forward as bigru_forward,
    gru_cell_forward as gru_cell_forward,
    gru_sequence as gru_sequence,
)
from .heads import (
    ROTATION_SCALE as ROTATION_SCALE,
    TRANSLATION_SCALE as TRANSLATION_SCALE,
    HeadParams as HeadParams,
    head_forward as head_forward,
    predict_motion as predict_motion,
)
from .loss import (
    LossBreakdown as LossBreakdown,
    backprop_motion as backprop_motion,
    consistency_term as consistency_term,
    geodesic_loss_grad as geodesic_loss_grad,
    geodesic_term as geodesic_term,
    loss_total as loss_total,
    parameter_mse as parameter_mse,
)
from .model import (
    AffirmOutput as AffirmOutput,
    EstimatorConfig as EstimatorConfig,
    EstimatorNetwork as EstimatorNetwork,
    EstimatorParams as EstimatorParams,
    affirm_forward as affirm_forward,
    check_orientations as check_orientations,
)
from .tensor import Tensor as Tensor
from .train import (
    EpochRecord as EpochRecord,
    RmsProp as RmsProp,
    TrainConfig as TrainConfig,
    TrainingSample as TrainingSample,
    TrainResult as TrainResult,
    TrainState as TrainState,
    evaluate_estimator as evaluate_estimator,
    history_to_csv as history_to_csv,
    make_sample as make_sample,
    resume_training as resume_training,
    train_toy as train_toy,
    training_step as training_step,
    validation_samples as validation_samples,
    write_history_csv as write_history_csv,
)
