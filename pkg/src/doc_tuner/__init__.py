"""Dynamic orthogonal continual fine-tuning on synthetic task streams.

Tracks the drifting functional directions of earlier tasks with a
streaming PCA and cuts new-task LoRA updates orthogonal to them.
"""

from .adapters import (
    GradientBundle,
    LoraAdapter,
    ToyNetwork,
    apply_update,
    backward,
    build_network,
    forward,
)
from .checkpoint import (
    load_checkpoint,
    parse_checkpoint,
    save_checkpoint,
    serialize_checkpoint,
)
from .config import ExperimentConfig, config_from_dict, config_to_dict, load_config
from .directions import (
    FunctionalDirection,
    concat_directions,
    coord,
    increment_direction,
    lora_increment,
    token_average,
)
from .drift import DriftProbe, DriftSeries, run_drift_probe
from .errors import (
    CheckpointError,
    DivergenceError,
    DocTunerError,
    InvariantError,
    ShapeError,
    ValidationError,
)
from .metrics import AccuracyMatrix, compute_aa, compute_bwt, compute_fwt
from .online_pca import ComponentPool, UpdateReport
from .projection import SliceBasis, cut_gradient, disassemble, verify_orthogonality
from .selftest import SelftestResult, pca_selftest
from .tasks import TaskData, TaskSpec, generate_task, make_task_stream
from .training import (
    RunConfig,
    RunRecord,
    StepLog,
    evaluate_accuracy,
    reference_accuracies,
    run_stream,
)

__version__ = "0.1.0"
