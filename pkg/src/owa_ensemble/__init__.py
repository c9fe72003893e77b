"""OWA fusion ensemble: DOWA/IOWA attention over a stacked first layer,
confidence-based selection, and a ridge meta-learner, with bootstrap-forest
feature screening and a leakage-safe evaluation pipeline."""

from .dataset import Dataset, load_csv, synth_dataset, write_synth_csv
from .ensemble import (
    FusionStack,
    FusionVector,
    GroupingPlan,
    RidgeModel,
    apply_fusion_stack,
    attention_layer,
    correlation_matrix,
    fit_fusion_stack,
    iowa_training_targets,
    plan_grouping,
    ridge_fit,
    ridge_predict,
    select,
    select_rows,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    LeakageError,
    NumericError,
    OwaEnsembleError,
    StratificationError,
)
from .learners import (
    KINDS,
    ClassifierSpec,
    PredictionMatrix,
    build,
    default_specs,
    fit_predict_out_of_fold,
    stratified_fold_assignments,
)
from .metrics import (
    ConfusionCounts,
    RocCurve,
    ScalarMetrics,
    auc_pairwise,
    compute_metrics,
    confusion_from_predictions,
    roc_curve,
)
from .owa import (
    IowaModel,
    IowaTrainingSample,
    dowa_aggregate,
    dowa_aggregate_rows,
    dowa_similarities,
    dowa_weights,
    iowa_gradient,
    iowa_instant_error,
    iowa_predict,
    iowa_train,
    iowa_weights,
    mean_of,
    order_arguments,
)
from .pipeline import (
    MetricsReport,
    ProvenanceLog,
    RunConfig,
    evaluate_with_artifact,
    fuse_prediction_matrix,
    run_experiment,
)
from .screening import (
    BootstrapForest,
    ForestConfig,
    ScreeningReport,
    feature_contributions,
    fit_bootstrap_forest,
    screen,
)

__version__ = "0.1.0"
