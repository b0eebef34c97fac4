"""spforge: multimodal story-point estimation at desk scale.

Parses user-story corpora, fuses text/image embeddings with an ordinal
severity feature, trains a from-scratch gradient-boosted multiclass
classifier over Fibonacci story-point classes, and reports the paired
with/without-severity ablation.
"""

from .dataset import (
    DEFAULT_FIB,
    DatasetSplit,
    FibClassMap,
    ParseError,
    SeverityScale,
    StoryRecord,
    class_to_sp,
    encode_severity,
    load_records,
    parse_records,
    sp_to_class,
    stratified_split,
    write_records,
)
from .evaluation import (
    AblationDiff,
    ConfusionMatrix,
    EvalReport,
    ablation_compare,
    accuracy,
    class_metrics,
    confusion,
    evaluate,
    near_miss_accuracy,
)
from .fusion import (
    ConstantInputError,
    CorrelationMatrix,
    EmbeddingRecord,
    FeatureMatrix,
    NormalizationStats,
    apply_normalizer,
    correlation_matrix,
    fit_normalizer,
    fuse,
    load_embeddings,
    mean_pool,
    parse_embeddings,
    pearson,
)
from .gbt import GbtModel, TrainConfig, TrainReport, load_model, save_model, train
from .pipeline import PipelineConfig, resolve_config, run_ablation

__version__ = "0.1.0"
