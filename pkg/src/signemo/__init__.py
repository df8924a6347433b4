"""Emotion recognition for sign language signers.

A numpy library covering the whole pipeline: manifest handling and label
taxonomy, subtitle-based weak labeling, face/hand feature extraction and
fusion, a temporal classifier with training and fine-tuning, evaluation and
inter-annotator agreement, a vision-LLM comparison client, and a human
annotation service.
"""

from .corpus import (
    ClipRecord,
    DatasetSplit,
    EMOSIGN_LABEL_MAP,
    ExternalLabelMap,
    LabelProvenance,
    LabelSource,
    ManifestError,
    SplitName,
    build_acted_grid,
    load_manifest,
    load_splits,
    map_external_label,
    mapped_distribution,
    save_manifest,
    save_splits,
)
from .evaluation import (
    AgreementReport,
    EvaluationReport,
    ac1_from_agreements,
    consensus_subset,
    evaluate,
    gwet_ac1,
    resolve_gold_label,
)
from .features import (
    FACE_DIM,
    FUSED_DIM,
    HAND_DIM,
    CanonicalHandFeature,
    FaceEmbedding,
    FrameFeatureSequence,
    HandKeypoints,
    SegmentKind,
    SegmentStrategy,
    canonicalize_hands,
    extract_manifest_features,
    fuse,
    load_features,
    save_features,
    select_segment,
)
from .labels import DISPLAY_ORDER, LABEL_ORDER, N_CLASSES, EmotionLabel, parse_label
from .model import (
    Hyper,
    ModelCheckpoint,
    ModelConfig,
    Prediction,
    finetune,
    forward,
    inverse_frequency_weights,
    load_checkpoint,
    load_predictions,
    predict_manifest,
    resolve_training_label,
    save_checkpoint,
    save_predictions,
    train,
)
from .weak_labeler import (
    KeywordClassifier,
    TextEmotionClassifier,
    WeakLabelRun,
    resolve_classifier,
    verify_classifier,
    weak_label,
)

__version__ = "0.1.0"

__all__ = [
    "AgreementReport",
    "CanonicalHandFeature",
    "ClipRecord",
    "DISPLAY_ORDER",
    "DatasetSplit",
    "EMOSIGN_LABEL_MAP",
    "EmotionLabel",
    "EvaluationReport",
    "ExternalLabelMap",
    "FACE_DIM",
    "FUSED_DIM",
    "FaceEmbedding",
    "FrameFeatureSequence",
    "HAND_DIM",
    "HandKeypoints",
    "Hyper",
    "KeywordClassifier",
    "LABEL_ORDER",
    "LabelProvenance",
    "LabelSource",
    "ManifestError",
    "ModelCheckpoint",
    "ModelConfig",
    "N_CLASSES",
    "Prediction",
    "SegmentKind",
    "SegmentStrategy",
    "SplitName",
    "TextEmotionClassifier",
    "WeakLabelRun",
    "ac1_from_agreements",
    "build_acted_grid",
    "canonicalize_hands",
    "consensus_subset",
    "evaluate",
    "extract_manifest_features",
    "finetune",
    "forward",
    "fuse",
    "gwet_ac1",
    "inverse_frequency_weights",
    "load_checkpoint",
    "load_features",
    "load_manifest",
    "load_predictions",
    "load_splits",
    "map_external_label",
    "mapped_distribution",
    "parse_label",
    "predict_manifest",
    "resolve_classifier",
    "resolve_gold_label",
    "resolve_training_label",
    "save_checkpoint",
    "save_features",
    "save_manifest",
    "save_predictions",
    "save_splits",
    "select_segment",
    "train",
    "verify_classifier",
    "weak_label",
    "__version__",
]
