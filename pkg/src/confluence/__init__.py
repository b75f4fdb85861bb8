"""Proximity-based bounding-box suppression with evaluation tooling.

The package bundles the Confluence family of suppression algorithms
(duplicate removal driven by normalized Manhattan proximity rather than
IoU), the classic greedy/soft NMS baselines, a self-contained COCO-style
AP/AR evaluator, detection-file I/O, and a CLI for running, evaluating,
sweeping, benchmarking, and comparing configurations.
"""

from .geometry import (
    BoxCorners,
    Point2,
    iou,
    manhattan_distance,
    normalize_pair,
    normalized_proximity,
    raw_proximity,
)
from .detection_io import (
    AnnotationError,
    GroundTruth,
    LoadedDetections,
    ParseError,
    RecordError,
    load_detections,
    load_ground_truth,
    write_detections,
)
from .evaluation import (
    AREA_RANGES,
    IOU_THRESHOLDS,
    MAX_DETS,
    RECALL_LEVELS,
    EmptyGroundTruthError,
    EvalSummary,
    GroundTruthBox,
    MatchRecord,
    MatchResult,
    PRCurve,
    SweepPoint,
    SweepResult,
    average_precision,
    average_recall,
    coco_summary,
    default_band,
    default_grid,
    match_detections,
    precision_recall_curve,
    summary_rows,
    threshold_sweep,
)
from .suppression import (
    ALGORITHMS,
    DECAY_MODES,
    ClusterState,
    ConfigError,
    DecayEvent,
    Detection,
    SuppressionConfig,
    SuppressionResult,
    cluster_states,
    confluence,
    confluence_nms,
    decay_score,
    greedy_nms,
    mean_proximity,
    result_detections,
    soft_nms,
    suppress,
    weighted_proximity,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Point2",
    "BoxCorners",
    "manhattan_distance",
    "raw_proximity",
    "normalize_pair",
    "normalized_proximity",
    "iou",
    "ALGORITHMS",
    "DECAY_MODES",
    "ConfigError",
    "SuppressionConfig",
    "Detection",
    "ClusterState",
    "DecayEvent",
    "SuppressionResult",
    "mean_proximity",
    "weighted_proximity",
    "cluster_states",
    "decay_score",
    "confluence",
    "confluence_nms",
    "greedy_nms",
    "soft_nms",
    "suppress",
    "result_detections",
    "IOU_THRESHOLDS",
    "RECALL_LEVELS",
    "MAX_DETS",
    "AREA_RANGES",
    "EmptyGroundTruthError",
    "GroundTruthBox",
    "MatchRecord",
    "MatchResult",
    "PRCurve",
    "EvalSummary",
    "SweepPoint",
    "SweepResult",
    "match_detections",
    "precision_recall_curve",
    "average_precision",
    "average_recall",
    "coco_summary",
    "threshold_sweep",
    "default_grid",
    "default_band",
    "summary_rows",
    "ParseError",
    "RecordError",
    "AnnotationError",
    "LoadedDetections",
    "GroundTruth",
    "load_detections",
    "load_ground_truth",
    "write_detections",
]
