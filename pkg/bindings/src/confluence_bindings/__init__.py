"""Flat-array surface over the confluence suppression core.

Detector pipelines usually hold detections as parallel arrays (an N×4
box array, a score array, a class array) rather than per-box objects.
This package marshals that layout into the core's detection type, runs
the requested suppression pass, and hands back *row indices* instead of
filtered copies, so callers can carry arbitrary side arrays (masks,
embeddings, track ids) through suppression with a single fancy-index.

All numeric work happens in the core; this layer only validates shapes
and converts representations.  Inputs are read once up front and never
mutated, but callers must not mutate them concurrently with a call.
Conversion is zero-copy when the host arrays are already contiguous
float64 / integer buffers, and copies otherwise.
"""

from __future__ import annotations

import numpy as np

from confluence import __version__ as _core_version
from confluence.suppression import (
    ALGORITHMS,
    DECAY_MODES,
    ConfigError,
    Detection,
    SuppressionConfig,
    suppress as _core_suppress,
)
from confluence.geometry import BoxCorners

__version__ = _core_version

__all__ = [
    "ALGORITHMS",
    "DECAY_MODES",
    "ConfigError",
    "ShapeError",
    "suppress",
    "__version__",
]


class ShapeError(ValueError):
    """Input arrays do not form a valid N×4 / N / N detection batch."""


def _as_boxes(boxes: object) -> np.ndarray:
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ShapeError(f"boxes must have shape (N, 4), got {arr.shape}")
    return arr


def _as_scores(scores: object, n: int) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.shape != (n,):
        raise ShapeError(f"scores must have shape ({n},), got {arr.shape}")
    return arr


def _as_classes(classes: object, n: int) -> np.ndarray:
    if classes is None:
        return np.zeros(n, dtype=np.int64)
    arr = np.asarray(classes)
    if not np.issubdtype(arr.dtype, np.integer):
        raise ShapeError(f"classes must be an integer array, got dtype {arr.dtype}")
    if arr.shape != (n,):
        raise ShapeError(f"classes must have shape ({n},), got {arr.shape}")
    return arr


def suppress(
    boxes: object,
    scores: object,
    classes: object = None,
    *,
    algorithm: str = "confluence",
    ct: float = 0.7,
    iou_threshold: float = 0.5,
    decay: str = "hard",
    sigma: float = 0.5,
    score_floor: float = 0.01,
    class_agnostic: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Run one suppression pass over parallel detection arrays.

    ``boxes`` is N×4 corner coordinates (x1, y1, x2, y2), ``scores`` is
    length N, and ``classes`` is an optional length-N integer array
    (omitted means a single shared class).  Keyword names mirror the
    command-line flags.

    Returns ``(kept, new_scores)``: the row indices retained, sorted
    ascending, and each row's final score (decayed when a soft mode
    touched it), aligned with ``kept``.
    """
    box_arr = _as_boxes(boxes)
    n = box_arr.shape[0]
    score_arr = _as_scores(scores, n)
    class_arr = _as_classes(classes, n)

    config = SuppressionConfig(
        algorithm=algorithm,
        confluence_threshold=ct,
        iou_threshold=iou_threshold,
        decay=decay,
        sigma=sigma,
        score_floor=score_floor,
        class_agnostic=class_agnostic,
    )
    detections = [
        Detection(
            box=BoxCorners.from_xyxy(*(float(v) for v in box_arr[i])),
            score=float(score_arr[i]),
            class_id=int(class_arr[i]),
            stable_id=i,
            image_id=0,
        )
        for i in range(n)
    ]
    result = _core_suppress(detections, config)
    pairs = sorted((det.stable_id, final) for det, final in result.kept)
    kept = np.array([sid for sid, _ in pairs], dtype=np.intp)
    new_scores = np.array([final for _, final in pairs], dtype=np.float64)
    return kept, new_scores
