"""COCO-style detection evaluation, self-contained.

Implements greedy score-ordered matching with crowd/ignore semantics,
101-point interpolated average precision over IoU thresholds
0.50:0.05:0.95, average recall at detection budgets {1, 10, 100}, and
area-partitioned variants (small < 32^2, 32^2 <= medium <= 96^2,
large > 96^2).  Metrics that are undefined because no ground truth
exists in a slice are reported as the conventional -1 sentinel.

Matching rules, in score order per image:

* a detection matches the not-yet-matched same-class ground truth with
  the highest IoU at or above the threshold, preferring countable ground
  truth over ignore regions even at lower IoU;
* ignore regions (``GroundTruthBox.ignore``, e.g. crowds) use
  intersection-over-detection-area overlap and may absorb any number of
  detections; detections they absorb count neither as TP nor FP;
* ground truth outside the active area range is treated as an ignore
  region for that range, and unmatched detections outside the range are
  neutral as well.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import BoxCorners
from .suppression import Detection, SuppressionConfig, result_detections, suppress

__all__ = [
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
    "summary_rows",
    "default_grid",
    "default_band",
]

IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_LEVELS: tuple[float, ...] = tuple(i / 100.0 for i in range(101))
MAX_DETS: tuple[int, ...] = (1, 10, 100)

# name -> (inclusive low, inclusive high) on ground-truth pixel area;
# the three named ranges partition areas exactly.
AREA_RANGES: dict[str, tuple[float, float]] = {
    "all": (0.0, math.inf),
    "small": (0.0, 32.0**2),
    "medium": (32.0**2, 96.0**2),
    "large": (96.0**2, math.inf),
}


def _in_range(area: float, name: str) -> bool:
    if name == "all":
        return True
    if name == "small":
        return area < 32.0**2
    if name == "medium":
        return 32.0**2 <= area <= 96.0**2
    if name == "large":
        return area > 96.0**2
    raise ValueError(f"unknown area range {name!r}")


class EmptyGroundTruthError(ValueError):
    """Raised when an evaluation is requested with no ground truth at all."""


@dataclass(frozen=True)
class GroundTruthBox:
    """One annotated box.  ``ignore`` marks crowd/ignore regions."""

    box: BoxCorners
    class_id: int
    image_id: int
    ignore: bool = False
    area: float | None = None

    def __post_init__(self) -> None:
        if self.box.is_degenerate:
            raise ValueError(f"ground-truth box must be non-degenerate, got {self.box.as_xyxy()}")
        if self.area is None:
            object.__setattr__(self, "area", self.box.area)
        elif self.area <= 0.0:
            raise ValueError(f"ground-truth area must be positive, got {self.area}")


@dataclass(frozen=True)
class MatchRecord:
    """Outcome for one detection in one matching pass.

    ``matched`` means it matched countable ground truth (a TP).
    ``ignored`` detections (absorbed by ignore regions or out of the area
    range while unmatched) count neither as TP nor FP.  ``rank`` is the
    detection's position in its image's score ordering.
    """

    score: float
    stable_id: int
    image_id: int
    class_id: int
    rank: int
    matched: bool
    ignored: bool


@dataclass
class MatchResult:
    records: list[MatchRecord]
    counted_gt: int


def _iou_det_gt(det_box: BoxCorners, gt: GroundTruthBox, crowd: bool) -> float:
    ix = min(det_box.lower_right.x, gt.box.lower_right.x) - max(
        det_box.upper_left.x, gt.box.upper_left.x
    )
    iy = min(det_box.lower_right.y, gt.box.lower_right.y) - max(
        det_box.upper_left.y, gt.box.upper_left.y
    )
    inter = ix * iy if (ix > 0.0 and iy > 0.0) else 0.0
    if crowd:
        denom = det_box.area
    else:
        denom = det_box.area + gt.box.area - inter
    if denom <= 0.0:
        return 0.0
    return inter / denom


def _rank_detections(dets: Sequence[Detection], max_dets: int | None):
    """Per-image score ordering (desc, ties by stable_id), truncated."""
    ordered = sorted(dets, key=lambda d: (-d.score, d.stable_id))
    if max_dets is not None:
        ordered = ordered[:max_dets]
    return ordered


def _match_class(
    ranked: Sequence[tuple[int, Detection]],
    gts: Sequence[GroundTruthBox],
    iou_thresh: float,
    area_range: str,
) -> tuple[list[MatchRecord], int]:
    """Greedy matching of one image's single-class detections.

    ``ranked`` pairs each detection with its per-image rank.
    """
    gt_ignored = [g.ignore or not _in_range(g.area, area_range) for g in gts]
    order = sorted(range(len(gts)), key=lambda j: gt_ignored[j])  # countable first, stable
    gt_matched = [False] * len(gts)
    records: list[MatchRecord] = []
    for rank, det in ranked:
        best = -1
        best_iou = iou_thresh
        for j in order:
            if gt_matched[j] and not gts[j].ignore:
                continue
            if best > -1 and not gt_ignored[best] and gt_ignored[j]:
                break  # a countable match exists; don't trade it for an ignore region
            v = _iou_det_gt(det.box, gts[j], gts[j].ignore)
            if v < best_iou:
                continue
            best_iou = v
            best = j
        if best > -1:
            gt_matched[best] = True
            ignored = gt_ignored[best]
            matched = not ignored
        else:
            matched = False
            ignored = not _in_range(det.box.area, area_range)
        records.append(
            MatchRecord(det.score, det.stable_id, det.image_id, det.class_id, rank,
                        matched, ignored)
        )
    counted = sum(1 for ig in gt_ignored if not ig)
    return records, counted


def match_detections(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruthBox],
    iou_thresh: float,
    *,
    area_range: str = "all",
    max_dets: int | None = None,
) -> MatchResult:
    """Greedy one-to-one matching for a single image.

    Detections are ranked by descending score (ties by stable_id),
    optionally truncated to ``max_dets``, then matched per class.
    """
    image_ids = {d.image_id for d in detections} | {g.image_id for g in ground_truths}
    if len(image_ids) > 1:
        raise ValueError(f"matching operates on a single image; got image_ids {sorted(image_ids)}")
    ranked = list(enumerate(_rank_detections(detections, max_dets)))
    classes = sorted({d.class_id for _, d in ranked} | {g.class_id for g in ground_truths})
    records: list[MatchRecord] = []
    counted = 0
    for k in classes:
        class_ranked = [(r, d) for r, d in ranked if d.class_id == k]
        class_gts = [g for g in ground_truths if g.class_id == k]
        recs, cnt = _match_class(class_ranked, class_gts, iou_thresh, area_range)
        records.extend(recs)
        counted += cnt
    records.sort(key=lambda r: r.rank)
    return MatchResult(records, counted)


# ---------------------------------------------------------------------------
# precision / recall accumulation


def _sorted_records(records: Iterable[MatchRecord]) -> list[MatchRecord]:
    return sorted(records, key=lambda r: (-r.score, r.stable_id))


@dataclass(frozen=True)
class PRCurve:
    """Score-ordered match outcomes plus 101-point interpolated precision.

    ``records`` holds (score, is_true_positive) for every counted
    detection, best score first.  ``interpolated_precision[i]`` is the
    interpolated precision at recall level i/100; the sequence is
    non-increasing.
    """

    records: tuple[tuple[float, bool], ...]
    interpolated_precision: tuple[float, ...]


def precision_recall_curve(records: Iterable[MatchRecord], counted_gt: int) -> PRCurve:
    """Build the interpolated precision-recall curve for one class slice."""
    ordered = [r for r in _sorted_records(records) if not r.ignored]
    if counted_gt <= 0:
        raise ValueError("precision_recall_curve needs counted ground truth; got none")
    tp = 0
    fp = 0
    points: list[tuple[float, float]] = []  # (recall, precision) per detection prefix
    pairs: list[tuple[float, bool]] = []
    for r in ordered:
        if r.matched:
            tp += 1
        else:
            fp += 1
        pairs.append((r.score, r.matched))
        points.append((tp / counted_gt, tp / (tp + fp)))
    # interpolated precision at level q: max precision over points with recall >= q,
    # computed by making precision non-increasing from the back.
    prec = [p for _, p in points]
    for i in range(len(prec) - 1, 0, -1):
        if prec[i] > prec[i - 1]:
            prec[i - 1] = prec[i]
    recalls = [rc for rc, _ in points]
    interp: list[float] = []
    for level in RECALL_LEVELS:
        # first point with recall >= level
        idx = np.searchsorted(recalls, level, side="left") if recalls else 0
        interp.append(prec[idx] if idx < len(prec) else 0.0)
    return PRCurve(tuple(pairs), tuple(interp))


def average_precision(records: Iterable[MatchRecord], counted_gt: int) -> float:
    """101-point interpolated AP for one class at one IoU threshold.

    Returns the -1 sentinel when ``counted_gt`` is zero (class absent from
    the ground truth — excluded from averages); 0 when ground truth exists
    but nothing was detected.
    """
    if counted_gt <= 0:
        return -1.0
    curve = precision_recall_curve(records, counted_gt)
    return float(sum(curve.interpolated_precision) / len(curve.interpolated_precision))


def _recall_of(records: Iterable[MatchRecord], counted_gt: int) -> float:
    if counted_gt <= 0:
        return -1.0
    return sum(1 for r in records if r.matched) / counted_gt


def average_recall(
    dets_by_image: Mapping[int, Sequence[Detection]],
    gts_by_image: Mapping[int, Sequence[GroundTruthBox]],
    max_dets: int,
    *,
    iou_thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> float:
    """Fraction of countable ground truth matched, averaged over classes
    and IoU thresholds, with detections truncated to ``max_dets`` per
    image before matching.  Returns -1 when there is no countable ground
    truth anywhere.
    """
    images = sorted(set(dets_by_image) | set(gts_by_image))
    classes = sorted(
        {d.class_id for img in images for d in dets_by_image.get(img, ())}
        | {g.class_id for img in images for g in gts_by_image.get(img, ())}
    )
    values: list[float] = []
    for k in classes:
        for t in iou_thresholds:
            matched = 0
            counted = 0
            for img in images:
                dets = [d for d in dets_by_image.get(img, ())]
                gts = [g for g in gts_by_image.get(img, ()) if g.class_id == k]
                result = match_detections(dets, gts, t, max_dets=max_dets)
                counted += result.counted_gt
                matched += sum(1 for r in result.records if r.class_id == k and r.matched)
            if counted > 0:
                values.append(matched / counted)
    if not values:
        return -1.0
    return float(sum(values) / len(values))


# ---------------------------------------------------------------------------
# full COCO-style summary


@dataclass(frozen=True)
class EvalSummary:
    """The standard 12-metric block.

    Every value lies in [0, 1] or is the -1 sentinel for undefined slices.
    """

    ap: float
    ap50: float
    ap75: float
    ap_small: float
    ap_medium: float
    ap_large: float
    ar1: float
    ar10: float
    ar100: float
    ar_small: float
    ar_medium: float
    ar_large: float

    def __post_init__(self) -> None:
        for name, value in self.items():
            if not (value == -1.0 or 0.0 <= value <= 1.0):
                raise ValueError(f"metric {name} out of range: {value}")
        defined = [v for v in (self.ar1, self.ar10, self.ar100) if v != -1.0]
        if defined != sorted(defined):
            raise ValueError(
                f"recall must not decrease with the detection budget: "
                f"{self.ar1}, {self.ar10}, {self.ar100}"
            )

    def items(self) -> list[tuple[str, float]]:
        """Metric (name, value) pairs in the conventional column order."""
        return [
            ("ap", self.ap),
            ("ap50", self.ap50),
            ("ap75", self.ap75),
            ("ap_small", self.ap_small),
            ("ap_medium", self.ap_medium),
            ("ap_large", self.ap_large),
            ("ar1", self.ar1),
            ("ar10", self.ar10),
            ("ar100", self.ar100),
            ("ar_small", self.ar_small),
            ("ar_medium", self.ar_medium),
            ("ar_large", self.ar_large),
        ]


def _mean_or_sentinel(values: list[float]) -> float:
    if not values:
        return -1.0
    return float(sum(values) / len(values))


def coco_summary(
    dets_by_image: Mapping[int, Sequence[Detection]],
    gts_by_image: Mapping[int, Sequence[GroundTruthBox]],
) -> EvalSummary:
    """Evaluate detections against ground truth across images.

    Raises :class:`EmptyGroundTruthError` when no ground-truth boxes are
    supplied at all.
    """
    total_gt = sum(len(v) for v in gts_by_image.values())
    if total_gt == 0:
        raise EmptyGroundTruthError("evaluation requires at least one ground-truth box")

    images = sorted(set(dets_by_image) | set(gts_by_image))
    classes = sorted(
        {d.class_id for img in images for d in dets_by_image.get(img, ())}
        | {g.class_id for img in images for g in gts_by_image.get(img, ())}
    )
    max_cap = max(MAX_DETS)

    # Per-image ranked detections (score desc, stable_id), truncated to the
    # largest budget.  Greedy matching of a truncated list is a prefix of the
    # full matching, so smaller budgets reuse these records filtered by rank.
    ranked_by_image: dict[int, list[tuple[int, Detection]]] = {
        img: list(enumerate(_rank_detections(dets_by_image.get(img, ()), max_cap)))
        for img in images
    }

    # (class, range) -> counted gt, and per threshold the aggregated records.
    range_names = list(AREA_RANGES)
    records: dict[tuple[int, str, float], list[MatchRecord]] = defaultdict(list)
    counted: dict[tuple[int, str], int] = defaultdict(int)
    for img in images:
        gts_img = list(gts_by_image.get(img, ()))
        for k in classes:
            class_ranked = [(r, d) for r, d in ranked_by_image[img] if d.class_id == k]
            class_gts = [g for g in gts_img if g.class_id == k]
            if not class_ranked and not class_gts:
                continue
            for rng in range_names:
                for t in IOU_THRESHOLDS:
                    recs, cnt = _match_class(class_ranked, class_gts, t, rng)
                    records[(k, rng, t)].extend(recs)
                    if t == IOU_THRESHOLDS[0]:
                        counted[(k, rng)] += cnt

    def ap_values(rng: str, t: float | None) -> list[float]:
        vals = []
        for k in classes:
            cnt = counted[(k, rng)]
            if cnt <= 0:
                continue
            if t is None:
                vals.append(
                    sum(average_precision(records[(k, rng, ti)], cnt) for ti in IOU_THRESHOLDS)
                    / len(IOU_THRESHOLDS)
                )
            else:
                vals.append(average_precision(records[(k, rng, t)], cnt))
        return vals

    def ar_values(rng: str, budget: int) -> list[float]:
        vals = []
        for k in classes:
            cnt = counted[(k, rng)]
            if cnt <= 0:
                continue
            per_t = []
            for t in IOU_THRESHOLDS:
                recs = [r for r in records[(k, rng, t)] if r.rank < budget]
                per_t.append(sum(1 for r in recs if r.matched) / cnt)
            vals.append(sum(per_t) / len(per_t))
        return vals

    return EvalSummary(
        ap=_mean_or_sentinel(ap_values("all", None)),
        ap50=_mean_or_sentinel(ap_values("all", IOU_THRESHOLDS[0])),
        ap75=_mean_or_sentinel(ap_values("all", IOU_THRESHOLDS[5])),
        ap_small=_mean_or_sentinel(ap_values("small", None)),
        ap_medium=_mean_or_sentinel(ap_values("medium", None)),
        ap_large=_mean_or_sentinel(ap_values("large", None)),
        ar1=_mean_or_sentinel(ar_values("all", 1)),
        ar10=_mean_or_sentinel(ar_values("all", 10)),
        ar100=_mean_or_sentinel(ar_values("all", 100)),
        ar_small=_mean_or_sentinel(ar_values("small", 100)),
        ar_medium=_mean_or_sentinel(ar_values("medium", 100)),
        ar_large=_mean_or_sentinel(ar_values("large", 100)),
    )


# ---------------------------------------------------------------------------
# threshold sweep


PROXIMITY_ALGORITHMS = ("confluence", "confluence_nms")


def default_grid(algorithm: str) -> list[float]:
    """Default sweep grid: 0.1-1.5 for proximity thresholds, 0-1 for IoU."""
    if algorithm in PROXIMITY_ALGORITHMS:
        return [round(0.1 * i, 10) for i in range(1, 16)]
    return [round(0.1 * i, 10) for i in range(0, 11)]


def default_band(algorithm: str) -> tuple[float, float]:
    """Default stability band: the empirically flat region of each family."""
    if algorithm in PROXIMITY_ALGORITHMS:
        return (0.5, 0.8)
    return (0.3, 0.6)


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    summary: EvalSummary


@dataclass
class SweepResult:
    points: list[SweepPoint]
    band: tuple[float, float]
    band_stability: float | None  # max - min AP inside the band; None if band empty


def threshold_sweep(
    dets_by_image: Mapping[int, Sequence[Detection]],
    gts_by_image: Mapping[int, Sequence[GroundTruthBox]],
    config: SuppressionConfig,
    thresholds: Sequence[float] | None = None,
    *,
    band: tuple[float, float] | None = None,
) -> SweepResult:
    """Run suppress-then-evaluate once per threshold.

    The swept knob is ``confluence_threshold`` for the proximity
    algorithms and ``iou_threshold`` for the IoU baselines.  Reports the
    max - min spread of AP inside the stability band.
    """
    if thresholds is None:
        thresholds = default_grid(config.algorithm)
    if band is None:
        band = default_band(config.algorithm)
    images = sorted(set(dets_by_image) | set(gts_by_image))
    points: list[SweepPoint] = []
    for t in thresholds:
        if config.algorithm in PROXIMITY_ALGORITHMS:
            cfg = replace(config, confluence_threshold=t)
        else:
            cfg = replace(config, iou_threshold=t)
        suppressed = {
            img: result_detections(suppress(list(dets_by_image.get(img, ())), cfg))
            for img in images
        }
        points.append(SweepPoint(float(t), coco_summary(suppressed, gts_by_image)))
    lo, hi = band
    in_band = [p.summary.ap for p in points if lo - 1e-9 <= p.threshold <= hi + 1e-9]
    stability = (max(in_band) - min(in_band)) if in_band else None
    return SweepResult(points, (float(lo), float(hi)), stability)


def summary_rows(summary: EvalSummary, threshold: float | None = None) -> list[tuple[str, str, str]]:
    """Flatten a summary into (threshold, metric, value) rows for CSV output."""
    t = "" if threshold is None else format(threshold, "g")
    return [(t, name, repr(value)) for name, value in summary.items()]
