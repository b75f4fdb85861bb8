"""Bounding-box suppression algorithms.

Four algorithms share one configuration surface:

* ``confluence`` — proximity-driven selection.  Every box accumulates the
  normalized proximity of the boxes closer than the threshold ``C_t``
  (its *cluster*).  The box minimizing ``mean proximity * (1 - score)``
  is retained and its cluster is removed (or decayed), until the pool is
  empty.  Well-placed boxes agree tightly with their neighbours, so a low
  weighted proximity marks the best box of a cluster even when its raw
  confidence is not the maximum.
* ``confluence_nms`` — classic greedy scaffold with the proximity test:
  retain the highest-scoring box, remove (or decay) every remaining box
  whose normalized proximity to it falls below ``C_t``.
* ``greedy_nms`` — retain the highest-scoring box, remove boxes with
  IoU strictly above ``iou_threshold``.
* ``soft_nms`` — like greedy, but overlapping boxes are rescored instead
  of removed (linear or gaussian), dropping only below ``score_floor``.

Decay semantics differ by family.  For ``soft_nms`` a *high* overlap is
duplicate evidence, so scores shrink as IoU grows.  For the proximity
algorithms a *small* proximity is duplicate evidence, so scores shrink as
the proximity approaches zero (linear: ``s * (P / C_t)`` clamped to
``[0, s]``; gaussian: ``s * (1 - exp(-P^2 / sigma))``).

Internals are vectorized with numpy; the pairwise proximity matrix is
computed with exactly the same operation order as
:func:`confluence.geometry.normalized_proximity`, so matrix entries are
bit-identical to the scalar metric.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .geometry import BoxCorners, normalized_proximity

__all__ = [
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
]

ALGORITHMS = ("confluence", "confluence_nms", "greedy_nms", "soft_nms")
DECAY_MODES = ("hard", "linear", "gaussian")

# Proximity algorithms treat a box with no neighbours as its own cluster.
# Its selection key is 2 + 2*(1 - score): clustered keys are bounded above
# by C_t <= 2 (mean proximity < C_t, factor < 1), so lone boxes always
# rank after clustered ones, ordered among themselves by descending score.
_LONE_BOX_BASE = 2.0


class ConfigError(ValueError):
    """Invalid suppression configuration."""


@dataclass(frozen=True)
class SuppressionConfig:
    """Shared configuration for every suppression algorithm.

    ``confluence_threshold`` (``C_t``) bounds the normalized proximity under
    which two boxes are considered duplicates; ``iou_threshold`` plays the
    same role for the IoU-based baselines.  Scores below ``score_floor``
    never survive suppression.  With ``class_agnostic`` set, every box
    competes in one pool regardless of class.
    """

    algorithm: str = "confluence"
    confluence_threshold: float = 0.7
    iou_threshold: float = 0.5
    decay: str = "hard"
    sigma: float = 0.5
    score_floor: float = 0.01
    class_agnostic: bool = False

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        if self.decay not in DECAY_MODES:
            raise ConfigError(f"unknown decay mode {self.decay!r}; expected one of {DECAY_MODES}")
        if not (0.0 < self.confluence_threshold <= 2.0):
            raise ConfigError(
                f"confluence_threshold must lie in (0, 2], got {self.confluence_threshold}"
            )
        if not (0.0 <= self.iou_threshold <= 1.0):
            raise ConfigError(f"iou_threshold must lie in [0, 1], got {self.iou_threshold}")
        if not self.sigma > 0.0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not (0.0 < self.score_floor < 1.0):
            raise ConfigError(f"score_floor must lie in (0, 1), got {self.score_floor}")
        if self.algorithm == "soft_nms" and self.decay == "hard":
            raise ConfigError(
                "soft_nms with hard decay is greedy_nms; use algorithm='greedy_nms' "
                "or pick decay='linear'/'gaussian'"
            )
        if self.algorithm == "greedy_nms" and self.decay != "hard":
            raise ConfigError(
                "greedy_nms removes boxes outright; use algorithm='soft_nms' for "
                f"decay={self.decay!r}"
            )


@dataclass(frozen=True)
class Detection:
    """One detector output box.

    ``stable_id`` is a dataset-unique integer (file order at ingestion)
    used for deterministic tie-breaking and result bookkeeping.
    """

    box: BoxCorners
    score: float
    class_id: int
    stable_id: int
    image_id: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.score <= 1.0):
            raise ValueError(f"detection score must lie in (0, 1], got {self.score}")
        if self.box.is_degenerate:
            raise ValueError(f"detection box must be non-degenerate, got {self.box.as_xyxy()}")


@dataclass(frozen=True)
class ClusterState:
    """Per-box neighbourhood bookkeeping for the confluence algorithm.

    ``neighbors`` holds the stable_ids of same-pool boxes whose normalized
    proximity to the owner is strictly below the threshold (never the
    owner itself); ``proximity_sum`` is the sum of those proximities, and
    ``weighted_proximity`` the selection key (lone boxes carry the
    sentinel ``2 + 2*(1 - score)``).
    """

    proximity_sum: float
    neighbors: frozenset[int]
    weighted_proximity: float


@dataclass(frozen=True)
class DecayEvent:
    """Audit-trail entry: what happened to one box during suppression."""

    stable_id: int
    caused_by: int
    value: float  # proximity or IoU that drove the event
    old_score: float
    new_score: float
    removed: bool


@dataclass
class SuppressionResult:
    """Outcome of one suppression pass over a single image.

    ``kept`` pairs each retained detection (coordinates untouched) with its
    final score — decayed when a soft mode touched it.  Every final score
    is at or above the configured floor.
    """

    kept: list[tuple[Detection, float]]
    removed_count: int
    audit: list[DecayEvent] | None = None


def mean_proximity(target: Detection, cluster: Iterable[Detection]) -> float:
    """Arithmetic mean of normalized proximities from ``target`` to ``cluster``.

    The cluster must be non-empty and must not contain the target itself.
    """
    total = 0.0
    count = 0
    for other in cluster:
        if other.stable_id == target.stable_id:
            raise ValueError("cluster must not contain the target detection")
        total += normalized_proximity(target.box, other.box)
        count += 1
    if count == 0:
        raise ValueError("cluster must be non-empty")
    return total / count


def weighted_proximity(mean_p: float, score: float) -> float:
    """Confidence-weighted proximity ``mean_p * (1 - score)``.

    Strictly decreasing in score for positive mean proximity, so among
    boxes with equal mean proximity the higher-scoring one always wins
    the argmin selection.
    """
    if mean_p < 0.0:
        raise ValueError(f"mean proximity must be non-negative, got {mean_p}")
    if not (0.0 < score <= 1.0):
        raise ValueError(f"score must lie in (0, 1], got {score}")
    return mean_p * (1.0 - score)


def decay_score(score: float, value: float, config: SuppressionConfig) -> float:
    """Rescore a suppressed box.

    ``value`` is the normalized proximity for the proximity algorithms and
    the IoU for ``soft_nms``.  Hard decay always returns 0.  The result
    never exceeds the input score.
    """
    if config.decay == "hard":
        return 0.0
    if config.algorithm == "soft_nms":
        if config.decay == "linear":
            if value > config.iou_threshold:
                return score * (1.0 - value)
            return score
        return score * math.exp(-(value * value) / config.sigma)
    # Proximity family: small proximity = strong duplicate evidence.
    if config.decay == "linear":
        scaled = score * (value / config.confluence_threshold)
        return min(score, max(0.0, scaled))
    return score * (1.0 - math.exp(-(value * value) / config.sigma))


# ---------------------------------------------------------------------------
# vectorized internals


def _det_arrays(dets: Sequence[Detection]):
    n = len(dets)
    x1 = np.empty(n, dtype=np.float64)
    y1 = np.empty(n, dtype=np.float64)
    x2 = np.empty(n, dtype=np.float64)
    y2 = np.empty(n, dtype=np.float64)
    scores = np.empty(n, dtype=np.float64)
    sids = np.empty(n, dtype=np.int64)
    for i, d in enumerate(dets):
        x1[i], y1[i], x2[i], y2[i] = d.box.as_xyxy()
        scores[i] = d.score
        sids[i] = d.stable_id
    return x1, y1, x2, y2, scores, sids


def _proximity_matrix(x1, y1, x2, y2) -> np.ndarray:
    """Pairwise normalized proximity, bit-identical to the scalar metric.

    Mirrors normalize-then-difference arithmetic in the same operation
    order as the scalar path: per-axis min-max over the pair, then
    |upper-corner deltas| + |lower-corner deltas| grouped per corner.
    """

    def _axis(lo_vals, hi_vals):
        lo = np.minimum(lo_vals[:, None], lo_vals[None, :])
        hi = np.maximum(hi_vals[:, None], hi_vals[None, :])
        span = hi - lo
        safe = np.where(span > 0.0, span, 1.0)
        # coordinates normalize to (c - lo) / span; a zero-range axis has
        # every coordinate equal to lo, so the quotient is exactly 0.
        nu_i = (lo_vals[:, None] - lo) / safe
        nu_j = (lo_vals[None, :] - lo) / safe
        nv_i = (hi_vals[:, None] - lo) / safe
        nv_j = (hi_vals[None, :] - lo) / safe
        return np.abs(nu_j - nu_i), np.abs(nv_j - nv_i)

    dux, dvx = _axis(x1, x2)
    duy, dvy = _axis(y1, y2)
    return (dux + duy) + (dvx + dvy)


def _iou_row(m: int, x1, y1, x2, y2, areas) -> np.ndarray:
    ix = np.minimum(x2[m], x2) - np.maximum(x1[m], x1)
    iy = np.minimum(y2[m], y2) - np.maximum(y1[m], y1)
    inter = np.where((ix > 0.0) & (iy > 0.0), ix * iy, 0.0)
    union = areas[m] + areas - inter
    return np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)


def _pick(idx: np.ndarray, primary: np.ndarray, scores, coords, sids, *, largest: bool) -> int:
    """Deterministic selection with the tie-break ladder.

    Primary key first (min or max), then higher score, then lexicographic
    box coordinates (x1, y1, x2, y2), then stable_id.
    """
    vals = primary[idx]
    best = vals.max() if largest else vals.min()
    cand = idx[vals == best]
    if len(cand) > 1:
        s = scores[cand]
        cand = cand[s == s.max()]
        if len(cand) > 1:
            x1, y1, x2, y2 = coords
            order = np.lexsort(
                (sids[cand], y2[cand], x2[cand], y1[cand], x1[cand])
            )
            cand = cand[order[:1]]
    return int(cand[0])


def _confluence_group(dets, config, audit):
    n = len(dets)
    x1, y1, x2, y2, scores, sids = _det_arrays(dets)
    coords = (x1, y1, x2, y2)
    prox = _proximity_matrix(x1, y1, x2, y2)
    nb = prox < config.confluence_threshold
    np.fill_diagonal(nb, False)
    counts = nb.sum(axis=1)
    sums = np.where(nb, prox, 0.0).sum(axis=1)
    clustered = counts > 0
    mean_p = np.zeros(n, dtype=np.float64)
    np.divide(sums, counts, out=mean_p, where=clustered)
    pw = np.where(
        clustered,
        mean_p * (1.0 - scores),
        _LONE_BOX_BASE + 2.0 * (1.0 - scores),
    )

    active = np.ones(n, dtype=bool)
    kept: list[tuple[Detection, float]] = []
    while active.any():
        idx = np.flatnonzero(active)
        m = _pick(idx, pw, scores, coords, sids, largest=False)
        kept.append((dets[m], float(scores[m])))
        active[m] = False
        neigh = np.flatnonzero(active & nb[m])
        if config.decay == "hard":
            active[neigh] = False
            if audit is not None:
                for j in neigh:
                    audit.append(
                        DecayEvent(int(sids[j]), int(sids[m]), float(prox[m, j]),
                                   float(scores[j]), 0.0, True)
                    )
        else:
            for j in neigh:
                old = float(scores[j])
                new = decay_score(old, float(prox[m, j]), config)
                removed = new < config.score_floor
                if removed:
                    active[j] = False
                else:
                    scores[j] = new
                    # cluster membership is geometric and cached; only the
                    # confidence factor of the selection key moves.
                    pw[j] = mean_p[j] * (1.0 - new)
                if audit is not None:
                    audit.append(
                        DecayEvent(int(sids[j]), int(sids[m]), float(prox[m, j]),
                                   old, new, removed)
                    )
    return kept


def _confluence_nms_group(dets, config, audit):
    n = len(dets)
    x1, y1, x2, y2, scores, sids = _det_arrays(dets)
    coords = (x1, y1, x2, y2)
    prox = _proximity_matrix(x1, y1, x2, y2)
    active = np.ones(n, dtype=bool)
    kept: list[tuple[Detection, float]] = []
    while active.any():
        idx = np.flatnonzero(active)
        m = _pick(idx, scores, scores, coords, sids, largest=True)
        kept.append((dets[m], float(scores[m])))
        active[m] = False
        close = np.flatnonzero(active & (prox[m] < config.confluence_threshold))
        if config.decay == "hard":
            active[close] = False
            if audit is not None:
                for j in close:
                    audit.append(
                        DecayEvent(int(sids[j]), int(sids[m]), float(prox[m, j]),
                                   float(scores[j]), 0.0, True)
                    )
        else:
            for j in close:
                old = float(scores[j])
                new = decay_score(old, float(prox[m, j]), config)
                removed = new < config.score_floor
                if removed:
                    active[j] = False
                else:
                    scores[j] = new
                if audit is not None:
                    audit.append(
                        DecayEvent(int(sids[j]), int(sids[m]), float(prox[m, j]),
                                   old, new, removed)
                    )
    return kept


def _greedy_nms_group(dets, config, audit):
    n = len(dets)
    x1, y1, x2, y2, scores, sids = _det_arrays(dets)
    areas = (x2 - x1) * (y2 - y1)
    # scores never change, so one deterministic pass over the sorted order
    # suffices: score desc, then coords, then stable_id.
    order = np.lexsort((sids, y2, x2, y1, x1, -scores))
    active = np.ones(n, dtype=bool)
    kept: list[tuple[Detection, float]] = []
    for m in order:
        if not active[m]:
            continue
        kept.append((dets[m], float(scores[m])))
        active[m] = False
        row = _iou_row(int(m), x1, y1, x2, y2, areas)
        out = np.flatnonzero(active & (row > config.iou_threshold))
        active[out] = False
        if audit is not None:
            for j in out:
                audit.append(
                    DecayEvent(int(sids[j]), int(sids[m]), float(row[j]),
                               float(scores[j]), 0.0, True)
                )
    return kept


def _soft_nms_group(dets, config, audit):
    n = len(dets)
    x1, y1, x2, y2, scores, sids = _det_arrays(dets)
    coords = (x1, y1, x2, y2)
    areas = (x2 - x1) * (y2 - y1)
    active = np.ones(n, dtype=bool)
    kept: list[tuple[Detection, float]] = []
    while active.any():
        idx = np.flatnonzero(active)
        m = _pick(idx, scores, scores, coords, sids, largest=True)
        kept.append((dets[m], float(scores[m])))
        active[m] = False
        rest = np.flatnonzero(active)
        if len(rest) == 0:
            break
        row = _iou_row(int(m), x1, y1, x2, y2, areas)[rest]
        if config.decay == "linear":
            factor = np.where(row > config.iou_threshold, 1.0 - row, 1.0)
        else:
            factor = np.exp(-(row * row) / config.sigma)
        old = scores[rest].copy()
        scores[rest] = old * factor
        dropped = scores[rest] < config.score_floor
        active[rest[dropped]] = False
        if audit is not None:
            for k, j in enumerate(rest):
                if factor[k] == 1.0 and not dropped[k]:
                    continue
                audit.append(
                    DecayEvent(int(sids[j]), int(sids[m]), float(row[k]),
                               float(old[k]), float(scores[j]), bool(dropped[k]))
                )
    return kept


_GROUP_CORES = {
    "confluence": _confluence_group,
    "confluence_nms": _confluence_nms_group,
    "greedy_nms": _greedy_nms_group,
    "soft_nms": _soft_nms_group,
}


def _grouped(detections: Sequence[Detection], config: SuppressionConfig):
    if config.class_agnostic:
        return [list(detections)]
    by_class: dict[int, list[Detection]] = defaultdict(list)
    for d in detections:
        by_class[d.class_id].append(d)
    return [by_class[k] for k in sorted(by_class)]


def _run(detections: Sequence[Detection], config: SuppressionConfig,
         collect_audit: bool) -> SuppressionResult:
    detections = list(detections)
    audit: list[DecayEvent] | None = [] if collect_audit else None
    if not detections:
        return SuppressionResult([], 0, audit)
    image_ids = {d.image_id for d in detections}
    if len(image_ids) > 1:
        raise ValueError(
            f"suppression operates on a single image; got image_ids {sorted(image_ids)}"
        )
    core = _GROUP_CORES[config.algorithm]
    kept: list[tuple[Detection, float]] = []
    for group in _grouped(detections, config):
        kept.extend(core(group, config, audit))
    return SuppressionResult(kept, len(detections) - len(kept), audit)


def confluence(detections: Sequence[Detection], config: SuppressionConfig | None = None,
               *, collect_audit: bool = False) -> SuppressionResult:
    """Proximity-cluster suppression: keep each cluster's weighted-proximity argmin."""
    config = replace(config or SuppressionConfig(), algorithm="confluence")
    return _run(detections, config, collect_audit)


def confluence_nms(detections: Sequence[Detection], config: SuppressionConfig | None = None,
                   *, collect_audit: bool = False) -> SuppressionResult:
    """Score-greedy suppression with the normalized-proximity duplicate test."""
    config = replace(config or SuppressionConfig(), algorithm="confluence_nms")
    return _run(detections, config, collect_audit)


def greedy_nms(detections: Sequence[Detection], config: SuppressionConfig | None = None,
               *, collect_audit: bool = False) -> SuppressionResult:
    """Classic NMS: keep score maxima, remove boxes with IoU above the threshold."""
    config = replace(config or SuppressionConfig(), algorithm="greedy_nms", decay="hard")
    return _run(detections, config, collect_audit)


def soft_nms(detections: Sequence[Detection], config: SuppressionConfig | None = None,
             *, collect_audit: bool = False) -> SuppressionResult:
    """Soft suppression: overlapping boxes are rescored, not removed."""
    base = config or SuppressionConfig(algorithm="soft_nms", decay="gaussian")
    config = replace(base, algorithm="soft_nms")
    return _run(detections, config, collect_audit)


def suppress(detections: Sequence[Detection], config: SuppressionConfig,
             *, collect_audit: bool = False) -> SuppressionResult:
    """Run the algorithm selected by ``config.algorithm``."""
    return _run(detections, config, collect_audit)


def cluster_states(detections: Sequence[Detection],
                   config: SuppressionConfig) -> dict[int, ClusterState]:
    """Initial per-box cluster bookkeeping, keyed by stable_id.

    Reflects the state the confluence algorithm starts from (before any
    selection round).  Grouping follows ``config.class_agnostic``.
    """
    detections = list(detections)
    states: dict[int, ClusterState] = {}
    for group in _grouped(detections, config):
        if not group:
            continue
        x1, y1, x2, y2, scores, sids = _det_arrays(group)
        prox = _proximity_matrix(x1, y1, x2, y2)
        nb = prox < config.confluence_threshold
        np.fill_diagonal(nb, False)
        for i, det in enumerate(group):
            neighbors = frozenset(int(sids[j]) for j in np.flatnonzero(nb[i]))
            if neighbors:
                total = float(np.where(nb[i], prox[i], 0.0).sum())
                pw = weighted_proximity(total / len(neighbors), det.score)
            else:
                total = 0.0
                pw = _LONE_BOX_BASE + 2.0 * (1.0 - det.score)
            states[det.stable_id] = ClusterState(total, neighbors, pw)
    return states


def result_detections(result: SuppressionResult) -> list[Detection]:
    """Kept detections with their final (possibly decayed) scores applied."""
    return [replace(d, score=s) for d, s in result.kept]
