"""Geometry layer: Manhattan proximity, normalization, IoU."""

from __future__ import annotations

import math

import numpy as np
import pytest

from confluence import (
    BoxCorners,
    Point2,
    iou,
    manhattan_distance,
    normalize_pair,
    normalized_proximity,
    raw_proximity,
)

N_CASES = 10_000


def random_boxes(rng, n, lo=0.0, hi=1000.0, max_side=200.0):
    x1 = rng.uniform(lo, hi, size=n)
    y1 = rng.uniform(lo, hi, size=n)
    w = rng.uniform(1e-3, max_side, size=n)
    h = rng.uniform(1e-3, max_side, size=n)
    return [
        BoxCorners.from_xyxy(x1[i], y1[i], x1[i] + w[i], y1[i] + h[i])
        for i in range(n)
    ]


# --- construction and validation -------------------------------------------


def test_point_rejects_non_finite():
    with pytest.raises(ValueError):
        Point2(float("nan"), 0.0)
    with pytest.raises(ValueError):
        Point2(0.0, float("inf"))


def test_box_requires_ordered_corners():
    with pytest.raises(ValueError):
        BoxCorners.from_xyxy(5.0, 0.0, 4.0, 10.0)
    with pytest.raises(ValueError):
        BoxCorners.from_xyxy(0.0, 10.0, 4.0, 9.0)


def test_box_accessors():
    b = BoxCorners.from_xyxy(2.0, 3.0, 10.0, 7.0)
    assert b.as_xyxy() == (2.0, 3.0, 10.0, 7.0)
    assert b.width == 8.0
    assert b.height == 4.0
    assert b.area == 32.0
    assert not b.is_degenerate
    assert BoxCorners.from_xyxy(1.0, 1.0, 1.0, 5.0).is_degenerate


def test_manhattan_distance_basics():
    assert manhattan_distance(Point2(0.0, 0.0), Point2(3.0, 4.0)) == 7.0
    assert manhattan_distance(Point2(-1.0, 2.0), Point2(1.0, -2.0)) == 6.0


# --- worked examples --------------------------------------------------------


def test_raw_proximity_equals_four_for_both_worked_pairs():
    # Both pairs happen to have raw proximity exactly 4 before
    # normalization, which is what motivates normalizing at all.
    b1 = BoxCorners.from_xyxy(2.0, 4.0, 3.0, 6.0)
    b2 = BoxCorners.from_xyxy(3.0, 3.0, 4.0, 5.0)
    b3 = BoxCorners.from_xyxy(9.0, 3.0, 19.0, 11.0)
    b4 = BoxCorners.from_xyxy(10.0, 2.0, 20.0, 10.0)
    assert raw_proximity(b1, b2) == 4.0
    assert raw_proximity(b3, b4) == 4.0


def test_normalized_proximity_worked_values():
    b1 = BoxCorners.from_xyxy(2.0, 4.0, 3.0, 6.0)
    b2 = BoxCorners.from_xyxy(3.0, 3.0, 4.0, 5.0)
    b3 = BoxCorners.from_xyxy(9.0, 3.0, 19.0, 11.0)
    b4 = BoxCorners.from_xyxy(10.0, 2.0, 20.0, 10.0)
    assert normalized_proximity(b1, b2) == pytest.approx(5.0 / 3.0, abs=1e-12)
    assert normalized_proximity(b3, b4) == pytest.approx(40.0 / 99.0, abs=1e-12)


def test_normalize_pair_maps_union_extent_to_unit_square():
    a = BoxCorners.from_xyxy(2.0, 4.0, 3.0, 6.0)
    b = BoxCorners.from_xyxy(3.0, 3.0, 4.0, 5.0)
    na, nb = normalize_pair(a, b)
    xs = [na.upper_left.x, na.lower_right.x, nb.upper_left.x, nb.lower_right.x]
    ys = [na.upper_left.y, na.lower_right.y, nb.upper_left.y, nb.lower_right.y]
    assert min(xs) == 0.0 and max(xs) == 1.0
    assert min(ys) == 0.0 and max(ys) == 1.0


def test_normalize_pair_zero_span_collapses_to_zero():
    # Identical degenerate extents: the axis has zero range and maps to 0.
    a = BoxCorners.from_xyxy(5.0, 1.0, 5.0, 2.0)
    b = BoxCorners.from_xyxy(5.0, 1.0, 5.0, 2.0)
    na, nb = normalize_pair(a, b)
    assert na.upper_left.x == 0.0 and na.lower_right.x == 0.0
    assert nb.upper_left.x == 0.0 and nb.lower_right.x == 0.0


def test_identical_boxes_have_zero_proximity():
    b = BoxCorners.from_xyxy(10.0, 20.0, 30.0, 50.0)
    assert normalized_proximity(b, b) == 0.0


def test_iou_worked_values():
    a = BoxCorners.from_xyxy(0.0, 0.0, 10.0, 10.0)
    b = BoxCorners.from_xyxy(5.0, 5.0, 15.0, 15.0)
    assert iou(a, b) == pytest.approx(25.0 / 175.0)
    assert iou(a, a) == 1.0
    c = BoxCorners.from_xyxy(20.0, 20.0, 30.0, 30.0)
    assert iou(a, c) == 0.0


def test_iou_degenerate_box_is_zero():
    a = BoxCorners.from_xyxy(0.0, 0.0, 10.0, 10.0)
    d = BoxCorners.from_xyxy(5.0, 5.0, 5.0, 9.0)
    assert iou(a, d) == 0.0
    assert iou(d, d) == 0.0


# --- property suites (seeded, >= 10^4 cases each) ---------------------------


def test_proximity_symmetry_property():
    rng = np.random.default_rng(101)
    boxes_a = random_boxes(rng, N_CASES)
    boxes_b = random_boxes(rng, N_CASES)
    for a, b in zip(boxes_a, boxes_b):
        assert normalized_proximity(a, b) == normalized_proximity(b, a)
        assert raw_proximity(a, b) == raw_proximity(b, a)


def test_proximity_affine_invariance_property():
    # Translating and positively scaling both boxes together leaves the
    # normalized proximity unchanged (up to roundoff).
    rng = np.random.default_rng(102)
    boxes_a = random_boxes(rng, N_CASES, lo=0.0, hi=100.0)
    boxes_b = random_boxes(rng, N_CASES, lo=0.0, hi=100.0)
    scales = rng.uniform(0.01, 100.0, size=N_CASES)
    shifts_x = rng.uniform(-500.0, 500.0, size=N_CASES)
    shifts_y = rng.uniform(-500.0, 500.0, size=N_CASES)
    for i, (a, b) in enumerate(zip(boxes_a, boxes_b)):
        s, tx, ty = scales[i], shifts_x[i], shifts_y[i]

        def warp(box):
            x1, y1, x2, y2 = box.as_xyxy()
            return BoxCorners.from_xyxy(
                s * x1 + tx, s * y1 + ty, s * x2 + tx, s * y2 + ty
            )

        p0 = normalized_proximity(a, b)
        p1 = normalized_proximity(warp(a), warp(b))
        assert p1 == pytest.approx(p0, rel=1e-9, abs=1e-9)


def test_proximity_range_property():
    rng = np.random.default_rng(103)
    boxes_a = random_boxes(rng, N_CASES)
    boxes_b = random_boxes(rng, N_CASES)
    for a, b in zip(boxes_a, boxes_b):
        p = normalized_proximity(a, b)
        assert 0.0 <= p <= 4.0


def test_intersecting_pairs_stay_below_two_property():
    # Build pairs that are guaranteed to overlap: the second box starts
    # strictly inside the first.
    rng = np.random.default_rng(104)
    count = 0
    while count < N_CASES:
        x1, y1 = rng.uniform(0.0, 500.0, size=2)
        w1, h1 = rng.uniform(1.0, 200.0, size=2)
        a = BoxCorners.from_xyxy(x1, y1, x1 + w1, y1 + h1)
        ix = rng.uniform(x1, x1 + w1 * 0.999)
        iy = rng.uniform(y1, y1 + h1 * 0.999)
        w2, h2 = rng.uniform(1.0, 200.0, size=2)
        b = BoxCorners.from_xyxy(ix, iy, ix + w2, iy + h2)
        assert iou(a, b) > 0.0
        assert normalized_proximity(a, b) < 2.0
        count += 1


def test_disjoint_boxes_exceed_overlap_regime():
    # Far-apart boxes land in (2, 4]; the normalized gap dominates.
    a = BoxCorners.from_xyxy(0.0, 0.0, 1.0, 1.0)
    b = BoxCorners.from_xyxy(1000.0, 1000.0, 1001.0, 1001.0)
    assert normalized_proximity(a, b) > 3.9


def test_proximity_matches_manhattan_composition_property():
    # normalized_proximity must equal raw_proximity on the normalized pair;
    # this pins the composition rather than an independent formula.
    rng = np.random.default_rng(105)
    boxes_a = random_boxes(rng, N_CASES // 2)
    boxes_b = random_boxes(rng, N_CASES // 2)
    for a, b in zip(boxes_a, boxes_b):
        na, nb = normalize_pair(a, b)
        assert normalized_proximity(a, b) == raw_proximity(na, nb)


def test_iou_bounds_and_symmetry_property():
    rng = np.random.default_rng(106)
    boxes_a = random_boxes(rng, N_CASES)
    boxes_b = random_boxes(rng, N_CASES)
    for a, b in zip(boxes_a, boxes_b):
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert iou(b, a) == v


def test_high_iou_implies_small_proximity():
    # Overlap beyond IoU 0.5 forces normalized proximity well under the
    # 2.0 intersection bound; spot-check the empirical ceiling.
    rng = np.random.default_rng(107)
    worst = 0.0
    for _ in range(N_CASES // 2):
        x1, y1 = rng.uniform(0.0, 100.0, size=2)
        w, h = rng.uniform(5.0, 80.0, size=2)
        a = BoxCorners.from_xyxy(x1, y1, x1 + w, y1 + h)
        dx = rng.uniform(-0.2, 0.2) * w
        dy = rng.uniform(-0.2, 0.2) * h
        sw = rng.uniform(0.85, 1.15)
        sh = rng.uniform(0.85, 1.15)
        b = BoxCorners.from_xyxy(x1 + dx, y1 + dy, x1 + dx + w * sw, y1 + dy + h * sh)
        if iou(a, b) > 0.5:
            worst = max(worst, normalized_proximity(a, b))
    assert worst < 2.0 / 3.0 + 1e-9


def test_proximity_triangle_style_monotonicity():
    # Sliding a unit box away from a fixed one increases proximity.
    base = BoxCorners.from_xyxy(0.0, 0.0, 10.0, 10.0)
    last = -1.0
    for shift in range(0, 30):
        moved = BoxCorners.from_xyxy(
            float(shift), 0.0, float(shift) + 10.0, 10.0
        )
        p = normalized_proximity(base, moved)
        assert p >= last
        last = p


def test_raw_proximity_is_finite_sum_of_corner_distances():
    a = BoxCorners.from_xyxy(0.0, 0.0, 2.0, 2.0)
    b = BoxCorners.from_xyxy(1.0, 1.0, 3.0, 3.0)
    # upper-left distance 2, lower-right distance 2
    assert raw_proximity(a, b) == 4.0
    assert math.isfinite(normalized_proximity(a, b))
