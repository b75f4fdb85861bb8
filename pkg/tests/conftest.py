"""Shared fixtures: hand-traced detection sets and frozen evaluation values."""

from __future__ import annotations

import json

import pytest

from confluence import BoxCorners, Detection
from confluence.evaluation import GroundTruthBox


def make_detection(x1, y1, x2, y2, score, class_id=1, stable_id=0, image_id=0):
    return Detection(
        box=BoxCorners.from_xyxy(x1, y1, x2, y2),
        score=score,
        class_id=class_id,
        stable_id=stable_id,
        image_id=image_id,
    )


# --- three-box hand trace -------------------------------------------------
# A and B overlap heavily (normalized proximity 4/11); C sits far away.
# Confluence at C_t=0.7 keeps {B, C}: P_w(B) = 4/110 beats P_w(A) = 4/55,
# A is B's neighbor and is removed, C is a lone box retained afterwards.

ABC = [
    (0.0, 0.0, 10.0, 10.0, 0.8),     # A
    (1.0, 1.0, 11.0, 11.0, 0.9),     # B
    (100.0, 100.0, 110.0, 110.0, 0.5),  # C
]


@pytest.fixture
def abc_detections():
    return [
        make_detection(*coords, stable_id=i) for i, coords in enumerate(ABC)
    ]


# --- occlusion fixture ----------------------------------------------------
# Two people, one partly behind the other.  A sloppy high-score box covers
# both; two tight boxes sit on the front person and one tight box on the
# occluded person.  Greedy NMS at IoU 0.5 keeps only the sloppy box (it
# overlaps everything above threshold), losing both objects.  Confluence
# at C_t=0.7 picks the most confluent front box first, which leaves the
# occluded box outside the removal radius (proximity 0.79 >= C_t), so both
# objects survive.

OCCLUSION_GT_A = (100.0, 50.0, 220.0, 350.0)
OCCLUSION_GT_B = (160.0, 70.0, 275.0, 330.0)

OCCLUSION_DETS = [
    (95.0, 45.0, 280.0, 355.0, 0.92),    # sloppy box over both people
    (100.0, 50.0, 220.0, 350.0, 0.90),   # tight on the front person
    (102.0, 52.0, 222.0, 352.0, 0.88),   # jittered duplicate of the above
    (160.0, 70.0, 275.0, 330.0, 0.85),   # tight on the occluded person
]

# Frozen expected summaries (independently scripted evaluator, exact).
OCCLUSION_CONFLUENCE_SUMMARY = {
    "ap": 1.0,
    "ap50": 1.0,
    "ap75": 1.0,
    "ap_small": -1.0,
    "ap_medium": -1.0,
    "ap_large": 1.0,
    "ar1": 0.5,
    "ar10": 1.0,
    "ar100": 1.0,
    "ar_small": -1.0,
    "ar_medium": -1.0,
    "ar_large": 1.0,
}
OCCLUSION_GREEDY_SUMMARY = {
    "ap": 0.15148514851485148,
    "ap50": 0.504950495049505,
    "ap75": 0.0,
    "ap_small": -1.0,
    "ap_medium": -1.0,
    "ap_large": 0.15148514851485148,
    "ar1": 0.15,
    "ar10": 0.15,
    "ar100": 0.15,
    "ar_small": -1.0,
    "ar_medium": -1.0,
    "ar_large": 0.15,
}


@pytest.fixture
def occlusion_detections():
    return [
        make_detection(*coords, stable_id=i) for i, coords in enumerate(OCCLUSION_DETS)
    ]


@pytest.fixture
def occlusion_ground_truth():
    return {
        0: [
            GroundTruthBox(BoxCorners.from_xyxy(*OCCLUSION_GT_A), 1, 0),
            GroundTruthBox(BoxCorners.from_xyxy(*OCCLUSION_GT_B), 1, 0),
        ]
    }


# --- ten-image fixture ----------------------------------------------------
# Mostly clean matches plus exactly three clear false positives (a stray
# box on image 2, a stray box on the GT-free image 5, a duplicate on image
# 8), one crowd region absorbing a detection (image 3), one localization
# slip (image 6, IoU 0.8 subset box), one missed object (image 7), with
# box sizes spanning all three area ranges.

# (image_id, class_id, x1, y1, x2, y2, score)
TEN_IMAGE_DETS = [
    (0, 1, 0.0, 0.0, 100.0, 100.0, 0.95),
    (1, 1, 10.0, 10.0, 60.0, 60.0, 0.90),
    (2, 1, 5.0, 5.0, 25.0, 25.0, 0.85),
    (2, 1, 200.0, 200.0, 240.0, 240.0, 0.60),
    (3, 1, 50.0, 50.0, 150.0, 150.0, 0.80),
    (3, 1, 300.0, 300.0, 340.0, 340.0, 0.70),
    (4, 1, 0.0, 0.0, 40.0, 40.0, 0.90),
    (4, 2, 100.0, 100.0, 140.0, 140.0, 0.75),
    (5, 1, 400.0, 400.0, 440.0, 440.0, 0.55),
    (6, 1, 20.0, 0.0, 100.0, 100.0, 0.88),
    (8, 1, 0.0, 0.0, 80.0, 80.0, 0.92),
    (8, 1, 1.0, 1.0, 81.0, 81.0, 0.65),
    (9, 1, 10.0, 10.0, 28.0, 28.0, 0.88),
]

# (image_id, class_id, x1, y1, x2, y2, iscrowd)
TEN_IMAGE_GTS = [
    (0, 1, 0.0, 0.0, 100.0, 100.0, 0),
    (1, 1, 10.0, 10.0, 60.0, 60.0, 0),
    (2, 1, 5.0, 5.0, 25.0, 25.0, 0),
    (3, 1, 50.0, 50.0, 150.0, 150.0, 0),
    (3, 1, 280.0, 280.0, 360.0, 360.0, 1),
    (4, 1, 0.0, 0.0, 40.0, 40.0, 0),
    (4, 2, 100.0, 100.0, 140.0, 140.0, 0),
    (6, 1, 0.0, 0.0, 100.0, 100.0, 0),
    (7, 1, 30.0, 30.0, 90.0, 90.0, 0),
    (8, 1, 0.0, 0.0, 80.0, 80.0, 0),
    (9, 1, 10.0, 10.0, 28.0, 28.0, 0),
]

# Frozen via the independently scripted evaluator; exact to the bit.
TEN_IMAGE_SUMMARY = {
    "ap": 0.9181311881188119,
    "ap50": 0.9405940594059405,
    "ap75": 0.9405940594059405,
    "ap_small": 1.0,
    "ap_medium": 0.8762376237623761,
    "ap_large": 0.8990099009900989,
    "ar1": 0.42777777777777787,
    "ar10": 0.9277777777777778,
    "ar100": 0.9277777777777778,
    "ar_small": 1.0,
    "ar_medium": 0.875,
    "ar_large": 0.9,
}


def ten_image_detections():
    by_image = {i: [] for i in range(10)}
    for sid, (img, cls, x1, y1, x2, y2, score) in enumerate(TEN_IMAGE_DETS):
        by_image[img].append(
            make_detection(x1, y1, x2, y2, score, class_id=cls,
                           stable_id=sid, image_id=img)
        )
    return by_image


def ten_image_ground_truth():
    by_image = {i: [] for i in range(10)}
    for img, cls, x1, y1, x2, y2, crowd in TEN_IMAGE_GTS:
        by_image[img].append(
            GroundTruthBox(BoxCorners.from_xyxy(x1, y1, x2, y2), cls, img,
                           ignore=bool(crowd))
        )
    return by_image


@pytest.fixture
def ten_image_fixture():
    return ten_image_detections(), ten_image_ground_truth()


# --- file helpers ----------------------------------------------------------


def detection_records(rows):
    """(image_id, class_id, x1, y1, x2, y2, score) tuples -> JSON records."""
    return [
        {
            "image_id": img,
            "category_id": cls,
            "bbox": [x1, y1, x2 - x1, y2 - y1],
            "score": score,
        }
        for img, cls, x1, y1, x2, y2, score in rows
    ]


def write_detection_file(path, rows):
    path.write_text(json.dumps(detection_records(rows)), encoding="utf-8")
    return str(path)


def write_ground_truth_file(path, gt_rows, image_ids=None):
    """(image_id, class_id, x1, y1, x2, y2, iscrowd) tuples -> annotation file."""
    if image_ids is None:
        image_ids = sorted({row[0] for row in gt_rows})
    payload = {
        "images": [{"id": i, "width": 1000, "height": 1000} for i in image_ids],
        "annotations": [
            {
                "id": k,
                "image_id": img,
                "category_id": cls,
                "bbox": [x1, y1, x2 - x1, y2 - y1],
                "iscrowd": crowd,
            }
            for k, (img, cls, x1, y1, x2, y2, crowd) in enumerate(gt_rows)
        ],
        "categories": [{"id": c, "name": f"class-{c}"}
                       for c in sorted({row[1] for row in gt_rows})],
    }
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


ABC_ROWS = [(0, 1, *coords) for coords in ABC]
OCCLUSION_DET_ROWS = [(0, 1, *coords) for coords in OCCLUSION_DETS]
OCCLUSION_GT_ROWS = [
    (0, 1, *OCCLUSION_GT_A, 0),
    (0, 1, *OCCLUSION_GT_B, 0),
]
