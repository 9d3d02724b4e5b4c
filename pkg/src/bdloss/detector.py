"""Training-facing total loss: focal classification plus weighted box regression.

Class score vectors have ``n_classes + 1`` entries; the last index is
background.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .divergences import DivergenceConfig, box_pair_bd_loss
from .gaussian import SquareLikePolicy
from .geometry import rotated_iou

EPS_PROB = 1e-7
BACKGROUND = -1


@dataclass(frozen=True)
class TotalLossConfig:
    lam: float = 2.0
    pos_iou_thresh: float = 0.5
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")
        if not 0 < self.pos_iou_thresh < 1:
            raise ValueError(f"pos_iou_thresh must lie in (0, 1), got {self.pos_iou_thresh}")


@dataclass
class AnchorBatch:
    anchors: list
    class_scores: np.ndarray

    def __post_init__(self):
        self.class_scores = np.atleast_2d(np.asarray(self.class_scores, dtype=float))
        if len(self.anchors) != len(self.class_scores):
            raise ValueError("one score vector per anchor is required")
        if self.class_scores.shape[1] < 2:
            raise ValueError("score vectors need at least one class plus background")
        if np.any((self.class_scores < 0) | (self.class_scores > 1)):
            raise ValueError("class scores must be probabilities in [0, 1]")

    @property
    def n_classes(self):
        return self.class_scores.shape[1] - 1

    def __len__(self):
        return len(self.anchors)


@dataclass
class GroundTruthSet:
    boxes: list
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = [int(v) for v in self.labels]
        if len(self.labels) != len(self.boxes):
            raise ValueError("one label per ground-truth box is required")

    def __len__(self):
        return len(self.boxes)


@dataclass
class TotalLossBreakdown:
    assignment: np.ndarray  # matched gt index per anchor, BACKGROUND otherwise
    focal: np.ndarray
    regression: np.ndarray  # zero for background anchors
    n_pos: int
    classification_sum: float
    regression_sum: float


def match_anchors(anchors, gts, cfg=TotalLossConfig()):
    """Assign each anchor to its best-overlapping ground truth.

    An anchor is positive when its best rotated IoU exceeds
    ``cfg.pos_iou_thresh``; ties go to the lowest gt index.
    """
    boxes = anchors.anchors if isinstance(anchors, AnchorBatch) else anchors
    out = np.full(len(boxes), BACKGROUND, dtype=int)
    if len(gts) == 0:
        return out
    for i, a in enumerate(boxes):
        ious = [rotated_iou(a, g) for g in gts.boxes]
        j = int(np.argmax(ious))
        if ious[j] > cfg.pos_iou_thresh:
            out[i] = j
    return out


def focal_loss(scores, true_class, cfg=TotalLossConfig(), alpha_t=None):
    """``-alpha_t (1 - p_t)^gamma log(p_t)`` for one score vector.

    ``alpha_t`` defaults to ``focal_alpha`` for object classes and
    ``1 - focal_alpha`` for the background (last) class.
    """
    scores = np.asarray(scores, dtype=float)
    p_t = min(max(float(scores[true_class]), EPS_PROB), 1 - EPS_PROB)
    if alpha_t is None:
        is_bg = true_class in (len(scores) - 1, -1)
        alpha_t = 1 - cfg.focal_alpha if is_bg else cfg.focal_alpha
    return -alpha_t * (1 - p_t) ** cfg.focal_gamma * math.log(p_t)


def total_loss(anchors, gts, policy=SquareLikePolicy(), dcfg=DivergenceConfig(),
               cfg=TotalLossConfig()):
    """Normalized sum of per-anchor focal losses plus ``lam`` times the
    Bhattacharyya regression loss of each positive anchor.

    The normalizer is the positive count, or 1 when there are none. Sums use
    ``math.fsum`` so the result does not depend on anchor order.
    """
    assignment = match_anchors(anchors, gts, cfg)
    background = anchors.n_classes
    focal = np.empty(len(anchors))
    regression = np.zeros(len(anchors))
    for i, (box, scores) in enumerate(zip(anchors.anchors, anchors.class_scores)):
        j = assignment[i]
        true_class = background if j == BACKGROUND else gts.labels[j]
        focal[i] = focal_loss(scores, true_class, cfg)
        if j != BACKGROUND:
            regression[i] = box_pair_bd_loss(box, gts.boxes[j], policy, dcfg)
    n_pos = int(np.count_nonzero(assignment != BACKGROUND))
    cls_sum = math.fsum(focal)
    reg_sum = math.fsum(regression)
    loss = (cls_sum + cfg.lam * reg_sum) / max(n_pos, 1)
    return loss, TotalLossBreakdown(assignment, focal, regression, n_pos, cls_sum, reg_sum)
