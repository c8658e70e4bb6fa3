# coding: utf8
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .active_labeling import IGNORE_LABEL
from .errors import Errors, EvaluationError
from .instance_clustering import UNASSIGNED, InstancePrediction

__all__ = [
    "BoxSet",
    "miou",
    "average_precision",
    "instance_iou",
    "instance_map50",
    "box_iou",
    "box_map",
    "MAP_IOU_THRESHOLD",
]


MAP_IOU_THRESHOLD = 0.5


def miou(
    pred_labels: np.ndarray,
    gt_labels: np.ndarray,
    num_classes: int,
    ignore: int = IGNORE_LABEL,
) -> Tuple[float, np.ndarray]:
    """(mIoU, per-class IoU); classes absent from the ground truth get NaN and are left out of the mean.

    Predictions outside [0, num_classes) count as misses for their ground-truth class;
    ground-truth labels outside it (other than ignore) raise EvaluationError.
    """
    pred = np.asarray(pred_labels, dtype=np.int64).reshape(-1)
    gt = np.asarray(gt_labels, dtype=np.int64).reshape(-1)
    if len(pred) != len(gt):
        raise EvaluationError(Errors.E064.format(pred=len(pred), gt=len(gt)))
    valid = gt != ignore
    out_of_range = valid & ((gt < 0) | (gt >= num_classes))
    if out_of_range.any():
        raise EvaluationError(Errors.E068.format(
            count=int(out_of_range.sum()), num_classes=num_classes, ignore=ignore, example=int(gt[out_of_range][0]),
        ))
    if not valid.any():
        raise EvaluationError(Errors.E063)
    gt = gt[valid]
    pred = pred[valid]
    pred = np.where((pred >= 0) & (pred < num_classes), pred, num_classes)
    confusion = np.bincount(gt * (num_classes + 1) + pred, minlength=num_classes * (num_classes + 1))
    confusion = confusion.reshape(num_classes, num_classes + 1)
    tp = np.diag(confusion[:, :num_classes]).astype(np.float64)
    fn = confusion.sum(axis=1) - tp
    fp = confusion[:, :num_classes].sum(axis=0) - tp
    present = confusion.sum(axis=1) > 0
    iou = np.full(num_classes, np.nan)
    iou[present] = tp[present] / (tp[present] + fp[present] + fn[present])
    return float(np.mean(iou[present])), iou


def average_precision(matched: Sequence[bool], num_gt: int) -> float:
    """All-point interpolated AP for detections already sorted by confidence."""
    if num_gt <= 0:
        return float("nan")
    matched = np.asarray(matched, dtype=bool)
    if not len(matched):
        return 0.0
    tp = np.cumsum(matched)
    recall = tp / num_gt
    precision = tp / np.arange(1, len(matched) + 1)
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def instance_iou(pred: InstancePrediction, gt: InstancePrediction) -> np.ndarray:
    """Point-set IoU between every predicted and every ground-truth instance."""
    if len(pred) != len(gt):
        raise EvaluationError(Errors.E064.format(pred=len(pred), gt=len(gt)))
    n_pred, n_gt = pred.num_instances, gt.num_instances
    pred_sizes = np.bincount(pred.instance_ids[pred.instance_ids != UNASSIGNED], minlength=n_pred)
    gt_sizes = np.bincount(gt.instance_ids[gt.instance_ids != UNASSIGNED], minlength=n_gt)
    both = (pred.instance_ids != UNASSIGNED) & (gt.instance_ids != UNASSIGNED)
    codes = pred.instance_ids[both] * n_gt + gt.instance_ids[both]
    intersection = np.bincount(codes, minlength=n_pred * n_gt).reshape(n_pred, n_gt).astype(np.float64)
    union = pred_sizes[:, None] + gt_sizes[None, :] - intersection
    return np.divide(intersection, union, out=np.zeros_like(intersection), where=union > 0)


def _greedy_matches(order: np.ndarray, candidates: np.ndarray, iou: np.ndarray, threshold: float) -> list:
    """order: predictions by decreasing confidence; candidates: same-class gt columns."""
    taken = np.zeros(len(candidates), dtype=bool)
    matched = []
    for row in order:
        overlaps = np.where(taken, -1.0, iou[row, candidates]) if len(candidates) else np.empty(0)
        best = int(np.argmax(overlaps)) if len(overlaps) else -1
        if best >= 0 and overlaps[best] >= threshold:
            taken[best] = True
            matched.append(True)
        else:
            matched.append(False)
    return matched


def instance_map50(
    pred: InstancePrediction,
    gt: InstancePrediction,
    iou_threshold: float = MAP_IOU_THRESHOLD,
) -> Tuple[float, Dict[int, float]]:
    """(mAP, per-class AP) over the classes with at least one ground-truth instance.

    Per class, predictions are visited by decreasing confidence and matched to the
    unmatched same-class ground truth of highest IoU when it reaches the threshold.
    """
    if pred.confidences is None:
        raise EvaluationError(Errors.E067)
    if not gt.num_instances:
        raise EvaluationError(Errors.E044)
    iou = instance_iou(pred, gt)
    per_class = {}
    for cls in np.unique(gt.instance_classes):
        candidates = np.flatnonzero(gt.instance_classes == cls)
        rows = np.flatnonzero(pred.instance_classes == cls)
        order = rows[np.argsort(-pred.confidences[rows], kind="stable")]
        per_class[int(cls)] = average_precision(_greedy_matches(order, candidates, iou, iou_threshold), len(candidates))
    return float(np.mean(list(per_class.values()))), per_class


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Axis-aligned boxes as rows (xmin, ymin, zmin, xmax, ymax, zmax)."""
    boxes: np.ndarray
    classes: np.ndarray
    scores: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "boxes", np.asarray(self.boxes, dtype=np.float64).reshape(-1, 6))
        object.__setattr__(self, "classes", np.asarray(self.classes, dtype=np.int64).reshape(-1))
        if self.scores is not None:
            object.__setattr__(self, "scores", np.asarray(self.scores, dtype=np.float64).reshape(-1))

    def __len__(self) -> int:
        return len(self.boxes)


def box_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of axis-aligned boxes, shape (len(a), len(b))."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 6)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 6)
    low = np.maximum(a[:, None, :3], b[None, :, :3])
    high = np.minimum(a[:, None, 3:], b[None, :, 3:])
    intersection = np.prod(np.clip(high - low, 0.0, None), axis=-1)
    volume_a = np.prod(np.clip(a[:, 3:] - a[:, :3], 0.0, None), axis=-1)
    volume_b = np.prod(np.clip(b[:, 3:] - b[:, :3], 0.0, None), axis=-1)
    union = volume_a[:, None] + volume_b[None, :] - intersection
    return np.divide(intersection, union, out=np.zeros_like(intersection), where=union > 0)


def box_map(
    preds: Sequence[BoxSet],
    gts: Sequence[BoxSet],
    iou_threshold: float = MAP_IOU_THRESHOLD,
) -> Tuple[float, Dict[int, float]]:
    """Detection-style mAP over scenes; boxes only match within their own scene."""
    if len(preds) != len(gts):
        raise EvaluationError(Errors.E064.format(pred=len(preds), gt=len(gts)))
    classes = np.unique(np.concatenate([gt.classes for gt in gts])) if gts else np.empty(0)
    if not len(classes):
        raise EvaluationError(Errors.E044)
    per_class = {}
    for cls in classes:
        detections = []
        num_gt = 0
        taken = []
        ious = []
        for scene, (pred, gt) in enumerate(zip(preds, gts)):
            gt_rows = np.flatnonzero(gt.classes == cls)
            pred_rows = np.flatnonzero(pred.classes == cls)
            num_gt += len(gt_rows)
            taken.append(np.zeros(len(gt_rows), dtype=bool))
            ious.append(box_iou(pred.boxes[pred_rows], gt.boxes[gt_rows]))
            scores = pred.scores if pred.scores is not None else np.ones(len(pred))
            detections.extend((-scores[row], scene, k) for k, row in enumerate(pred_rows))
        matched = []
        for _, scene, k in sorted(detections):
            overlaps = np.where(taken[scene], -1.0, ious[scene][k])
            best = int(np.argmax(overlaps)) if len(overlaps) else -1
            if best >= 0 and overlaps[best] >= iou_threshold:
                taken[scene][best] = True
                matched.append(True)
            else:
                matched.append(False)
        per_class[int(cls)] = average_precision(matched, num_gt)
    return float(np.mean(list(per_class.values()))), per_class
