# coding: utf8
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .cloud import PointCloud, SpatialIndex
from .contrastive import FeatureMatrix
from .errors import ConfigError, Errors, GeometryError, logger

__all__ = [
    "UNASSIGNED",
    "DEFAULT_CLUSTER_RADIUS",
    "DEFAULT_MIN_CLUSTER_SIZE",
    "ClusterConfig",
    "InstancePrediction",
    "shift_points",
    "bfs_cluster",
    "score_instances",
    "decode_instances",
]


UNASSIGNED = -1
DEFAULT_CLUSTER_RADIUS = 0.03
DEFAULT_MIN_CLUSTER_SIZE = 10
_DISCARDED = -2


@dataclass(frozen=True)
class ClusterConfig:
    radius: float = DEFAULT_CLUSTER_RADIUS
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE
    ignore_labels: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError(Errors.E011.format(value=self.radius))
        if self.min_cluster_size < 1:
            raise ConfigError(Errors.E062.format(value=self.min_cluster_size))
        object.__setattr__(self, "ignore_labels", tuple(int(label) for label in self.ignore_labels))


@dataclass(frozen=True, eq=False)
class InstancePrediction:
    """instance_ids[i] is the instance of point i or UNASSIGNED.

    instance_classes[c] and confidences[c] describe instance c.
    """
    instance_ids: np.ndarray
    instance_classes: np.ndarray
    confidences: Optional[np.ndarray] = None

    def __post_init__(self):
        ids = np.asarray(self.instance_ids, dtype=np.int64).reshape(-1)
        classes = np.asarray(self.instance_classes, dtype=np.int64).reshape(-1)
        ids.setflags(write=False)
        classes.setflags(write=False)
        object.__setattr__(self, "instance_ids", ids)
        object.__setattr__(self, "instance_classes", classes)
        if self.confidences is not None:
            confidences = np.asarray(self.confidences, dtype=np.float64).reshape(-1)
            if len(confidences) != len(classes):
                raise GeometryError(Errors.E004.format(name="confidences", length=len(confidences), expected=len(classes)))
            confidences.setflags(write=False)
            object.__setattr__(self, "confidences", confidences)

    def __len__(self) -> int:
        return len(self.instance_ids)

    @property
    def num_instances(self) -> int:
        return len(self.instance_classes)

    def members(self, instance: int) -> np.ndarray:
        return np.flatnonzero(self.instance_ids == instance)

    def with_confidences(self, confidences: np.ndarray) -> "InstancePrediction":
        return InstancePrediction(self.instance_ids, self.instance_classes, confidences)

    @classmethod
    def from_labels(
        cls,
        instance_labels: np.ndarray,
        semantic_labels: np.ndarray,
        ignore_labels: Sequence[int] = (),
    ) -> "InstancePrediction":
        """Ground-truth layout: instances renumbered 0.. in order of their label value.

        Points whose semantic label is ignored, or whose instance label is
        negative, are unassigned; an instance takes its first member's class.
        """
        instance_labels = np.asarray(instance_labels, dtype=np.int64)
        semantic_labels = np.asarray(semantic_labels, dtype=np.int64)
        keep = (instance_labels >= 0) & ~np.isin(semantic_labels, list(ignore_labels))
        ids = np.full(len(instance_labels), UNASSIGNED, dtype=np.int64)
        values, first, inverse = np.unique(instance_labels[keep], return_index=True, return_inverse=True)
        ids[keep] = inverse.reshape(-1)
        classes = semantic_labels[keep][first] if len(values) else np.empty(0, dtype=np.int64)
        return cls(ids, classes, np.ones(len(values)))


OffsetField = np.ndarray


def shift_points(cloud: PointCloud, offsets: OffsetField) -> PointCloud:
    offsets = np.asarray(offsets, dtype=np.float64).reshape(-1, 3)
    if len(offsets) != len(cloud):
        raise GeometryError(Errors.E050.format(length=len(offsets), expected=len(cloud)))
    if not np.isfinite(offsets).all():
        raise GeometryError(Errors.E003)
    return cloud.with_positions(cloud.positions + offsets)


def _positions(points: Union[PointCloud, np.ndarray]) -> np.ndarray:
    if isinstance(points, PointCloud):
        return points.positions
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)


def bfs_cluster(
    shifted: Union[PointCloud, np.ndarray],
    semantic_labels: np.ndarray,
    radius: float = DEFAULT_CLUSTER_RADIUS,
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
    ignore_labels: Sequence[int] = (),
) -> InstancePrediction:
    """Connected components of the graph linking same-label points within radius.

    Seeds are taken in point order, so instance ids follow the lowest member
    index of each kept component. Components below min_cluster_size and points
    of ignored classes stay UNASSIGNED.
    """
    if not radius > 0:
        raise ConfigError(Errors.E011.format(value=radius))
    positions = _positions(shifted)
    labels = np.asarray(semantic_labels, dtype=np.int64).reshape(-1)
    if len(labels) != len(positions):
        raise GeometryError(Errors.E004.format(name="semantic_labels", length=len(labels), expected=len(positions)))
    ids = np.full(len(positions), UNASSIGNED, dtype=np.int64)
    if not len(positions):
        return InstancePrediction(ids, np.empty(0, dtype=np.int64))

    # coincident points with the same label share one graph node
    rows = np.hstack([positions, labels[:, None].astype(np.float64)])
    _, first, inverse, counts = np.unique(rows, axis=0, return_index=True, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    unique_positions = positions[first[order]]
    unique_labels = labels[first[order]]
    unique_counts = counts[order]
    node_of_point = rank[inverse]

    index = SpatialIndex(unique_positions)
    ignored = np.isin(unique_labels, list(ignore_labels))
    component = np.full(len(unique_positions), UNASSIGNED, dtype=np.int64)
    classes = []
    next_id = 0
    for seed in range(len(unique_positions)):
        if component[seed] != UNASSIGNED or ignored[seed]:
            continue
        label = unique_labels[seed]
        members = [np.array([seed])]
        component[seed] = next_id
        frontier = members[0]
        while len(frontier):
            found = index.radius_query_many(unique_positions[frontier], radius)
            neighbours = np.unique(np.concatenate(found))
            neighbours = neighbours[(unique_labels[neighbours] == label) & (component[neighbours] == UNASSIGNED)]
            component[neighbours] = next_id
            members.append(neighbours)
            frontier = neighbours
        members = np.concatenate(members)
        if unique_counts[members].sum() >= min_cluster_size:
            classes.append(int(label))
            next_id += 1
        else:
            component[members] = _DISCARDED
    component[component == _DISCARDED] = UNASSIGNED
    ids = component[node_of_point]
    logger.debug("bfs_cluster: %d points -> %d instances", len(positions), next_id)
    return InstancePrediction(ids, np.asarray(classes, dtype=np.int64))


def _scores(semantic_scores: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(semantic_scores, FeatureMatrix):
        return semantic_scores.values
    scores = np.asarray(semantic_scores, dtype=np.float64)
    return scores.reshape(-1, 1) if scores.ndim == 1 else scores


def score_instances(pred: InstancePrediction, semantic_scores: Union[FeatureMatrix, np.ndarray]) -> InstancePrediction:
    """Confidence of an instance = mean member probability of the instance's class."""
    scores = _scores(semantic_scores)
    if len(scores) != len(pred):
        raise GeometryError(Errors.E051.format(rows=len(scores), expected=len(pred)))
    assigned = np.flatnonzero(pred.instance_ids != UNASSIGNED)
    instances = pred.instance_ids[assigned]
    member_scores = scores[assigned, pred.instance_classes[instances]]
    sums = np.bincount(instances, weights=member_scores, minlength=pred.num_instances)
    counts = np.bincount(instances, minlength=pred.num_instances)
    confidences = np.divide(sums, counts, out=np.zeros(pred.num_instances), where=counts > 0)
    return pred.with_confidences(confidences)


def decode_instances(
    cloud: PointCloud,
    offsets: OffsetField,
    semantic_scores: Union[FeatureMatrix, np.ndarray],
    cfg: Optional[ClusterConfig] = None,
) -> Tuple[InstancePrediction, np.ndarray]:
    """shift -> argmax semantics -> cluster -> score; returns (prediction, semantic labels)."""
    cfg = cfg or ClusterConfig()
    scores = _scores(semantic_scores)
    if len(scores) != len(cloud):
        raise GeometryError(Errors.E051.format(rows=len(scores), expected=len(cloud)))
    labels = scores.argmax(axis=1)
    shifted = shift_points(cloud, offsets)
    pred = bfs_cluster(shifted, labels, cfg.radius, cfg.min_cluster_size, cfg.ignore_labels)
    return score_instances(pred, scores), labels
