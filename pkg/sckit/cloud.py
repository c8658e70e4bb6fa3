# coding: utf8
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import Errors, GeometryError

__all__ = [
    "PointCloud",
    "Pose",
    "SpatialIndex",
    "voxel_downsample",
    "transform",
    "inverse",
    "compose",
    "build_index",
    "ROTATION_TOLERANCE",
]


ROTATION_TOLERANCE = 1e-6

_OPTIONAL_FIELDS = ("colors", "semantic_labels", "instance_labels")


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Positions in meters (float64) plus optional per-point arrays.

    colors are uint8 RGB triplets, labels are non-negative integers. Every
    optional array has one row per position.
    """
    positions: np.ndarray
    colors: Optional[np.ndarray] = None
    semantic_labels: Optional[np.ndarray] = None
    instance_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        if positions.size == 0:
            positions = positions.reshape(0, 3)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise GeometryError(Errors.E005.format(shape=positions.shape))
        if not np.isfinite(positions).all():
            raise GeometryError(Errors.E003)
        object.__setattr__(self, "positions", _frozen(positions.copy()))
        dtypes = {"colors": np.uint8, "semantic_labels": np.int64, "instance_labels": np.int64}
        for name in _OPTIONAL_FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value)
            if name == "colors":
                value = value.reshape(-1, 3)
            if len(value) != len(positions):
                raise GeometryError(Errors.E004.format(name=name, length=len(value), expected=len(positions)))
            object.__setattr__(self, name, _frozen(value.astype(dtypes[name], copy=True)))

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def is_empty(self) -> bool:
        return len(self.positions) == 0

    def select(self, indices: Sequence[int]) -> "PointCloud":
        indices = np.asarray(indices, dtype=np.int64)
        return PointCloud(
            self.positions[indices],
            **{name: getattr(self, name)[indices] for name in _OPTIONAL_FIELDS if getattr(self, name) is not None},
        )

    def with_positions(self, positions: np.ndarray) -> "PointCloud":
        return replace(self, positions=positions)

    def with_labels(self, semantic_labels=None, instance_labels=None) -> "PointCloud":
        return replace(
            self,
            semantic_labels=self.semantic_labels if semantic_labels is None else semantic_labels,
            instance_labels=self.instance_labels if instance_labels is None else instance_labels,
        )


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(rotation @ rotation.T, np.eye(3), atol=ROTATION_TOLERANCE, rtol=0.0) \
                or abs(np.linalg.det(rotation) - 1.0) > ROTATION_TOLERANCE:
            raise GeometryError(Errors.E002.format(tol=ROTATION_TOLERANCE))
        if not (np.isfinite(rotation).all() and np.isfinite(translation).all()):
            raise GeometryError(Errors.E003)
        object.__setattr__(self, "rotation", _frozen(rotation.copy()))
        object.__setattr__(self, "translation", _frozen(translation.copy()))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Pose":
        matrix = np.asarray(matrix, dtype=np.float64).reshape(4, 4)
        return cls(matrix[:3, :3], matrix[:3, 3])

    @classmethod
    def about_z(cls, angle: float, translation: Iterable[float] = (0.0, 0.0, 0.0)) -> "Pose":
        c, s = np.cos(angle), np.sin(angle)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), np.asarray(translation, dtype=np.float64))

    @property
    def matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def apply(self, positions: np.ndarray) -> np.ndarray:
        return np.asarray(positions, dtype=np.float64) @ self.rotation.T + self.translation


def inverse(pose: Pose) -> Pose:
    rotation_t = pose.rotation.T
    return Pose(rotation_t, -rotation_t @ pose.translation)


def compose(a: Pose, b: Pose) -> Pose:
    """The pose applying b first, then a."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def transform(cloud: PointCloud, pose: Pose) -> PointCloud:
    return cloud.with_positions(pose.apply(cloud.positions))


def voxel_keys(positions: np.ndarray, voxel_size: float) -> np.ndarray:
    return np.floor(np.asarray(positions, dtype=np.float64) / voxel_size).astype(np.int64)


def _majority_vote(inverse_index: np.ndarray, labels: np.ndarray, n_voxels: int) -> np.ndarray:
    # ties go to the smallest label id
    pairs, counts = np.unique(np.stack([inverse_index, labels], axis=1), axis=0, return_counts=True)
    order = np.lexsort((pairs[:, 1], -counts, pairs[:, 0]))
    pairs = pairs[order]
    first = np.ones(len(pairs), dtype=bool)
    first[1:] = pairs[1:, 0] != pairs[:-1, 0]
    winners = np.empty(n_voxels, dtype=np.int64)
    winners[pairs[first, 0]] = pairs[first, 1]
    return winners


def voxel_downsample(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """One point per occupied floor(p / voxel_size) cell, placed at the cell's centroid.

    Output order follows the lexicographic order of the voxel keys.
    """
    if not voxel_size > 0:
        raise GeometryError(Errors.E001.format(value=voxel_size))
    if cloud.is_empty:
        return cloud
    keys = voxel_keys(cloud.positions, voxel_size)
    _, inverse_index, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse_index = inverse_index.reshape(-1)
    n_voxels = len(counts)
    centroids = np.stack(
        [np.bincount(inverse_index, weights=cloud.positions[:, d], minlength=n_voxels) for d in range(3)],
        axis=1,
    ) / counts[:, None]
    extras = {}
    if cloud.colors is not None:
        colors = np.stack(
            [np.bincount(inverse_index, weights=cloud.colors[:, c].astype(np.float64), minlength=n_voxels) for c in range(3)],
            axis=1,
        ) / counts[:, None]
        extras["colors"] = np.clip(np.rint(colors), 0, 255).astype(np.uint8)
    for name in ("semantic_labels", "instance_labels"):
        labels = getattr(cloud, name)
        if labels is not None:
            extras[name] = _majority_vote(inverse_index, labels, n_voxels)
    return PointCloud(centroids, **extras)


class SpatialIndex:
    """Read-only radius / nearest-neighbour index over a fixed point set."""

    def __init__(self, positions: np.ndarray):
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self._tree = cKDTree(self.positions) if len(self.positions) else None

    def __len__(self) -> int:
        return len(self.positions)

    def radius_query(self, query: Sequence[float], radius: float) -> np.ndarray:
        """Sorted indices i with ||p_i - query|| <= radius."""
        if self._tree is None:
            return np.empty(0, dtype=np.int64)
        found = self._tree.query_ball_point(np.asarray(query, dtype=np.float64), radius, return_sorted=True)
        return np.asarray(found, dtype=np.int64)

    def radius_query_many(self, queries: np.ndarray, radius: float) -> list:
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        if self._tree is None:
            return [np.empty(0, dtype=np.int64) for _ in range(len(queries))]
        found = self._tree.query_ball_point(queries, radius, return_sorted=True)
        return [np.asarray(indices, dtype=np.int64) for indices in found]

    def nearest(self, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(distances, indices) of the nearest indexed point for every query row."""
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        if self._tree is None:
            return np.full(len(queries), np.inf), np.full(len(queries), -1, dtype=np.int64)
        distances, indices = self._tree.query(queries, k=1)
        return np.asarray(distances, dtype=np.float64), np.asarray(indices, dtype=np.int64)


def build_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud.positions)
