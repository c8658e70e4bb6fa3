# coding: utf8
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from .cloud import PointCloud, SpatialIndex
from .contrastive import FeatureMatrix
from .errors import ConfigError, Errors, EvaluationError, Warnings, logger

__all__ = [
    "LabelBudget",
    "SelectionResult",
    "SelectConfig",
    "STRATEGIES",
    "IGNORE_LABEL",
    "DEFAULT_ITERATIONS",
    "lloyd_iterations",
    "kmeans",
    "select_points",
    "object_coverage",
    "expand_labels",
    "backproject_features",
    "clutter_density",
    "is_cluttered",
]


STRATEGIES = ("random", "kmeans_raw", "kmeans_features")
IGNORE_LABEL = 255
DEFAULT_ITERATIONS = 50
_CHUNK = 65536


@dataclass(frozen=True)
class LabelBudget:
    points_per_scene: int

    def __post_init__(self):
        if self.points_per_scene < 1:
            raise ConfigError(Errors.E062.format(value=self.points_per_scene))


@dataclass(frozen=True, eq=False)
class SelectionResult:
    selected_indices: np.ndarray
    strategy: str
    budget: int = 0
    seed: int = 0

    def __post_init__(self):
        indices = np.asarray(self.selected_indices, dtype=np.int64).reshape(-1)
        indices.setflags(write=False)
        object.__setattr__(self, "selected_indices", indices)

    def __len__(self) -> int:
        return len(self.selected_indices)


@dataclass(frozen=True)
class SelectConfig:
    strategy: str = "kmeans_features"
    budget: int = 20
    iterations: int = DEFAULT_ITERATIONS
    xyz_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(Errors.E041.format(value=self.strategy, choices=list(STRATEGIES)))
        if self.budget < 1:
            raise ConfigError(Errors.E062.format(value=self.budget))
        if self.iterations < 1:
            raise ConfigError(Errors.E062.format(value=self.iterations))


def _assign(data: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest centroid (lowest index on ties) and squared distance for every row."""
    assignment = np.empty(len(data), dtype=np.int64)
    distances = np.empty(len(data))
    for begin in range(0, len(data), _CHUNK):
        block = cdist(data[begin:begin + _CHUNK], centroids, "sqeuclidean")
        nearest = block.argmin(axis=1)
        assignment[begin:begin + _CHUNK] = nearest
        distances[begin:begin + _CHUNK] = block[np.arange(len(block)), nearest]
    return assignment, distances


def _update(data: np.ndarray, assignment: np.ndarray, centroids: np.ndarray, distances: np.ndarray, iteration: int):
    k = len(centroids)
    counts = np.bincount(assignment, minlength=k)
    sums = np.stack([np.bincount(assignment, weights=data[:, d], minlength=k) for d in range(data.shape[1])], axis=1)
    updated = centroids.copy()
    filled = counts > 0
    updated[filled] = sums[filled] / counts[filled, None]
    for cluster in np.flatnonzero(~filled):
        # farthest point among clusters that can spare one
        donors = counts[assignment] > 1
        if not donors.any():
            continue
        candidate = int(np.flatnonzero(donors)[np.argmax(distances[donors])])
        logger.warning(Warnings.W004.format(cluster=int(cluster), iteration=iteration, index=candidate))
        counts[assignment[candidate]] -= 1
        assignment[candidate] = cluster
        counts[cluster] = 1
        distances[candidate] = 0.0
        updated[cluster] = data[candidate]
    return updated


def _as_data(data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    return data.reshape(-1, 1) if data.ndim == 1 else data


def lloyd_iterations(
    data: np.ndarray,
    k: int,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
) -> Iterator[Tuple[np.ndarray, np.ndarray, float]]:
    """Run Lloyd's algorithm, yielding (centroids, assignment, objective) per round.

    The objective is the sum of squared distances of the round's assignment to
    the centroids it was made against; centroids are the ones updated from it.
    Initial centroids are k distinct rows drawn uniformly under the seed.
    """
    data = _as_data(data)
    if not 1 <= k <= len(data):
        raise ConfigError(Errors.E040.format(rows=len(data), value=k))
    if iterations < 1:
        raise ConfigError(Errors.E062.format(value=iterations))
    rng = np.random.default_rng(seed)
    centroids = data[np.sort(rng.choice(len(data), size=k, replace=False))]
    for iteration in range(iterations):
        assignment, distances = _assign(data, centroids)
        objective = float(distances.sum())
        centroids = _update(data, assignment, centroids, distances, iteration)
        yield centroids, assignment, objective


def kmeans(
    data: np.ndarray,
    k: int,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """(centroids k x D, assignment of every row) after `iterations` Lloyd rounds."""
    centroids = assignment = None
    for centroids, assignment, _ in lloyd_iterations(data, k, iterations, seed):
        pass
    return centroids, assignment


def _nearest_members(data: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> np.ndarray:
    distances = np.sum((data - centroids[assignment]) ** 2, axis=1)
    # per cluster: smallest distance, then lowest index
    order = np.lexsort((np.arange(len(data)), distances, assignment))
    first = np.ones(len(order), dtype=bool)
    first[1:] = assignment[order[1:]] != assignment[order[:-1]]
    return order[first]


def _feature_values(features: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.values
    return _as_data(features)


def select_points(
    scene: PointCloud,
    features: Optional[Union[FeatureMatrix, np.ndarray]],
    budget: Union[LabelBudget, int],
    strategy: str = "kmeans_features",
    seed: int = 0,
    iterations: int = DEFAULT_ITERATIONS,
    xyz_weight: float = 1.0,
) -> SelectionResult:
    """Pick min(budget, |scene|) distinct points to annotate.

    random draws uniformly; kmeans_raw clusters [RGB / 255, xyz]; kmeans_features
    clusters [L2-normalized features, xyz * xyz_weight]. The k-means strategies
    return, per cluster, the member nearest its centroid.
    """
    k = budget.points_per_scene if isinstance(budget, LabelBudget) else int(budget)
    if strategy not in STRATEGIES:
        raise ConfigError(Errors.E041.format(value=strategy, choices=list(STRATEGIES)))
    if k < 1:
        raise ConfigError(Errors.E062.format(value=k))
    size = len(scene)
    if k >= size:
        if k > size:
            logger.warning(Warnings.W002.format(budget=k, size=size))
        return SelectionResult(np.arange(size), strategy, k, seed)

    if strategy == "random":
        rng = np.random.default_rng(seed)
        return SelectionResult(np.sort(rng.choice(size, size=k, replace=False)), strategy, k, seed)
    if strategy == "kmeans_raw":
        if scene.colors is None:
            raise ConfigError(Errors.E043)
        data = np.hstack([scene.colors.astype(np.float64) / 255.0, scene.positions])
    else:
        if features is None:
            raise ConfigError(Errors.E042.format(rows=size))
        values = _feature_values(features)
        if len(values) != size:
            raise ConfigError(Errors.E042.format(rows=size))
        values = values / np.maximum(np.linalg.norm(values, axis=1, keepdims=True), 1e-12)
        data = np.hstack([values, scene.positions * xyz_weight])
    centroids, assignment = kmeans(data, k, iterations, seed)
    selected = _nearest_members(data, centroids, assignment)
    return SelectionResult(np.sort(selected), strategy, k, seed)


def object_coverage(scene: PointCloud, selection: Union[SelectionResult, np.ndarray]) -> float:
    """Fraction of the scene's instances hit by at least one selected point."""
    if scene.instance_labels is None or scene.is_empty:
        raise EvaluationError(Errors.E044)
    indices = selection.selected_indices if isinstance(selection, SelectionResult) else np.asarray(selection, dtype=np.int64)
    instances = np.unique(scene.instance_labels)
    covered = np.unique(scene.instance_labels[indices])
    return len(covered) / len(instances)


def expand_labels(scene: PointCloud, selection: Union[SelectionResult, np.ndarray]) -> np.ndarray:
    """Per-point uint8 labels: the ground truth at selected points, IGNORE_LABEL elsewhere."""
    if scene.semantic_labels is None:
        raise EvaluationError(Errors.E045)
    indices = selection.selected_indices if isinstance(selection, SelectionResult) else np.asarray(selection, dtype=np.int64)
    mask = np.full(len(scene), IGNORE_LABEL, dtype=np.uint8)
    mask[indices] = scene.semantic_labels[indices]
    return mask


def backproject_features(
    voxel_positions: np.ndarray,
    voxel_features: Union[FeatureMatrix, np.ndarray],
    points: Union[PointCloud, np.ndarray],
) -> FeatureMatrix:
    """Give every point the features of its nearest voxel."""
    values = _feature_values(voxel_features)
    positions = points.positions if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    if len(values) != len(np.asarray(voxel_positions).reshape(-1, 3)):
        raise ConfigError(Errors.E042.format(rows=len(np.asarray(voxel_positions).reshape(-1, 3))))
    _, nearest = SpatialIndex(voxel_positions).nearest(positions)
    return FeatureMatrix(values[nearest])


def clutter_density(scene: PointCloud) -> float:
    """Distinct instances per square meter of the scene's horizontal bounding box."""
    if scene.instance_labels is None or scene.is_empty:
        raise EvaluationError(Errors.E044)
    extent = scene.positions[:, :2].max(axis=0) - scene.positions[:, :2].min(axis=0)
    area = max(float(extent[0] * extent[1]), 1e-6)
    return len(np.unique(scene.instance_labels)) / area


def is_cluttered(scene: PointCloud, threshold: float = 1.0) -> bool:
    return clutter_density(scene) >= threshold
