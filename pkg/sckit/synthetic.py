# coding: utf8
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .cloud import PointCloud, Pose, inverse
from .contrastive import FeatureMatrix
from .errors import ConfigError, Errors, GeometryError, logger
from .pair_mining import DEFAULT_MATCH_RADIUS, CorrespondenceSet
from .trainer import ScenePair

__all__ = [
    "SyntheticView",
    "SyntheticScene",
    "generate_synthetic_scene",
    "make_synthetic_dataset",
    "synthetic_instance_features",
    "one_hot_scores",
    "CLASS_COLORS",
]


CLASS_COLORS = np.array([
    [200, 60, 60],
    [60, 160, 70],
    [60, 90, 200],
    [210, 180, 50],
    [150, 70, 180],
    [60, 180, 190],
    [230, 120, 40],
    [120, 120, 120],
], dtype=np.int64)

_MIN_SIZE = 0.2
_MAX_SIZE = 0.5
# clearance between the xy footprints of neighbouring objects
_MIN_GAP = 0.05
_MAX_ATTEMPTS = 1000
_COLOR_NOISE = 8


@dataclass(frozen=True, eq=False)
class SyntheticView:
    cloud: PointCloud
    pose: Pose
    source_indices: np.ndarray


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    """A room of primitive objects in world coordinates plus two partial views of it."""
    cloud: PointCloud
    offsets: np.ndarray
    boxes: np.ndarray
    box_classes: np.ndarray
    views: Tuple[SyntheticView, SyntheticView]
    correspondences: CorrespondenceSet

    def scene_pair(self, pair_id=None) -> ScenePair:
        view_a, view_b = self.views
        return ScenePair(view_a.cloud, view_b.cloud, self.correspondences, view_a.pose, view_b.pose, pair_id)


def _place(rng: np.random.Generator, sizes: np.ndarray, extent: float) -> np.ndarray:
    centers = []
    radii = sizes * np.sqrt(0.5)
    for k, size in enumerate(sizes):
        if size >= extent:
            raise GeometryError(Errors.E071.format(value=extent, count=len(sizes)))
        for _ in range(_MAX_ATTEMPTS):
            center = rng.uniform(size / 2.0, extent - size / 2.0, size=2)
            if all(np.linalg.norm(center - other) >= radii[k] + radii[j] + _MIN_GAP for j, other in enumerate(centers)):
                centers.append(center)
                break
        else:
            raise GeometryError(Errors.E071.format(value=extent, count=len(sizes)))
    return np.asarray(centers)


def _sample_object(rng: np.random.Generator, cls: int, size: float, center: np.ndarray, count: int) -> np.ndarray:
    """Boxes for even classes, spheres for odd ones, resting on the floor z = 0."""
    base = np.array([center[0], center[1], size / 2.0])
    if cls % 2 == 0:
        return base + rng.uniform(-size / 2.0, size / 2.0, size=(count, 3))
    direction = rng.standard_normal((count, 3))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-12)
    radius = size / 2.0 * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / 3.0)
    return base + direction * radius


def _render_view(
    rng: np.random.Generator,
    world: PointCloud,
    keep: np.ndarray,
    noise: float,
    extent: float,
) -> SyntheticView:
    source = np.flatnonzero(keep)
    positions = world.positions[source]
    if noise > 0:
        jitter = rng.normal(0.0, noise, size=positions.shape)
        # each view moves a point by at most half the match radius
        norms = np.linalg.norm(jitter, axis=1, keepdims=True)
        limit = DEFAULT_MATCH_RADIUS / 2.0
        positions = positions + jitter * (limit / np.maximum(norms, limit))
    pose = Pose.about_z(rng.uniform(0.0, 2.0 * np.pi), np.append(rng.uniform(0.0, extent, size=2), rng.uniform(0.5, 1.5)))
    local = inverse(pose).apply(positions)
    cloud = PointCloud(
        local,
        colors=world.colors[source],
        semantic_labels=world.semantic_labels[source],
        instance_labels=world.instance_labels[source],
    )
    return SyntheticView(cloud, pose, source)


def generate_synthetic_scene(
    num_objects: int,
    extent: float,
    noise: float = 0.002,
    seed: int = 0,
    points_per_object: int = 120,
    num_classes: int = 4,
    overlap: float = 0.5,
    imbalance: float = 0.0,
) -> SyntheticScene:
    """Place num_objects boxes/spheres in an extent x extent room and cut two views.

    View A keeps x < mid + overlap * extent / 2, view B keeps x >= mid - overlap * extent / 2;
    overlap 0 gives disjoint views and overlap >= 1 two copies of the whole room.
    Ground-truth correspondences pair the view points sampled from the same world point;
    per-view noise is clipped to half the match radius so every pair stays within it.
    imbalance > 0 spreads object point counts log-normally.
    """
    if num_objects < 1:
        raise ConfigError(Errors.E070.format(value=num_objects))
    if not extent > 0:
        raise GeometryError(Errors.E071.format(value=extent, count=num_objects))
    rng = np.random.default_rng(seed)
    classes = rng.integers(0, num_classes, size=num_objects)
    sizes = rng.uniform(_MIN_SIZE, min(_MAX_SIZE, extent * 0.9), size=num_objects)
    centers = _place(rng, sizes, extent)
    counts = np.maximum(
        8, np.rint(points_per_object * np.exp(imbalance * rng.standard_normal(num_objects))).astype(np.int64),
    )

    positions, colors, semantic, instance = [], [], [], []
    for k in range(num_objects):
        points = _sample_object(rng, int(classes[k]), float(sizes[k]), centers[k], int(counts[k]))
        color = CLASS_COLORS[classes[k] % len(CLASS_COLORS)] + rng.integers(-_COLOR_NOISE, _COLOR_NOISE + 1, size=(len(points), 3))
        positions.append(points)
        colors.append(np.clip(color, 0, 255))
        semantic.append(np.full(len(points), classes[k]))
        instance.append(np.full(len(points), k))
    positions = np.concatenate(positions)
    instance = np.concatenate(instance)
    world = PointCloud(positions, np.concatenate(colors), np.concatenate(semantic), instance)

    centroids = np.stack([positions[instance == k].mean(axis=0) for k in range(num_objects)])
    offsets = centroids[instance] - positions
    boxes = np.stack([
        np.concatenate([positions[instance == k].min(axis=0), positions[instance == k].max(axis=0)])
        for k in range(num_objects)
    ])

    if overlap >= 1.0:
        keep_a = keep_b = np.ones(len(world), dtype=bool)
    else:
        middle = extent / 2.0
        half = max(overlap, 0.0) * extent / 2.0
        keep_a = positions[:, 0] < middle + half
        keep_b = positions[:, 0] >= middle - half
    view_a = _render_view(rng, world, keep_a, noise, extent)
    view_b = _render_view(rng, world, keep_b, noise, extent)
    _, rows_a, rows_b = np.intersect1d(view_a.source_indices, view_b.source_indices, return_indices=True)
    correspondences = CorrespondenceSet(np.stack([rows_a, rows_b], axis=1), DEFAULT_MATCH_RADIUS)
    logger.debug(
        "synthetic scene seed=%d: %d points, views %d/%d, %d correspondences",
        seed, len(world), len(view_a.cloud), len(view_b.cloud), len(correspondences),
    )
    return SyntheticScene(world, offsets, boxes, classes.astype(np.int64), (view_a, view_b), correspondences)


def make_synthetic_dataset(
    num_pairs: int = 10,
    seed: int = 0,
    num_objects: int = 6,
    extent: float = 3.0,
    noise: float = 0.002,
    points_per_object: int = 120,
    overlap: float = 0.5,
    num_classes: int = 4,
) -> List[ScenePair]:
    """The shipped synthetic pre-training set: one ScenePair per generated scene."""
    seeds = np.random.default_rng(seed).integers(0, 2 ** 31, size=num_pairs)
    return [
        generate_synthetic_scene(
            num_objects, extent, noise, int(scene_seed), points_per_object, num_classes, overlap,
        ).scene_pair(pair_id=index)
        for index, scene_seed in enumerate(seeds)
    ]


def synthetic_instance_features(
    scene: PointCloud,
    dim: int = 16,
    noise: float = 0.1,
    seed: int = 0,
) -> FeatureMatrix:
    """Unit features clustered by instance: a random direction per instance plus noise."""
    if scene.instance_labels is None:
        raise ConfigError(Errors.E044)
    rng = np.random.default_rng(seed)
    instances, inverse_index = np.unique(scene.instance_labels, return_inverse=True)
    directions = rng.standard_normal((len(instances), dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    values = directions[inverse_index.reshape(-1)] + noise * rng.standard_normal((len(scene), dim))
    return FeatureMatrix.from_array(values, normalize=True)


def one_hot_scores(labels: np.ndarray, num_classes: Optional[int] = None) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = int(labels.max()) + 1 if num_classes is None else num_classes
    scores = np.zeros((len(labels), num_classes))
    scores[np.arange(len(labels)), labels] = 1.0
    return scores
