# coding: utf8
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from .cloud import PointCloud, Pose, SpatialIndex, voxel_downsample
from .errors import ConfigError, Errors, GeometryError, Warnings, logger
from .parallel import run_ordered

__all__ = [
    "FramePair",
    "CorrespondenceSet",
    "MiningConfig",
    "subsample_frames",
    "compute_overlap",
    "prepare_frames",
    "mine_pairs",
    "sample_matches",
    "sample_indices",
    "DEFAULT_STRIDE",
    "DEFAULT_MATCH_RADIUS",
    "DEFAULT_MIN_OVERLAP",
    "DEFAULT_VOXEL_SIZE",
    "DEFAULT_NUM_SAMPLES",
]


DEFAULT_STRIDE = 25
DEFAULT_MATCH_RADIUS = 0.025
DEFAULT_MIN_OVERLAP = 0.30
DEFAULT_VOXEL_SIZE = 0.02
DEFAULT_NUM_SAMPLES = 4096


@dataclass(frozen=True)
class FramePair:
    frame_a_id: Hashable
    frame_b_id: Hashable
    overlap_ratio: float

    def __post_init__(self):
        if not 0.0 <= self.overlap_ratio <= 1.0:
            raise GeometryError(Errors.E012.format(value=self.overlap_ratio))


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """(i, j) rows: i indexes frame A, j indexes frame B."""
    pairs: np.ndarray
    match_radius: float

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(map(tuple, self.pairs.tolist()))

    @property
    def anchors(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def positives(self) -> np.ndarray:
        return self.pairs[:, 1]

    @classmethod
    def empty(cls, match_radius: float = DEFAULT_MATCH_RADIUS) -> "CorrespondenceSet":
        return cls(np.empty((0, 2), dtype=np.int64), match_radius)

    def has_duplicates(self) -> bool:
        return len(np.unique(self.pairs, axis=0)) != len(self.pairs)


@dataclass(frozen=True)
class MiningConfig:
    stride: int = DEFAULT_STRIDE
    radius: float = DEFAULT_MATCH_RADIUS
    min_overlap: float = DEFAULT_MIN_OVERLAP
    voxel_size: Optional[float] = DEFAULT_VOXEL_SIZE

    def __post_init__(self):
        if self.stride < 1:
            raise ConfigError(Errors.E010.format(value=self.stride))
        if not self.radius > 0:
            raise ConfigError(Errors.E011.format(value=self.radius))
        if not 0.0 <= self.min_overlap <= 1.0:
            raise ConfigError(Errors.E012.format(value=self.min_overlap))


def subsample_frames(frame_ids: Sequence[Any], stride: int) -> List[Any]:
    if stride < 1:
        raise ConfigError(Errors.E010.format(value=stride))
    return list(frame_ids)[::stride]


def _nearest_matches(world_a: np.ndarray, index_b: SpatialIndex, radius: float) -> np.ndarray:
    distances, nearest = index_b.nearest(world_a)
    matched = np.flatnonzero(distances <= radius)
    return np.stack([matched, nearest[matched]], axis=1)


def compute_overlap(
    a: PointCloud,
    pose_a: Pose,
    b: PointCloud,
    pose_b: Pose,
    radius: float = DEFAULT_MATCH_RADIUS,
) -> Tuple[float, CorrespondenceSet]:
    """Match each world-space A point to its nearest world-space B point within radius.

    Returns the fraction of A points matched and the A->B correspondences.
    """
    if not radius > 0:
        raise ConfigError(Errors.E011.format(value=radius))
    if a.is_empty or b.is_empty:
        raise GeometryError(Errors.E014)
    world_a = pose_a.apply(a.positions)
    pairs = _nearest_matches(world_a, SpatialIndex(pose_b.apply(b.positions)), radius)
    return len(pairs) / len(a), CorrespondenceSet(pairs, radius)


def prepare_frames(frames: Sequence[Tuple[PointCloud, Pose]], voxel_size: Optional[float] = DEFAULT_VOXEL_SIZE):
    if not voxel_size:
        return list(frames)
    return [(voxel_downsample(cloud, voxel_size), pose) for cloud, pose in frames]


def _evaluate_pair(job):
    (id_a, cloud_a, pose_a), (id_b, cloud_b, pose_b), radius = job
    if cloud_a.is_empty or cloud_b.is_empty:
        logger.warning(Warnings.W003.format(a=id_a, b=id_b))
        return id_a, id_b, 0.0, 0.0, CorrespondenceSet.empty(radius)
    ratio_ab, matches = compute_overlap(cloud_a, pose_a, cloud_b, pose_b, radius)
    ratio_ba, _ = compute_overlap(cloud_b, pose_b, cloud_a, pose_a, radius)
    logger.debug("pair (%s, %s): overlap %.4f / %.4f, %d matches", id_a, id_b, ratio_ab, ratio_ba, len(matches))
    return id_a, id_b, ratio_ab, ratio_ba, matches


def mine_pairs(
    frames: Sequence[Tuple[PointCloud, Pose]],
    radius: float = DEFAULT_MATCH_RADIUS,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
    voxel_size: Optional[float] = DEFAULT_VOXEL_SIZE,
    frame_ids: Optional[Sequence[Hashable]] = None,
    parallel_level: int = 1,
) -> List[Tuple[FramePair, CorrespondenceSet]]:
    """Keep every unordered frame pair whose overlap passes min_overlap in either direction.

    Frames are voxel-downsampled first (voxel_size=None skips it); correspondences
    index the downsampled clouds and run from the lower-ordered frame to the other.
    """
    if not radius > 0:
        raise ConfigError(Errors.E011.format(value=radius))
    if not 0.0 <= min_overlap <= 1.0:
        raise ConfigError(Errors.E012.format(value=min_overlap))
    if len(frames) < 2:
        return []
    frame_ids = list(range(len(frames))) if frame_ids is None else list(frame_ids)
    prepared = prepare_frames(frames, voxel_size)
    entries = [(frame_id, cloud, pose) for frame_id, (cloud, pose) in zip(frame_ids, prepared)]
    jobs = [(entry_a, entry_b, radius) for entry_a, entry_b in combinations(entries, 2)]

    kept = []
    for id_a, id_b, ratio_ab, ratio_ba, matches in run_ordered(_evaluate_pair, jobs, parallel_level):
        overlap = max(ratio_ab, ratio_ba)
        if overlap >= min_overlap:
            kept.append((FramePair(id_a, id_b, overlap), matches))
    kept.sort(key=lambda item: (item[0].frame_a_id, item[0].frame_b_id))
    return kept


def sample_indices(size: int, n: int, seed: int) -> np.ndarray:
    """Sorted uniform sample of min(n, size) distinct positions."""
    if n < 1:
        raise ConfigError(Errors.E013.format(value=n))
    if size <= n:
        return np.arange(size)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(size, size=n, replace=False))


def sample_matches(matches: CorrespondenceSet, n: int = DEFAULT_NUM_SAMPLES, seed: int = 0) -> CorrespondenceSet:
    return CorrespondenceSet(matches.pairs[sample_indices(len(matches), n, seed)], matches.match_radius)
