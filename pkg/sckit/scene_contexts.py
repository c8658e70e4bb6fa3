# coding: utf8
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .cloud import PointCloud
from .errors import ConfigError, Errors

__all__ = [
    "PartitionConfig",
    "PartitionAssignment",
    "relative_distance",
    "relative_angle",
    "relative_distance_matrix",
    "relative_angle_matrix",
    "partition_index",
    "partition_matrix",
    "assign_partitions",
    "DEFAULT_SHELL_BOUNDARY",
    "TWO_PI",
]


TWO_PI = 2.0 * math.pi
DEFAULT_SHELL_BOUNDARY = 1.25

Positions = Union[PointCloud, np.ndarray, Sequence[Sequence[float]]]


@dataclass(frozen=True)
class PartitionConfig:
    num_angular_sectors: int = 4
    num_radial_shells: int = 2
    shell_boundaries: Tuple[float, ...] = (DEFAULT_SHELL_BOUNDARY,)

    def __post_init__(self):
        if self.num_angular_sectors < 1 or self.num_radial_shells < 1:
            raise ConfigError(Errors.E020.format(sectors=self.num_angular_sectors, shells=self.num_radial_shells))
        boundaries = tuple(float(b) for b in self.shell_boundaries)
        expected = self.num_radial_shells - 1
        if len(boundaries) != expected \
                or any(b <= 0 for b in boundaries) \
                or any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
            raise ConfigError(Errors.E021.format(expected=expected, value=list(boundaries)))
        object.__setattr__(self, "shell_boundaries", boundaries)

    @property
    def num_partitions(self) -> int:
        return self.num_angular_sectors * self.num_radial_shells

    @property
    def sector_width(self) -> float:
        return TWO_PI / self.num_angular_sectors

    @classmethod
    def from_num_partitions(cls, num_partitions: int, boundary: float = DEFAULT_SHELL_BOUNDARY) -> "PartitionConfig":
        """Angles alone up to 4 partitions, angles x two distance shells beyond."""
        if num_partitions < 1:
            raise ConfigError(Errors.E022.format(value=num_partitions))
        if num_partitions <= 4:
            return cls(num_partitions, 1, ())
        if num_partitions % 2:
            raise ConfigError(Errors.E022.format(value=num_partitions))
        return cls(num_partitions // 2, 2, (boundary,))

    def to_dict(self) -> dict:
        return {
            "angular_sectors": self.num_angular_sectors,
            "radial_shells": self.num_radial_shells,
            "shell_boundaries_m": list(self.shell_boundaries),
        }


@dataclass(frozen=True, eq=False)
class PartitionAssignment:
    anchor_index: int
    partition_of: np.ndarray
    num_partitions: int

    def members(self, partition: int) -> np.ndarray:
        """par_p(anchor): candidate indices falling into `partition`."""
        return np.flatnonzero(self.partition_of == partition)

    def counts(self) -> np.ndarray:
        return np.bincount(self.partition_of, minlength=self.num_partitions)


def _as_positions(points: Positions) -> np.ndarray:
    if isinstance(points, PointCloud):
        return points.positions
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)


def relative_distance(anchor: Sequence[float], point: Sequence[float]) -> float:
    delta = np.asarray(point, dtype=np.float64) - np.asarray(anchor, dtype=np.float64)
    return float(np.sqrt(np.sum(delta * delta)))


def _normalize_angle(angle: np.ndarray) -> np.ndarray:
    angle = np.where(angle < 0.0, angle + TWO_PI, angle)
    # -tiny + 2pi can round up to exactly 2pi
    return np.where(angle >= TWO_PI, angle - TWO_PI, angle)


def relative_angle(anchor: Sequence[float], point: Sequence[float]) -> float:
    """Azimuth of point - anchor in the horizontal plane, in [0, 2pi).

    A displacement with no horizontal component has angle 0.
    """
    dx = float(point[0]) - float(anchor[0])
    dy = float(point[1]) - float(anchor[1])
    if dx == 0.0 and dy == 0.0:
        return 0.0
    return float(_normalize_angle(np.arctan2(np.float64(dy), np.float64(dx))))


def relative_distance_matrix(anchors: Positions, candidates: Positions) -> np.ndarray:
    delta = _as_positions(candidates)[None, :, :] - _as_positions(anchors)[:, None, :]
    return np.sqrt(np.sum(delta * delta, axis=-1))


def relative_angle_matrix(anchors: Positions, candidates: Positions) -> np.ndarray:
    anchors = _as_positions(anchors)
    candidates = _as_positions(candidates)
    dx = candidates[None, :, 0] - anchors[:, None, 0]
    dy = candidates[None, :, 1] - anchors[:, None, 1]
    degenerate = (dx == 0.0) & (dy == 0.0)
    angle = _normalize_angle(np.arctan2(dy, dx))
    angle[degenerate] = 0.0
    return angle


def _ids_from(cfg: PartitionConfig, angle, distance):
    sector = np.minimum(np.floor(angle / cfg.sector_width).astype(np.int64), cfg.num_angular_sectors - 1)
    if cfg.shell_boundaries:
        shell = np.searchsorted(np.asarray(cfg.shell_boundaries), distance, side="left")
    else:
        shell = np.zeros_like(sector)
    return sector + cfg.num_angular_sectors * shell


def partition_index(cfg: PartitionConfig, anchor: Sequence[float], point: Sequence[float]) -> int:
    return int(_ids_from(cfg, np.float64(relative_angle(anchor, point)), np.float64(relative_distance(anchor, point))))


def partition_matrix(cfg: PartitionConfig, anchors: Positions, candidates: Positions) -> np.ndarray:
    """ids[a, k] = partition of candidate k relative to anchor a."""
    ids = _ids_from(cfg, relative_angle_matrix(anchors, candidates), relative_distance_matrix(anchors, candidates))
    return ids.astype(np.int16 if cfg.num_partitions < 2 ** 15 else np.int64)


def assign_partitions(
    cfg: PartitionConfig,
    anchor_index: int,
    anchors: Positions,
    candidates: Positions,
) -> PartitionAssignment:
    anchors = _as_positions(anchors)
    if not 0 <= anchor_index < len(anchors):
        raise ConfigError(Errors.E023.format(index=anchor_index, size=len(anchors)))
    ids = partition_matrix(cfg, anchors[anchor_index:anchor_index + 1], candidates)[0].astype(np.int64)
    return PartitionAssignment(anchor_index, ids, cfg.num_partitions)
