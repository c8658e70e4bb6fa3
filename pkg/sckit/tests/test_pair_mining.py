import numpy as np
import pytest

from sckit.cloud import PointCloud, Pose, inverse
from sckit.errors import ConfigError, GeometryError
from sckit.pair_mining import (
    CorrespondenceSet,
    FramePair,
    compute_overlap,
    mine_pairs,
    sample_indices,
    sample_matches,
    subsample_frames,
)


def _grid(n: int, spacing: float = 0.1, offset=(0.0, 0.0, 0.0)) -> np.ndarray:
    axis = np.arange(n) * spacing
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel(), np.zeros(n * n)], axis=1) + np.asarray(offset)


def _brute_force(world_a, world_b, radius):
    distances = np.linalg.norm(world_a[:, None] - world_b[None], axis=2)
    nearest = distances.argmin(axis=1)
    matched = np.flatnonzero(distances[np.arange(len(world_a)), nearest] <= radius)
    return len(matched) / len(world_a), np.stack([matched, nearest[matched]], axis=1)


class TestSubsample:
    def test_stride(self):
        assert subsample_frames(list(range(100)), 25) == [0, 25, 50, 75]

    def test_bad_stride(self):
        with pytest.raises(ConfigError):
            subsample_frames([0, 1], 0)


class TestComputeOverlap:
    def test_matches_brute_force(self, rng):
        a = PointCloud(rng.uniform(0, 1, size=(150, 3)))
        b = PointCloud(rng.uniform(0.3, 1.3, size=(150, 3)))
        pose_a = Pose.about_z(0.2, [0.1, 0.0, 0.0])
        pose_b = Pose.about_z(-0.4, [0.0, 0.2, 0.0])
        ratio, matches = compute_overlap(a, pose_a, b, pose_b, radius=0.1)
        expected_ratio, expected_pairs = _brute_force(pose_a.apply(a.positions), pose_b.apply(b.positions), 0.1)
        assert ratio == pytest.approx(expected_ratio)
        assert np.array_equal(matches.pairs, expected_pairs)

    def test_identical_frames(self):
        cloud = PointCloud(_grid(5))
        ratio, matches = compute_overlap(cloud, Pose.identity(), cloud, Pose.identity())
        assert ratio == 1.0
        assert np.array_equal(matches.anchors, matches.positives)
        assert not matches.has_duplicates()

    def test_pose_aligns_frames(self):
        points = _grid(5)
        pose = Pose.about_z(0.5, [1.0, 2.0, 0.0])
        local = PointCloud(inverse(pose).apply(points))
        ratio, _ = compute_overlap(PointCloud(points), Pose.identity(), local, pose)
        assert ratio == 1.0

    def test_empty_cloud(self):
        with pytest.raises(GeometryError):
            compute_overlap(PointCloud(np.empty((0, 3))), Pose.identity(), PointCloud(_grid(2)), Pose.identity())

    def test_bad_radius(self):
        cloud = PointCloud(_grid(2))
        with pytest.raises(ConfigError):
            compute_overlap(cloud, Pose.identity(), cloud, Pose.identity(), radius=0.0)


class TestMinePairs:
    @staticmethod
    def _frames_with_overlap(fraction: float):
        # 10 x 10 grid, frame b shares the first `fraction` of rows with frame a
        points = _grid(10)
        shared = int(round(fraction * 10))
        shifted = points.copy()
        shifted[:, 0] += (10 - shared) * 0.1
        return [(PointCloud(points), Pose.identity()), (PointCloud(shifted), Pose.identity())]

    @pytest.mark.parametrize(
        "fraction, kept",
        [
            (0.3, True),
            (0.2, False),
        ],
    )
    def test_threshold(self, fraction, kept):
        pairs = mine_pairs(self._frames_with_overlap(fraction), radius=0.025, min_overlap=0.3, voxel_size=None)
        assert (len(pairs) == 1) is kept
        if kept:
            assert pairs[0][0].overlap_ratio == pytest.approx(0.3)

    def test_boundary_just_below(self):
        # 29 of 100 points coincide
        a = _grid(10)
        b = np.concatenate([a[:29], a[29:] + np.array([0.0, 0.0, 5.0])])
        frames = [(PointCloud(a), Pose.identity()), (PointCloud(b), Pose.identity())]
        assert mine_pairs(frames, min_overlap=0.30, voxel_size=None) == []
        assert len(mine_pairs(frames, min_overlap=0.29, voxel_size=None)) == 1

    def test_pairs_ordered_and_identified(self):
        points = _grid(6)
        frames = [(PointCloud(points), Pose.identity()) for _ in range(3)]
        pairs = mine_pairs(frames, voxel_size=None, frame_ids=["f0", "f1", "f2"])
        assert [(p.frame_a_id, p.frame_b_id) for p, _ in pairs] == [("f0", "f1"), ("f0", "f2"), ("f1", "f2")]

    def test_parallel_same_as_single(self):
        points = _grid(6)
        frames = [(PointCloud(points + [0.05 * i, 0.0, 0.0]), Pose.identity()) for i in range(4)]
        single = mine_pairs(frames, radius=0.03, min_overlap=0.1, voxel_size=None, parallel_level=1)
        parallel = mine_pairs(frames, radius=0.03, min_overlap=0.1, voxel_size=None, parallel_level=2)
        assert [p for p, _ in single] == [p for p, _ in parallel]
        for (_, m1), (_, m2) in zip(single, parallel):
            assert np.array_equal(m1.pairs, m2.pairs)

    def test_fewer_than_two_frames(self):
        assert mine_pairs([(PointCloud(_grid(2)), Pose.identity())]) == []

    def test_frame_pair_validation(self):
        with pytest.raises(GeometryError):
            FramePair(0, 1, 1.5)


class TestSampling:
    def test_sample_indices(self):
        chosen = sample_indices(1000, 100, seed=3)
        assert len(chosen) == 100
        assert len(np.unique(chosen)) == 100
        assert np.all(np.diff(chosen) > 0)
        assert np.array_equal(chosen, sample_indices(1000, 100, seed=3))

    def test_sample_indices_small(self):
        assert np.array_equal(sample_indices(5, 100, seed=0), np.arange(5))

    def test_sample_matches_subset(self):
        matches = CorrespondenceSet(np.stack([np.arange(50), np.arange(50)[::-1]], axis=1), 0.025)
        sampled = sample_matches(matches, 10, seed=1)
        assert len(sampled) == 10
        rows = {tuple(p) for p in matches.pairs.tolist()}
        assert all(pair in rows for pair in sampled)

    def test_bad_sample_size(self):
        with pytest.raises(ConfigError):
            sample_indices(10, 0, seed=0)
