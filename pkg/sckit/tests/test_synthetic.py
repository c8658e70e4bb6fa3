import numpy as np
import pytest

from sckit.cloud import inverse
from sckit.errors import ConfigError, GeometryError
from sckit.pair_mining import mine_pairs
from sckit.synthetic import (
    generate_synthetic_scene,
    make_synthetic_dataset,
    one_hot_scores,
    synthetic_instance_features,
)


class TestGenerateSyntheticScene:
    def test_shapes(self):
        scene = generate_synthetic_scene(5, 3.0, seed=1)
        cloud = scene.cloud
        assert len(np.unique(cloud.instance_labels)) == 5
        assert scene.offsets.shape == (len(cloud), 3)
        assert scene.boxes.shape == (5, 6)
        assert len(scene.box_classes) == 5
        assert (cloud.positions[:, 2] >= -1e-9).all()
        assert (cloud.positions[:, :2] >= 0).all() and (cloud.positions[:, :2] <= 3.0).all()

    def test_offsets_reach_centroids(self):
        scene = generate_synthetic_scene(4, 3.0, seed=2)
        shifted = scene.cloud.positions + scene.offsets
        for instance in range(4):
            members = scene.cloud.instance_labels == instance
            centroid = scene.cloud.positions[members].mean(axis=0)
            assert np.allclose(shifted[members], centroid, atol=1e-12)

    def test_single_object_identical_views(self):
        scene = generate_synthetic_scene(1, 2.0, seed=3, overlap=1.0)
        view_a, view_b = scene.views
        assert len(view_a.cloud) == len(view_b.cloud) == len(scene.cloud)
        assert np.array_equal(scene.correspondences.anchors, np.arange(len(scene.cloud)))
        assert np.array_equal(scene.correspondences.positives, np.arange(len(scene.cloud)))

    def test_views_are_posed(self):
        scene = generate_synthetic_scene(3, 3.0, seed=4, noise=0.0)
        for view in scene.views:
            world = view.pose.apply(view.cloud.positions)
            assert np.allclose(world, scene.cloud.positions[view.source_indices], atol=1e-9)
            assert np.allclose(inverse(view.pose).apply(world), view.cloud.positions, atol=1e-9)

    def test_correspondences_align_in_world(self):
        scene = generate_synthetic_scene(6, 3.0, seed=5, noise=0.002)
        pair = scene.scene_pair()
        world_a = pair.world_a[pair.matches.anchors]
        world_b = pair.world_b[pair.matches.positives]
        assert len(pair.matches) > 0
        assert np.linalg.norm(world_a - world_b, axis=1).max() < 0.025

    @pytest.mark.parametrize("noise", [0.01, 0.05, 0.5])
    def test_large_noise_keeps_matches_within_radius(self, noise):
        scene = generate_synthetic_scene(6, 3.0, seed=5, noise=noise)
        pair = scene.scene_pair()
        gaps = np.linalg.norm(pair.world_a[pair.matches.anchors] - pair.world_b[pair.matches.positives], axis=1)
        assert len(gaps) > 0
        assert gaps.max() <= pair.matches.match_radius + 1e-9

    def test_disjoint_views_are_not_mined(self):
        scene = generate_synthetic_scene(6, 3.0, seed=6, overlap=0.0)
        assert len(scene.correspondences) == 0
        frames = [(view.cloud, view.pose) for view in scene.views]
        assert mine_pairs(frames, voxel_size=None) == []

    def test_overlapping_views_are_mined(self):
        scene = generate_synthetic_scene(6, 3.0, seed=6, overlap=0.8, noise=0.0)
        frames = [(view.cloud, view.pose) for view in scene.views]
        assert len(mine_pairs(frames, voxel_size=None)) == 1

    def test_deterministic(self):
        a = generate_synthetic_scene(4, 3.0, seed=9)
        b = generate_synthetic_scene(4, 3.0, seed=9)
        assert np.array_equal(a.cloud.positions, b.cloud.positions)
        assert np.array_equal(a.views[1].cloud.positions, b.views[1].cloud.positions)

    @pytest.mark.parametrize(
        "num_objects, extent, error",
        [
            (0, 3.0, ConfigError),
            (3, 0.0, GeometryError),
            (40, 1.0, GeometryError),
        ],
    )
    def test_errors(self, num_objects, extent, error):
        with pytest.raises(error):
            generate_synthetic_scene(num_objects, extent)


class TestDataset:
    def test_pairs(self):
        pairs = make_synthetic_dataset(num_pairs=3, seed=0)
        assert [pair.pair_id for pair in pairs] == [0, 1, 2]
        for pair in pairs:
            assert len(pair.matches) > 0
            assert pair.matches.anchors.max() < len(pair.cloud_a)
            assert pair.matches.positives.max() < len(pair.cloud_b)

    def test_instance_features(self):
        scene = generate_synthetic_scene(3, 3.0, seed=0).cloud
        features = synthetic_instance_features(scene, dim=8, noise=0.0)
        assert features.normalized
        for instance in range(3):
            rows = features.values[scene.instance_labels == instance]
            assert np.allclose(rows, rows[0])

    def test_one_hot(self):
        scores = one_hot_scores(np.array([2, 0, 1]))
        assert scores.tolist() == [[0, 0, 1], [1, 0, 0], [0, 1, 0]]
        assert one_hot_scores(np.array([0]), num_classes=3).shape == (1, 3)
