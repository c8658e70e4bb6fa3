import logging

import numpy as np
import pytest

from sckit.active_labeling import (
    IGNORE_LABEL,
    LabelBudget,
    SelectConfig,
    SelectionResult,
    backproject_features,
    clutter_density,
    expand_labels,
    is_cluttered,
    kmeans,
    lloyd_iterations,
    object_coverage,
    select_points,
)
from sckit.benchmark import propagate_labels
from sckit.cloud import PointCloud
from sckit.errors import ConfigError, EvaluationError
from sckit.metrics import miou
from sckit.synthetic import generate_synthetic_scene, synthetic_instance_features


def _blobs(rng, centers, per_blob=50, spread=0.05):
    data = np.concatenate([np.asarray(c) + spread * rng.standard_normal((per_blob, len(c))) for c in centers])
    labels = np.repeat(np.arange(len(centers)), per_blob)
    return data, labels


class TestKMeans:
    def test_recovers_separated_blobs(self, rng):
        data, labels = _blobs(rng, [[0, 0], [5, 0], [0, 5]])
        centroids, assignment = kmeans(data, 3, seed=0)
        assert centroids.shape == (3, 2)
        # same partition up to relabeling
        for blob in range(3):
            assert len(np.unique(assignment[labels == blob])) == 1
        assert len(np.unique(assignment)) == 3

    def test_objective_never_increases(self, rng):
        data = rng.normal(size=(400, 4))
        objectives = [objective for _, _, objective in lloyd_iterations(data, 12, iterations=30, seed=3)]
        assert len(objectives) == 30
        assert all(b <= a + 1e-9 for a, b in zip(objectives, objectives[1:]))

    def test_deterministic(self, rng):
        data = rng.normal(size=(200, 3))
        c1, a1 = kmeans(data, 7, seed=11)
        c2, a2 = kmeans(data, 7, seed=11)
        assert np.array_equal(c1, c2)
        assert np.array_equal(a1, a2)

    def test_empty_cluster_is_reseeded(self, caplog):
        # duplicate rows can seed two identical centroids
        data = np.array([[0.0], [0.0], [0.0], [10.0]])
        with caplog.at_level(logging.WARNING, logger="sckit"):
            centroids, assignment = kmeans(data, 2, iterations=5, seed=0)
        assert len(np.unique(assignment)) == 2
        assert sorted(centroids.ravel().tolist()) == [0.0, 10.0]

    def test_single_cluster_is_the_mean(self, rng):
        data = rng.normal(size=(60, 5))
        centroids, assignment = kmeans(data, 1, seed=2)
        assert np.allclose(centroids[0], data.mean(axis=0))
        assert not assignment.any()

    @pytest.mark.parametrize("k", [0, 5])
    def test_bad_k(self, k):
        with pytest.raises(ConfigError):
            kmeans(np.zeros((4, 2)), k)


class TestSelectPoints:
    @pytest.fixture(scope="class")
    def scene(self):
        return generate_synthetic_scene(12, 3.5, seed=7, imbalance=0.5).cloud

    @pytest.mark.parametrize("strategy", ["random", "kmeans_raw", "kmeans_features"])
    def test_budget_distinct_sorted(self, scene, strategy):
        features = synthetic_instance_features(scene, seed=7)
        selection = select_points(scene, features, 20, strategy, seed=1)
        assert isinstance(selection, SelectionResult)
        assert len(selection) == 20
        assert len(np.unique(selection.selected_indices)) == 20
        assert np.all(np.diff(selection.selected_indices) > 0)
        assert selection.strategy == strategy
        assert selection.budget == 20

    @pytest.mark.parametrize("strategy", ["random", "kmeans_features"])
    def test_deterministic(self, scene, strategy):
        features = synthetic_instance_features(scene, seed=7)
        first = select_points(scene, features, 20, strategy, seed=4)
        second = select_points(scene, features, 20, strategy, seed=4)
        assert np.array_equal(first.selected_indices, second.selected_indices)

    def test_label_budget(self, scene):
        selection = select_points(scene, None, LabelBudget(5), "random")
        assert len(selection) == 5

    def test_budget_above_scene_size(self, caplog):
        scene = PointCloud(np.zeros((4, 3)))
        with caplog.at_level(logging.WARNING, logger="sckit"):
            selection = select_points(scene, None, 10, "random")
        assert selection.selected_indices.tolist() == [0, 1, 2, 3]
        assert any("W002" in record.getMessage() for record in caplog.records)

    def test_budget_equal_to_scene_size_is_silent(self, caplog):
        scene = PointCloud(np.zeros((4, 3)))
        with caplog.at_level(logging.WARNING, logger="sckit"):
            select_points(scene, None, 4, "random")
        assert not any("W002" in record.getMessage() for record in caplog.records)

    def test_kmeans_raw_needs_colors(self):
        with pytest.raises(ConfigError):
            select_points(PointCloud(np.random.default_rng(0).normal(size=(30, 3))), None, 5, "kmeans_raw")

    def test_kmeans_features_needs_features(self, scene):
        with pytest.raises(ConfigError):
            select_points(scene, None, 5, "kmeans_features")
        with pytest.raises(ConfigError):
            select_points(scene, np.zeros((3, 4)), 5, "kmeans_features")

    def test_unknown_strategy(self, scene):
        with pytest.raises(ConfigError):
            select_points(scene, None, 5, "entropy")

    def test_feature_clustering_covers_more_objects(self):
        random_coverage, kmeans_coverage = [], []
        for seed in range(20):
            scene = generate_synthetic_scene(12, 3.5, seed=seed, imbalance=0.5).cloud
            features = synthetic_instance_features(scene, seed=seed)
            random_coverage.append(object_coverage(scene, select_points(scene, features, 20, "random", seed)))
            kmeans_coverage.append(object_coverage(scene, select_points(scene, features, 20, "kmeans_features", seed)))
        assert np.mean(kmeans_coverage) >= np.mean(random_coverage)

    def test_two_objects_two_points(self, rng):
        positions = np.concatenate([rng.uniform(0, 0.3, size=(40, 3)), rng.uniform(2.0, 2.3, size=(60, 3))])
        features = np.concatenate([np.tile([1.0, 0.0, 0.0], (40, 1)), np.tile([0.0, 1.0, 0.0], (60, 1))])
        scene = PointCloud(positions, instance_labels=np.repeat([0, 1], [40, 60]))
        for seed in range(5):
            selection = select_points(scene, features, 2, "kmeans_features", seed=seed)
            assert sorted(scene.instance_labels[selection.selected_indices].tolist()) == [0, 1]

    @pytest.mark.parametrize("seed", range(5))
    def test_selected_points_are_nearest_members(self, scene, seed):
        features = synthetic_instance_features(scene, seed=seed)
        selection = select_points(scene, features, 15, "kmeans_features", seed=seed)
        values = features.values / np.linalg.norm(features.values, axis=1, keepdims=True)
        data = np.hstack([values, scene.positions])
        centroids, assignment = kmeans(data, 15, seed=seed)
        expected = []
        for cluster in np.unique(assignment):
            members = np.flatnonzero(assignment == cluster)
            distances = np.sum((data[members] - centroids[cluster]) ** 2, axis=1)
            expected.append(members[np.argmin(distances)])
        assert selection.selected_indices.tolist() == sorted(expected)

    def test_same_seed_reproduces_selection_labels_and_scores(self):
        def run(seed):
            scene = generate_synthetic_scene(10, 3.0, seed=seed, imbalance=0.5).cloud
            features = synthetic_instance_features(scene, seed=seed)
            selection = select_points(scene, features, 20, "kmeans_features", seed=seed)
            mask = expand_labels(scene, selection)
            pred = propagate_labels(scene.positions, np.flatnonzero(mask != IGNORE_LABEL), mask)
            value, per_class = miou(pred, scene.semantic_labels, 4)
            return selection.selected_indices, mask, np.array([value, object_coverage(scene, selection)]), per_class

        first = run(3)
        second = run(3)
        for a, b in zip(first, second):
            assert a.tobytes() == b.tobytes()

    def test_twenty_labels_on_a_large_scene(self):
        rng = np.random.default_rng(0)
        scene = PointCloud(rng.uniform(0, 10, size=(150_000, 3)), semantic_labels=rng.integers(0, 20, size=150_000))
        mask = expand_labels(scene, select_points(scene, None, 20, "random", seed=0))
        assert int((mask != IGNORE_LABEL).sum()) == 20


class TestSelectConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(strategy="entropy"),
            dict(budget=0),
            dict(iterations=0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            SelectConfig(**kwargs)


class TestLabels:
    def test_expand_labels(self, labeled_cloud):
        mask = expand_labels(labeled_cloud, np.array([0, 5]))
        assert mask.dtype == np.uint8
        assert mask[0] == labeled_cloud.semantic_labels[0]
        assert mask[5] == labeled_cloud.semantic_labels[5]
        assert (np.delete(mask, [0, 5]) == IGNORE_LABEL).all()

    def test_expand_labels_needs_labels(self):
        with pytest.raises(EvaluationError):
            expand_labels(PointCloud(np.zeros((3, 3))), np.array([0]))

    def test_object_coverage(self, labeled_cloud):
        instances = labeled_cloud.instance_labels
        first_of_each = [int(np.flatnonzero(instances == i)[0]) for i in np.unique(instances)]
        assert object_coverage(labeled_cloud, first_of_each[:2]) == pytest.approx(2 / len(first_of_each))
        assert object_coverage(labeled_cloud, first_of_each) == 1.0

    def test_object_coverage_needs_instances(self):
        with pytest.raises(EvaluationError):
            object_coverage(PointCloud(np.zeros((3, 3))), np.array([0]))


class TestBackproject:
    def test_nearest_voxel(self):
        voxels = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        features = np.array([[1.0, 0.0], [0.0, 1.0]])
        points = np.array([[0.1, 0.0, 0.0], [0.9, 0.1, 0.0], [0.4, 0.0, 0.0]])
        result = backproject_features(voxels, features, points)
        assert np.array_equal(result.values, [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])

    def test_row_mismatch(self):
        with pytest.raises(ConfigError):
            backproject_features(np.zeros((2, 3)), np.zeros((3, 2)), np.zeros((1, 3)))


class TestClutter:
    def test_density(self):
        scene = PointCloud(
            [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 1.0, 0.0]],
            instance_labels=[0, 1, 2, 2],
        )
        assert clutter_density(scene) == pytest.approx(1.5)
        assert is_cluttered(scene)
        assert not is_cluttered(scene, threshold=2.0)

    def test_synthetic_scene_is_cluttered(self):
        # every object lies inside the 3.5 m room
        assert clutter_density(generate_synthetic_scene(12, 3.5, seed=0).cloud) >= 12 / 3.5 ** 2
