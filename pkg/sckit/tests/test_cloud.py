import numpy as np
import pytest

from sckit.cloud import PointCloud, Pose, SpatialIndex, compose, inverse, transform, voxel_downsample, voxel_keys
from sckit.errors import GeometryError


class TestPointCloud:
    def test_optional_arrays_are_checked(self):
        with pytest.raises(GeometryError):
            PointCloud(np.zeros((3, 3)), semantic_labels=[0, 1])

    @pytest.mark.parametrize(
        "positions",
        [
            np.zeros((4, 2)),
            np.array([[0.0, np.nan, 0.0]]),
            np.array([[np.inf, 0.0, 0.0]]),
        ],
    )
    def test_bad_positions(self, positions):
        with pytest.raises(GeometryError):
            PointCloud(positions)

    def test_empty(self):
        cloud = PointCloud(np.empty((0, 3)))
        assert cloud.is_empty
        assert len(cloud) == 0

    def test_arrays_are_read_only(self, labeled_cloud):
        with pytest.raises(ValueError):
            labeled_cloud.positions[0, 0] = 1.0

    def test_select(self, labeled_cloud):
        sub = labeled_cloud.select([3, 1])
        assert np.array_equal(sub.positions, labeled_cloud.positions[[3, 1]])
        assert np.array_equal(sub.instance_labels, labeled_cloud.instance_labels[[3, 1]])
        assert sub.colors.dtype == np.uint8


class TestPose:
    def test_rejects_non_rotation(self):
        with pytest.raises(GeometryError):
            Pose(np.diag([1.0, 1.0, -1.0]))
        with pytest.raises(GeometryError):
            Pose(np.eye(3) * 2.0)

    def test_inverse_round_trip(self, rng):
        pose = Pose.about_z(0.7, [1.0, -2.0, 0.5])
        points = rng.normal(size=(50, 3))
        back = inverse(pose).apply(pose.apply(points))
        assert np.allclose(back, points, atol=1e-12)

    def test_compose_order(self, rng):
        a = Pose.about_z(0.3, [1.0, 0.0, 0.0])
        b = Pose.about_z(-1.1, [0.0, 2.0, 1.0])
        points = rng.normal(size=(20, 3))
        assert np.allclose(compose(a, b).apply(points), a.apply(b.apply(points)))

    def test_matrix(self):
        pose = Pose.about_z(np.pi / 2, [1.0, 2.0, 3.0])
        matrix = pose.matrix
        assert np.allclose(matrix[3], [0.0, 0.0, 0.0, 1.0])
        assert np.allclose(Pose.from_matrix(matrix).apply([[1.0, 0.0, 0.0]]), [[1.0, 3.0, 3.0]])

    def test_transform_keeps_attributes(self, labeled_cloud):
        moved = transform(labeled_cloud, Pose.about_z(0.0, [1.0, 0.0, 0.0]))
        assert np.allclose(moved.positions[:, 0], labeled_cloud.positions[:, 0] + 1.0)
        assert np.array_equal(moved.semantic_labels, labeled_cloud.semantic_labels)


class TestVoxelDownsample:
    def test_one_point_per_voxel(self, labeled_cloud):
        down = voxel_downsample(labeled_cloud, 0.5)
        keys = voxel_keys(labeled_cloud.positions, 0.5)
        assert len(down) == len(np.unique(keys, axis=0))
        assert len(np.unique(voxel_keys(down.positions, 0.5), axis=0)) == len(down)

    def test_centroid_and_majority_label(self):
        cloud = PointCloud(
            [[0.1, 0.1, 0.1], [0.2, 0.2, 0.2], [0.3, 0.3, 0.3], [1.5, 0.1, 0.1]],
            semantic_labels=[4, 2, 2, 7],
            instance_labels=[1, 0, 5, 3],
        )
        down = voxel_downsample(cloud, 1.0)
        assert len(down) == 2
        assert np.allclose(down.positions[0], [0.2, 0.2, 0.2])
        assert down.semantic_labels.tolist() == [2, 7]
        # three-way tie goes to the smallest id
        assert down.instance_labels.tolist() == [0, 3]

    def test_idempotent_at_same_size(self, labeled_cloud):
        once = voxel_downsample(labeled_cloud, 0.25)
        twice = voxel_downsample(once, 0.25)
        assert len(twice) == len(once)
        assert np.allclose(twice.positions, once.positions)

    @pytest.mark.parametrize("voxel_size", [0.0, -0.1])
    def test_bad_voxel_size(self, labeled_cloud, voxel_size):
        with pytest.raises(GeometryError):
            voxel_downsample(labeled_cloud, voxel_size)


class TestSpatialIndex:
    @pytest.mark.parametrize("seed", range(100))
    def test_radius_query_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.uniform(size=(300, 3))
        query = rng.uniform(-0.2, 1.2, size=3)
        radius = float(rng.uniform(0.0, 0.6))
        found = SpatialIndex(points).radius_query(query, radius)
        assert np.array_equal(found, np.sort(found))
        distances = np.linalg.norm(points - query, axis=1)
        inside = np.zeros(len(points), dtype=bool)
        inside[found] = True
        clear = np.abs(distances - radius) > 1e-9
        assert np.array_equal(inside[clear], (distances <= radius)[clear])

    def test_radius_query_on_unit_grid(self):
        points = np.array(np.meshgrid(*[np.arange(3.0)] * 3, indexing="ij")).reshape(3, -1).T
        found = SpatialIndex(points).radius_query([1.0, 1.0, 1.0], 1.0)
        assert len(found) == 7
        offsets = np.abs(points[found] - 1.0).sum(axis=1)
        assert sorted(offsets.tolist()) == [0.0] + [1.0] * 6

    def test_zero_radius_returns_the_point(self):
        index = SpatialIndex(np.array([[0.3, -0.2, 1.5]]))
        assert index.radius_query([0.3, -0.2, 1.5], 0.0).tolist() == [0]

    def test_nearest(self, rng):
        points = rng.uniform(size=(100, 3))
        queries = rng.uniform(size=(10, 3))
        distances, nearest = SpatialIndex(points).nearest(queries)
        brute = np.linalg.norm(queries[:, None] - points[None], axis=2)
        assert np.array_equal(nearest, brute.argmin(axis=1))
        assert np.allclose(distances, brute.min(axis=1))

    def test_empty_index(self):
        index = SpatialIndex(np.empty((0, 3)))
        assert len(index.radius_query([0.0, 0.0, 0.0], 1.0)) == 0
        distances, nearest = index.nearest(np.zeros((2, 3)))
        assert np.isinf(distances).all()
        assert (nearest == -1).all()
