import numpy as np
import pytest

from modalform import (
    Geometry,
    InvalidParameterError,
    SampleSet,
    build_profile,
    build_spherical_cap,
    uniform_subsample,
)


def cap_area(radius, half_angle):
    return 2.0 * np.pi * radius**2 * (1.0 - np.cos(half_angle))


def triangle_areas(geometry):
    tris = geometry.elements
    a = geometry.nodes[tris[:, 1]] - geometry.nodes[tris[:, 0]]
    b = geometry.nodes[tris[:, 2]] - geometry.nodes[tris[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)


class TestBuildProfile:
    def test_two_point_line(self):
        geom = build_profile(1.0, 2)
        np.testing.assert_array_equal(geom.nodes, [[0, 0, 0], [1, 0, 0]])
        np.testing.assert_array_equal(geom.elements, [[0, 1]])

    def test_paper_scale_250_nodes(self):
        geom = build_profile(10.0, 250)
        assert geom.node_count == 250
        spacing = np.diff(geom.nodes[:, 0])
        np.testing.assert_allclose(spacing, 10.0 / 249, rtol=1e-12)

    def test_midpoint_by_symmetry(self):
        geom = build_profile(2.0, 3)
        np.testing.assert_allclose(geom.nodes[1], [1.0, 0.0, 0.0], atol=1e-15)

    def test_normals_all_plus_z(self):
        geom = build_profile(5.0, 17)
        np.testing.assert_array_equal(geom.normals, np.tile([0.0, 0.0, 1.0], (17, 1)))

    @pytest.mark.parametrize("length,count", [(0.0, 5), (-1.0, 5), (1.0, 1), (1.0, 0)])
    def test_invalid_parameters(self, length, count):
        with pytest.raises(InvalidParameterError):
            build_profile(length, count)


class TestBuildSphericalCap:
    def test_hemisphere_321_nodes_on_sphere(self, cap321):
        assert cap321.node_count == 321
        dist = np.linalg.norm(cap321.nodes, axis=1)
        np.testing.assert_allclose(dist, 1.0, atol=1e-9)

    def test_normals_are_radial(self):
        geom = build_spherical_cap(2.5, 0.9, 64)
        np.testing.assert_allclose(geom.normals, geom.nodes / 2.5, atol=1e-12)

    def test_normals_unit_length(self, cap321):
        lengths = np.linalg.norm(cap321.normals, axis=1)
        assert np.abs(lengths - 1.0).max() <= 1e-12

    def test_nearest_neighbor_distance_spread(self, cap321):
        # direct evaluation of the lattice's distance distribution
        delta = cap321.nodes[:, None, :] - cap321.nodes[None, :, :]
        dist = np.linalg.norm(delta, axis=2)
        np.fill_diagonal(dist, np.inf)
        nearest = dist.min(axis=1)
        assert nearest.std() / nearest.mean() < 0.25

    @pytest.mark.parametrize(
        "radius,half_angle,count",
        [(1.0, np.pi / 2, 321), (1.0, np.pi / 2, 500), (2.0, np.pi / 3, 400)],
    )
    def test_mesh_area_consistency(self, radius, half_angle, count):
        geom = build_spherical_cap(radius, half_angle, count)
        total = triangle_areas(geom).sum()
        exact = cap_area(radius, half_angle)
        assert abs(total - exact) <= 0.05 * exact

    def test_no_degenerate_triangles(self, cap321):
        assert triangle_areas(cap321).min() > 1e-12

    def test_elements_reference_valid_nodes(self, cap321):
        assert cap321.elements.min() >= 0
        assert cap321.elements.max() < cap321.node_count

    @pytest.mark.parametrize(
        "radius,half_angle,count",
        [(0.0, 1.0, 10), (1.0, 0.0, 10), (1.0, 2.0, 10), (1.0, 1.0, 3)],
    )
    def test_invalid_parameters(self, radius, half_angle, count):
        with pytest.raises(InvalidParameterError):
            build_spherical_cap(radius, half_angle, count)

    def test_rebuild_is_bit_identical(self):
        a = build_spherical_cap(1.0, np.pi / 2, 150)
        b = build_spherical_cap(1.0, np.pi / 2, 150)
        assert np.array_equal(a.nodes, b.nodes)
        assert np.array_equal(a.normals, b.normals)
        assert np.array_equal(a.elements, b.elements)
        assert a.ref == b.ref


class TestGeometryJson:
    def test_round_trip_exact(self, cap321):
        clone = Geometry.from_json(cap321.to_json())
        assert np.array_equal(clone.nodes, cap321.nodes)
        assert np.array_equal(clone.normals, cap321.normals)
        assert np.array_equal(clone.elements, cap321.elements)
        assert clone.ref == cap321.ref

    def test_missing_field_rejected(self):
        with pytest.raises(InvalidParameterError):
            Geometry.from_json('{"kind": "profile1d"}')

    def test_bad_normals_rejected(self, profile250):
        import json

        payload = json.loads(profile250.to_json())
        payload["normals"][0] = [0.0, 0.0, 2.0]
        with pytest.raises(InvalidParameterError):
            Geometry.from_json(json.dumps(payload))

    def test_degenerate_element_rejected(self):
        import json

        geom = build_profile(1.0, 3)
        payload = json.loads(geom.to_json())
        payload["elements"][0] = [1, 1]
        with pytest.raises(InvalidParameterError, match="degenerate"):
            Geometry.from_json(json.dumps(payload))


class TestUniformSubsample:
    def test_full_set(self, profile250):
        sample = uniform_subsample(profile250, 250, seed=11)
        np.testing.assert_array_equal(sample.indices, np.arange(250))

    def test_two_points_from_an_end(self, profile250):
        # seed 27 starts the farthest-point walk at node 0
        sample = uniform_subsample(profile250, 2, seed=27)
        np.testing.assert_array_equal(sample.indices, [0, 249])

    @pytest.mark.parametrize("seed", [0, 1, 7, 42, 1234])
    def test_gap_bound(self, profile250, seed):
        q = 15
        sample = uniform_subsample(profile250, q, seed)
        x = profile250.nodes[sample.indices, 0]
        gaps = np.diff(x)
        assert gaps.max() <= 2.0 * (10.0 / (q - 1))

    def test_deterministic(self, cap321):
        a = uniform_subsample(cap321, 40, seed=5)
        b = uniform_subsample(cap321, 40, seed=5)
        np.testing.assert_array_equal(a.indices, b.indices)

    @pytest.mark.parametrize("q", [0, 251])
    def test_q_out_of_range(self, profile250, q):
        with pytest.raises(InvalidParameterError):
            uniform_subsample(profile250, q, seed=0)


class TestSampleSet:
    def test_full_helper(self, profile250):
        sample = SampleSet.full(profile250.ref, 250)
        assert sample.is_full and sample.count == 250

    def test_rejects_unsorted(self, profile250):
        with pytest.raises(InvalidParameterError):
            SampleSet(profile250.ref, 250, [3, 1, 2])

    def test_rejects_duplicates(self, profile250):
        with pytest.raises(InvalidParameterError):
            SampleSet(profile250.ref, 250, [1, 1, 2])

    def test_rejects_out_of_range(self, profile250):
        with pytest.raises(InvalidParameterError):
            SampleSet(profile250.ref, 250, [0, 250])
