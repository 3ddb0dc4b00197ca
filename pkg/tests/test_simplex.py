import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplex_eval._validation import DimensionError
from simplex_eval.simplex import (
    SimplexRotation,
    build_rotation,
    edge_matrix,
    from_reduced,
    is_in_simplex,
    to_reduced,
)


class TestBuildRotation:
    @pytest.mark.parametrize("k", [2, 3, 5, 20])
    def test_orthogonal(self, k):
        q = build_rotation(k).q_
        np.testing.assert_allclose(q.T @ q, np.eye(k), atol=1e-10)

    def test_r_diagonal_nonnegative(self):
        for k in (2, 3, 7):
            rot = build_rotation(k)
            r = rot.q_.T @ edge_matrix(k)
            assert np.all(np.diag(r)[: k - 1] >= 0)

    def test_k2_vertices_share_dropped_coordinate(self):
        rot = build_rotation(2)
        a = (np.array([1.0, 0.0]) - rot.anchor_) @ rot.q_
        b = (np.array([0.0, 1.0]) - rot.anchor_) @ rot.q_
        assert a[-1] == pytest.approx(b[-1], abs=1e-12)

    def test_k3_vertex_distances(self):
        rot = build_rotation(3)
        z = to_reduced(rot, np.eye(3))
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.linalg.norm(z[i] - z[j]) == pytest.approx(np.sqrt(2), abs=1e-12)

    def test_k_below_two_rejected(self):
        with pytest.raises(DimensionError):
            build_rotation(1)

    def test_fit_infers_k(self):
        rot = SimplexRotation().fit(np.full((4, 6), 1 / 6))
        assert rot.n_classes_ == 6
        assert rot.get_params() == {"n_classes": None}


class TestReducedCoordinates:
    def test_anchor_maps_to_origin(self):
        np.testing.assert_allclose(to_reduced(build_rotation(3), [1.0, 0, 0]), [0, 0], atol=1e-15)

    def test_origin_maps_to_anchor(self):
        np.testing.assert_allclose(from_reduced(build_rotation(4), np.zeros(3)), [1, 0, 0, 0], atol=1e-15)

    def test_centroid_equidistant(self):
        rot = build_rotation(3)
        c = to_reduced(rot, np.full(3, 1 / 3))
        d = np.linalg.norm(to_reduced(rot, np.eye(3)) - c, axis=1)
        np.testing.assert_allclose(d, np.sqrt(2 / 3), atol=1e-12)

    def test_far_point_sums_to_one_with_negative(self):
        v = from_reduced(build_rotation(3), np.array([10.0, 10.0]))
        assert v.sum() == pytest.approx(1.0, abs=1e-12)
        assert v.min() < 0

    def test_off_hull_rejected(self):
        with pytest.raises(ValueError, match="affine hull"):
            to_reduced(build_rotation(3), [0.5, 0.5, 0.5])

    def test_wrong_length_rejected(self):
        with pytest.raises(DimensionError):
            to_reduced(build_rotation(3), [0.5, 0.5])
        with pytest.raises(DimensionError):
            from_reduced(build_rotation(3), [0.5, 0.5, 0.0])

    @pytest.mark.parametrize("k", [2, 3, 5, 20])
    def test_dropped_coordinate_constant(self, rng, k):
        rot = build_rotation(k)
        p = rng.dirichlet(np.ones(k), 1000)
        dropped = ((p - rot.anchor_) @ rot.q_)[:, -1]
        assert dropped.var() < 1e-18
        np.testing.assert_allclose(dropped, rot.offset_, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(2, 12), seed=st.integers(0, 2**32 - 1))
def test_round_trip_and_isometry_property(k, seed):
    rng = np.random.default_rng(seed)
    rot = build_rotation(k)
    a, b = rng.dirichlet(np.ones(k), (2, 20))
    np.testing.assert_allclose(from_reduced(rot, to_reduced(rot, a)), a, atol=1e-10)
    dz = np.linalg.norm(to_reduced(rot, a) - to_reduced(rot, b), axis=1)
    np.testing.assert_allclose(dz, np.linalg.norm(a - b, axis=1), atol=1e-9)


class TestIsInSimplex:
    def test_examples(self):
        assert is_in_simplex([0.2, 0.3, 0.5])
        assert not is_in_simplex([1.1, -0.1, 0.0])
        assert is_in_simplex([0.5, 0.5, -1e-12])

    def test_rowwise(self):
        out = is_in_simplex(np.array([[0.2, 0.8], [0.5, 0.6]]))
        np.testing.assert_array_equal(out, [True, False])
