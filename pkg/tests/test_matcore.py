import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ymrelax.errors import SingularError
from ymrelax.matcore import (
    Mat,
    RhoBall,
    det,
    frob_norm,
    in_rho_ball,
    invert,
    is_invertible,
    iter_coordinate_dyads,
    largest_singular_value,
    mat_close,
    max_norm_pair,
    rank_one_difference,
    singular_threshold,
    singular_values,
)

finite = st.floats(min_value=-10.0, max_value=10.0,
                   allow_nan=False, allow_infinity=False)


def np_of(a: Mat) -> np.ndarray:
    return np.array(a.rows())


def mats(n):
    return st.lists(finite, min_size=n * n, max_size=n * n).map(Mat.from_flat)


class TestAlgebra:
    @given(mats(2), mats(2))
    def test_add_sub_match_numpy(self, a, b):
        assert np.allclose(np_of(a + b), np_of(a) + np_of(b))
        assert np.allclose(np_of(a - b), np_of(a) - np_of(b))

    @given(mats(2), mats(2))
    def test_matmul_matches_numpy(self, a, b):
        assert np.allclose(np_of(a @ b), np_of(a) @ np_of(b), atol=1e-9)

    @given(mats(3), finite)
    def test_scalar_multiple(self, a, c):
        assert np.allclose(np_of(c * a), c * np_of(a))
        assert np.allclose(np_of(a * c), c * np_of(a))

    def test_mul_vec(self):
        a = Mat.from_rows([[1.0, 2.0], [3.0, 4.0]])
        assert a.mul_vec((1.0, 1.0)) == (3.0, 7.0)

    def test_coerce_forms(self):
        assert Mat.coerce(2.0).n == 1
        assert Mat.coerce([1.0, 0.0, 0.0, 1.0]).n == 2
        assert Mat.coerce([[1.0, 0.0], [0.0, 1.0]]).n == 2
        with pytest.raises(ValueError):
            Mat.coerce([1.0, 2.0, 3.0])  # not a square count
        with pytest.raises(ValueError):
            Mat.coerce(1.0, n=2)

    def test_transpose(self):
        a = Mat.from_rows([[1.0, 2.0], [3.0, 4.0]])
        assert a.transpose().rows() == [[1.0, 3.0], [2.0, 4.0]]


class TestDetInvert:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_det_matches_numpy(self, n, make_matrix):
        for _ in range(25):
            a = make_matrix(n)
            assert det(a) == pytest.approx(np.linalg.det(np_of(a)), rel=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_invert_matches_numpy(self, n, make_matrix):
        for _ in range(25):
            a = make_matrix(n)
            assert np.allclose(np_of(invert(a)), np.linalg.inv(np_of(a)),
                               atol=1e-9)

    def test_invert_roundtrip(self, make_matrix):
        a = make_matrix(2)
        assert mat_close(invert(invert(a)), a, tol=1e-9)

    def test_singular_rejected(self):
        s = Mat.from_rows([[1.0, 2.0], [2.0, 4.0]])
        assert not is_invertible(s)
        with pytest.raises(SingularError):
            invert(s)

    def test_threshold_scales_with_norm(self):
        # the cutoff is relative: a tiny but well-conditioned matrix stays invertible
        a = 1e-3 * Mat.identity(2)
        assert is_invertible(a)
        assert singular_threshold(a) < abs(det(a))

    @given(mats(2), mats(2))
    @settings(max_examples=60)
    def test_det_multiplicative(self, a, b):
        lhs = det(a @ b)
        rhs = det(a) * det(b)
        scale = max(1.0, abs(lhs), abs(rhs))
        assert abs(lhs - rhs) <= 1e-9 * scale


class TestSingularValues:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_match_numpy_svd(self, n, make_matrix):
        for _ in range(20):
            a = make_matrix(n)
            mine = singular_values(a)
            ref = np.linalg.svd(np_of(a), compute_uv=False)
            assert np.allclose(sorted(mine, reverse=True), ref, atol=1e-9)

    def test_largest_is_operator_norm(self, make_matrix):
        a = make_matrix(2)
        assert largest_singular_value(a) == pytest.approx(
            np.linalg.norm(np_of(a), 2), abs=1e-9)


class TestRankOne:
    def test_recovers_planted_direction(self, rng):
        for _ in range(30):
            a = Mat.from_rows(rng.normal(size=(2, 2)).tolist())
            vec = rng.normal(size=2)
            m = rng.normal(size=2)
            m = m / np.linalg.norm(m)
            b = a + Mat.outer(vec.tolist(), m.tolist())
            got = rank_one_difference(a, b)
            assert got is not None
            ga, gm = got
            diff = np_of(b - a)
            assert np.allclose(np.outer(ga, gm), diff, atol=1e-8)
            assert np.linalg.norm(gm) == pytest.approx(1.0, abs=1e-12)

    def test_full_rank_difference_rejected(self):
        a = Mat.identity(2)
        b = 2.0 * Mat.identity(2)
        assert rank_one_difference(a, b) is None

    def test_zero_difference_rejected(self):
        a = Mat.identity(2)
        assert rank_one_difference(a, a) is None

    def test_1d_always_rank_one(self):
        got = rank_one_difference(Mat.scalar(1.0), Mat.scalar(3.0))
        assert got is not None
        ga, gm = got
        assert ga[0] * gm[0] == pytest.approx(2.0)


class TestRhoBall:
    def test_identity_membership(self):
        for n in (1, 2, 3):
            i = Mat.identity(n)
            assert max_norm_pair(i) == pytest.approx(math.sqrt(n))
            assert in_rho_ball(i, RhoBall(math.sqrt(n) + 1e-9))
            assert not in_rho_ball(i, RhoBall(math.sqrt(n) - 1e-3))

    def test_singular_excluded(self):
        assert max_norm_pair(Mat.scalar(0.0)) == math.inf
        assert not in_rho_ball(Mat.scalar(0.0), RhoBall(1e6))

    def test_positive_det_variant(self):
        ball = RhoBall(3.0, positive_det_only=True)
        assert in_rho_ball(Mat.scalar(1.0), ball)
        assert not in_rho_ball(Mat.scalar(-1.0), ball)

    def test_small_norm_large_inverse(self):
        # |A| small forces |A^-1| large: excluded from modest balls
        a = Mat.scalar(0.01)
        assert not in_rho_ball(a, RhoBall(10.0))
        assert in_rho_ball(a, RhoBall(100.0))


def test_coordinate_dyads():
    dyads = list(iter_coordinate_dyads(2))
    assert len(dyads) == 4
    total = Mat.zero(2)
    for d in dyads:
        assert frob_norm(d) == pytest.approx(1.0)
        total = total + d
    assert total.flat == (1.0, 1.0, 1.0, 1.0)


def test_frob_norm_submultiplicative(make_matrix):
    for _ in range(20):
        a, b = make_matrix(2), make_matrix(2)
        assert frob_norm(a @ b) <= frob_norm(a) * frob_norm(b) + 1e-12
