import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from intervalest.errors import DimensionError, InvalidIntervalError, NonFiniteError
from intervalest.interval import (
    IntervalVector,
    psi,
    similarity_check,
    t_matrix,
    t_matrix_inv,
    tightest_affine_image,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw, n):
    c = draw(arrays(float, n, elements=finite))
    p = draw(arrays(float, n, elements=st.floats(0, 5)))
    return IntervalVector.from_center_radius(c, p)


@st.composite
def matrix_and_box(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 4))
    M = draw(arrays(float, (n, m), elements=finite))
    return M, draw(boxes(m))


def test_worked_example():
    # [[1, -2], [0, 3]] applied to [-1, 1] x [0, 2]
    z = IntervalVector([-1.0, 0.0], [1.0, 2.0])
    out = tightest_affine_image([[1.0, -2.0], [0.0, 3.0]], z)
    assert np.array_equal(out.lower, [-5.0, 0.0])
    assert np.array_equal(out.upper, [1.0, 6.0])


def test_center_radius_round_trip():
    box = IntervalVector([-1.0, 2.0], [3.0, 2.0])
    assert np.array_equal(box.center, [1.0, 2.0])
    assert np.array_equal(box.radius, [2.0, 0.0])
    assert box.allclose(IntervalVector.from_center_radius(box.center, box.radius))


def test_validation():
    with pytest.raises(InvalidIntervalError):
        IntervalVector([1.0], [0.0])
    with pytest.raises(NonFiniteError):
        IntervalVector([np.nan], [0.0])
    with pytest.raises(DimensionError):
        tightest_affine_image(np.eye(2), IntervalVector.point([0.0, 0.0, 0.0]))
    with pytest.raises(DimensionError):
        tightest_affine_image(np.eye(2), IntervalVector.point([0.0, 0.0]), N=np.eye(2))


def test_bounds_are_read_only():
    box = IntervalVector([0.0], [1.0])
    with pytest.raises(ValueError):
        box.lower[0] = 5.0


@given(matrix_and_box())
def test_image_matches_vertex_enumeration(data):
    M, z = data
    out = tightest_affine_image(M, z)
    img = z.vertices() @ M.T
    tol = 1e-9 * (1 + np.abs(img).max())
    assert np.allclose(out.lower, img.min(axis=0), atol=tol)
    assert np.allclose(out.upper, img.max(axis=0), atol=tol)


@given(matrix_and_box(), st.integers(0, 2**32 - 1))
def test_image_contains_random_points(data, seed):
    M, z = data
    pts = np.random.default_rng(seed).uniform(z.lower, z.upper, size=(50, z.dim))
    out = tightest_affine_image(M, z)
    tol = 1e-9 * (1 + np.abs(M).sum() * (np.abs(z.lower).max() + np.abs(z.upper).max()))
    assert all(out.contains(M @ x, tol=tol) for x in pts)


@given(matrix_and_box())
def test_two_input_image_is_sum(data):
    M, z = data
    combined = tightest_affine_image(M, z, -M, z)
    # the two copies of z are independent, so the center cancels and radii add
    assert np.allclose(combined.center, 0, atol=1e-9 * (1 + np.abs(M).max() * 10))
    assert np.allclose(combined.radius, 2 * np.abs(M) @ z.radius)


@given(arrays(float, (3, 3), elements=finite), boxes(3))
def test_psi_maps_stacked_bounds(M, z):
    out = psi(M) @ z.stacked()
    ref = tightest_affine_image(M, z)
    assert np.allclose(out, ref.stacked(), atol=1e-9 * (1 + np.abs(out).max()))


@given(st.integers(1, 6))
def test_t_matrix_inverse(n):
    assert np.allclose(t_matrix(n) @ t_matrix_inv(n), np.eye(2 * n))


@given(arrays(float, (4, 4), elements=finite))
def test_similarity_residual(M):
    transformed, resid = similarity_check(M)
    assert resid <= 1e-12 * max(1.0, np.abs(M).max())
    assert np.allclose(transformed[:4, :4], M)
    assert np.allclose(transformed[4:, 4:], np.abs(M))


def test_nonnegative_matrix_psi_is_block_diagonal():
    M = np.array([[1.0, 2.0], [0.5, 0.0]])
    P = psi(M)
    assert np.array_equal(P[:2, :2], M)
    assert not P[:2, 2:].any()
