import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_schur
from intervalest.errors import (
    DimensionError,
    EmptyIntersectionError,
    HorizonError,
    InvalidIntervalError,
    QStarError,
    StabilityWarning,
)
from intervalest.harness.oracle import vertex_bounds
from intervalest.interval import IntervalVector, tightest_affine_image
from intervalest.lti import (
    BoundedSignal,
    LtiSystem,
    closed_loop_data,
    closed_loop_tight,
    closed_loop_truncated,
    constant_radius_open_loop,
    find_qstar,
    gain_family_intersection,
    psi_form_open_loop,
    tight_open_loop,
    truncated_open_loop,
)

seeds = st.integers(0, 2**32 - 1)


def random_problem(seed, n=None, n_w=None, horizon=None, ny=None):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4)) if n is None else n
    n_w = int(rng.integers(1, 3)) if n_w is None else n_w
    T = int(rng.integers(1, 30)) if horizon is None else horizon
    C = None if ny is None else rng.normal(size=(ny, n))
    sys = LtiSystem(random_schur(rng, n), rng.normal(size=(n, n_w)), C)
    x0 = IntervalVector.from_center_radius(rng.normal(size=n), rng.uniform(0, 1, size=n))
    w = BoundedSignal.from_center_radius(rng.normal(size=(T, n_w)), rng.uniform(0, 0.5, size=(T, n_w)))
    return rng, sys, x0, w, T


def simulate(sys, x0, w):
    x = [x0]
    for wt in w:
        x.append(sys.A @ x[-1] + sys.B @ wt)
    return np.array(x)


def test_scalar_worked_example():
    # x+ = 0.5 x + w, x0 in [-1, 1], w in [0, 2]: radius 0.5^t + sum 0.5^k
    sys = LtiSystem([[0.5]], [[1.0]])
    run = tight_open_loop(sys, IntervalVector([-1.0], [1.0]), BoundedSignal.constant([1.0], [1.0], 3), 3)
    assert np.allclose(run.radius[:, 0], [1.0, 1.5, 1.75, 1.875])
    assert np.allclose(run.center[:, 0], [0.0, 1.0, 1.5, 1.75])


def test_validation():
    with pytest.raises(DimensionError):
        LtiSystem(np.ones((2, 3)), np.ones((2, 1)))
    with pytest.raises(DimensionError):
        LtiSystem(np.eye(2), np.ones((3, 1)))
    with pytest.raises(InvalidIntervalError):
        BoundedSignal([[1.0]], [[0.0]])
    sys = LtiSystem(np.eye(1) * 0.5, np.ones((1, 1)))
    with pytest.raises(HorizonError):
        tight_open_loop(sys, IntervalVector.point([0.0]), BoundedSignal.constant([0.0], [0.1], 3), 5)
    with pytest.raises(DimensionError):
        tight_open_loop(sys, IntervalVector.point([0.0, 1.0]), BoundedSignal.constant([0.0], [0.1], 3), 2)
    with pytest.raises(ValueError):
        truncated_open_loop(sys, IntervalVector.point([0.0]), BoundedSignal.constant([0.0], [0.1], 3), 0, 2)


def test_unstable_system_warns():
    sys = LtiSystem([[1.2]], [[1.0]])
    with pytest.warns(StabilityWarning):
        tight_open_loop(sys, IntervalVector.point([0.0]), BoundedSignal.constant([0.0], [0.1], 3), 3)


@given(seeds)
def test_tight_matches_vertex_oracle(seed):
    _, sys, x0, w, _ = random_problem(seed, n_w=1, horizon=5)
    run = tight_open_loop(sys, x0, w, 5)
    lo, hi = vertex_bounds(sys.A, sys.B, x0, w, 5)
    assert np.allclose(run.lower, lo, atol=1e-10)
    assert np.allclose(run.upper, hi, atol=1e-10)


@given(seeds)
def test_sandwich_and_containment(seed):
    rng, sys, x0, w, T = random_problem(seed)
    tight = tight_open_loop(sys, x0, w, T)
    runs = [truncated_open_loop(sys, x0, w, q, T) for q in (1, 2, 3)]
    for r in runs:
        assert np.all(tight.radius <= r.radius + 1e-12)
        # centers come back from (lower + upper) / 2, so roundoff scales with the radius
        assert np.allclose(r.center, tight.center, atol=1e-12 * (1 + r.radius.max()))
    # coarser truncation never helps when q divides the horizon structure
    assert np.all(runs[0].radius >= tight.radius - 1e-12)
    for _ in range(5):
        x = simulate(sys, rng.uniform(x0.lower, x0.upper), rng.uniform(w.lower, w.upper))
        assert tight.contains(x, tol=1e-9)
        assert all(r.contains(x, tol=1e-9) for r in runs)


@given(seeds)
def test_truncation_beyond_horizon_is_tight(seed):
    _, sys, x0, w, T = random_problem(seed)
    tight = tight_open_loop(sys, x0, w, T)
    trunc = truncated_open_loop(sys, x0, w, T + 1, T)
    assert np.allclose(trunc.radius, tight.radius, atol=1e-12)


@given(seeds)
def test_psi_form_equals_q1(seed):
    _, sys, x0, w, T = random_problem(seed)
    a = psi_form_open_loop(sys, x0, w, T)
    b = truncated_open_loop(sys, x0, w, 1, T)
    assert np.allclose(a.lower, b.lower, atol=1e-10)
    assert np.allclose(a.upper, b.upper, atol=1e-10)


def test_nonnegative_system_is_exact_for_every_q():
    rng = np.random.default_rng(0)
    A = rng.random((3, 3))
    A *= 0.8 / np.max(np.abs(np.linalg.eigvals(A)))
    sys = LtiSystem(A, rng.random((3, 1)))
    x0 = IntervalVector.from_center_radius(np.zeros(3), np.ones(3))
    w = BoundedSignal.constant([0.0], [0.2], 20)
    tight = tight_open_loop(sys, x0, w, 20)
    assert np.allclose(truncated_open_loop(sys, x0, w, 1, 20).radius, tight.radius)


def test_point_data_gives_zero_width():
    _, sys, x0, w, T = random_problem(5)
    x0 = IntervalVector.point(x0.center)
    w = BoundedSignal.known(w.center)
    run = tight_open_loop(sys, x0, w, T)
    assert np.array_equal(run.lower, run.upper)
    assert np.allclose(run.center, simulate(sys, x0.center, w.center))


def test_find_qstar():
    A = np.array([[0.5, 10.0], [0.0, 0.5]])
    q = find_qstar(A)
    assert np.max(np.abs(np.linalg.eigvals(np.abs(np.linalg.matrix_power(A, q))))) < 1
    assert np.max(np.abs(np.linalg.eigvals(np.abs(np.linalg.matrix_power(A, q - 1))))) >= 1
    assert find_qstar(np.diag([0.3, -0.2])) == 1
    with pytest.raises(QStarError):
        find_qstar(np.diag([1.1, 0.0]))


@given(seeds)
def test_constant_radius_dominates_tight(seed):
    _, sys, x0, w, T = random_problem(seed)
    r_o = w.radius.max(axis=0) + 0.1
    a = constant_radius_open_loop(sys, x0, w.center, r_o, T, w=w)
    assert np.all(a.radius >= tight_open_loop(sys, x0, w, T).radius - 1e-12)


def test_constant_radius_rejects_small_bound():
    _, sys, x0, w, T = random_problem(1)
    with pytest.raises(ValueError):
        constant_radius_open_loop(sys, x0, w.center, np.zeros(sys.n_w), T, w=w)


def lti_closed_loop_problem(seed, ny=1):
    rng, sys, x0, w, T = random_problem(seed, ny=ny)
    L = 0.1 * rng.normal(size=(sys.n, ny))
    v = BoundedSignal.constant(np.zeros(ny), 0.05 * np.ones(ny), T)
    x = simulate(sys, rng.uniform(x0.lower, x0.upper), rng.uniform(w.lower, w.upper))
    y = x[:T] @ sys.C.T + rng.uniform(v.lower, v.upper)
    return sys, L, x0, w, v, x, y, T


def test_closed_loop_data_layout():
    sys, L, x0, w, v, x, y, T = lti_closed_loop_problem(3)
    cl = closed_loop_data(sys, L, w, y, v)
    assert np.allclose(cl.F, sys.A - L @ sys.C)
    assert np.allclose(cl.G, np.hstack([sys.B, L, -L]))
    assert cl.s_signal.dim == sys.n_w + 2 * sys.n_y
    # the measured channel has zero width
    assert np.array_equal(cl.s_signal.radius[:, sys.n_w: sys.n_w + sys.n_y], 0 * y)


@given(seeds)
def test_closed_loop_containment(seed):
    sys, L, x0, w, v, x, y, T = lti_closed_loop_problem(seed)
    if np.max(np.abs(np.linalg.eigvals(sys.A - L @ sys.C))) >= 1:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        tight = closed_loop_tight(sys, L, x0, w, y, v, T)
        q1 = closed_loop_truncated(sys, L, x0, w, y, v, 1, T)
    assert tight.contains(x, tol=1e-9) and q1.contains(x, tol=1e-9)
    assert np.all(tight.radius <= q1.radius + 1e-12)


def test_zero_gain_reduces_to_open_loop():
    sys, L, x0, w, v, x, y, T = lti_closed_loop_problem(7)
    a = closed_loop_tight(sys, np.zeros_like(L), x0, w, y, v, T)
    b = tight_open_loop(sys, x0, w, T)
    assert np.allclose(a.lower, b.lower) and np.allclose(a.upper, b.upper)


def test_gain_family_intersection():
    sys, L, x0, w, v, x, y, T = lti_closed_loop_problem(11)
    gains = [np.zeros_like(L), L, -L]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        run = gain_family_intersection(sys, gains, x0, w, y, v, T)
        single = closed_loop_tight(sys, gains[0], x0, w, y, v, T)
    assert run.contains(x, tol=1e-9)
    assert np.all(run.width <= single.width + 1e-12)
    with pytest.raises(ValueError):
        gain_family_intersection(sys, [], x0, w, y, v, T)
    # measurements inconsistent with the bounds cannot be intersected
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        with pytest.raises(EmptyIntersectionError):
            gain_family_intersection(sys, [np.zeros_like(L), np.full_like(L, 0.4)], x0, w, y + 1e3, v, T)


def test_no_input_point_initial_state():
    rng = np.random.default_rng(8)
    A = random_schur(rng, 3)
    sys = LtiSystem(A, np.zeros((3, 1)))
    x0 = rng.normal(size=3)
    run = tight_open_loop(sys, IntervalVector.point(x0), BoundedSignal.constant([0.0], [1.0], 5), 5)
    assert np.allclose(run.radius, 0)
    assert np.allclose(run.center[5], np.linalg.matrix_power(A, 5) @ x0)


def test_memoryless_system():
    B = np.array([[1.0], [-2.0]])
    sys = LtiSystem(np.zeros((2, 2)), B)
    w = BoundedSignal.from_center_radius(np.arange(4.0)[:, None], np.full((4, 1), 0.5))
    run = tight_open_loop(sys, IntervalVector.from_center_radius([0.0, 0.0], [1.0, 1.0]), w, 4)
    for t in range(1, 5):
        ref = tightest_affine_image(B, w[t - 1])
        assert run[t].allclose(ref)


@given(seeds)
def test_truncation_monotone_under_divisibility(seed):
    _, sys, x0, w, T = random_problem(seed, horizon=40)
    p1, p2, p4 = (truncated_open_loop(sys, x0, w, q, T).radius for q in (1, 2, 4))
    assert np.all(p4 <= p2 * (1 + 1e-12) + 1e-12)
    assert np.all(p2 <= p1 * (1 + 1e-12) + 1e-12)


def test_bounded_over_long_horizon():
    rng = np.random.default_rng(9)
    A = random_schur(rng, 3, rho=0.5)
    while np.max(np.abs(np.linalg.eigvals(np.abs(A)))) >= 0.9:
        A = random_schur(rng, 3, rho=0.5)
    B = rng.normal(size=(3, 1))
    T = 10_000
    sys = LtiSystem(A, B)
    w = BoundedSignal.constant([0.0], [0.1], T)
    x0 = IntervalVector.from_center_radius(np.zeros(3), np.ones(3))
    p = truncated_open_loop(sys, x0, w, 1, T).radius
    # the q = 1 radius obeys p+ = |A| p + |B| r_w and settles at its fixed point
    fixed = np.linalg.solve(np.eye(3) - np.abs(A), np.abs(B)[:, 0] * 0.1)
    assert np.all(np.isfinite(p))
    assert np.allclose(p[-1], fixed, rtol=1e-10, atol=1e-14)
    assert np.max(np.abs(p[-1] - p[-2])) < 1e-12


def test_psi_form_relative_precision():
    _, sys, x0, w, T = random_problem(10, horizon=50)
    a = psi_form_open_loop(sys, x0, w, T)
    b = truncated_open_loop(sys, x0, w, 1, T)
    scale = np.maximum(np.abs(b.lower), np.abs(b.upper)).max()
    assert np.abs(a.lower - b.lower).max() <= 1e-12 * scale
    assert np.abs(a.upper - b.upper).max() <= 1e-12 * scale


def test_scaled_rotation_needs_q_above_one():
    c, s = np.cos(0.3), np.sin(0.3)
    A = 0.99 * np.array([[c, -s], [s, c]])
    q = find_qstar(A)
    assert q > 1
    for k in range(1, q):
        assert np.max(np.abs(np.linalg.eigvals(np.abs(np.linalg.matrix_power(A, k))))) >= 1


def test_constant_radius_zero_everything():
    _, sys, x0, w, T = random_problem(12)
    x0 = IntervalVector.point(x0.center)
    run = constant_radius_open_loop(sys, x0, w.center, np.zeros(sys.n_w), T)
    assert np.array_equal(run.radius, np.zeros_like(run.radius))


def test_deadbeat_gain():
    rng = np.random.default_rng(13)
    A = rng.normal(size=(2, 2))
    B = rng.normal(size=(2, 1))
    sys = LtiSystem(A, B, np.eye(2))
    T = 6
    w = BoundedSignal.from_center_radius(np.zeros((T, 1)), rng.uniform(0.1, 1, size=(T, 1)))
    v = BoundedSignal.known(np.zeros((T, 2)))
    y = rng.normal(size=(T, 2))
    x0 = IntervalVector.from_center_radius(np.zeros(2), np.ones(2))
    run = closed_loop_tight(sys, A, x0, w, y, v, T)
    assert np.allclose(run.radius[1:], w.radius @ np.abs(B).T)


@given(seeds)
def test_closed_loop_vertex_oracle(seed):
    rng, sys, x0, w, T = random_problem(seed, n=2, n_w=1, horizon=4, ny=1)
    L = 0.3 * rng.normal(size=(2, 1))
    v = BoundedSignal.from_center_radius(np.zeros((T, 1)), rng.uniform(0.05, 0.2, size=(T, 1)))
    y = rng.normal(size=(T, 1))
    cl = closed_loop_data(sys, L, w, y, v)
    lo, hi = vertex_bounds(cl.F, cl.G, x0, cl.s_signal, T)
    run = closed_loop_tight(sys, L, x0, w, y, v, T)
    assert np.allclose(run.lower, lo, atol=1e-10) and np.allclose(run.upper, hi, atol=1e-10)


def test_gain_family_singleton_and_duplicate():
    sys, L, x0, w, v, x, y, T = lti_closed_loop_problem(14)
    if np.max(np.abs(np.linalg.eigvals(sys.A - L @ sys.C))) >= 1:
        L = np.zeros_like(L)
    single = closed_loop_tight(sys, L, x0, w, y, v, T)
    for fam in ([L], [L, L]):
        run = gain_family_intersection(sys, fam, x0, w, y, v, T)
        assert np.array_equal(run.lower, single.lower) and np.array_equal(run.upper, single.upper)
    assert "approximation" in run.meta
