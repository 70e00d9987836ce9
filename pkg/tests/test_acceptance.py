"""Exit criteria of the build, one test (group) per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one PASS/FAIL line per criterion.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_schur
from intervalest.benchmarks import CONSTANT_RADIUS, open_loop_example, sls_example, sls_modes
from intervalest.harness import Fault, load_scenario, replay, verify
from intervalest.harness.oracle import vertex_bounds
from intervalest.interval import IntervalVector, psi, similarity_check
from intervalest.lti import (
    BoundedSignal,
    LtiSystem,
    constant_radius_open_loop,
    tight_open_loop,
    truncated_open_loop,
)
from intervalest.realization import ho_kalman, radius_impulse_response, realizability_test
from intervalest.sls import simulate_sls, tight_sls, truncated_sls
from intervalest.spectral import MatrixSet, jsr_bounds, spectral_radius, ues_check
from intervalest.synthesis import synthesize_lti, synthesize_sls_diagonal

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

pytestmark = pytest.mark.acceptance


@pytest.mark.criterion(1, "tight open-loop bounds match vertex enumeration (>= 50 systems, 1e-10, < 30 s)")
def test_tightness_oracle_equivalence():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    count = 0
    for _ in range(60):
        n = int(rng.integers(1, 4))
        horizon = int(rng.integers(1, 7))
        A = random_schur(rng, n)
        B = rng.normal(size=(n, 1))
        x0 = IntervalVector.from_center_radius(rng.normal(size=n), rng.uniform(0.1, 2, size=n))
        w = BoundedSignal.from_center_radius(rng.normal(size=(horizon, 1)), rng.uniform(0.1, 1, size=(horizon, 1)))
        run = tight_open_loop(LtiSystem(A, B), x0, w, horizon)
        lo, hi = vertex_bounds(A, B, x0, w, horizon)  # 2^(n + horizon) vertices
        worst = max(worst, np.abs(lo - run.lower).max(), np.abs(hi - run.upper).max())
        count += 1
    elapsed = time.perf_counter() - start
    assert count >= 50
    assert worst <= 1e-10, worst
    assert elapsed < 30, elapsed


@pytest.mark.criterion(2, "open-loop example: 100 trajectories contained, width ordering holds (< 10 s)")
def test_open_loop_example():
    start = time.perf_counter()
    b = open_loop_example(300)
    sc = load_scenario(SCENARIOS / "open_loop.yaml")
    sc.estimators = [e for e in sc.estimators if e["kind"] != "realization"]
    sc.tightness_oracle = False
    assert sc.num_trajectories == 100
    report = verify(sc)
    elapsed = time.perf_counter() - start
    assert report.containment["passed"], report.violations[:3]
    assert set(report.runs) == {"tight", "truncated_q1", "truncated_q2", "constant_radius"}
    ordering = {(p["narrower"], p["wider"]): p["holds"] for p in report.ordering["expected"]}
    assert ordering == {
        ("tight", "truncated_q2"): True,
        ("truncated_q2", "truncated_q1"): True,
        ("tight", "constant_radius"): True,
    }
    # the scenario file carries the same data as the reference builders
    assert np.array_equal(sc.system.A, b.system.A)
    assert np.allclose(report.runs["tight"].lower, tight_open_loop(b.system, b.x0, b.w, 300).lower, atol=1e-12)
    assert report.runs["constant_radius"].meta["r_o"] == [CONSTANT_RADIUS]
    assert elapsed < 10, elapsed


@pytest.mark.criterion(3, "Hankel rank stabilizes at 6; realization reproduces radius over 200 steps (1e-8)")
def test_realizability():
    b = open_loop_example(200)
    H = radius_impulse_response(b.system.A, b.system.B, b.x0.radius, 60)
    res = realizability_test(H, r_max=10)
    assert res.realizable and res.rank == 6
    real = ho_kalman(H, res.rank)
    assert real.dimension == 6
    p_real = real.simulate(b.w.radius[:200])
    p_tight = tight_open_loop(b.system, b.x0, b.w, 200).radius
    assert np.abs(p_real - p_tight).max() <= 1e-8


@pytest.mark.criterion(4, "LTI synthesis: 100 random stabilizable pairs, all feasible, zero false certificates")
def test_lti_synthesis_soundness():
    rng = np.random.default_rng(4)
    false_certs = 0
    feasible = 0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        ny = int(rng.integers(1, n + 1))
        N = rng.random((n, n))
        N *= rng.uniform(0.3, 0.95) / spectral_radius(N)
        # A - L* C = N >= 0 and Schur, so a gain with rho(|A - LC|) < 1 exists
        L_star = 2 * rng.normal(size=(n, ny))
        C = rng.normal(size=(ny, n))
        A = N + L_star @ C
        res = synthesize_lti(A, C)
        if res.feasible:
            feasible += 1
            if spectral_radius(np.abs(A - res.gains[0] @ C)) >= 1:
                false_certs += 1
    assert false_certs == 0
    assert feasible == 100


@pytest.fixture(scope="module")
def switched_run():
    start = time.perf_counter()
    syn = synthesize_sls_diagonal(sls_modes())
    b = sls_example(300, syn.gains if syn.feasible else None)
    out = {"syn": syn, "bench": b, "start": start}
    if syn.feasible:
        rng = np.random.default_rng(5)
        x0 = rng.uniform(b.x0.lower, b.x0.upper)
        w = rng.uniform(b.w.lower, b.w.upper)
        v = rng.uniform(b.v.lower, b.v.upper)
        x, y = simulate_sls(b.system, b.sigma, x0, w, v)
        out["x"] = x
        out["tight"] = tight_sls(b.system, b.sigma, b.x0, b.w, y, b.v)
        out["trunc"] = truncated_sls(b.system, b.sigma, b.x0, b.w, y, b.v, q=1)
    out["elapsed"] = time.perf_counter() - start
    return out


@pytest.mark.criterion(5, "switched example: diagonal LMI feasible, |Sigma_F| certified, enclosure, tightness (< 60 s)")
def test_switched_example(switched_run):
    syn = switched_run["syn"]
    assert syn.feasible, syn.message
    F = switched_run["bench"].system.closed_loop_matrices()
    cert = ues_check(MatrixSet(tuple(np.abs(M) for M in F)), depth=12)
    assert cert.stable and cert.certifying_length <= 12
    assert cert.bounds.upper < 1
    x, tight, trunc = switched_run["x"], switched_run["tight"], switched_run["trunc"]
    assert tight.contains(x, tol=1e-9)
    assert trunc.contains(x, tol=1e-9)
    assert np.all(tight.width <= trunc.width + 1e-12)
    strictly = np.all(tight.width < trunc.width, axis=1)
    assert strictly.mean() >= 0.95, strictly.mean()
    assert switched_run["elapsed"] < 60


@pytest.mark.criterion(6, "rho(psi(M)) = rho(|M|) (1e-8), similarity residual <= 1e-12, singleton JSR")
def test_spectral_identities():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        M = rng.normal(size=(n, n)) * rng.uniform(0.1, 3)
        r_psi, r_abs = spectral_radius(psi(M)), spectral_radius(np.abs(M))
        assert abs(r_psi - r_abs) <= 1e-8 * max(r_abs, 1e-300)
        _, resid = similarity_check(M)
        assert resid <= 1e-12


@pytest.mark.criterion(6, "rho(psi(M)) = rho(|M|) (1e-8), similarity residual <= 1e-12, singleton JSR")
def test_singleton_jsr_converges():
    rng = np.random.default_rng(66)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        A = random_schur(rng, n)
        b = jsr_bounds([A], depth=50)
        rho = spectral_radius(A)
        assert abs(b.lower - rho) <= 1e-6
        assert b.lower <= rho * (1 + 1e-12) and rho <= b.upper * (1 + 1e-12)
        # upper bounds are nonincreasing in depth
        assert np.all(np.diff(b.upper_by_depth) <= 1e-15)
    # for normal matrices both ends of the bracket meet rho(A)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        S = rng.normal(size=(n, n))
        A = (S + S.T) / 2
        b = jsr_bounds([A], depth=50, norm="spectral")
        rho = spectral_radius(A)
        assert abs(b.lower - rho) <= 1e-6 and abs(b.upper - rho) <= 1e-6


@pytest.mark.criterion(7, "constant-radius estimator equals tight radius for constant input radius (1e-12)")
def test_constant_radius_exactness():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(1, 5))
        nw = int(rng.integers(1, 3))
        sys = LtiSystem(random_schur(rng, n), rng.normal(size=(n, nw)))
        T = int(rng.integers(1, 150))
        r = rng.uniform(0, 1, size=nw)
        c_w = rng.normal(size=(T, nw))
        w = BoundedSignal.from_center_radius(c_w, np.tile(r, (T, 1)))
        x0 = IntervalVector.from_center_radius(rng.normal(size=n), rng.uniform(0, 2, size=n))
        a = constant_radius_open_loop(sys, x0, c_w, r, T, w=w)
        b = tight_open_loop(sys, x0, w, T)
        assert np.abs(a.radius - b.radius).max() <= 1e-12
        assert np.abs(a.center - b.center).max() <= 1e-12


@pytest.mark.criterion(8, "fault injection is detected by verify and replays from its seed")
def test_fault_injection_detected():
    sc = load_scenario(SCENARIOS / "open_loop.yaml")
    sc.tightness_oracle = False
    clean = verify(sc)
    assert clean.passed
    t, i = 100, 0
    # push the lower bound just past the center: about half the samples fall below it
    eps = 1.05 * clean.runs["tight"].radius[t, i]
    report = verify(sc, fault=Fault("tight", t, i, eps))
    assert not report.passed and report.exit_code == 1
    assert report.violations
    v = report.violations[0]
    assert (v.estimator, v.t, v.coordinate, v.side) == ("tight", t, i, "lower")
    assert v.seed == (sc.seed, v.trajectory)
    again = replay(sc, v)
    first = replay(sc, v)
    assert again.fingerprint() == first.fingerprint()
    corrupted_lower = clean.runs["tight"].lower[t, i] + eps
    assert again.states[t, i] - corrupted_lower == pytest.approx(v.margin, abs=0, rel=0)
    unchanged = truncated_open_loop(sc.system, sc.x0, sc.w(), 1, sc.horizon)
    assert unchanged.contains(again.states)
