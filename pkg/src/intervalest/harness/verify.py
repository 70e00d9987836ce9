"""Monte Carlo verification of configured estimators on a scenario."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import QStarError, ScenarioError, StabilityWarning
from ..lti import (
    BoundedSignal,
    closed_loop_tight,
    closed_loop_truncated,
    constant_radius_open_loop,
    find_qstar,
    psi_form_open_loop,
    tight_open_loop,
    truncated_open_loop,
)
from ..realization import realization_open_loop
from ..sls import SlsSystem, abs_product_set, find_qstar_sls, tight_sls, truncated_sls
from ..spectral import MatrixSet, count_products, spectral_radius, ues_check
from ..synthesis import (
    SynthesisStatus,
    synthesize_lti,
    synthesize_sls_diagonal,
    synthesize_sls_nondiagonal,
)
from .oracle import vertex_bounds
from .sampling import sample_trajectory
from .scenario import estimator_label

log = logging.getLogger(__name__)

ORACLE_HORIZON = 6
ORACLE_MAX_VERTICES = 1 << 16
STABILITY_BUDGET = 2 * 10**5


@dataclass(frozen=True)
class Fault:
    """Deliberate corruption of one bound: ``lower += eps`` or ``upper -= eps``."""

    estimator: str
    t: int
    coordinate: int
    epsilon: float
    side: str = "lower"

    @classmethod
    def parse(cls, text):
        """Parse ``LABEL:T:COORD:EPS[:SIDE]``."""
        parts = text.split(":")
        if len(parts) not in (4, 5):
            raise ValueError(f"fault spec {text!r} is not LABEL:T:COORD:EPS[:SIDE]")
        side = parts[4] if len(parts) == 5 else "lower"
        if side not in ("lower", "upper"):
            raise ValueError("fault side must be lower or upper")
        return cls(parts[0], int(parts[1]), int(parts[2]), float(parts[3]), side)

    def apply(self, run):
        if self.side == "lower":
            run.lower[self.t, self.coordinate] += self.epsilon
        else:
            run.upper[self.t, self.coordinate] -= self.epsilon


@dataclass(frozen=True)
class Violation:
    estimator: str
    trajectory: int
    seed: tuple
    t: int
    coordinate: int
    side: str
    margin: float

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "trajectory": self.trajectory,
            "seed": list(self.seed),
            "t": self.t,
            "coordinate": self.coordinate,
            "side": self.side,
            "margin": self.margin,
        }


@dataclass
class VerificationReport:
    scenario: str
    status: str
    containment: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    ordering: dict = field(default_factory=dict)
    widths: dict = field(default_factory=dict)
    stability: dict = field(default_factory=dict)
    tightness: dict | None = None
    synthesis: dict | None = None
    runs: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self):
        return self.status == "pass"

    @property
    def exit_code(self):
        return {"pass": 0, "fail": 1, "infeasible": 2, "unknown": 3}[self.status]

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "status": self.status,
            "exit_code": self.exit_code,
            "containment": self.containment,
            "violations": [v.to_dict() for v in self.violations],
            "ordering": self.ordering,
            "widths": self.widths,
            "stability": self.stability,
            "tightness": self.tightness,
            "synthesis": self.synthesis,
        }

    def summary_lines(self):
        c = self.containment
        lines = [f"scenario {self.scenario}: {self.status.upper()}"]
        if c:
            lines.append(
                f"  containment: {'pass' if c['passed'] else 'FAIL'} "
                f"({c['trajectories']} trajectories, {len(self.violations)} violations)"
            )
        for pair in self.ordering.get("expected", []):
            lines.append(f"  ordering {pair['narrower']} <= {pair['wider']}: {'pass' if pair['holds'] else 'FAIL'}")
        if self.stability:
            st = "UNSTABLE" if self.stability["unstable"] else (
                "certified" if self.stability["bibo_certified"] else "not certified")
            lines.append(f"  stability: {st}")
        if self.tightness:
            lines.append(f"  tightness oracle max deviation: {self.tightness['max_deviation']:.3e}")
        for v in self.violations[:5]:
            lines.append(
                f"  violation {v.estimator} t={v.t} x{v.coordinate + 1} {v.side} margin={v.margin:.3e} "
                f"replay seed={list(v.seed)}"
            )
        return lines


def resolve_gains(scenario):
    """Return ``(gains or None, synthesis result or None)``."""
    g = scenario.gains
    if g is None:
        return None, None
    if not isinstance(g, str):
        return list(g), None
    sys = scenario.system
    if isinstance(sys, SlsSystem):
        pairs = [(m.A, m.C) for m in sys.modes]
        res = synthesize_sls_diagonal(pairs) if g == "synthesize" else synthesize_sls_nondiagonal(pairs)
    elif g == "synthesize":
        res = synthesize_lti(sys.A, sys.C)
    else:
        res = synthesize_sls_nondiagonal([(sys.A, sys.C)])
    return (res.gains if res.feasible else None), res


def run_estimators(scenario, gains=None, y=None, w=None, v=None):
    """Run every configured estimator; returns ``{label: EstimatorRun}``."""
    sys, x0, T = scenario.system, scenario.x0, scenario.horizon
    w = scenario.w() if w is None else w
    if scenario.closed_loop:
        v = scenario.v() if v is None else v
        if gains is None or y is None:
            raise ScenarioError("closed-loop estimators need gains and measurements")
    runs = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)  # reported under stability instead
        for cfg in scenario.estimators:
            kind, q = cfg["kind"], cfg.get("q")
            if isinstance(sys, SlsSystem):
                ssys = sys.with_gains(gains) if gains is not None else sys
                yy, vv = (y, v) if scenario.closed_loop else (None, None)
                if kind == "tight":
                    run = tight_sls(ssys, scenario.sigma, x0, w, yy, vv, horizon=T)
                else:
                    run = truncated_sls(ssys, scenario.sigma, x0, w, yy, vv, q=q, horizon=T)
            elif scenario.closed_loop:
                L = gains[0]
                if kind == "tight":
                    run = closed_loop_tight(sys, L, x0, w, y, v, T)
                else:
                    run = closed_loop_truncated(sys, L, x0, w, y, v, q, T)
            elif kind == "tight":
                run = tight_open_loop(sys, x0, w, T)
            elif kind == "truncated":
                run = truncated_open_loop(sys, x0, w, q, T)
            elif kind == "constant_radius":
                r_o = np.broadcast_to(np.asarray(cfg["r_o"], dtype=float), (sys.n_w,))
                run = constant_radius_open_loop(sys, x0, w.center, r_o, T, w=w)
            elif kind == "realization":
                run = realization_open_loop(sys, x0, w, T)
            else:
                run = psi_form_open_loop(sys, x0, w, T)
            runs[estimator_label(cfg)] = run
    return runs


def _stability(scenario, gains):
    sys = scenario.system
    out = {}
    qs = sorted({e["q"] for e in scenario.estimators if e.get("q")})
    if isinstance(sys, SlsSystem):
        F = (sys.with_gains(gains) if gains is not None else sys).closed_loop_matrices()
        for name, S in (("sigma_F", MatrixSet(tuple(F))), ("abs_sigma_F", MatrixSet(tuple(np.abs(M) for M in F)))):
            out[name] = ues_check(S, _depth(len(S))).to_dict()
        for q in qs:
            S = abs_product_set(F, q)
            out[f"abs_products_q{q}"] = ues_check(S, _depth(len(S))).to_dict()
        try:
            out["qstar"] = find_qstar_sls(F)[0]
        except QStarError as exc:
            out["qstar"] = None
            out["qstar_error"] = str(exc)
        bounded = out["sigma_F"]["status"] == "certified_stable"
        unstable = out["sigma_F"]["status"] == "certified_unstable"
    else:
        F = sys.A if gains is None else sys.A - gains[0] @ sys.C
        out["rho_F"] = spectral_radius(F)
        out["rho_abs_F"] = spectral_radius(np.abs(F))
        for q in qs:
            out[f"rho_abs_F_q{q}"] = spectral_radius(np.abs(np.linalg.matrix_power(F, q)))
        try:
            out["qstar"] = find_qstar(F)
        except QStarError as exc:
            out["qstar"] = None
            out["qstar_error"] = str(exc)
        bounded = out["rho_F"] < 1
        unstable = not bounded
    out["bibo_certified"] = bool(bounded)
    # bounds hold regardless, but growing widths are a failure for verification
    out["unstable"] = bool(unstable)
    return out


def _depth(s):
    d = 1
    while d < 12 and count_products(s, d + 1) <= STABILITY_BUDGET:
        d += 1
    return d


def _ordering(runs, expected, tol):
    labels = list(runs)
    matrix = {}
    strict = {}
    for a in labels:
        for b in labels:
            wa, wb = runs[a].width, runs[b].width
            matrix[f"{a}<={b}"] = bool(np.all(wa <= wb + tol * (1 + np.abs(wb))))
            strict[f"{a}<{b}"] = float(np.mean(np.all(wa < wb, axis=1)))
    exp = [
        {"narrower": a, "wider": b, "holds": matrix[f"{a}<={b}"]} for a, b in expected
    ]
    return {
        "passed": all(e["holds"] for e in exp),
        "expected": exp,
        "matrix": matrix,
        "strictly_narrower_fraction": strict,
    }


def _width_summary(runs):
    return {
        label: {
            "max": run.width.max(axis=0).tolist(),
            "mean": run.width.mean(axis=0).tolist(),
            "final": run.width[-1].tolist(),
            "finite": bool(np.all(np.isfinite(run.width))),
        }
        for label, run in runs.items()
    }


def _check(runs, traj, tol, violations, limit):
    x = traj.states
    ok = True
    for label, run in runs.items():
        lo_m = x - run.lower
        hi_m = run.upper - x
        for side, m in (("lower", lo_m), ("upper", hi_m)):
            bad = np.argwhere(m < -tol)
            if bad.size:
                ok = False
                for t, i in bad[: max(0, limit - len(violations))]:
                    violations.append(Violation(label, traj.index, traj.seed, int(t), int(i), side, float(m[t, i])))
    return ok


def _tightness(scenario, gains, runs, traj):
    tight = next((lbl for lbl, e in zip(runs, scenario.estimators) if e["kind"] == "tight"), None)
    if tight is None:
        return None
    sys = scenario.system
    w = scenario.w()
    if scenario.closed_loop:
        s = BoundedSignal.stack(w, BoundedSignal.known(traj.outputs), scenario.v())
    else:
        s = w
    h = min(ORACLE_HORIZON, scenario.horizon)
    if isinstance(sys, SlsSystem):
        ssys = sys.with_gains(gains) if gains is not None else sys
        F = ssys.closed_loop_matrices() if gains is not None else [m.A for m in sys.modes]
        G = ssys.input_matrices(gains is not None)
        Fs = [F[scenario.sigma[t]] for t in range(h)]
        Gs = [G[scenario.sigma[t]] for t in range(h)]
    elif gains is not None:
        L = gains[0]
        Fs, Gs = sys.A - L @ sys.C, np.hstack([sys.B, L, -L])
    else:
        Fs, Gs = sys.A, sys.B
    # shrink the horizon until enumeration is affordable
    while h > 0:
        free = np.sum(scenario.x0.width > 0) + np.sum(s.upper[:h] > s.lower[:h])
        if 2**free <= ORACLE_MAX_VERTICES:
            break
        h -= 1
    lo, hi = vertex_bounds(Fs, Gs, scenario.x0, s, h, ORACLE_MAX_VERTICES)
    run = runs[tight]
    dev = max(np.abs(lo - run.lower[: h + 1]).max(), np.abs(hi - run.upper[: h + 1]).max())
    return {"estimator": tight, "horizon": h, "max_deviation": float(dev), "passed": bool(dev <= 1e-10)}


def verify(scenario, fault=None, max_violations=100):
    """Run estimators, sample trajectories and check containment and ordering.

    Open-loop estimators are computed once.  Closed-loop estimators depend
    on the measured outputs, so they are rerun for every trajectory; their
    radii (and hence widths) do not depend on the measurements.

    Parameters
    ----------
    scenario : Scenario
    fault : Fault, optional
        Corrupts one bound of one estimator on every run, to check that
        the harness notices.
    max_violations : int
        Number of violations recorded in full.

    Returns
    -------
    VerificationReport
    """
    gains, syn = resolve_gains(scenario)
    syn_dict = None if syn is None else {k: v for k, v in syn.to_dict().items() if k != "solution"}
    if scenario.closed_loop and gains is None:
        status = "infeasible" if syn.status is SynthesisStatus.INFEASIBLE else "unknown"
        return VerificationReport(scenario.name, status, synthesis=syn_dict)
    if fault is not None and fault.estimator not in scenario.labels():
        raise ScenarioError(f"fault targets unknown estimator {fault.estimator!r}")

    w, v = scenario.w(), scenario.v()
    violations = []
    contained = True
    runs = None
    owner = None  # trajectory whose measurements produced ``runs``
    n_traj = scenario.num_trajectories
    for k in range(n_traj):
        traj = sample_trajectory(scenario, k, w, v)
        if runs is None or scenario.closed_loop:
            runs = run_estimators(scenario, gains, traj.outputs, w, v)
            owner = traj
            if fault is not None:
                fault.apply(runs[fault.estimator])
        contained &= _check(runs, traj, scenario.tolerance, violations, max_violations)
    if runs is None:
        owner = sample_trajectory(scenario, 0, w, v)
        runs = run_estimators(scenario, gains, owner.outputs, w, v)
        if fault is not None:
            fault.apply(runs[fault.estimator])

    ordering = _ordering(runs, scenario.expect_ordering, scenario.tolerance)
    widths = _width_summary(runs)
    stability = _stability(scenario, gains)
    tight = _tightness(scenario, gains, runs, owner) if scenario.tightness_oracle else None
    finite = all(wd["finite"] for wd in widths.values())
    ok = (contained and ordering["passed"] and finite and not stability["unstable"]
          and (tight is None or tight["passed"]))
    return VerificationReport(
        scenario=scenario.name,
        status="pass" if ok else "fail",
        containment={"passed": contained, "trajectories": n_traj, "tolerance": scenario.tolerance,
                     "violations_recorded": len(violations)},
        violations=violations,
        ordering=ordering,
        widths=widths,
        stability=stability,
        tightness=tight,
        synthesis=syn_dict,
        runs=runs,
    )


def replay(scenario, violation_or_index):
    """Re-draw the trajectory behind a violation (or index), bit-identically."""
    index = getattr(violation_or_index, "trajectory", violation_or_index)
    return sample_trajectory(scenario, int(index))
