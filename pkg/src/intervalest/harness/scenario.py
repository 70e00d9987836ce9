"""Scenario files: one YAML (or JSON) document describing an experiment.

Schema (version 1)::

    version: 1                      # mandatory
    name: str
    horizon: int
    seed: int                       # master seed for trajectory sampling
    num_trajectories: int
    sampling: uniform | vertex
    tolerance: float                # containment tolerance
    system:
      type: lti                     # A, B, optional C
      A: [[...]]
      B: [[...]]
      C: [[...]]
    # or
    system:
      type: sls
      modes: [{A: ..., B: ..., C: ...}, ...]
    x0: {center: [...], radius: [...]}   # or {lower: [...], upper: [...]}
    signals:
      w: <signal spec>              # see harness.signals
      v: <signal spec>              # measurement noise, closed loop only
    switching: {pattern: [0, 1, 2], dwell: 30}   # or {sequence: [...]}
    gains: synthesize | synthesize_nondiagonal | [L_1, ..., L_s]
    estimators:
      - {kind: tight}
      - {kind: truncated, q: 2}
      - {kind: constant_radius, r_o: 0.3}
      - {kind: realization}
    expect_ordering: [[tight, truncated_q2], ...]   # narrower first
    tightness_oracle: false

Matrices are row-major nested lists.  Mode labels are 0-based.  Gains and
measurements switch the run to closed loop.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..errors import ScenarioError
from ..interval import IntervalVector
from ..lti import LtiSystem
from ..sls import SlsSystem, SwitchingSignal
from .signals import generate_signal

SCHEMA_VERSION = 1
ESTIMATOR_KINDS = ("tight", "truncated", "constant_radius", "realization", "psi_form")
SAMPLING_MODES = ("uniform", "vertex")
GAIN_METHODS = ("synthesize", "synthesize_nondiagonal")

_TOP_KEYS = {
    "version", "name", "horizon", "seed", "num_trajectories", "sampling", "tolerance", "system",
    "x0", "signals", "switching", "gains", "estimators", "expect_ordering", "tightness_oracle",
}


def estimator_label(cfg):
    return cfg["kind"] if cfg.get("q") is None else f"{cfg['kind']}_q{cfg['q']}"


def _matrix(value, what, vector_as_column=False):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: not a numeric matrix ({exc})") from None
    if arr.ndim == 1:
        arr = arr[:, None] if vector_as_column else arr[None, :]
    if arr.ndim != 2:
        raise ScenarioError(f"{what}: expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{what}: non-finite entries")
    return arr


def _lti(spec, what):
    if not isinstance(spec, dict) or "A" not in spec or "B" not in spec:
        raise ScenarioError(f"{what}: needs A and B")
    A = _matrix(spec["A"], f"{what}.A")
    B = _matrix(spec["B"], f"{what}.B", vector_as_column=A.shape[0] > 1)
    C = None if spec.get("C") is None else _matrix(spec["C"], f"{what}.C")
    try:
        return LtiSystem(A, B, C)
    except ValueError as exc:
        raise ScenarioError(f"{what}: {exc}") from None


def parse_system(spec):
    """Build an :class:`LtiSystem` or :class:`SlsSystem` from a mapping."""
    if not isinstance(spec, dict):
        raise ScenarioError("system: must be a mapping")
    kind = spec.get("type", "sls" if "modes" in spec else "lti")
    if kind == "lti":
        return _lti(spec, "system")
    if kind == "sls":
        modes = spec.get("modes")
        if not modes:
            raise ScenarioError("system.modes: at least one mode is required")
        try:
            return SlsSystem(tuple(_lti(m, f"system.modes[{i}]") for i, m in enumerate(modes)))
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    raise ScenarioError(f"system.type: unknown type {kind!r}")


def system_to_dict(sys):
    def one(m):
        d = {"A": m.A.tolist(), "B": m.B.tolist()}
        if m.C is not None:
            d["C"] = m.C.tolist()
        return d

    if isinstance(sys, SlsSystem):
        return {"type": "sls", "modes": [one(m) for m in sys.modes]}
    return {"type": "lti", **one(sys)}


def parse_box(spec, n, what="x0"):
    if not isinstance(spec, dict):
        raise ScenarioError(f"{what}: must be a mapping")
    try:
        if "lower" in spec and "upper" in spec:
            box = IntervalVector(spec["lower"], spec["upper"])
        elif "center" in spec and "radius" in spec:
            c = np.broadcast_to(np.asarray(spec["center"], dtype=float), (n,))
            p = np.broadcast_to(np.asarray(spec["radius"], dtype=float), (n,))
            box = IntervalVector.from_center_radius(c, p)
        else:
            raise ScenarioError(f"{what}: needs lower/upper or center/radius")
    except ValueError as exc:
        raise ScenarioError(f"{what}: {exc}") from None
    if box.dim != n:
        raise ScenarioError(f"{what}: dimension {box.dim} does not match state dimension {n}")
    return box


def _switching(spec, s, horizon):
    if not isinstance(spec, dict):
        raise ScenarioError("switching: must be a mapping")
    try:
        if "sequence" in spec:
            sigma = SwitchingSignal(np.asarray(spec["sequence"]))
        elif "pattern" in spec:
            sigma = SwitchingSignal.dwell(list(spec["pattern"]), int(spec.get("dwell", 1)), horizon)
        else:
            raise ScenarioError("switching: needs sequence or pattern/dwell")
        sigma.validate(s, horizon)
    except ValueError as exc:
        raise ScenarioError(f"switching: {exc}") from None
    return sigma


def _estimator(cfg, i):
    if not isinstance(cfg, dict) or cfg.get("kind") not in ESTIMATOR_KINDS:
        raise ScenarioError(f"estimators[{i}]: kind must be one of {ESTIMATOR_KINDS}")
    out = {"kind": cfg["kind"]}
    extra = set(cfg) - {"kind", "q", "r_o"}
    if extra:
        raise ScenarioError(f"estimators[{i}]: unknown keys {sorted(extra)}")
    if cfg["kind"] == "truncated":
        q = cfg.get("q")
        if not isinstance(q, int) or q < 1:
            raise ScenarioError(f"estimators[{i}]: truncated needs an integer q >= 1")
        out["q"] = q
    elif "q" in cfg:
        raise ScenarioError(f"estimators[{i}]: q only applies to truncated")
    if cfg["kind"] == "constant_radius":
        if "r_o" not in cfg:
            raise ScenarioError(f"estimators[{i}]: constant_radius needs r_o")
        r = cfg["r_o"]
        out["r_o"] = [float(x) for x in r] if isinstance(r, (list, tuple)) else float(r)
    elif "r_o" in cfg:
        raise ScenarioError(f"estimators[{i}]: r_o only applies to constant_radius")
    return out


@dataclass
class Scenario:
    """Validated scenario; ``to_dict`` gives the normalized document."""

    name: str
    horizon: int
    seed: int
    num_trajectories: int
    system: object
    x0: IntervalVector
    w_spec: dict
    v_spec: dict | None
    switching: dict | None
    sigma: SwitchingSignal | None
    gains: object
    estimators: list
    expect_ordering: list = field(default_factory=list)
    sampling: str = "uniform"
    tolerance: float = 1e-9
    tightness_oracle: bool = False

    @property
    def is_sls(self):
        return isinstance(self.system, SlsSystem)

    @property
    def closed_loop(self):
        return self.gains is not None

    @property
    def n(self):
        return self.system.n

    def w(self):
        return generate_signal(self.w_spec, self.horizon, self.system.n_w, "signals.w")

    def v(self):
        if self.v_spec is None:
            return None
        return generate_signal(self.v_spec, self.horizon, self.system.n_y, "signals.v")

    def labels(self):
        return [estimator_label(e) for e in self.estimators]

    def to_dict(self):
        d = {
            "version": SCHEMA_VERSION,
            "name": self.name,
            "horizon": self.horizon,
            "seed": self.seed,
            "num_trajectories": self.num_trajectories,
            "sampling": self.sampling,
            "tolerance": self.tolerance,
            "system": system_to_dict(self.system),
            "x0": {"lower": self.x0.lower.tolist(), "upper": self.x0.upper.tolist()},
            "signals": {"w": copy.deepcopy(self.w_spec)},
            "estimators": copy.deepcopy(self.estimators),
            "expect_ordering": [list(p) for p in self.expect_ordering],
            "tightness_oracle": self.tightness_oracle,
        }
        if self.v_spec is not None:
            d["signals"]["v"] = copy.deepcopy(self.v_spec)
        if self.switching is not None:
            d["switching"] = copy.deepcopy(self.switching)
        if self.gains is not None:
            d["gains"] = self.gains if isinstance(self.gains, str) else [np.asarray(L).tolist() for L in self.gains]
        return d

    def dump(self, path):
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def parse_scenario(doc):
    """Validate a scenario mapping and return a :class:`Scenario`."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping")
    if "version" not in doc:
        raise ScenarioError("version: field is mandatory")
    if doc["version"] != SCHEMA_VERSION:
        raise ScenarioError(f"version: unsupported schema version {doc['version']!r} (expected {SCHEMA_VERSION})")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level keys {sorted(unknown)}")
    horizon = doc.get("horizon")
    if not isinstance(horizon, int) or horizon < 1:
        raise ScenarioError("horizon: must be a positive integer")
    sys = parse_system(doc.get("system"))
    x0 = parse_box(doc.get("x0"), sys.n)
    signals = doc.get("signals") or {}
    if "w" not in signals:
        raise ScenarioError("signals.w: input bounds are required")
    w_spec = copy.deepcopy(signals["w"])
    v_spec = copy.deepcopy(signals.get("v"))
    generate_signal(w_spec, horizon, sys.n_w, "signals.w")

    sigma, switching = None, None
    if isinstance(sys, SlsSystem):
        switching = copy.deepcopy(doc.get("switching"))
        if switching is None:
            raise ScenarioError("switching: required for switched systems")
        sigma = _switching(switching, sys.s, horizon)
    elif doc.get("switching") is not None:
        raise ScenarioError("switching: only valid for switched systems")

    gains = doc.get("gains")
    n_modes = sys.s if isinstance(sys, SlsSystem) else 1
    if gains is not None:
        if sys.n_y == 0:
            raise ScenarioError("gains: the system has no output matrix C")
        if v_spec is None:
            raise ScenarioError("signals.v: measurement noise bounds are required in closed loop")
        generate_signal(v_spec, horizon, sys.n_y, "signals.v")
        if isinstance(gains, str):
            if gains not in GAIN_METHODS:
                raise ScenarioError(f"gains: expected one of {GAIN_METHODS} or a list of matrices")
        else:
            mats = [_matrix(L, f"gains[{i}]", vector_as_column=True) for i, L in enumerate(gains)]
            if len(mats) != n_modes:
                raise ScenarioError(f"gains: expected {n_modes} matrices, got {len(mats)}")
            for i, L in enumerate(mats):
                if L.shape != (sys.n, sys.n_y):
                    raise ScenarioError(f"gains[{i}]: expected shape {(sys.n, sys.n_y)}, got {L.shape}")
            gains = mats

    ests = doc.get("estimators")
    if not ests:
        raise ScenarioError("estimators: at least one estimator is required")
    ests = [_estimator(e, i) for i, e in enumerate(ests)]
    labels = [estimator_label(e) for e in ests]
    if len(set(labels)) != len(labels):
        raise ScenarioError(f"estimators: duplicate labels in {labels}")
    for e in ests:
        if e["kind"] in ("constant_radius", "realization", "psi_form") and (gains is not None or isinstance(sys, SlsSystem)):
            raise ScenarioError(f"estimators: {e['kind']} is only available for open-loop LTI scenarios")
    ordering = doc.get("expect_ordering") or []
    for pair in ordering:
        if len(pair) != 2 or any(p not in labels for p in pair):
            raise ScenarioError(f"expect_ordering: {pair} must name two configured estimators {labels}")

    sampling = doc.get("sampling", "uniform")
    if sampling not in SAMPLING_MODES:
        raise ScenarioError(f"sampling: expected one of {SAMPLING_MODES}")
    n_traj = doc.get("num_trajectories", 1)
    if not isinstance(n_traj, int) or n_traj < 0:
        raise ScenarioError("num_trajectories: must be a nonnegative integer")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed: must be a nonnegative integer")

    return Scenario(
        name=str(doc.get("name", "scenario")),
        horizon=horizon,
        seed=seed,
        num_trajectories=n_traj,
        system=sys,
        x0=x0,
        w_spec=w_spec,
        v_spec=v_spec,
        switching=switching,
        sigma=sigma,
        gains=gains,
        estimators=ests,
        expect_ordering=[tuple(p) for p in ordering],
        sampling=sampling,
        tolerance=float(doc.get("tolerance", 1e-9)),
        tightness_oracle=bool(doc.get("tightness_oracle", False)),
    )


def load_document(path):
    """Read a YAML or JSON document (JSON is valid YAML, but errors read better)."""
    text = Path(path).read_text()
    try:
        if str(path).endswith(".json"):
            return json.loads(text)
        return yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{path}: cannot parse ({exc})") from None


def load_scenario(path):
    return parse_scenario(load_document(path))
