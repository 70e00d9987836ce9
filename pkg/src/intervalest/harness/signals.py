"""Bounded signal generators driven by plain mapping specs.

Three kinds are understood::

    {kind: sinusoidal, center: {amplitude, frequency, phase, offset},
                       radius: {amplitude, frequency, offset}}
    {kind: constant, center: c, radius: r}
    {kind: table, lower: [[...]], upper: [[...]]}      # or center/radius tables

A sinusoidal signal has center ``offset + amplitude * sin(2 pi f t + phase)``
and radius ``offset + amplitude * |cos(2 pi f t)|``.  Scalars broadcast over
the signal dimension.
"""

from __future__ import annotations

import numpy as np

from ..errors import ScenarioError
from ..lti import BoundedSignal

KINDS = ("sinusoidal", "constant", "table")


def _vec(value, dim, what):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(dim, arr[0])
    if arr.shape != (dim,):
        raise ScenarioError(f"{what}: expected a scalar or {dim} values, got {arr.tolist()}")
    return arr


def _sinusoid(spec, t, dim, what, fn):
    unknown = set(spec) - {"amplitude", "frequency", "phase", "offset"}
    if unknown:
        raise ScenarioError(f"{what}: unknown keys {sorted(unknown)}")
    amp = _vec(spec.get("amplitude", 0.0), dim, what + ".amplitude")
    freq = _vec(spec.get("frequency", 0.0), dim, what + ".frequency")
    phase = _vec(spec.get("phase", 0.0), dim, what + ".phase")
    offset = _vec(spec.get("offset", 0.0), dim, what + ".offset")
    return offset + amp * fn(2 * np.pi * freq * t[:, None] + phase)


def generate_signal(spec, horizon, dim=1, name="signal"):
    """Build a :class:`BoundedSignal` of ``horizon`` samples from ``spec``.

    Raises
    ------
    ScenarioError
        When the spec is malformed or describes an empty interval.
    """
    if not isinstance(spec, dict):
        raise ScenarioError(f"{name}: signal spec must be a mapping")
    kind = spec.get("kind")
    t = np.arange(horizon, dtype=float)
    if kind == "sinusoidal":
        if "phase" in spec.get("radius", {}):
            raise ScenarioError(f"{name}.radius: phase is not supported")
        c = _sinusoid(spec.get("center", {}), t, dim, f"{name}.center", np.sin)
        p = _sinusoid(spec.get("radius", {}), t, dim, f"{name}.radius", lambda x: np.abs(np.cos(x)))
    elif kind == "constant":
        c = np.tile(_vec(spec.get("center", 0.0), dim, f"{name}.center"), (horizon, 1))
        p = np.tile(_vec(spec.get("radius", 0.0), dim, f"{name}.radius"), (horizon, 1))
    elif kind == "table":
        if "lower" in spec and "upper" in spec:
            lo = np.asarray(spec["lower"], dtype=float).reshape(-1, dim)
            hi = np.asarray(spec["upper"], dtype=float).reshape(-1, dim)
            if min(lo.shape[0], hi.shape[0]) < horizon:
                raise ScenarioError(f"{name}: table has {min(lo.shape[0], hi.shape[0])} rows, horizon is {horizon}")
            if np.any(lo[:horizon] > hi[:horizon]):
                raise ScenarioError(f"{name}: lower bound exceeds upper bound")
            # keep the given corners exactly
            return BoundedSignal(lo[:horizon], hi[:horizon])
        elif "center" in spec and "radius" in spec:
            c = np.asarray(spec["center"], dtype=float).reshape(-1, dim)
            p = np.asarray(spec["radius"], dtype=float).reshape(-1, dim)
        else:
            raise ScenarioError(f"{name}: table needs lower/upper or center/radius")
        if c.shape[0] < horizon or p.shape[0] < horizon:
            raise ScenarioError(f"{name}: table has {min(c.shape[0], p.shape[0])} rows, horizon is {horizon}")
        c, p = c[:horizon], p[:horizon]
    else:
        raise ScenarioError(f"{name}: unknown signal kind {kind!r} (expected one of {KINDS})")
    if np.any(p < 0):
        raise ScenarioError(f"{name}: radius must be nonnegative")
    return BoundedSignal.from_center_radius(c, p)
