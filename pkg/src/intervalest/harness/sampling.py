"""Seeded sampling of admissible trajectories.

Trajectory ``k`` of a scenario with master seed ``m`` draws from a Philox
counter-based generator keyed by ``SeedSequence([m, k])``.  Draws are taken
in a fixed order (x0, then w row by row, then v row by row), so the
value used at a given (time, coordinate) is a pure function of
``(m, k, time, coordinate)``, independent of other trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sls import simulate_sls


@dataclass(frozen=True, eq=False)
class Trajectory:
    index: int
    seed: tuple
    x0: np.ndarray
    w: np.ndarray
    v: np.ndarray | None
    states: np.ndarray
    outputs: np.ndarray | None

    def fingerprint(self):
        """Bytes of every sampled and simulated value, for replay checks."""
        parts = [self.x0, self.w, self.states]
        parts += [a for a in (self.v, self.outputs) if a is not None]
        return b"".join(np.ascontiguousarray(a).tobytes() for a in parts)


def make_rng(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def _draw(rng, lower, upper, mode):
    lower, upper = np.asarray(lower), np.asarray(upper)
    if mode == "vertex":
        pick = rng.integers(0, 2, size=lower.shape).astype(bool)
        return np.where(pick, upper, lower)
    u = rng.random(size=lower.shape)
    return lower + (upper - lower) * u


def simulate_lti(sys, x0, w, v=None):
    """States (T+1, n) and, if C is set, outputs (T, n_y) for point data."""
    T = w.shape[0]
    x = np.empty((T + 1, sys.n))
    x[0] = x0
    for t in range(T):
        x[t + 1] = sys.A @ x[t] + sys.B @ w[t]
    y = None
    if sys.C is not None:
        y = x[:T] @ sys.C.T
        if v is not None:
            y = y + v
    return x, y


def sample_trajectory(scenario, index, w=None, v=None, mode=None):
    """Draw trajectory ``index`` of ``scenario``.

    ``w`` and ``v`` are the scenario's bounded signals; they are generated
    when not supplied.  ``mode`` overrides the scenario sampling mode.
    """
    mode = scenario.sampling if mode is None else mode
    w = scenario.w() if w is None else w
    v = scenario.v() if v is None and scenario.v_spec is not None else v
    rng = make_rng(scenario.seed, index)
    x0 = _draw(rng, scenario.x0.lower, scenario.x0.upper, mode)
    T = scenario.horizon
    wv = _draw(rng, w.lower[:T], w.upper[:T], mode)
    vv = None if v is None else _draw(rng, v.lower[:T], v.upper[:T], mode)
    if scenario.is_sls:
        states, outputs = simulate_sls(scenario.system, scenario.sigma, x0, wv, vv)
    else:
        states, outputs = simulate_lti(scenario.system, x0, wv, vv)
    return Trajectory(index, (scenario.seed, index), x0, wv, vv, states, outputs)
