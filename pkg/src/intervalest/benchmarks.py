"""Reference systems and signal settings used by the scenario files and tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval import IntervalVector
from .lti import BoundedSignal, LtiSystem
from .sls import SlsSystem, SwitchingSignal

OPEN_LOOP_A = np.array([
    [0.10, 0.60, 0.05],
    [0.20, 0.35, -0.50],
    [-0.55, -0.15, 0.40],
])
OPEN_LOOP_B = np.array([[-0.5], [0.7], [1.0]])

X0_CENTER = np.array([0.50, -1.0, -2.0])
X0_RADIUS = np.array([3.0, 2.0, 4.0])

# input: center sin(2 pi nu_c t), radius amplitude * |cos(2 pi nu_p t)|
NU_C = 0.01
NU_P = 0.001
INPUT_AMPLITUDE = 0.10
CONSTANT_RADIUS = 0.3

SLS_A = (
    np.array([[-0.40, 0.075, -0.55], [-0.50, -0.15, 0.50], [-0.16, 0.75, 0.45]]),
    np.array([[-0.30, -0.20, 0.50], [-0.25, -0.80, -0.15], [-0.45, 0.6, -0.25]]),
    np.array([[0.25, -0.70, 0.15], [0.06, -0.10, -0.70], [0.80, 0.60, 0.15]]),
)
SLS_B = (
    np.array([[-0.60], [-1.20], [0.25]]),
    np.array([[0.20], [-0.25], [-1.0]]),
    np.array([[0.0], [0.40], [1.85]]),
)
SLS_C = (
    np.array([[0.0, -0.85, -1.0]]),
    np.array([[0.50, 0.0, 0.15]]),
    np.array([[0.20, -0.06, 2.0]]),
)
SLS_DWELL = 30
SLS_NOISE_RADIUS = 0.1


@dataclass(frozen=True)
class Benchmark:
    system: object
    x0: IntervalVector
    w: BoundedSignal
    horizon: int
    v: BoundedSignal | None = None
    sigma: SwitchingSignal | None = None


def sinusoidal_input(horizon, nu_c=NU_C, nu_p=NU_P, amplitude=INPUT_AMPLITUDE):
    t = np.arange(horizon)
    c = np.sin(2 * np.pi * nu_c * t)[:, None]
    p = amplitude * np.abs(np.cos(2 * np.pi * nu_p * t))[:, None]
    return BoundedSignal.from_center_radius(c, p)


def initial_box():
    return IntervalVector.from_center_radius(X0_CENTER, X0_RADIUS)


def open_loop_example(horizon=300):
    """Three-state open-loop system with sinusoidal input bounds."""
    return Benchmark(LtiSystem(OPEN_LOOP_A, OPEN_LOOP_B), initial_box(), sinusoidal_input(horizon), horizon)


def sls_modes():
    """``(A_i, C_i)`` pairs of the three-mode switched example."""
    return list(zip(SLS_A, SLS_C))


def sls_example(horizon=300, gains=None):
    """Three-mode switched system, dwell-30 cyclic switching, constant noise box."""
    sys = SlsSystem(tuple(zip(SLS_A, SLS_B, SLS_C)), None if gains is None else tuple(gains))
    v = BoundedSignal.constant(0.0, SLS_NOISE_RADIUS, horizon)
    sigma = SwitchingSignal.dwell([0, 1, 2], SLS_DWELL, horizon)
    return Benchmark(sys, initial_box(), sinusoidal_input(horizon), horizon, v=v, sigma=sigma)
