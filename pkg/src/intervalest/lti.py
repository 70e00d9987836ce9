"""Interval-valued estimators for ``x(t+1) = A x(t) + B w(t), y = C x + v``.

All estimators share one center/radius engine.  The closed-loop forms apply
the same engine to the observer rewriting ``x(t+1) = F x(t) + G s(t)`` with
``F = A - L C``, ``G = [B, L, -L]`` and ``s = (w, y, v)``.

Radii are always accumulated from absolute values of *full* products,
``|A^j B|``, never from ``|A|^j |B|``; the latter is what the order-1
truncation over-approximates.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    EmptyIntersectionError,
    HorizonError,
    InvalidIntervalError,
    QStarError,
    StabilityWarning,
)
from .interval import IntervalVector, as_matrix
from .spectral import spectral_radius

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray | None = None

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise DimensionError("A", f"must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        B = as_matrix(B, "B")
        if B.shape[0] != A.shape[0]:
            raise DimensionError("B", f"has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if self.C is not None:
            C = as_matrix(self.C, "C")
            if C.shape[1] != A.shape[0]:
                raise DimensionError("C", f"has {C.shape[1]} columns, state dimension is {A.shape[0]}")
            object.__setattr__(self, "C", C)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_w(self):
        return self.B.shape[1]

    @property
    def n_y(self):
        return 0 if self.C is None else self.C.shape[0]

    def require_output(self):
        if self.C is None:
            raise DimensionError("C", "closed-loop estimation needs an output matrix")
        return self.C


@dataclass(frozen=True, eq=False)
class BoundedSignal:
    """Time-indexed boxes ``[lower[t], upper[t]]``, t = 0..horizon-1."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.ndim == 1:
            lo, hi = lo[:, None], hi.reshape(-1, 1)
        if lo.ndim != 2 or lo.shape != hi.shape:
            raise DimensionError("upper", f"shape {hi.shape} does not match lower {lo.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidIntervalError("signal bounds must be finite")
        bad = np.argwhere(lo > hi)
        if bad.size:
            t, i = bad[0]
            raise InvalidIntervalError(f"lower > upper at t={t}, coordinate {i}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_center_radius(cls, center, radius):
        c = np.asarray(center, dtype=float)
        p = np.asarray(radius, dtype=float)
        if np.any(p < 0):
            raise InvalidIntervalError("radius must be nonnegative")
        return cls(c - p, c + p)

    @classmethod
    def constant(cls, center, radius, horizon):
        c = np.broadcast_to(np.atleast_1d(np.asarray(center, dtype=float)), (horizon, np.size(center)))
        p = np.broadcast_to(np.atleast_1d(np.asarray(radius, dtype=float)), c.shape)
        return cls.from_center_radius(c, p)

    @classmethod
    def known(cls, values):
        """Degenerate signal equal to ``values`` (shape (T, d))."""
        v = np.asarray(values, dtype=float)
        return cls(v, v)

    @classmethod
    def stack(cls, *signals):
        T = min(len(s) for s in signals)
        return cls(
            np.hstack([s.lower[:T] for s in signals]),
            np.hstack([s.upper[:T] for s in signals]),
        )

    @property
    def horizon(self):
        return self.lower.shape[0]

    @property
    def dim(self):
        return self.lower.shape[1]

    def __len__(self):
        return self.horizon

    def __getitem__(self, t):
        return IntervalVector(self.lower[t], self.upper[t])

    @property
    def center(self):
        return (self.upper + self.lower) / 2

    @property
    def radius(self):
        return (self.upper - self.lower) / 2


@dataclass
class EstimatorRun:
    """Interval estimates for t = 0..horizon.

    ``lower`` and ``upper`` have shape ``(horizon + 1, n)``.
    """

    kind: str
    lower: np.ndarray
    upper: np.ndarray
    q: int | None = None
    gains: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower.shape != self.upper.shape or self.lower.shape[0] == 0:
            raise DimensionError("upper", "estimator bounds must be nonempty and of equal shape")

    @classmethod
    def from_center_radius(cls, kind, center, radius, **kw):
        return cls(kind, center - radius, center + radius, **kw)

    @property
    def horizon(self):
        return self.lower.shape[0] - 1

    @property
    def n(self):
        return self.lower.shape[1]

    @property
    def center(self):
        return (self.upper + self.lower) / 2

    @property
    def radius(self):
        return (self.upper - self.lower) / 2

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def intervals(self):
        return [IntervalVector(lo, hi) for lo, hi in zip(self.lower, self.upper)]

    def __getitem__(self, t):
        return IntervalVector(self.lower[t], self.upper[t])

    @property
    def label(self):
        return self.kind if self.q is None else f"{self.kind}_q{self.q}"

    def contains(self, states, tol=0.0):
        states = np.asarray(states)
        T = min(states.shape[0], self.lower.shape[0])
        return bool(
            np.all(self.lower[:T] - tol <= states[:T]) and np.all(states[:T] <= self.upper[:T] + tol)
        )


@dataclass(frozen=True, eq=False)
class ClosedLoopData:
    """Observer rewriting ``x(t+1) = F x(t) + G s(t)`` for one gain ``L``."""

    L: np.ndarray
    F: np.ndarray
    G: np.ndarray
    s_signal: BoundedSignal


def closed_loop_data(sys, L, w, y, v):
    """Build ``F = A - L C``, ``G = [B, L, -L]`` and the stacked signal s.

    The measurement block of ``s`` is the known output ``y`` with zero
    radius.
    """
    C = sys.require_output()
    L = as_matrix(L, "L")
    if L.shape != (sys.n, sys.n_y):
        raise DimensionError("L", f"expected shape {(sys.n, sys.n_y)}, got {L.shape}")
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[1] != sys.n_y:
        raise DimensionError("y", f"expected shape (T, {sys.n_y}), got {y.shape}")
    if w.dim != sys.n_w:
        raise DimensionError("w", f"dimension {w.dim} does not match B with {sys.n_w} columns")
    if v.dim != sys.n_y:
        raise DimensionError("v", f"dimension {v.dim} does not match C with {sys.n_y} rows")
    F = sys.A - L @ C
    G = np.hstack([sys.B, L, -L])
    s = BoundedSignal.stack(w, BoundedSignal.known(y), v)
    return ClosedLoopData(L, F, G, s)


# -- shared engine -----------------------------------------------------------

def _check_horizon(horizon, *signals):
    if horizon < 0:
        raise HorizonError("horizon must be nonnegative")
    for name, sig in signals:
        if horizon > len(sig):
            raise HorizonError(f"horizon {horizon} exceeds {name} length {len(sig)}")


def _check_x0(x0, n):
    if x0.dim != n:
        raise DimensionError("x0", f"dimension {x0.dim} does not match state dimension {n}")


def _center(F, G, c0, cs, T):
    c = np.empty((T + 1, F.shape[0]))
    c[0] = c0
    for t in range(T):
        c[t + 1] = F @ c[t] + G @ cs[t]
    return c


def _powers(F, G, T):
    """Return raw ``F^t`` (t = 0..T) and ``F^j G`` (j = 0..T-1)."""
    n = F.shape[0]
    Fp = np.empty((T + 1, n, n))
    Fp[0] = np.eye(n)
    for t in range(T):
        Fp[t + 1] = F @ Fp[t]
    K = Fp[:T] @ G if T else np.empty((0, n, G.shape[1]))
    return Fp, K


def _tight_radius(F, G, p0, ps, T):
    Fp, K = _powers(F, G, T)
    absK = np.abs(K)
    p = np.empty((T + 1, F.shape[0]))
    for t in range(T + 1):
        # sum_j |F^j G| p_s(t-1-j), j = 0..t-1
        p[t] = np.abs(Fp[t]) @ p0 + np.einsum("jab,jb->a", absK[:t], ps[:t][::-1])
    return p


def _truncated_radius(F, G, p0, ps, q, T):
    if q < 1:
        raise ValueError("truncation order q must be >= 1")
    head = min(q, T)
    p = np.empty((T + 1, F.shape[0]))
    p[: head + 1] = _tight_radius(F, G, p0, ps, head)
    if T <= q:
        return p
    Fp, K = _powers(F, G, q)
    absFq = np.abs(Fp[q])
    absK = np.abs(K)
    for t in range(q + 1, T + 1):
        p[t] = absFq @ p[t - q] + np.einsum("jab,jb->a", absK, ps[t - q:t][::-1])
    return p


def _warn_unstable(M, what):
    rho = spectral_radius(M)
    if rho >= 1:
        warnings.warn(f"{what} has spectral radius {rho:.6g} >= 1; bounds hold but may grow unboundedly",
                      StabilityWarning, stacklevel=3)
    return rho


# -- open loop ---------------------------------------------------------------

def tight_open_loop(sys, x0, w, horizon):
    """Tightest open-loop interval estimator.

    Parameters
    ----------
    sys : LtiSystem
    x0 : IntervalVector
        Box of admissible initial states.
    w : BoundedSignal
        Input bounds; needs at least ``horizon`` samples.
    horizon : int

    Returns
    -------
    EstimatorRun
        ``horizon + 1`` boxes, the smallest ones containing every reachable
        state at each time.
    """
    _check_x0(x0, sys.n)
    _check_horizon(horizon, ("w", w))
    rho = _warn_unstable(sys.A, "A")
    c = _center(sys.A, sys.B, x0.center, w.center, horizon)
    p = _tight_radius(sys.A, sys.B, x0.radius, w.radius, horizon)
    return EstimatorRun.from_center_radius("tight", c, p, meta={"rho_A": rho})


def truncated_open_loop(sys, x0, w, q, horizon):
    """Sliding-horizon over-approximation of the tight radius.

    For ``t <= q`` the radius is the tight one; afterwards
    ``p(t) = |A^q| p(t-q) + sum_{k=t-q}^{t-1} |A^{t-1-k} B| p_w(k)``.
    """
    if q < 1:
        raise ValueError("truncation order q must be >= 1")
    _check_x0(x0, sys.n)
    _check_horizon(horizon, ("w", w))
    rho = _warn_unstable(np.abs(np.linalg.matrix_power(sys.A, q)), f"|A^{q}|")
    c = _center(sys.A, sys.B, x0.center, w.center, horizon)
    p = _truncated_radius(sys.A, sys.B, x0.radius, w.radius, q, horizon)
    return EstimatorRun.from_center_radius("truncated", c, p, q=q, meta={"rho_abs_Aq": rho})


def psi_form_open_loop(sys, x0, w, horizon):
    """Order-1 estimator written on stacked bounds with ``psi``.

    Used to cross-check the center/radius form with ``q = 1``.
    """
    from .interval import psi

    _check_x0(x0, sys.n)
    _check_horizon(horizon, ("w", w))
    PA, PB = psi(sys.A), psi(sys.B)
    z = np.empty((horizon + 1, 2 * sys.n))
    z[0] = x0.stacked()
    for t in range(horizon):
        z[t + 1] = PA @ z[t] + PB @ np.concatenate([w.lower[t], w.upper[t]])
    return EstimatorRun("psi_form", z[:, : sys.n], z[:, sys.n:], q=1)


def find_qstar(A, q_max=100):
    """Smallest ``q <= q_max`` with ``rho(|A^q|) < 1``.

    Raises
    ------
    QStarError
        If ``rho(A) >= 1`` (no such q exists) or none is found by ``q_max``.
    """
    A = as_matrix(A, "A")
    rho = spectral_radius(A)
    if rho >= 1:
        raise QStarError(f"rho(A) = {rho:.6g} >= 1: no q* exists")
    Aq = np.eye(A.shape[0])
    for q in range(1, q_max + 1):
        Aq = A @ Aq
        if spectral_radius(np.abs(Aq)) < 1:
            return q
    raise QStarError(f"no q <= {q_max} with rho(|A^q|) < 1")


def constant_radius_open_loop(sys, x0, c_w, r_o, horizon, w=None):
    """Estimator driven by a constant input radius ``r_o``.

    Runs ``M(t+1) = A M(t)``, ``r(t+1) = r(t) + |M(t) B| r_o`` and
    ``p(t) = |M(t)| p_x(0) + r(t)``; the center uses the true ``c_w``.
    ``r_o`` must dominate the input radius at every time; when the full
    signal ``w`` is supplied this is checked.
    """
    _check_x0(x0, sys.n)
    r_o = np.atleast_1d(np.asarray(r_o, dtype=float))
    if r_o.shape != (sys.n_w,):
        raise DimensionError("r_o", f"expected {sys.n_w} entries, got {r_o.shape}")
    if np.any(r_o < 0):
        raise ValueError("r_o must be nonnegative")
    c_w = np.asarray(c_w, dtype=float)
    if c_w.ndim == 1:
        c_w = c_w[:, None]
    if c_w.shape[0] < horizon:
        raise HorizonError(f"horizon {horizon} exceeds c_w length {c_w.shape[0]}")
    if w is not None and np.any(w.radius[:horizon] > r_o + 1e-15):
        raise ValueError("r_o does not dominate the input radius")
    rho = _warn_unstable(sys.A, "A")
    c = _center(sys.A, sys.B, x0.center, c_w, horizon)
    p = np.empty((horizon + 1, sys.n))
    M = np.eye(sys.n)
    r = np.zeros(sys.n)
    p0 = x0.radius
    for t in range(horizon + 1):
        p[t] = np.abs(M) @ p0 + r
        r = r + np.abs(M @ sys.B) @ r_o
        M = sys.A @ M
    return EstimatorRun.from_center_radius(
        "constant_radius", c, p, meta={"r_o": r_o.tolist(), "rho_A": rho}
    )


# -- closed loop -------------------------------------------------------------

def _closed_loop(sys, L, x0, w, y, v, horizon):
    _check_x0(x0, sys.n)
    cl = closed_loop_data(sys, L, w, y, v)
    _check_horizon(horizon, ("w", w), ("y", cl.s_signal), ("v", v))
    return cl


def closed_loop_truncated(sys, L, x0, w, y, v, q, horizon):
    """Truncation-order-q estimator on the observer rewriting for gain ``L``.

    ``q = 1`` gives the interval Luenberger observer
    ``p(t+1) = |A - LC| p(t) + |[B, L, -L]| p_s(t)``.
    """
    if q < 1:
        raise ValueError("truncation order q must be >= 1")
    cl = _closed_loop(sys, L, x0, w, y, v, horizon)
    rho = _warn_unstable(np.abs(np.linalg.matrix_power(cl.F, q)), f"|(A-LC)^{q}|")
    s = cl.s_signal
    c = _center(cl.F, cl.G, x0.center, s.center, horizon)
    p = _truncated_radius(cl.F, cl.G, x0.radius, s.radius, q, horizon)
    return EstimatorRun.from_center_radius(
        "closed_loop_truncated", c, p, q=q, gains=[cl.L], meta={"rho_abs_Fq": rho}
    )


def closed_loop_tight(sys, L, x0, w, y, v, horizon):
    """Tightest estimator for the observer rewriting with a fixed gain ``L``."""
    cl = _closed_loop(sys, L, x0, w, y, v, horizon)
    rho = _warn_unstable(cl.F, "A-LC")
    s = cl.s_signal
    c = _center(cl.F, cl.G, x0.center, s.center, horizon)
    p = _tight_radius(cl.F, cl.G, x0.radius, s.radius, horizon)
    return EstimatorRun.from_center_radius(
        "closed_loop_tight", c, p, gains=[cl.L], meta={"rho_F": rho}
    )


def gain_family_intersection(sys, gains, x0, w, y, v, horizon):
    """Intersect the tight closed-loop estimates of a finite gain family.

    Lower bounds are maximized and upper bounds minimized over the members
    with ``rho(A - L C) < 1``; unstable members are dropped with a warning.
    This approximates the optimum over all stabilizing gains by a finite
    subfamily only.
    """
    gains = [as_matrix(L, "L") for L in gains]
    if not gains:
        raise ValueError("gain family is empty")
    C = sys.require_output()
    kept = []
    for i, L in enumerate(gains):
        rho = spectral_radius(sys.A - L @ C)
        if rho >= 1:
            warnings.warn(f"gain {i} rejected: rho(A-LC) = {rho:.6g} >= 1", StabilityWarning, stacklevel=2)
        else:
            kept.append(L)
    if not kept:
        raise ValueError("no gain in the family stabilizes A - LC")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        runs = [closed_loop_tight(sys, L, x0, w, y, v, horizon) for L in kept]
    lower = np.max([r.lower for r in runs], axis=0)
    upper = np.min([r.upper for r in runs], axis=0)
    bad = np.argwhere(upper < lower)
    if bad.size:
        t, i = bad[0]
        raise EmptyIntersectionError(
            f"empty intersection at t={t}, coordinate {i}: inputs are inconsistent"
        )
    return EstimatorRun(
        "gain_family_intersection", lower, upper, gains=kept,
        meta={"family_size": len(gains), "used": len(kept),
              "approximation": "finite gain family; not the optimum over all stabilizing gains"},
    )
