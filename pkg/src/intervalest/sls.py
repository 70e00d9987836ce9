"""Interval estimators for switched linear systems with known switching.

Mode ``i`` evolves as ``x(t+1) = A_i x(t) + B_i w(t)``, ``y = C_i x + v``.
With gains ``L_i`` the observer rewriting is ``F_i = A_i - L_i C_i`` and
``G_i = [B_i, L_i, -L_i]`` acting on ``s = (w, y, v)``.  Without
measurements the estimators run open loop with ``F_i = A_i``, ``G_i = B_i``.

The transition matrix ``Phi(t, t0) = F_sigma(t-1) ... F_sigma(t0)`` has the
latest mode leftmost.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, HorizonError, QStarError
from .interval import as_matrix
from .lti import BoundedSignal, EstimatorRun, LtiSystem, _check_horizon, _check_x0
from .spectral import PRODUCT_BUDGET, MatrixSet, Stability, count_products, ues_check


@dataclass(frozen=True, eq=False)
class SlsSystem:
    """Modes ``(A_i, B_i, C_i)`` of identical dimensions."""

    modes: tuple
    gains: tuple | None = None

    def __post_init__(self):
        modes = tuple(m if isinstance(m, LtiSystem) else LtiSystem(*m) for m in self.modes)
        if not modes:
            raise DimensionError("modes", "at least one mode is required")
        ref = modes[0]
        for i, m in enumerate(modes):
            if (m.n, m.n_w, m.n_y) != (ref.n, ref.n_w, ref.n_y):
                raise DimensionError(
                    f"modes[{i}]",
                    f"sizes (n, n_w, n_y) = {(m.n, m.n_w, m.n_y)} differ from mode 0 {(ref.n, ref.n_w, ref.n_y)}",
                )
        object.__setattr__(self, "modes", modes)
        if self.gains is not None:
            gains = tuple(as_matrix(L, f"gains[{i}]") for i, L in enumerate(self.gains))
            if len(gains) != len(modes):
                raise DimensionError("gains", f"expected {len(modes)} gains, got {len(gains)}")
            for i, L in enumerate(gains):
                if L.shape != (ref.n, ref.n_y):
                    raise DimensionError(f"gains[{i}]", f"expected shape {(ref.n, ref.n_y)}, got {L.shape}")
            object.__setattr__(self, "gains", gains)

    @property
    def s(self):
        return len(self.modes)

    @property
    def n(self):
        return self.modes[0].n

    @property
    def n_w(self):
        return self.modes[0].n_w

    @property
    def n_y(self):
        return self.modes[0].n_y

    def with_gains(self, gains):
        return SlsSystem(self.modes, tuple(gains))

    def closed_loop_matrices(self):
        """``F_i = A_i - L_i C_i`` (``A_i`` when no gains are set)."""
        if self.gains is None:
            return [m.A for m in self.modes]
        return [m.A - L @ m.require_output() for m, L in zip(self.modes, self.gains)]

    def input_matrices(self, measured):
        if not measured:
            return [m.B for m in self.modes]
        return [np.hstack([m.B, L, -L]) for m, L in zip(self.modes, self.gains)]


@dataclass(frozen=True, eq=False)
class SwitchingSignal:
    """Known mode sequence ``sigma(t)``, t = 0..horizon-1, 0-based labels."""

    sequence: np.ndarray

    def __post_init__(self):
        seq = np.asarray(self.sequence)
        if seq.ndim != 1:
            raise DimensionError("sequence", f"expected a 1-D label sequence, got shape {seq.shape}")
        if seq.size and (np.any(seq != np.round(seq)) or seq.min() < 0):
            raise ValueError("mode labels must be nonnegative integers")
        seq = seq.astype(int)
        seq.flags.writeable = False
        object.__setattr__(self, "sequence", seq)

    @classmethod
    def constant(cls, mode, horizon):
        return cls(np.full(horizon, mode, dtype=int))

    @classmethod
    def dwell(cls, pattern, dwell, horizon):
        """Cycle through ``pattern`` spending ``dwell`` steps in each mode."""
        if dwell < 1:
            raise ValueError("dwell must be >= 1")
        if not len(pattern):
            raise ValueError("pattern must be nonempty")
        seq = [pattern[(t // dwell) % len(pattern)] for t in range(horizon)]
        return cls(np.asarray(seq, dtype=int))

    @property
    def horizon(self):
        return self.sequence.shape[0]

    def __len__(self):
        return self.horizon

    def __getitem__(self, t):
        return int(self.sequence[t])

    def validate(self, s, horizon):
        if horizon > self.horizon:
            raise HorizonError(f"switching signal covers {self.horizon} steps, horizon is {horizon}")
        if self.horizon and (self.sequence.max() >= s):
            raise ValueError(f"mode label {int(self.sequence.max())} out of range for {s} modes")


def transition_matrix(sys, sigma, t, t0):
    """``Phi(t, t0) = F_sigma(t-1) ... F_sigma(t0)``; the identity when t = t0."""
    if t < t0:
        raise ValueError(f"t={t} precedes t0={t0}")
    sigma.validate(sys.s, t)
    F = sys.closed_loop_matrices()
    Phi = np.eye(sys.n)
    for k in range(t0, t):
        Phi = F[sigma[k]] @ Phi
    return Phi


def _setup(sys, sigma, x0, w, y, v, horizon):
    if not isinstance(sigma, SwitchingSignal):
        sigma = SwitchingSignal(sigma)
    _check_x0(x0, sys.n)
    measured = y is not None
    if measured:
        if sys.gains is None:
            raise DimensionError("gains", "measurements supplied but the system has no observer gains")
        if v is None:
            raise DimensionError("v", "measurement noise bounds are required with y")
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[1] != sys.n_y:
            raise DimensionError("y", f"expected shape (T, {sys.n_y}), got {y.shape}")
        if v.dim != sys.n_y:
            raise DimensionError("v", f"dimension {v.dim} does not match {sys.n_y} outputs")
        s_sig = BoundedSignal.stack(w, BoundedSignal.known(y), v)
        _check_horizon(horizon, ("w", w), ("y", s_sig), ("v", v))
        F = sys.closed_loop_matrices()
    else:
        s_sig = w
        _check_horizon(horizon, ("w", w))
        F = [m.A for m in sys.modes]
    if w.dim != sys.n_w:
        raise DimensionError("w", f"dimension {w.dim} does not match {sys.n_w} inputs")
    sigma.validate(sys.s, horizon)
    G = sys.input_matrices(measured)
    return sigma, F, G, s_sig


def _center(F, G, sigma, c0, cs, T):
    c = np.empty((T + 1, F[0].shape[0]))
    c[0] = c0
    for t in range(T):
        i = sigma[t]
        c[t + 1] = F[i] @ c[t] + G[i] @ cs[t]
    return c


def _tight_radius(F, G, sigma, p0, ps, T):
    n, m = F[0].shape[0], G[0].shape[1]
    p = np.empty((T + 1, n))
    Phi0 = np.eye(n)
    # K[j] = Phi(t, j+1) G_sigma(j), raw, for j < t
    K = np.empty((T, n, m))
    p[0] = p0
    for t in range(T):
        i = sigma[t]
        K[:t] = F[i] @ K[:t]
        K[t] = G[i]
        Phi0 = F[i] @ Phi0
        p[t + 1] = np.abs(Phi0) @ p0 + np.einsum("jab,jb->a", np.abs(K[: t + 1]), ps[: t + 1])
    return p


def tight_sls(sys, sigma, x0, w, y=None, v=None, horizon=None):
    """Tightest interval estimator along a known switching signal.

    Parameters
    ----------
    sys : SlsSystem
    sigma : SwitchingSignal
    x0 : IntervalVector
    w : BoundedSignal
    y : (T, n_y) array_like, optional
        Measured outputs.  When given, the observer gains of ``sys`` are used
        and ``v`` must bound the measurement noise.
    v : BoundedSignal, optional
    horizon : int, optional
        Defaults to the switching signal length.

    Returns
    -------
    EstimatorRun
    """
    horizon = len(sigma) if horizon is None else horizon
    sigma, F, G, s = _setup(sys, sigma, x0, w, y, v, horizon)
    c = _center(F, G, sigma, x0.center, s.center, horizon)
    p = _tight_radius(F, G, sigma, x0.radius, s.radius, horizon)
    return EstimatorRun.from_center_radius(
        "tight_sls", c, p, gains=None if sys.gains is None else list(sys.gains),
        meta={"closed_loop": y is not None, "sigma": sigma.sequence[:horizon].tolist()},
    )


def truncated_sls(sys, sigma, x0, w, y=None, v=None, q=1, horizon=None):
    """Sliding-horizon over-approximation of :func:`tight_sls`.

    Matches the tight radius for ``t <= q``; afterwards
    ``p(t) = |Phi(t, t-q)| p(t-q) + sum_{j=t-q}^{t-1} |Phi(t, j+1) G_sigma(j)| p_s(j)``.
    The center follows the exact recursion driven by the signal centers.
    The result is bounded when the set of absolute ``q``-products is stable;
    see :func:`find_qstar_sls`.
    """
    if q < 1:
        raise ValueError("truncation order q must be >= 1")
    horizon = len(sigma) if horizon is None else horizon
    sigma, F, G, s = _setup(sys, sigma, x0, w, y, v, horizon)
    c = _center(F, G, sigma, x0.center, s.center, horizon)
    head = min(q, horizon)
    p = np.empty((horizon + 1, sys.n))
    p[: head + 1] = _tight_radius(F, G, sigma, x0.radius, s.radius, head)
    ps = s.radius
    for t in range(q + 1, horizon + 1):
        Phi = np.eye(sys.n)
        acc = np.zeros(sys.n)
        # walk j = t-1 down to t-q, keeping Phi = Phi(t, j+1)
        for j in range(t - 1, t - q - 1, -1):
            i = sigma[j]
            acc += np.abs(Phi @ G[i]) @ ps[j]
            Phi = Phi @ F[i]
        p[t] = np.abs(Phi) @ p[t - q] + acc
    return EstimatorRun.from_center_radius(
        "truncated_sls", c, p, q=q, gains=None if sys.gains is None else list(sys.gains),
        meta={"closed_loop": y is not None, "sigma": sigma.sequence[:horizon].tolist()},
    )


def abs_product_set(F, q):
    """``{|F_{i_q} ... F_{i_1}|}`` over all length-q mode words."""
    F = [np.asarray(M, dtype=float) for M in F]
    out = []
    for word in itertools.product(range(len(F)), repeat=q):
        P = np.eye(F[0].shape[0])
        for i in word:
            P = F[i] @ P
        out.append(np.abs(P))
    return MatrixSet(tuple(out))


def find_qstar_sls(F, q_max=8, budget=2 * 10**5):
    """Smallest q whose absolute q-product set is certified stable.

    For each q the set ``{|Phi| : Phi a product of q matrices of F}`` is
    checked with :func:`intervalest.spectral.ues_check` at the deepest
    length the product ``budget`` allows, capped at ``MAX_DEPTH``.

    Returns
    -------
    q : int
    certificate : UesCertificate

    Raises
    ------
    QStarError
        If ``{F_i}`` itself is certified unstable, or no q up to ``q_max``
        is certified.
    """
    F = [as_matrix(M, f"F[{i}]") for i, M in enumerate(F)]
    s = len(F)
    base = ues_check(MatrixSet(tuple(F)), depth=_depth_for(s, budget))
    if base.status is Stability.UNSTABLE:
        raise QStarError(f"the switched system itself is unstable (witness {list(base.witness)})")
    for q in range(1, q_max + 1):
        members = s**q
        if members > budget:
            break
        cert = ues_check(abs_product_set(F, q), depth=_depth_for(members, budget))
        if cert.status is Stability.STABLE:
            return q, cert
    raise QStarError(f"no q <= {q_max} certified within a budget of {budget} products")


MAX_DEPTH = 64


def _depth_for(s, budget):
    d = 1
    while d < MAX_DEPTH and count_products(s, d + 1) <= min(budget, PRODUCT_BUDGET):
        d += 1
    return d


def simulate_sls(sys, sigma, x0, w, v=None):
    """Exact state and output sequences for point data.

    ``x0`` has shape (n,), ``w`` shape (T, n_w) and ``v`` shape (T, n_y).
    Returns ``(states, outputs)`` with shapes (T+1, n) and (T, n_y); outputs
    are None when the modes have no ``C``.
    """
    if not isinstance(sigma, SwitchingSignal):
        sigma = SwitchingSignal(sigma)
    w = np.asarray(w, dtype=float).reshape(-1, sys.n_w)
    T = w.shape[0]
    sigma.validate(sys.s, T)
    x = np.empty((T + 1, sys.n))
    x[0] = x0
    has_y = sys.modes[0].C is not None
    yv = np.empty((T, sys.n_y)) if has_y else None
    if has_y:
        v = np.zeros((T, sys.n_y)) if v is None else np.asarray(v, dtype=float).reshape(-1, sys.n_y)
    for t in range(T):
        m = sys.modes[sigma[t]]
        if has_y:
            yv[t] = m.C @ x[t] + v[t]
        x[t + 1] = m.A @ x[t] + m.B @ w[t]
    return x, yv
