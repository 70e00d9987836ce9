"""State-space realization of the tight radius system.

The tight radius ``p_x(t) = |A^t| p_x(0) + sum_i |A^(t-1-i) B| p_w(i)`` is the
output of a linear system driven by ``p_w`` whose impulse response is
``H(t) = [|A^t B|, |A^t| p_x(0)]``.  When the block Hankel matrices of H
reach a constant rank, a balanced SVD factorization (Ho-Kalman) gives a
minimal realization ``phi(t+1) = Acal phi + Bcal p_w``, ``p_x = Ccal phi``,
``phi(0) = phi0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, RealizationError
from .interval import as_matrix

# smallest retained singular value must exceed this multiple of the threshold
GAP_FACTOR = 1e3


@dataclass(frozen=True, eq=False)
class ImpulseResponse:
    """Samples ``H[t]`` of shape ``(n, n_w + 1)`` for t = 0..length-1."""

    H: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.ndim != 3:
            raise DimensionError("H", f"expected (length, n, n_w+1), got {H.shape}")
        object.__setattr__(self, "H", H)

    @property
    def length(self):
        return self.H.shape[0]

    @property
    def n(self):
        return self.H.shape[1]

    @property
    def n_cols(self):
        return self.H.shape[2]


def radius_impulse_response(A, B, p0, length):
    """``H(t) = [|A^t B|, |A^t| p0]`` for t = 0..length-1."""
    A, B = as_matrix(A, "A"), as_matrix(B, "B")
    p0 = np.asarray(p0, dtype=float)
    n = A.shape[0]
    H = np.empty((length, n, B.shape[1] + 1))
    At = np.eye(n)
    for t in range(length):
        H[t, :, :-1] = np.abs(At @ B)
        H[t, :, -1] = np.abs(At) @ p0
        At = A @ At
    return ImpulseResponse(H)


def hankel(H, i, j, shift=0):
    """Block Hankel matrix with block (r, c) equal to ``H(r + c + shift)``.

    Block indices are 0-based, so block (0, 0) is ``H(shift)``.
    """
    if i < 1 or j < 1:
        raise ValueError("Hankel block counts must be >= 1")
    if i + j - 1 + shift > H.length:
        raise DimensionError(
            "H", f"Hankel {i}x{j} (shift {shift}) needs {i + j - 1 + shift} samples, have {H.length}"
        )
    return np.block([[H.H[r + c + shift] for c in range(j)] for r in range(i)])


def rank_threshold(M, sv=None):
    sv = np.linalg.svd(M, compute_uv=False) if sv is None else sv
    if sv.size == 0 or sv[0] == 0:
        return 0.0
    return max(M.shape) * np.finfo(float).eps * sv[0]


def numerical_rank(M, tol=None):
    """Return ``(rank, singular_values, threshold, ambiguous)``."""
    sv = np.linalg.svd(M, compute_uv=False)
    thr = rank_threshold(M, sv) if tol is None else tol
    r = int(np.sum(sv > thr))
    ambiguous = r > 0 and sv[r - 1] < GAP_FACTOR * thr
    return r, sv, thr, ambiguous


@dataclass
class RealizabilityResult:
    """Outcome of the finite-data Hankel rank test.

    ``realizable`` is False when no stabilization was seen within the
    examined window (``not_determined``); True only means the rank stayed
    constant for every extension the data allowed, up to
    ``verified_extension`` extra block columns.
    """

    realizable: bool
    rank: int | None
    r: int | None
    l: int | None
    verified_extension: int
    rank_table: list = field(default_factory=list)

    @property
    def status(self):
        return f"realizable({self.rank})" if self.realizable else "not_determined"

    def to_dict(self):
        return {
            "status": self.status,
            "realizable": self.realizable,
            "rank": self.rank,
            "r": self.r,
            "l": self.l,
            "verified_extension": self.verified_extension,
            "note": "rank equality checked only up to the available data",
        }


def realizability_test(H, r_max, tol=None):
    """Search ``r, l <= r_max`` for ``rank H_{r,l} = rank H_{r+1,l+j}``.

    Every extension ``j = 1..J`` allowed by the data length is checked, and
    at least one is required.  Candidates are tried in order of
    increasing ``r + l``.
    """
    if H.length < 2 * r_max:
        raise DimensionError("H", f"need at least {2 * r_max} samples for r_max={r_max}, have {H.length}")
    ranks = {}

    def rank(i, j):
        if (i, j) not in ranks:
            M = hankel(H, i, j)
            rk, _, _, amb = numerical_rank(M, tol)
            ranks[i, j] = (rk, amb, M.shape)
        return ranks[i, j][0]

    found = None
    for total in range(2, 2 * r_max + 1):
        for r in range(max(1, total - r_max), min(r_max, total - 1) + 1):
            l = total - r
            J = H.length - (r + 1) - l + 1
            if J < 1:
                continue
            m = rank(r, l)
            if all(rank(r + 1, l + j) == m for j in range(1, J + 1)):
                found = (r, l, m, J)
                break
        if found:
            break
    table = [
        {"r": i, "l": j, "rows": shape[0], "cols": shape[1], "rank": rk, "ambiguous": amb}
        for (i, j), (rk, amb, shape) in sorted(ranks.items())
    ]
    if found is None:
        return RealizabilityResult(False, None, None, None, 0, table)
    r, l, m, J = found
    return RealizabilityResult(True, m, r, l, J, table)


@dataclass
class Realization:
    """``phi(t+1) = Acal phi(t) + Bcal u(t)``, ``y = Ccal phi``, ``phi(0) = phi0``."""

    Acal: np.ndarray
    Bcal: np.ndarray
    Ccal: np.ndarray
    phi0: np.ndarray
    singular_values: np.ndarray = None
    residual: float = np.nan

    @property
    def dimension(self):
        return self.Acal.shape[0]

    def markov(self, length):
        """``Ccal Acal^t [Bcal, phi0]`` for t = 0..length-1."""
        Bt = np.hstack([self.Bcal, self.phi0[:, None]])
        out = np.empty((length, self.Ccal.shape[0], Bt.shape[1]))
        X = Bt
        for t in range(length):
            out[t] = self.Ccal @ X
            X = self.Acal @ X
        return out

    def simulate(self, u):
        """Outputs for t = 0..len(u) driven by inputs ``u`` (shape (T, n_w))."""
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        phi = self.phi0.copy()
        out = np.empty((u.shape[0] + 1, self.Ccal.shape[0]))
        for t in range(u.shape[0]):
            out[t] = self.Ccal @ phi
            phi = self.Acal @ phi + self.Bcal @ u[t]
        out[-1] = self.Ccal @ phi
        return out

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "Acal": self.Acal.tolist(),
            "Bcal": self.Bcal.tolist(),
            "Ccal": self.Ccal.tolist(),
            "phi0": self.phi0.tolist(),
            "singular_values": None if self.singular_values is None else self.singular_values.tolist(),
            "residual": self.residual,
        }


def ho_kalman(H, m, i=None, j=None, rtol=1e-8):
    """Balanced realization of dimension ``m`` from the impulse response.

    Parameters
    ----------
    H : ImpulseResponse
    m : int
        Realization order, normally the rank found by
        :func:`realizability_test`.
    i, j : int, optional
        Hankel block counts; default to the largest square Hankel the data
        permits (one extra sample is needed for the shifted Hankel).
    rtol : float
        Accepted reconstruction residual, relative to ``1 + ||H(t)||_F``.

    Raises
    ------
    RealizationError
        If the numerical rank at ``m`` is ambiguous or the realization does
        not reproduce ``H``.
    """
    if i is None or j is None:
        k = H.length // 2
        i = k if i is None else i
        j = H.length - i if j is None else j
    Hm = hankel(H, i, j)
    Hs = hankel(H, i, j, shift=1)
    U, sv, Vt = np.linalg.svd(Hm, full_matrices=False)
    thr = rank_threshold(Hm, sv)
    if m < 1 or m > sv.size:
        raise RealizationError(f"order {m} outside 1..{sv.size}", sv)
    if sv[m - 1] < GAP_FACTOR * thr or (m < sv.size and sv[m] > thr):
        raise RealizationError(
            f"numerical rank at order {m} is ambiguous "
            f"(sigma_m={sv[m - 1]:.3e}, sigma_m+1={sv[m] if m < sv.size else 0:.3e}, threshold={thr:.3e})",
            sv,
        )
    root = np.sqrt(sv[:m])
    obs = U[:, :m] * root
    ctr = root[:, None] * Vt[:m]
    Acal = (U[:, :m].T @ Hs @ Vt[:m].T) / np.outer(root, root)
    n, nc = H.n, H.n_cols
    Ccal = obs[:n]
    Bt = ctr[:, :nc]
    real = Realization(Acal, Bt[:, :-1].copy(), Ccal, Bt[:, -1].copy(), singular_values=sv)
    recon = real.markov(H.length)
    err = np.linalg.norm(recon - H.H, axis=(1, 2))
    scale = 1 + np.linalg.norm(H.H, axis=(1, 2))
    real.residual = float(np.max(err / scale))
    if real.residual > rtol:
        raise RealizationError(f"reconstruction residual {real.residual:.3e} exceeds {rtol:.1e}", sv)
    return real


def realization_open_loop(sys, x0, w, horizon, r_max=10, length=None):
    """Open-loop estimator whose radius comes from the minimal realization.

    The center follows the exact recursion.  The radius is the output of
    the Ho-Kalman realization driven by ``p_w``; tiny negative values from
    roundoff are clipped to zero.

    Raises
    ------
    RealizationError
        If no constant Hankel rank is found within ``r_max`` blocks.
    """
    from .lti import EstimatorRun, _center, _check_horizon, _check_x0

    _check_x0(x0, sys.n)
    _check_horizon(horizon, ("w", w))
    length = 2 * r_max + 2 if length is None else length
    H = radius_impulse_response(sys.A, sys.B, x0.radius, length)
    test = realizability_test(H, r_max)
    if not test.realizable:
        raise RealizationError(f"Hankel rank did not stabilize within r_max={r_max}")
    real = ho_kalman(H, test.rank)
    p = np.maximum(real.simulate(w.radius[:horizon]), 0.0)
    c = _center(sys.A, sys.B, x0.center, w.center, horizon)
    return EstimatorRun.from_center_radius(
        "realization", c, p, meta={"dimension": real.dimension, "residual": real.residual, **test.to_dict()}
    )
