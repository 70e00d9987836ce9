"""Brute-force tightness oracle by vertex enumeration.

For ``x(t+1) = F_t x(t) + G_t s(t)`` with box-valued ``x(0)`` and ``s(t)``,
each coordinate of ``x(t)`` is affine in the uncertain data, so its extreme
values over the boxes are attained at vertices.  Enumerating every vertex
(only over coordinates of nonzero width) and simulating gives the exact
bounds.  The cost is ``2^(#uncertain scalars)``, so this is for small
instances only.
"""

from __future__ import annotations

import itertools

import numpy as np

MAX_VERTICES = 1 << 20


def vertex_bounds(F_seq, G_seq, x0, s, horizon, max_vertices=MAX_VERTICES):
    """Exact elementwise bounds of reachable states for t = 0..horizon.

    Parameters
    ----------
    F_seq, G_seq : sequences of matrices, or single matrices
        Per-step dynamics; a single matrix is used at every step.
    x0 : IntervalVector
    s : BoundedSignal
        Input bounds, at least ``horizon`` samples.
    horizon : int

    Returns
    -------
    lower, upper : ndarray, shape (horizon + 1, n)
    """
    F_seq = _per_step(F_seq, horizon)
    G_seq = _per_step(G_seq, horizon)
    lo = [x0.lower] + [s.lower[t] for t in range(horizon)]
    hi = [x0.upper] + [s.upper[t] for t in range(horizon)]
    lo_flat, hi_flat = np.concatenate(lo), np.concatenate(hi)
    free = np.flatnonzero(hi_flat > lo_flat)
    if 2 ** free.size > max_vertices:
        raise ValueError(f"{2 ** free.size} vertices exceed the oracle limit {max_vertices}")
    # each row is one vertex of the joint box
    signs = np.array(list(itertools.product((0.0, 1.0), repeat=free.size)), dtype=float)
    signs = signs.reshape(2 ** free.size, free.size)
    pts = np.tile(lo_flat, (signs.shape[0], 1))
    pts[:, free] += signs * (hi_flat - lo_flat)[free]
    n = x0.dim
    m = s.dim
    x = pts[:, :n]
    lower = np.empty((horizon + 1, n))
    upper = np.empty((horizon + 1, n))
    lower[0], upper[0] = x.min(axis=0), x.max(axis=0)
    for t in range(horizon):
        st = pts[:, n + t * m: n + (t + 1) * m]
        x = x @ F_seq[t].T + st @ G_seq[t].T
        lower[t + 1], upper[t + 1] = x.min(axis=0), x.max(axis=0)
    return lower, upper


def _per_step(M, horizon):
    if isinstance(M, np.ndarray) and M.ndim == 2:
        return [M] * horizon
    M = list(M)
    if len(M) < horizon:
        raise ValueError(f"need {horizon} per-step matrices, got {len(M)}")
    return [np.asarray(a, dtype=float) for a in M]
