"""Boxes in R^n and the tightest enclosure of their affine images.

A box is stored by its lower and upper corners; the center/radius pair
is derived on demand.  Everything here is immutable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, InvalidIntervalError, NonFiniteError


def _frozen(a, name):
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(name, f"expected a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float array."""
    arr = np.array(M, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(name, f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return arr


class CenterRadius(NamedTuple):
    center: np.ndarray
    radius: np.ndarray


@dataclass(frozen=True, eq=False)
class IntervalVector:
    """The box ``{x : lower <= x <= upper}``.

    Degenerate boxes (``lower == upper``) are allowed.  ``lower > upper``
    in any coordinate raises :class:`InvalidIntervalError`; nothing is
    clamped.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(self.lower, "lower")
        hi = _frozen(self.upper, "upper")
        if lo.shape != hi.shape:
            raise DimensionError("upper", f"shape {hi.shape} does not match lower {lo.shape}")
        bad = np.flatnonzero(lo > hi)
        if bad.size:
            raise InvalidIntervalError(
                f"lower > upper at coordinates {bad.tolist()}"
            )
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
    def point(cls, x):
        return cls(x, x)

    @property
    def dim(self):
        return self.lower.shape[0]

    def __len__(self):
        return self.dim

    @property
    def center(self):
        return (self.upper + self.lower) / 2

    @property
    def radius(self):
        return (self.upper - self.lower) / 2

    @property
    def width(self):
        return self.upper - self.lower

    def center_radius(self):
        return CenterRadius(self.center, self.radius)

    def stacked(self):
        """Return ``[lower; upper]`` as one vector of length 2n."""
        return np.concatenate([self.lower, self.upper])

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lower - tol <= x) and np.all(x <= self.upper + tol))

    def contains_interval(self, other, tol=0.0):
        return bool(
            np.all(self.lower - tol <= other.lower) and np.all(other.upper <= self.upper + tol)
        )

    def vertices(self):
        """All 2^n corners, one per row."""
        return np.array(list(itertools.product(*zip(self.lower, self.upper))), dtype=float)

    def allclose(self, other, atol=1e-12, rtol=0.0):
        return bool(
            np.allclose(self.lower, other.lower, atol=atol, rtol=rtol)
            and np.allclose(self.upper, other.upper, atol=atol, rtol=rtol)
        )

    def __repr__(self):
        return f"IntervalVector(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


def tightest_affine_image(M, z, N=None, f=None):
    """Smallest box containing ``{M z' + N f' : z' in z, f' in f}``.

    Parameters
    ----------
    M : (n, m) array_like
    z : IntervalVector of dimension m
    N : (n, n_f) array_like, optional
    f : IntervalVector of dimension n_f, optional
        ``N`` and ``f`` must be given together.

    Returns
    -------
    IntervalVector
        Center ``M c_z + N c_f`` and radius ``|M| p_z + |N| p_f``.
    """
    M = as_matrix(M, "M")
    if M.shape[1] != z.dim:
        raise DimensionError("z", f"dimension {z.dim} does not match M with {M.shape[1]} columns")
    c = M @ z.center
    p = np.abs(M) @ z.radius
    if (N is None) != (f is None):
        raise DimensionError("N" if N is None else "f", "N and f must be given together")
    if N is not None:
        N = as_matrix(N, "N")
        if N.shape[0] != M.shape[0]:
            raise DimensionError("N", f"has {N.shape[0]} rows, M has {M.shape[0]}")
        if N.shape[1] != f.dim:
            raise DimensionError("f", f"dimension {f.dim} does not match N with {N.shape[1]} columns")
        c = c + N @ f.center
        p = p + np.abs(N) @ f.radius
    return IntervalVector(c - p, c + p)


def psi(M):
    """Block matrix mapping stacked bounds ``[lo; hi]`` to stacked bounds.

    ``psi(M) = [[M+, M-], [M-, M+]]`` with ``M+ = (M+|M|)/2`` and
    ``M- = (M-|M|)/2``.
    """
    M = as_matrix(M, "M")
    pos = (M + np.abs(M)) / 2
    neg = (M - np.abs(M)) / 2
    return np.block([[pos, neg], [neg, pos]])


def t_matrix(n):
    """``T_n = [[I, -I], [I, I]]``, mapping ``[c; p]`` to ``[lo; hi]``."""
    eye = np.eye(n)
    return np.block([[eye, -eye], [eye, eye]])


def t_matrix_inv(n):
    eye = np.eye(n) / 2
    return np.block([[eye, eye], [-eye, eye]])


def similarity_check(M):
    """Compute ``T_n^-1 psi(M) T_n`` and its distance to ``blkdiag(M, |M|)``.

    Returns
    -------
    transformed : (2n, 2n) ndarray
    residual : float
        Frobenius norm of ``transformed - blkdiag(M, |M|)``.
    """
    M = as_matrix(M, "M")
    n, m = M.shape
    if n != m:
        raise DimensionError("M", f"must be square, got {M.shape}")
    transformed = t_matrix_inv(n) @ psi(M) @ t_matrix(n)
    target = np.block([[M, np.zeros((n, n))], [np.zeros((n, n)), np.abs(M)]])
    return transformed, float(np.linalg.norm(transformed - target))
