"""Spectral radius, joint spectral radius bounds and stability predicates.

The joint spectral radius (JSR) of a finite set is bracketed by brute-force
enumeration of all products up to a given length::

    max_{k<=d, |U|=k} rho(U)^(1/k)  <=  JSR  <=  min_{k<=d} max_{|U|=k} ||U||^(1/k)

Both sides are monotone in ``d``.  No pruning is done, so ``d`` has to stay
small; the total number of products is capped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionError, DominanceError, JsrBudgetError, NonFiniteError
from .interval import as_matrix, psi

PRODUCT_BUDGET = 10**7
# largest number of n x n products held in memory at once
_BLOCK = 1 << 16


def spectral_radius(A):
    """Largest eigenvalue modulus of a square matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("A", f"must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteError("A has non-finite entries")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


@dataclass(frozen=True, eq=False)
class MatrixSet:
    """Ordered, labelled, non-empty family of square matrices of one size."""

    members: tuple
    labels: tuple = None

    def __post_init__(self):
        mats = tuple(as_matrix(M, f"members[{i}]") for i, M in enumerate(self.members))
        if not mats:
            raise DimensionError("members", "a matrix set cannot be empty")
        n = mats[0].shape[0]
        for i, M in enumerate(mats):
            if M.shape != (n, n):
                raise DimensionError(f"members[{i}]", f"expected shape {(n, n)}, got {M.shape}")
        labels = tuple(range(len(mats))) if self.labels is None else tuple(self.labels)
        if len(labels) != len(mats):
            raise DimensionError("labels", "one label per member is required")
        object.__setattr__(self, "members", mats)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of(cls, S):
        return S if isinstance(S, MatrixSet) else cls(tuple(S))

    @property
    def dim(self):
        return self.members[0].shape[0]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def stack(self):
        return np.stack(self.members)

    def abs(self):
        return MatrixSet(tuple(np.abs(M) for M in self.members), self.labels)

    def psi(self):
        return MatrixSet(tuple(psi(M) for M in self.members), self.labels)

    def is_nonnegative(self):
        return all(np.all(M >= 0) for M in self.members)


class Norm(str, Enum):
    FROBENIUS = "frobenius"
    SPECTRAL = "spectral"


@dataclass
class JsrBounds:
    """Bracket ``lower <= JSR <= upper`` from products of length <= ``depth``.

    ``lower_by_depth[k-1]`` and ``upper_by_depth[k-1]`` hold the running
    bounds after examining length ``k``.  ``witness`` is the label sequence
    of the product attaining ``lower`` (leftmost factor first).
    """

    lower: float
    upper: float
    depth: int
    norm_used: Norm
    lower_by_depth: list = field(default_factory=list)
    upper_by_depth: list = field(default_factory=list)
    witness: tuple = ()
    upper_length: int = 1

    def to_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "depth": self.depth,
            "norm_used": self.norm_used.value,
            "lower_by_depth": list(self.lower_by_depth),
            "upper_by_depth": list(self.upper_by_depth),
            "witness": list(self.witness),
            "upper_length": self.upper_length,
        }


def count_products(s, depth):
    """Number of products of length 1..depth over ``s`` matrices."""
    if s == 1:
        return depth
    return (s ** (depth + 1) - s) // (s - 1)


def _all_products(members, k):
    """Stack of all s^k products, index digits (base s) = factor order."""
    n = members.shape[1]
    level = members
    for _ in range(k - 1):
        level = np.einsum("pij,mjk->pmik", level, members).reshape(-1, n, n)
    return level


def _product_blocks(members, k):
    """Yield ``(start_index, products)`` covering all products of length k."""
    s, n = members.shape[0], members.shape[1]
    b = k
    while b > 1 and s**b > _BLOCK:
        b -= 1
    base = _all_products(members, b)
    if b == k:
        yield 0, base
        return
    prefixes = _all_products(members, k - b)
    step = max(1, _BLOCK // base.shape[0])
    for start in range(0, prefixes.shape[0], step):
        pre = prefixes[start:start + step]
        block = np.einsum("pij,qjk->pqik", pre, base).reshape(-1, n, n)
        yield start * base.shape[0], block


def _norms(stack, norm):
    if norm is Norm.FROBENIUS:
        return np.sqrt(np.einsum("pij,pij->p", stack, stack))
    return np.linalg.norm(stack, ord=2, axis=(1, 2))


def _decode(index, k, labels):
    s = len(labels)
    digits = []
    for _ in range(k):
        index, d = divmod(index, s)
        digits.append(labels[d])
    return tuple(reversed(digits))


def iter_jsr_levels(S, depth, norm="frobenius", budget=PRODUCT_BUDGET):
    """Yield ``(k, rho_max_k, norm_max_k, witness_k)`` for k = 1..depth.

    ``rho_max_k`` is ``max rho(U)^(1/k)`` and ``norm_max_k`` is
    ``max ||U||^(1/k)`` over all products ``U`` of length ``k``.
    """
    S = MatrixSet.of(S)
    norm = Norm(norm)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    total = count_products(len(S), depth)
    if total > budget:
        raise JsrBudgetError(
            f"depth {depth} over {len(S)} matrices needs {total} products "
            f"(budget {budget}); use a smaller depth"
        )
    members = S.stack()
    for k in range(1, depth + 1):
        rho_best, rho_arg, nrm_best = -1.0, 0, 0.0
        for start, block in _product_blocks(members, k):
            rhos = np.max(np.abs(np.linalg.eigvals(block)), axis=1)
            i = int(np.argmax(rhos))
            if rhos[i] > rho_best:
                rho_best, rho_arg = float(rhos[i]), start + i
            nrm_best = max(nrm_best, float(np.max(_norms(block, norm))))
        yield k, rho_best ** (1.0 / k), nrm_best ** (1.0 / k), _decode(rho_arg, k, S.labels)


def jsr_bounds(S, depth, norm="frobenius", budget=PRODUCT_BUDGET):
    """Bracket the joint spectral radius of ``S`` by exhaustive enumeration.

    Parameters
    ----------
    S : MatrixSet or sequence of square arrays
    depth : int
        Longest product length examined.
    norm : {"frobenius", "spectral"}
        Norm used in the upper bound.
    budget : int
        Maximum total number of products; exceeded budgets raise
        :class:`JsrBudgetError`.

    Returns
    -------
    JsrBounds
    """
    norm = Norm(norm)
    out = JsrBounds(lower=0.0, upper=np.inf, depth=depth, norm_used=norm)
    for k, rho_k, nrm_k, wit in iter_jsr_levels(S, depth, norm, budget):
        _absorb(out, k, rho_k, nrm_k, wit)
    return out


def _absorb(out, k, rho_k, nrm_k, wit):
    if not out.witness or rho_k > out.lower:
        out.lower, out.witness = rho_k, wit
    if nrm_k < out.upper:
        out.upper, out.upper_length = nrm_k, k
    # rho(U) <= ||U|| for every product; equality cases can cross by roundoff only
    out.upper = max(out.upper, out.lower)
    out.depth = k
    out.lower_by_depth.append(out.lower)
    out.upper_by_depth.append(out.upper)


@dataclass
class IdentityReport:
    """Outcome of checking rho(|S|) = rho(psi(S)) and rho(S) <= rho(|S|)."""

    passed: bool
    abs_bounds: JsrBounds
    psi_bounds: JsrBounds
    plain_bounds: JsrBounds
    overlap: bool
    ordering: bool
    tol: float

    def to_dict(self):
        return {
            "passed": self.passed,
            "overlap": self.overlap,
            "ordering": self.ordering,
            "tol": self.tol,
            "abs": self.abs_bounds.to_dict(),
            "psi": self.psi_bounds.to_dict(),
            "plain": self.plain_bounds.to_dict(),
        }


def psi_jsr_identity_check(S, depth, norm="frobenius", tol=1e-9):
    """Check that the bound brackets of |S| and psi(S) overlap.

    Also checks ``lower(S) <= upper(|S|) + tol``.
    """
    S = MatrixSet.of(S)
    abs_b = jsr_bounds(S.abs(), depth, norm)
    psi_b = jsr_bounds(S.psi(), depth, norm)
    plain_b = jsr_bounds(S, depth, norm)
    overlap = abs_b.lower <= psi_b.upper + tol and psi_b.lower <= abs_b.upper + tol
    ordering = plain_b.lower <= abs_b.upper + tol
    return IdentityReport(overlap and ordering, abs_b, psi_b, plain_b, overlap, ordering, tol)


@dataclass
class DominanceReport:
    passed: bool
    dominating: tuple
    lower: JsrBounds
    upper: JsrBounds
    tol: float


def dominance_stability(S, Sbar, depth, norm="frobenius", tol=1e-9):
    """Check ``S_i <= Sbar_j`` for some j, for every i, then bound ordering.

    Both sets must be nonnegative elementwise.  ``dominating[i]`` is the
    index of the first member of ``Sbar`` that dominates ``S_i``.
    """
    S, Sbar = MatrixSet.of(S), MatrixSet.of(Sbar)
    if S.dim != Sbar.dim:
        raise DimensionError("Sbar", f"dimension {Sbar.dim} differs from S ({S.dim})")
    for name, mset in (("S", S), ("Sbar", Sbar)):
        if not mset.is_nonnegative():
            raise ValueError(f"{name} must contain nonnegative matrices only")
    dominating = []
    for i, M in enumerate(S):
        js = [j for j, Mb in enumerate(Sbar) if np.all(M <= Mb + tol)]
        if not js:
            raise DominanceError(i, f"member {S.labels[i]} of S is not dominated by any member of Sbar")
        dominating.append(js[0])
    lo = jsr_bounds(S, depth, norm)
    up = jsr_bounds(Sbar, depth, norm)
    return DominanceReport(lo.lower <= up.upper + tol, tuple(dominating), lo, up, tol)


class Stability(str, Enum):
    STABLE = "certified_stable"
    UNSTABLE = "certified_unstable"
    NOT_CERTIFIED = "not_certified"


@dataclass
class UesCertificate:
    """Evidence for (or against) uniform exponential stability of a set.

    ``status`` is certified_stable when some ``max ||U||^(1/k) < 1``,
    certified_unstable when a product with ``rho(U)^(1/k) >= 1`` was found
    (``witness``), and not_certified otherwise.
    """

    status: Stability
    bounds: JsrBounds
    certifying_length: int | None = None
    witness: tuple = ()

    @property
    def stable(self):
        return self.status is Stability.STABLE

    def to_dict(self):
        return {
            "status": self.status.value,
            "certifying_length": self.certifying_length,
            "witness": list(self.witness),
            "bounds": self.bounds.to_dict(),
        }


def ues_check(S, depth, norm="frobenius", budget=PRODUCT_BUDGET):
    """Decide uniform exponential stability of ``S`` as far as depth allows.

    The enumeration stops at the first length that settles the question.
    """
    norm = Norm(norm)
    S = MatrixSet.of(S)
    out = JsrBounds(lower=0.0, upper=np.inf, depth=0, norm_used=norm)
    for k, rho_k, nrm_k, wit in iter_jsr_levels(S, depth, norm, budget):
        _absorb(out, k, rho_k, nrm_k, wit)
        if nrm_k < 1:
            return UesCertificate(Stability.STABLE, out, certifying_length=k)
        if rho_k >= 1:
            return UesCertificate(Stability.UNSTABLE, out, certifying_length=k, witness=wit)
    return UesCertificate(Stability.NOT_CERTIFIED, out)
