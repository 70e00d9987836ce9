"""Small self-contained LMI feasibility solver.

Problems are built from matrix-valued affine expressions of scalar decision
variables (:class:`Affine`).  Constraints are symmetric blocks that must be
positive semidefinite and matrices that must be elementwise nonnegative.

Feasibility is decided by maximizing a common slack ``t``::

    maximize t  s.t.  F_k(x) - t I >= 0 (PSD),  g(x) - t >= 0,  |x_i| <= bound

with a primal log-barrier path-following method.  Every iterate is strictly
feasible for the slack-augmented problem, so the starting point only needs
to respect the box.  The result is *feasible* when the slack exceeds the
margin, *infeasible* when the barrier duality-gap bound proves it cannot,
and *unknown* otherwise.  Infeasibility is relative to the variable box.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)


class Affine:
    """Matrix expression ``const + sum_k x_k * terms[k]``.

    Supports ``+``, ``-``, scalar ``*``, ``@`` with constant matrices on
    either side, :attr:`T` and block assembly with :func:`bmat`.
    """

    __array_ufunc__ = None  # make numpy defer to __rmatmul__/__radd__

    def __init__(self, const, terms=None):
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        self.terms = {} if terms is None else terms

    @property
    def shape(self):
        return self.const.shape

    @staticmethod
    def lift(x):
        return x if isinstance(x, Affine) else Affine(x)

    def _combine(self, other, sign):
        other = Affine.lift(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + sign * v if k in terms else sign * v
        return Affine(self.const + sign * other.const, terms)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return Affine.lift(other)._combine(self, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, a):
        a = float(a)
        return Affine(self.const * a, {k: v * a for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return Affine(self.const @ M, {k: v @ M for k, v in self.terms.items()})

    def __rmatmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return Affine(M @ self.const, {k: M @ v for k, v in self.terms.items()})

    @property
    def T(self):
        return Affine(self.const.T, {k: v.T for k, v in self.terms.items()})

    def diag(self):
        """Diagonal as an ``(n, 1)`` expression."""
        return Affine(np.diag(self.const)[:, None], {k: np.diag(v)[:, None] for k, v in self.terms.items()})

    def value(self, x):
        out = self.const.copy()
        for k, v in self.terms.items():
            out += x[k] * v
        return out

    def dense(self, nvar):
        """Return ``(const, coef)`` with ``coef`` of shape ``(nvar, *shape)``."""
        coef = np.zeros((nvar,) + self.shape)
        for k, v in self.terms.items():
            coef[k] = v
        return self.const, coef


def bmat(blocks):
    """Assemble a block matrix from a nested list of Affine/constant blocks."""
    rows = [[Affine.lift(b) for b in row] for row in blocks]
    heights = [row[0].shape[0] for row in rows]
    widths = [b.shape[1] for b in rows[0]]
    const = np.block([[b.const for b in row] for row in rows])
    keys = {k for row in rows for b in row for k in b.terms}
    terms = {}
    for k in keys:
        terms[k] = np.block([
            [b.terms.get(k, np.zeros((h, w))) for b, w in zip(row, widths)]
            for row, h in zip(rows, heights)
        ])
    return Affine(const, terms)


@dataclass
class Variable:
    name: str
    shape: tuple
    structure: str
    indices: list
    expr: Affine
    init: np.ndarray


@dataclass
class Constraint:
    kind: str  # "psd" or "nonneg"
    expr: Affine
    name: str
    strict: bool = True


class LmiProblem:
    """Container of matrix variables and LMI / elementwise constraints.

    Parameters
    ----------
    margin : float
        Slack that must be exceeded for a strict constraint to count as
        satisfied.
    bound : float
        Box ``|x_i| <= bound`` on every scalar variable; keeps the feasible
        set compact so the barrier path is well defined.
    """

    def __init__(self, margin=1e-6, bound=1e4):
        self.margin = margin
        self.bound = bound
        self.variables = {}
        self.constraints = []
        self._n = 0

    @property
    def nvar(self):
        return self._n

    def variable(self, name, shape, structure="full", init=None):
        """Declare a matrix variable and return it as an :class:`Affine`.

        ``structure`` is one of ``"full"``, ``"symmetric"``, ``"diagonal"``.
        """
        if name in self.variables:
            raise ValueError(f"variable {name!r} already declared")
        r, c = shape
        if structure != "full" and r != c:
            raise ValueError(f"{structure} variable must be square")
        if structure == "full":
            cells = [((i, j),) for i in range(r) for j in range(c)]
        elif structure == "symmetric":
            cells = [((i, j), (j, i)) if i != j else ((i, i),) for i in range(r) for j in range(i, r)]
        elif structure == "diagonal":
            cells = [((i, i),) for i in range(r)]
        else:
            raise ValueError(f"unknown structure {structure!r}")
        terms, indices = {}, []
        for cell in cells:
            E = np.zeros(shape)
            for ij in cell:
                E[ij] = 1.0
            terms[self._n] = E
            indices.append(self._n)
            self._n += 1
        init = np.zeros(shape) if init is None else np.asarray(init, dtype=float).reshape(shape)
        var = Variable(name, tuple(shape), structure, indices, Affine(np.zeros(shape), terms), init)
        self.variables[name] = var
        return var.expr

    def add_lmi(self, expr, name=None, strict=True):
        """Require ``expr`` (symmetric) to be positive semidefinite."""
        expr = Affine.lift(expr)
        if expr.shape[0] != expr.shape[1]:
            raise ValueError("LMI block must be square")
        sym = 0.5 * (expr + expr.T)
        asym = np.abs(expr.const - expr.const.T).max(initial=0.0)
        for v in expr.terms.values():
            asym = max(asym, np.abs(v - v.T).max(initial=0.0))
        if asym > 1e-12:
            raise ValueError(f"LMI block {name or len(self.constraints)} is not symmetric")
        self.constraints.append(Constraint("psd", sym, name or f"lmi{len(self.constraints)}", strict))

    def add_nonneg(self, expr, name=None, strict=True):
        """Require every entry of ``expr`` to be nonnegative."""
        self.constraints.append(
            Constraint("nonneg", Affine.lift(expr), name or f"nonneg{len(self.constraints)}", strict)
        )

    def add_abs_le(self, expr, bound, name=None):
        """Encode ``|expr| <= bound`` elementwise as ``-bound <= expr <= bound``."""
        name = name or f"abs{len(self.constraints)}"
        self.add_nonneg(bound - expr, name + ".upper")
        self.add_nonneg(bound + expr, name + ".lower")

    def initial_point(self):
        x = np.zeros(self._n)
        for var in self.variables.values():
            for k, E in zip(var.indices, [var.expr.terms[i] for i in var.indices]):
                x[k] = var.init[np.unravel_index(np.argmax(E), E.shape)]
        return np.clip(x, -0.5 * self.bound, 0.5 * self.bound)

    def values(self, x):
        return {name: var.expr.value(x) for name, var in self.variables.items()}

    def slacks(self, x):
        """Smallest eigenvalue / entry of each constraint at ``x``."""
        out = {}
        for c in self.constraints:
            M = c.expr.value(x)
            out[c.name] = float(np.linalg.eigvalsh(M)[0]) if c.kind == "psd" else float(M.min())
        return out


class Status(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass
class SdpResult:
    status: Status
    slack: float
    slack_upper: float
    x: np.ndarray
    values: dict
    iterations: int
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status is Status.FEASIBLE


class _Compiled:
    """Dense form over z = (x, t)."""

    def __init__(self, problem):
        N = problem.nvar
        self.N = N
        self.blocks = []
        rows_G, rows_h = [], []
        for c in problem.constraints:
            const, coef = c.expr.dense(N)
            if c.kind == "psd":
                m = const.shape[0]
                tcoef = -np.eye(m) if c.strict else np.zeros((m, m))
                C = np.concatenate([coef, tcoef[None]], axis=0)
                self.blocks.append((const, C))
            else:
                G = coef.reshape(N, -1).T
                tcol = -np.ones((G.shape[0], 1)) if c.strict else np.zeros((G.shape[0], 1))
                rows_G.append(np.hstack([G, tcol]))
                rows_h.append(const.ravel())
        self.G = np.vstack(rows_G) if rows_G else np.zeros((0, N + 1))
        self.h = np.concatenate(rows_h) if rows_h else np.zeros(0)
        self.bound = problem.bound
        self.degree = sum(b[0].shape[0] for b in self.blocks) + self.G.shape[0] + 2 * N + 1

    def strict_slack(self, x):
        """Largest t making all slack-carrying constraints hold at x."""
        z = np.append(x, 0.0)
        vals = []
        for const, C in self.blocks:
            if C[-1].any():
                S = const + np.tensordot(z, C, axes=1)
                vals.append(np.linalg.eigvalsh(S)[0])
        strict_rows = self.G[:, -1] != 0
        if strict_rows.any():
            vals.append(np.min((self.G @ z + self.h)[strict_rows]))
        return min(vals) if vals else 0.0

    def barrier(self, z, order=2):
        """Barrier value and derivatives up to ``order``; inf outside the domain."""
        x, t = z[:-1], z[-1]
        R = self.bound
        u, l, tc = R - x, R + x, R - t
        if np.any(u <= 0) or np.any(l <= 0) or tc <= 0:
            return np.inf, None, None
        val = -np.sum(np.log(u)) - np.sum(np.log(l)) - np.log(tc)
        if order == 0:
            for const, C in self.blocks:
                S = const + np.tensordot(z, C, axes=1)
                try:
                    ch = np.linalg.cholesky(S)
                except np.linalg.LinAlgError:
                    return np.inf, None, None
                val -= 2 * np.sum(np.log(np.diag(ch)))
            g = self.G @ z + self.h
            if np.any(g <= 0):
                return np.inf, None, None
            return val - np.sum(np.log(g)), None, None
        n = z.size
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        grad[:-1] += 1 / u - 1 / l
        grad[-1] += 1 / tc
        hess[np.arange(n - 1), np.arange(n - 1)] += 1 / u**2 + 1 / l**2
        hess[-1, -1] += 1 / tc**2
        for const, C in self.blocks:
            S = const + np.tensordot(z, C, axes=1)
            try:
                ch = sla.cho_factor(S, lower=True)
            except np.linalg.LinAlgError:
                return np.inf, None, None
            val -= 2 * np.sum(np.log(np.diag(ch[0])))
            W = sla.cho_solve(ch, C.transpose(1, 0, 2).reshape(S.shape[0], -1))
            W = W.reshape(S.shape[0], n, S.shape[0]).transpose(1, 0, 2)
            grad -= np.einsum("iaa->i", W)
            hess += np.einsum("iab,jba->ij", W, W)
        g = self.G @ z + self.h
        if np.any(g <= 0):
            return np.inf, None, None
        val -= np.sum(np.log(g))
        grad -= self.G.T @ (1 / g)
        hess += self.G.T @ (self.G / g[:, None] ** 2)
        return val, grad, hess


def _newton_step(H, g):
    # Jacobi scaling keeps the system usable late on the central path
    d = 1 / np.sqrt(np.maximum(np.diag(H), np.finfo(float).tiny))
    Hs = H * d[:, None] * d[None, :]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        try:
            y = sla.solve(Hs, -g * d, assume_a="pos")
        except (np.linalg.LinAlgError, ValueError):
            y = np.linalg.lstsq(Hs, -g * d, rcond=None)[0]
    return y * d


def sdp_feasibility(problem, x0=None, tau0=1.0, mu=10.0, gap_tol=1e-7, max_outer=60,
                    max_newton=200, newton_tol=1e-9):
    """Decide strict feasibility of ``problem`` by slack maximization.

    Among feasible points the one returned is (close to) the analytic-center
    point of the maximum-slack face, so gains derived from it sit away from
    the feasibility boundary.  Deterministic for fixed inputs.

    Returns
    -------
    SdpResult
        ``slack`` is the achieved common slack, ``slack_upper`` an upper
        bound on the optimal one (from the barrier duality gap).
    """
    comp = _Compiled(problem)
    x = problem.initial_point() if x0 is None else np.asarray(x0, dtype=float).copy()
    if np.any(np.abs(x) >= problem.bound):
        raise ValueError("initial point outside the variable box")
    t0 = comp.strict_slack(x)
    z = np.append(x, t0 - max(1.0, abs(t0)))
    if not np.isfinite(comp.barrier(z, order=0)[0]):
        raise ValueError("initial point violates a non-strict constraint")
    margin = problem.margin
    tau = tau0
    best = None
    iters = 0
    diag = {"degree": comp.degree, "nvar": comp.N}

    def objective(zz, order):
        val, g, H = comp.barrier(zz, order)
        if order == 0:
            return -tau * zz[-1] + val, None, None
        g = g.copy()
        g[-1] -= tau
        return -tau * zz[-1] + val, g, H

    message = ""
    status = None
    for outer in range(max_outer):
        for _ in range(max_newton):
            iters += 1
            f, g, H = objective(z, 2)
            dz = _newton_step(H, g)
            dec = -g @ dz
            if not np.isfinite(dec) or dec < 0:
                message = "Newton system breakdown"
                status = Status.UNKNOWN
                break
            if dec / 2 <= newton_tol:
                break
            step = 1.0
            while step > 1e-14:
                fn = objective(z + step * dz, 0)[0]
                if np.isfinite(fn) and fn <= f - 0.01 * step * dec:
                    break
                step *= 0.5
            else:
                message = "line search failed"
                status = Status.UNKNOWN
                break
            z = z + step * dz
            if f - fn <= 1e-13 * max(1.0, abs(f)):
                break  # roundoff floor
        if status is Status.UNKNOWN:
            break
        t = z[-1]
        if best is None or t > best[-1]:
            best = z.copy()
        gap = comp.degree / tau
        log.debug("outer %d tau=%.3g slack=%.6g gap=%.3g", outer, tau, t, gap)
        if t + gap < margin:
            status, message = Status.INFEASIBLE, "slack upper bound below margin"
            break
        if gap < gap_tol:
            break
        tau *= mu
    else:
        message = message or "maximum outer iterations reached"

    zb = z if best is None else best
    t = zb[-1]
    upper = t + comp.degree / tau
    if status is Status.INFEASIBLE:
        pass
    elif t > margin:
        status = Status.FEASIBLE
        message = message or "strictly feasible point found"
    elif status is None:
        status = Status.UNKNOWN
        message = message or "slack within the margin band"
    xb = zb[:-1]
    diag["tau"] = tau
    return SdpResult(status, float(t), float(upper), xb, problem.values(xb), iters, message, diag)
