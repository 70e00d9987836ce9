"""Observer gain synthesis from convex feasibility problems.

Three problem families are provided:

* :func:`synthesize_lti` looks for a diagonal ``P > 0`` and ``X >= |PA - YC|``
  with ``[[P, X], [X^T, P]] > 0``.  Such a point exists exactly when some L
  makes ``|A - LC|`` Schur; the gain is ``L = P^-1 Y``.
* :func:`synthesize_sls_diagonal` is the switched analogue with one
  diagonal ``Lambda_i`` per mode and one ``(X_ji, Y_ji)`` per mode pair.
  Feasibility is sufficient, not necessary, for ``|Sigma_F|`` to be stable.
* :func:`synthesize_sls_nondiagonal` drops the absolute values and uses full
  symmetric ``P_i``; it targets stability of ``Sigma_F`` itself.

Every returned gain set is re-checked by an independent computation
(spectral radius or joint spectral radius bounds) before it is reported as
certified.  Solver output alone never yields a certificate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionError, JsrBudgetError
from .interval import as_matrix
from .sdp import LmiProblem, Status, bmat, sdp_feasibility
from .spectral import MatrixSet, Stability, spectral_radius, ues_check

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 1e-6
DEFAULT_JSR_DEPTH = 12

SLS_INFEASIBLE_NOTE = (
    "the switched LMI conditions are only sufficient: infeasibility does not "
    "prove that no stabilizing gains exist"
)


class SynthesisStatus(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"

    @property
    def exit_code(self):
        return {"feasible": 0, "infeasible": 2, "unknown": 3}[self.value]


@dataclass
class Certificate:
    """Independent evidence computed from the returned gains."""

    min_eigenvalues: dict = field(default_factory=dict)
    elementwise_slack: dict = field(default_factory=dict)
    spectral_radii: dict = field(default_factory=dict)
    stability: dict | None = None
    verified: bool = False
    method: str = ""

    def to_dict(self):
        return {
            "verified": self.verified,
            "method": self.method,
            "min_eigenvalues": self.min_eigenvalues,
            "elementwise_slack": self.elementwise_slack,
            "spectral_radii": self.spectral_radii,
            "stability": self.stability,
        }


@dataclass
class SynthesisResult:
    status: SynthesisStatus
    gains: list
    solution: dict
    certificate: Certificate
    message: str = ""
    solver: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status is SynthesisStatus.FEASIBLE

    def to_dict(self):
        return {
            "status": self.status.value,
            "message": self.message,
            "gains": [np.asarray(L).tolist() for L in self.gains],
            "solution": {k: np.asarray(v).tolist() for k, v in self.solution.items()},
            "certificate": self.certificate.to_dict(),
            "solver": self.solver,
        }


def _check_pair(A, C, label=""):
    A, C = as_matrix(A, f"A{label}"), as_matrix(C, f"C{label}")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A{label}", f"must be square, got {A.shape}")
    if C.shape[1] != A.shape[0]:
        raise DimensionError(f"C{label}", f"needs {A.shape[0]} columns, got {C.shape[1]}")
    return A, C


def _solver_info(res):
    return {
        "status": res.status.value,
        "slack": res.slack,
        "slack_upper": res.slack_upper,
        "iterations": res.iterations,
        "message": res.message,
    }


def _min_eig(M):
    return float(np.linalg.eigvalsh((M + M.T) / 2)[0])


def _unsolved(res, note=""):
    status = SynthesisStatus.INFEASIBLE if res.status is Status.INFEASIBLE else SynthesisStatus.UNKNOWN
    msg = res.message if not note else f"{res.message}; {note}"
    return SynthesisResult(status, [], res.values, Certificate(), msg, _solver_info(res))


def synthesize_lti(A, C, margin=DEFAULT_MARGIN, P0=None, scale=1.0):
    """Find L with ``rho(|A - LC|) < 1`` by solving a diagonal-scaling LMI.

    Parameters
    ----------
    A : (n, n) array_like
    C : (n_y, n) array_like
    margin : float
        Slack required for strict inequalities.
    P0 : (n,) array_like, optional
        Initial diagonal of P; defaults to ones.
    scale : float
        Multiplies the whole initial point ``(P, Y, X)``.  The returned gain
        does not depend on it.

    Returns
    -------
    SynthesisResult
        ``feasible`` only if ``rho(|A - LC|) < 1`` was confirmed by an
        eigenvalue computation.  ``infeasible`` means no such gain exists
        (within the solver's variable bound).
    """
    A, C = _check_pair(A, C)
    n, ny = A.shape[0], C.shape[0]
    if ny < 1:
        raise DimensionError("C", "at least one output is required")
    p0 = np.ones(n) if P0 is None else np.asarray(P0, dtype=float)
    prob = LmiProblem(margin=margin)
    P = prob.variable("P", (n, n), "diagonal", init=scale * np.diag(p0))
    Y = prob.variable("Y", (n, ny), init=np.zeros((n, ny)))
    X = prob.variable("X", (n, n), init=scale * (np.abs(np.diag(p0) @ A) + 0.1))
    prob.add_lmi(bmat([[P, X], [X.T, P]]), "block")
    prob.add_abs_le(P @ A - Y @ C, X, "abs")
    prob.add_lmi(np.eye(n) - P, "normalization")
    res = sdp_feasibility(prob)
    if res.status is not Status.FEASIBLE:
        return _unsolved(res)

    Pv, Yv, Xv = res.values["P"], res.values["Y"], res.values["X"]
    L = np.linalg.solve(Pv, Yv)
    rho = spectral_radius(np.abs(A - L @ C))
    cert = Certificate(
        min_eigenvalues={"block": _min_eig(np.block([[Pv, Xv], [Xv.T, Pv]])), "P": float(np.min(np.diag(Pv)))},
        elementwise_slack={"abs": float(np.min(Xv - np.abs(Pv @ A - Yv @ C)))},
        spectral_radii={"abs_closed_loop": rho, "closed_loop": spectral_radius(A - L @ C)},
        verified=rho < 1,
        method="spectral_radius",
    )
    if not cert.verified:
        return SynthesisResult(
            SynthesisStatus.UNKNOWN, [L], res.values, cert,
            f"solver point found but rho(|A-LC|)={rho:.6g} is not below 1", _solver_info(res),
        )
    return SynthesisResult(SynthesisStatus.FEASIBLE, [L], res.values, cert, "gain verified", _solver_info(res))


def _modes(modes):
    pairs = [_check_pair(A, C, f"[{i}]") for i, (A, C) in enumerate(modes)]
    if not pairs:
        raise DimensionError("modes", "at least one mode is required")
    n = pairs[0][0].shape[0]
    for i, (A, _) in enumerate(pairs):
        if A.shape[0] != n:
            raise DimensionError(f"A[{i}]", f"state dimension {A.shape[0]} differs from {n}")
    return pairs, n


def _jsr_certificate(F, depth, absolute):
    S = MatrixSet(tuple(np.abs(M) if absolute else M for M in F))
    try:
        cert = ues_check(S, depth)
    except JsrBudgetError as exc:  # no certificate, not a crash
        log.warning("stability check skipped: %s", exc)
        return None
    return cert


def synthesize_sls_diagonal(modes, margin=DEFAULT_MARGIN, jsr_depth=DEFAULT_JSR_DEPTH):
    """Gains ``L_i`` making ``|Sigma_F| = {|A_i - L_i C_i|}`` stable.

    Enforces, for every mode pair (i, j),
    ``[[Lam_j, X_ji], [X_ji^T, Lam_i - eta I]] >= 0`` and
    ``|Lam_j A_i - Y_ji C_i| <= X_ji`` with diagonal ``Lam_i > 0``; the
    common slack plays the role of ``eta``.  Gains are
    ``L_i = Lam_i^-1 Y_ii``.

    The result is certified when the joint spectral radius upper bound of
    ``|Sigma_F|`` drops below 1 at some depth ``<= jsr_depth``, or, failing
    that, when the mode-dependent quadratic Lyapunov inequalities hold for
    the dominating set ``{Lam_j^-1 X_ji}`` on recomputed values.
    """
    pairs, n = _modes(modes)
    s = len(pairs)
    prob = LmiProblem(margin=margin)
    Lam = [prob.variable(f"Lambda{i}", (n, n), "diagonal", init=np.eye(n)) for i in range(s)]
    Y, X = {}, {}
    for i, (A, C) in enumerate(pairs):
        for j in range(s):
            Y[j, i] = prob.variable(f"Y{j}{i}", (n, C.shape[0]))
            X[j, i] = prob.variable(f"X{j}{i}", (n, n), init=np.abs(A) + 0.1)
    for i, (A, C) in enumerate(pairs):
        for j in range(s):
            # the slack subtracted from both diagonal blocks plays the role of eta
            prob.add_lmi(bmat([[Lam[j], X[j, i]], [X[j, i].T, Lam[i]]]), f"block{j}{i}")
            prob.add_abs_le(Lam[j] @ A - Y[j, i] @ C, X[j, i], f"abs{j}{i}")
    for i in range(s):
        prob.add_lmi(np.eye(n) - Lam[i], f"normalization{i}")
    res = sdp_feasibility(prob)
    if res.status is not Status.FEASIBLE:
        return _unsolved(res, SLS_INFEASIBLE_NOTE)

    v = res.values
    gains = [np.linalg.solve(v[f"Lambda{i}"], v[f"Y{i}{i}"]) for i in range(s)]
    F = [A - L @ C for (A, C), L in zip(pairs, gains)]
    eta = res.slack
    mins, slack = {}, {}
    lyap_ok = True
    for i, (A, C) in enumerate(pairs):
        Li = v[f"Lambda{i}"]
        for j in range(s):
            Lj, Xji, Yji = v[f"Lambda{j}"], v[f"X{j}{i}"], v[f"Y{j}{i}"]
            mins[f"{j}{i}"] = _min_eig(np.block([[Lj, Xji], [Xji.T, Li - eta * np.eye(n)]]))
            slack[f"{j}{i}"] = float(np.min(Xji - np.abs(Lj @ A - Yji @ C)))
    # V(t) = x^T Lam_sigma(t) x decreases along |Sigma_F| if Lam_i - |F_i|^T Lam_j |F_i| > 0
    for i in range(s):
        for j in range(s):
            Lj, Li = v[f"Lambda{j}"], v[f"Lambda{i}"]
            lyap_ok &= _min_eig(Li - np.abs(F[i]).T @ Lj @ np.abs(F[i])) > 0
    jsr = _jsr_certificate(F, jsr_depth, absolute=True)
    jsr_ok = jsr is not None and jsr.status is Stability.STABLE
    cert = Certificate(
        min_eigenvalues=mins,
        elementwise_slack=slack,
        spectral_radii={str(i): spectral_radius(np.abs(Fi)) for i, Fi in enumerate(F)},
        stability=None if jsr is None else jsr.to_dict(),
        verified=jsr_ok or lyap_ok,
        method="jsr_upper_bound" if jsr_ok else ("switched_lyapunov" if lyap_ok else ""),
    )
    if not cert.verified:
        return SynthesisResult(
            SynthesisStatus.UNKNOWN, gains, v, cert,
            "solver point found but stability of |Sigma_F| could not be confirmed", _solver_info(res),
        )
    return SynthesisResult(SynthesisStatus.FEASIBLE, gains, v, cert, f"gains verified by {cert.method}", _solver_info(res))


def synthesize_sls_nondiagonal(modes, margin=DEFAULT_MARGIN, jsr_depth=DEFAULT_JSR_DEPTH):
    """Gains ``L_i`` making ``Sigma_F = {A_i - L_i C_i}`` stable.

    Enforces ``[[P_j, P_j A_i - Y_ji C_i], [(.)^T, P_i - gamma I]] >= 0`` for
    all mode pairs with symmetric ``P_i > 0``.  Gains are taken as
    ``L_i = P_i^-1 Y_ii``; since the LMI does not tie ``Y_ji`` to a single
    gain per mode, stability of ``Sigma_F`` is re-checked with these gains
    by joint spectral radius bounds and, failing that, by the switched
    Lyapunov inequalities ``P_i - F_i^T P_j F_i > 0``.  Stability of
    ``Sigma_F`` alone does not make the one-step interval estimator valid; use
    :func:`intervalest.sls.find_qstar_sls` to pick a truncation order.
    """
    pairs, n = _modes(modes)
    s = len(pairs)
    prob = LmiProblem(margin=margin)
    P = [prob.variable(f"P{i}", (n, n), "symmetric", init=0.5 * np.eye(n)) for i in range(s)]
    Y = {}
    for i, (A, C) in enumerate(pairs):
        for j in range(s):
            Y[j, i] = prob.variable(f"Y{j}{i}", (n, C.shape[0]))
    for i, (A, C) in enumerate(pairs):
        for j in range(s):
            K = P[j] @ A - Y[j, i] @ C
            prob.add_lmi(bmat([[P[j], K], [K.T, P[i]]]), f"block{j}{i}")
    for i in range(s):
        prob.add_lmi(np.eye(n) - P[i], f"normalization{i}")
    res = sdp_feasibility(prob)
    if res.status is not Status.FEASIBLE:
        return _unsolved(res, SLS_INFEASIBLE_NOTE)

    v = res.values
    gains = [np.linalg.solve(v[f"P{i}"], v[f"Y{i}{i}"]) for i in range(s)]
    F = [A - L @ C for (A, C), L in zip(pairs, gains)]
    mins, lyap = {}, {}
    for i, (A, C) in enumerate(pairs):
        for j in range(s):
            Pj, Pi = v[f"P{j}"], v[f"P{i}"]
            K = Pj @ A - v[f"Y{j}{i}"] @ C
            mins[f"{j}{i}"] = _min_eig(np.block([[Pj, K], [K.T, Pi - res.slack * np.eye(n)]]))
            lyap[f"{j}{i}"] = _min_eig(Pi - F[i].T @ Pj @ F[i])
    lyap_ok = all(m > 0 for m in lyap.values()) and all(_min_eig(v[f"P{i}"]) > 0 for i in range(s))
    jsr = _jsr_certificate(F, jsr_depth, absolute=False)
    jsr_ok = jsr is not None and jsr.status is Stability.STABLE
    cert = Certificate(
        min_eigenvalues=mins,
        elementwise_slack={"lyapunov_decrease": lyap},
        spectral_radii={str(i): spectral_radius(Fi) for i, Fi in enumerate(F)},
        stability=None if jsr is None else jsr.to_dict(),
        verified=jsr_ok or lyap_ok,
        method="jsr_upper_bound" if jsr_ok else ("switched_lyapunov" if lyap_ok else ""),
    )
    if not cert.verified:
        return SynthesisResult(
            SynthesisStatus.UNKNOWN, gains, v, cert,
            "solver point found but stability of Sigma_F could not be confirmed with L_i = P_i^-1 Y_ii",
            _solver_info(res),
        )
    return SynthesisResult(SynthesisStatus.FEASIBLE, gains, v, cert, f"gains verified by {cert.method}", _solver_info(res))
