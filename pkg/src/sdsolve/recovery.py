"""Primal recovery, objective bounds and solution quality measures.

The dual iteration never stores a primal matrix; candidates are
reconstructed from the Newton directions.  With W = S - R + A*(dy) - C*dtau
evaluated at the undamped (residual-eliminating) directions, the matrix
X = mu * S^{-1} W S^{-1} satisfies the primal constraints scaled by
(tau + dtau) and is psd exactly when W is.  A second candidate comes from
projecting mu*S^{-1} onto the affine constraints.  Both yield objective
bounds that are cheap contractions of the Schur auxiliary vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .model import SdpProblem


class NotCertified(RuntimeError):
    """Requested a bound that requires a psd-certified candidate."""


@dataclass
class PrimalCandidate:
    """Recovered primal point.

    ``X`` is normalized so the constraint map returns b exactly (blocks are
    dense matrices, vectors for diagonal blocks); ``scale`` is the
    homogenizing multiplier that was divided out.  ``obj`` is <C, X> in the
    problem's (possibly objective-scaled) data.
    """

    X: list
    source: str
    psd_certified: bool
    obj: float
    scale: float


def _candidate_from_middle(problem: SdpProblem, iterate, W_blocks, mu: float,
                           scale: float, source: str) -> PrimalCandidate:
    X = []
    certified = scale > 1e-12 * max(iterate.tau, 1.0)
    for k in range(problem.nblocks):
        if problem.is_diag(k):
            s = iterate.S_factors[k]
            w = W_blocks[k]
            if np.any(w < 0):
                certified = False
            X.append(mu * w / (s * s) / scale)
        else:
            f = iterate.S_factors[k]
            W = W_blocks[k]
            try:
                linalg.cholesky(W)
            except linalg.NotPositiveDefinite:
                certified = False
            T = linalg.factor_solve(f, W)
            Xk = linalg.factor_solve(f, T.T).T
            Xk = 0.5 * (Xk + Xk.T)
            X.append(mu * Xk / scale)
    obj = _objective_value(problem, X)
    return PrimalCandidate(X=X, source=source, psd_certified=certified,
                           obj=obj, scale=scale)


def _objective_value(problem: SdpProblem, X_blocks) -> float:
    total = 0.0
    for k in range(problem.nblocks):
        data = problem.block_data(k)
        if problem.is_diag(k):
            total += float(data.c @ X_blocks[k])
        else:
            c = data.c_coeff
            if c.nnz:
                w = np.where(c.rows != c.cols, 2.0, 1.0)
                total += float(np.dot(c.vals * w, X_blocks[k][c.rows, c.cols]))
    return total


def recover_backward(problem: SdpProblem, iterate, directions,
                     mu: float) -> PrimalCandidate:
    """Backward-Newton candidate X(mu), normalized to A X = b."""
    dy, dtau = directions.at_gamma(1.0)
    adj = problem.adjoint_map(dy)
    W_blocks = []
    for k in range(problem.nblocks):
        S = iterate.S_blocks[k]
        R = iterate.R_blocks[k] if iterate.R_blocks is not None else None
        C = problem.block_data(k).c_coeff
        if problem.is_diag(k):
            W = S + adj[k] if R is None else S - R + adj[k]
            cvec = problem.block_data(k).c
            W = W - cvec * dtau
        else:
            W = S + adj[k] if R is None else S - R + adj[k]
            if C.nnz:
                W = W - dtau * C.materialize()
        W_blocks.append(W)
    return _candidate_from_middle(problem, iterate, W_blocks, mu,
                                  scale=iterate.tau + dtau, source="backward_newton")


def recover_projection(problem: SdpProblem, iterate, dy_prime: np.ndarray,
                       mu: float) -> PrimalCandidate:
    """Projection candidate X'(mu) with A X' = b tau, normalized by tau."""
    adj = problem.adjoint_map(dy_prime)
    W_blocks = []
    for k in range(problem.nblocks):
        W_blocks.append(iterate.S_blocks[k] + adj[k])
    return _candidate_from_middle(problem, iterate, W_blocks, mu,
                                  scale=iterate.tau, source="projection")


def primal_bound_zbar(problem: SdpProblem, iterate, directions, aux,
                      mu: float, certified: bool = True) -> float:
    """Objective value <C, X(mu)> of the backward candidate, computed from
    the Schur contractions without forming X.  Requires certification."""
    if not certified:
        raise NotCertified("backward candidate is not psd")
    dy, dtau = directions.at_gamma(1.0)
    tau = iterate.tau
    n = problem.total_dim
    bty = float(problem.b @ iterate.y)
    val = ((tau + dtau) * bty + n * mu
           + mu * float((aux.asinv + aux.asinv_rsinv) @ dy)
           - mu * (aux.csinv + aux.csinv_rsinv) * dtau
           - mu * aux.rsinv_rsinv)
    return val / tau


def primal_bound_zprime(problem: SdpProblem, iterate, directions, aux,
                        mu: float):
    """Objective value <C tau, X'(mu)> of the projection candidate and the
    direction dy' that generates it."""
    tau = iterate.tau
    dy_prime = (tau / mu) * directions.dy1 - directions.dy2
    n = problem.total_dim
    bty = float(problem.b @ iterate.y)
    val = mu * (aux.rsinv + float((aux.asinv_rsinv + aux.asinv) @ dy_prime) + n) \
        + tau * bty
    return val, dy_prime


def min_eigenvalue_blocks(problem: SdpProblem, blocks) -> float:
    lam = np.inf
    for k in range(problem.nblocks):
        if problem.is_diag(k):
            if len(blocks[k]):
                lam = min(lam, float(np.min(blocks[k])))
        else:
            lam = min(lam, linalg.min_eigenvalue(blocks[k]))
    return 0.0 if lam is np.inf else float(lam)


def dimacs_errors(problem: SdpProblem, X_blocks, y: np.ndarray,
                  S_blocks) -> np.ndarray:
    """The six standard solution quality measures.

    err1/err2 are primal residual and negative-eigenvalue defect, err3/err4
    the dual analogues, err5 the (signed) duality gap, err6 the
    complementarity residual.  With no primal candidate, the primal-side
    entries are reported as zero.
    """
    b = problem.b
    bscale = 1.0 + float(np.abs(b).max(initial=0.0))
    cmax = max((float(np.abs(c.vals).max()) for c in problem.C if c.nnz),
               default=0.0)
    cscale = 1.0 + cmax
    errs = np.zeros(6)
    adj = problem.adjoint_map(y)
    dual_res = 0.0
    lam_s = np.inf
    for k in range(problem.nblocks):
        data = problem.block_data(k)
        if problem.is_diag(k):
            r = adj[k] + S_blocks[k] - data.c
            dual_res += float(r @ r)
            lam_s = min(lam_s, float(np.min(S_blocks[k])) if len(S_blocks[k]) else np.inf)
        else:
            Cd = data.c_coeff.materialize()
            r = adj[k] + S_blocks[k] - Cd
            dual_res += float(np.sum(r * r))
            lam_s = min(lam_s, linalg.min_eigenvalue(S_blocks[k]))
    errs[2] = np.sqrt(dual_res) / cscale
    errs[3] = max(0.0, -lam_s) / cscale
    bty = float(b @ y)
    if X_blocks is not None:
        res = problem.primal_map(X_blocks) - b
        errs[0] = float(np.linalg.norm(res)) / bscale
        lam_x = min_eigenvalue_blocks(problem, X_blocks)
        errs[1] = max(0.0, -lam_x) / bscale
        cx = _objective_value(problem, X_blocks)
        gap_scale = 1.0 + abs(cx) + abs(bty)
        errs[4] = (cx - bty) / gap_scale
        xs = 0.0
        for k in range(problem.nblocks):
            if problem.is_diag(k):
                xs += float(X_blocks[k] @ S_blocks[k])
            else:
                xs += float(np.sum(X_blocks[k] * S_blocks[k]))
        errs[5] = xs / gap_scale
    return errs


def verify_dual_ray(problem: SdpProblem, dy: np.ndarray, tol: float = 1e-10) -> bool:
    """True when dy is an improving ray: b'dy > 0 and -A*(dy) psd within
    tol.  The direction is normalized first so the tolerance is scale-free."""
    nrm = float(np.linalg.norm(dy))
    if nrm == 0.0 or float(problem.b @ dy) <= 0.0:
        return False
    adj = problem.adjoint_map(dy / nrm)
    for k in range(problem.nblocks):
        if problem.is_diag(k):
            if len(adj[k]) and float(np.max(adj[k])) > tol:
                return False
        else:
            if linalg.min_eigenvalue(-adj[k]) < -tol:
                return False
    return True
