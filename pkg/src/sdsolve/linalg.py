"""Dense symmetric kernels: Cholesky/LDL factorizations, Lanczos extreme
eigenvalue estimation for step lengths, and restarted preconditioned CG.

All routines are dense; block structure upstream keeps orders moderate, and
sparse inputs are materialized per block before factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

PIVOT_TOL = 1e-13
LANCZOS_MAX_ITER = 64
LANCZOS_TOL = 1e-10
MAX_BISECTIONS = 40


class NotPositiveDefinite(ArithmeticError):
    """Cholesky hit a non-positive pivot; ``pivot`` is its 1-based index."""

    def __init__(self, pivot: int):
        super().__init__(f"matrix not positive definite (pivot {pivot})")
        self.pivot = pivot


class Singular(ArithmeticError):
    def __init__(self, index: int):
        super().__init__(f"singular factor (index {index})")
        self.index = index


class Breakdown(ArithmeticError):
    """CG direction with non-positive curvature; operator not SPD."""


@dataclass
class FactorHandle:
    """Factorization of a dense symmetric matrix.

    kind "cholesky": ``lower`` holds L with A = L L'.
    kind "ldl": ``lower`` and ``ipiv`` hold the LAPACK Bunch-Kaufman payload.
    ``matrix`` retains the factored input for certification retries.
    """

    kind: str
    n: int
    lower: np.ndarray
    ipiv: np.ndarray | None = None
    matrix: np.ndarray | None = None


def cholesky(S: np.ndarray, pivot_tol: float = PIVOT_TOL) -> FactorHandle:
    """Factor S = L L'.  Raises NotPositiveDefinite with the 1-based index
    of the first pivot at or below ``pivot_tol * max(diag S)``."""
    S = np.ascontiguousarray(S, dtype=np.float64)
    n = S.shape[0]
    c, info = lapack.dpotrf(S, lower=1)
    if info > 0:
        raise NotPositiveDefinite(info)
    if info < 0:
        raise ValueError(f"invalid argument {-info} to dpotrf")
    dmax = float(S.diagonal().max(initial=0.0))
    if dmax <= 0.0:
        raise NotPositiveDefinite(1)
    piv = np.diagonal(c) ** 2
    bad = np.nonzero(piv <= pivot_tol * dmax)[0]
    if bad.size:
        raise NotPositiveDefinite(int(bad[0]) + 1)
    L = np.tril(c)
    return FactorHandle(kind="cholesky", n=n, lower=L, matrix=S)


def ldl_factor(M: np.ndarray, pivot_tol: float = PIVOT_TOL) -> FactorHandle:
    """Bunch-Kaufman factorization of a symmetric indefinite matrix."""
    M = np.ascontiguousarray(M, dtype=np.float64)
    n = M.shape[0]
    ldu, ipiv, info = lapack.dsytrf(M, lower=1)
    if info > 0:
        raise Singular(info)
    if info < 0:
        raise ValueError(f"invalid argument {-info} to dsytrf")
    return FactorHandle(kind="ldl", n=n, lower=ldu, ipiv=ipiv, matrix=M)


def factor_solve(handle: FactorHandle, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs with a previously computed factorization."""
    if handle.kind == "cholesky":
        return sla.cho_solve((handle.lower, True), rhs, check_finite=False)
    x, info = lapack.dsytrs(handle.lower, handle.ipiv, np.atleast_2d(rhs.T).T,
                            lower=1)
    if info != 0:
        raise Singular(abs(info))
    return x.reshape(np.shape(rhs))


def solve_lower(handle: FactorHandle, x: np.ndarray, trans: bool = False) -> np.ndarray:
    """Triangular solve with the Cholesky factor: L y = x (or L' y = x)."""
    return sla.solve_triangular(handle.lower, x, lower=True, trans=1 if trans else 0,
                                check_finite=False)


def inverse(handle: FactorHandle) -> np.ndarray:
    """Explicit inverse via factor solves against the identity."""
    inv = factor_solve(handle, np.eye(handle.n))
    return 0.5 * (inv + inv.T)


def logdet(factor: FactorHandle) -> float:
    """log det of the factored matrix; Cholesky handles only."""
    if factor.kind != "cholesky":
        raise ValueError("logdet requires a Cholesky handle")
    return 2.0 * float(np.sum(np.log(np.diagonal(factor.lower))))


def ldl_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric (possibly indefinite) system via LDL with one step
    of iterative refinement."""
    handle = ldl_factor(M)
    x = factor_solve(handle, rhs)
    x = x + factor_solve(handle, rhs - M @ x)
    return x


def _lanczos_extreme(matvec, n: int, tol: float = LANCZOS_TOL,
                     max_iter: int = LANCZOS_MAX_ITER, seed: int = 7):
    """Smallest and largest eigenvalue estimates of a symmetric operator by
    Lanczos with full reorthogonalization.

    Returns (lam_min, lam_max, converged).  Exact (up to rounding) once the
    Krylov space reaches dimension n.
    """
    rng = np.random.default_rng(seed + n)
    max_iter = min(max_iter, n)
    Q = np.zeros((n, max_iter))
    alpha = np.zeros(max_iter)
    beta = np.zeros(max_iter)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    scale = 0.0
    k = 0
    converged = False
    while k < max_iter:
        Q[:, k] = q
        w = matvec(q)
        alpha[k] = q @ w
        w -= Q[:, :k + 1] @ (Q[:, :k + 1].T @ w)
        w -= Q[:, :k + 1] @ (Q[:, :k + 1].T @ w)
        b = np.linalg.norm(w)
        scale = max(scale, abs(alpha[k]), b)
        T = np.diag(alpha[:k + 1])
        if k:
            T += np.diag(beta[:k], 1) + np.diag(beta[:k], -1)
        theta, U = np.linalg.eigh(T)
        bound = b * max(abs(U[-1, 0]), abs(U[-1, -1]))
        if bound <= max(tol * max(abs(theta[0]), abs(theta[-1])), 1e-15 * max(scale, 1.0)):
            converged = True
            k += 1
            break
        if b <= 1e-14 * max(scale, 1.0):
            if k + 1 >= n:
                converged = True
                k += 1
                break
            # invariant subspace: restart orthogonal to what we have
            q = rng.standard_normal(n)
            q -= Q[:, :k + 1] @ (Q[:, :k + 1].T @ q)
            nrm = np.linalg.norm(q)
            if nrm <= 1e-14:
                converged = True
                k += 1
                break
            q /= nrm
            beta[k] = 0.0
        else:
            beta[k] = b
            q = w / b
        k += 1
    T = np.diag(alpha[:k])
    if k > 1:
        T += np.diag(beta[:k - 1], 1) + np.diag(beta[:k - 1], -1)
    theta = np.linalg.eigvalsh(T)
    if k >= n:
        converged = True
    return float(theta[0]), float(theta[-1]), converged


def min_eigenvalue(A: np.ndarray, dense_limit: int = 400) -> float:
    """Smallest eigenvalue; dense solve up to ``dense_limit``, Lanczos above."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if n == 0:
        return 0.0
    if n <= dense_limit:
        return float(np.linalg.eigvalsh(A)[0])
    lam_min, _, _ = _lanczos_extreme(lambda v: A @ v, n, max_iter=min(n, 128))
    return lam_min


def max_step_lanczos(S_factor: FactorHandle, dS: np.ndarray,
                     tol: float = LANCZOS_TOL) -> float:
    """Largest alpha with S + alpha*dS psd, for S = L L' positive definite.

    Estimates the smallest eigenvalue of L^{-1} dS L^{-T} by Lanczos, then
    certifies a trial Cholesky at 0.95 of the step; a bisection fallback
    shrinks the step if certification fails.  Returns +inf for psd
    directions.
    """
    if S_factor.kind != "cholesky":
        raise ValueError("max_step_lanczos requires a Cholesky handle")
    n = S_factor.n
    dS = np.ascontiguousarray(dS, dtype=np.float64)
    s_scale = max(float(np.abs(S_factor.matrix).max()), 1e-300)
    d_scale = float(np.abs(dS).max())
    if d_scale == 0.0:
        return np.inf

    def matvec(v):
        t = solve_lower(S_factor, v, trans=True)
        return solve_lower(S_factor, dS @ t, trans=False)

    lam_min, _, _ = _lanczos_extreme(matvec, n, tol=tol)
    if lam_min >= -1e-14 * (d_scale / s_scale + 1.0):
        return np.inf
    alpha = -1.0 / lam_min

    def certify(a: float) -> bool:
        try:
            cholesky(S_factor.matrix + (0.95 * a) * dS)
            return True
        except NotPositiveDefinite:
            return False

    if certify(alpha):
        return alpha
    lo, hi = 0.0, alpha
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if certify(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_step_diag(s: np.ndarray, ds: np.ndarray) -> float:
    """Largest alpha with s + alpha*ds >= 0 for nonnegative diagonals."""
    neg = ds < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-s[neg] / ds[neg]))


@dataclass
class PcgState:
    """Preconditioner and iteration budget for the restarted CG solver."""

    precond: str = "diagonal"  # "diagonal" | "cholesky"
    diag: np.ndarray | None = None
    factor: FactorHandle | None = None
    max_iter: int = 50
    restart: bool = True
    restart_every: int = 50
    stall_count: int = 0

    def apply(self, r: np.ndarray) -> np.ndarray:
        if self.precond == "cholesky" and self.factor is not None:
            return factor_solve(self.factor, r)
        if self.diag is not None:
            return r / self.diag
        return r


@dataclass
class PcgResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


def pcg_solve(apply_M, rhs: np.ndarray, state: PcgState) -> PcgResult:
    """Restarted preconditioned conjugate gradients.

    ``apply_M`` is a symmetric positive definite operator (callable or
    ndarray).  Converges when ||M x - rhs|| <= max(1e-10, 1e-8 ||rhs||);
    raises Breakdown on non-positive curvature so the caller can switch to
    an indefinite factorization.
    """
    if not callable(apply_M):
        mat = np.asarray(apply_M)
        apply_M = lambda v: mat @ v  # noqa: E731
    n = len(rhs)
    target = max(1e-10, 1e-8 * float(np.linalg.norm(rhs)))
    x = np.zeros(n)
    r = rhs.copy()
    z = state.apply(r)
    p = z.copy()
    rz = float(r @ z)
    res = float(np.linalg.norm(r))
    it = 0
    since_restart = 0
    while res > target and it < state.max_iter:
        Mp = apply_M(p)
        curv = float(p @ Mp)
        if curv <= 0.0:
            raise Breakdown(f"non-positive curvature at iteration {it}")
        a = rz / curv
        x += a * p
        r -= a * Mp
        it += 1
        since_restart += 1
        if state.restart and since_restart >= state.restart_every:
            r = rhs - apply_M(x)
            z = state.apply(r)
            p = z.copy()
            rz = float(r @ z)
            since_restart = 0
            res = float(np.linalg.norm(r))
            continue
        z = state.apply(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        res = float(np.linalg.norm(r))
    return PcgResult(x=x, iterations=it, residual_norm=res, converged=res <= target)
