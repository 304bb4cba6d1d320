"""Structure discovery ahead of the solve.

Two detection rounds attach spectral forms to the constraint coefficients
(Gaussian elimination for rank one, then eigendecomposition kept only when
the rank is at most half the order), large objectives are scaled down by
their Frobenius norm, and seven problem structures are flagged.  Detected
structures adjust solver parameters through an explicit table:

    feasibility problem   -> skip the feasible-phase optimization
    empty dual interior   -> residual weight theta increased tenfold
    dense problem         -> memory slowdown ratio lowered to 1.5
    implied trace         -> initial primal objective bound theta * lmax(C)
    implied dual bounds   -> recorded, available to the bound handling
    empty primal interior -> recorded (primal recovery may be uncertified)
    multi-block problem   -> recorded
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import CoeffKind, CoeffMatrix, SdpProblem

RANK_TOL = 1e-10
DENSE_SKIP_ORDER = 2048
FEW_ENTRY_ROWS = 20
SCALE_TRIGGER = 1e8
MULTI_BLOCK_THRESHOLD = 100


@dataclass
class StructureFlags:
    implied_trace: float | None = None
    implied_dual_bounds: tuple[np.ndarray, np.ndarray] | None = None
    empty_primal_interior: bool = False
    empty_dual_interior: bool = False
    feasibility_problem: bool = False
    dense_problem: bool = False
    multi_block: bool = False


@dataclass
class PresolveInfo:
    flags: StructureFlags
    objective_scale: float = 1.0
    notes: tuple = ()


def detect_rank_one(M: CoeffMatrix, tol: float = RANK_TOL):
    """Return (lam, a) with M = lam * outer(a, a), a unit norm, or None.

    Elimination candidate is the row with the largest diagonal magnitude;
    the vector is scaled to leading entry one before normalization so signs
    are reproducible.
    """
    if M.kind is CoeffKind.ZERO or M.nnz == 0:
        return None
    active = np.unique(np.concatenate([M.rows, M.cols]))
    if len(active) > DENSE_SKIP_ORDER:
        return None
    pos = np.full(M.dim, -1, dtype=np.int64)
    pos[active] = np.arange(len(active))
    K = np.zeros((len(active), len(active)))
    r, c = pos[M.rows], pos[M.cols]
    K[r, c] = M.vals
    K[c, r] = M.vals
    d = np.abs(np.diagonal(K))
    if d.max() == 0.0:
        return None  # nonzero matrix with zero diagonal cannot be rank one
    p = int(np.argmax(d))
    pivot = K[p, p]
    u = K[:, p] / pivot
    resid = K - pivot * np.outer(u, u)
    if np.linalg.norm(resid) > tol * np.linalg.norm(K):
        return None
    fnz = np.nonzero(u)[0][0]  # u[p] = 1, so u has a nonzero entry
    lam = pivot * u[fnz] ** 2
    u = u / u[fnz]
    # carry the scale in the eigenvalue, keep the vector unit norm
    nrm = np.linalg.norm(u)
    lam *= nrm**2
    a_full = np.zeros(M.dim)
    a_full[active] = u / nrm
    return float(lam), a_full


def gather_permute_eig(M: CoeffMatrix, tol: float = RANK_TOL):
    """Eigendecomposition of a sparse symmetric matrix through its dense
    core: gather the nonzero rows, decompose, scatter the vectors back.

    Returns (eigvals, eigvecs) with eigvecs of shape (r, dim); zero matrices
    yield empty arrays.
    """
    if M.nnz == 0:
        return np.empty(0), np.empty((0, M.dim))
    active = np.unique(np.concatenate([M.rows, M.cols]))
    pos = np.full(M.dim, -1, dtype=np.int64)
    pos[active] = np.arange(len(active))
    K = np.zeros((len(active), len(active)))
    r, c = pos[M.rows], pos[M.cols]
    K[r, c] = M.vals
    K[c, r] = M.vals
    w, U = np.linalg.eigh(K)
    keep = np.abs(w) > tol * np.abs(w).max()
    w, U = w[keep], U[:, keep]
    vecs = np.zeros((len(w), M.dim))
    vecs[:, active] = U.T
    return w, vecs


def detect_low_rank(M: CoeffMatrix, tol: float = RANK_TOL) -> CoeffMatrix | None:
    """Low-rank spectral form if the numerical rank is at most dim/2."""
    if M.kind in (CoeffKind.ZERO, CoeffKind.RANK_ONE) or M.nnz == 0:
        return None
    active = np.unique(np.concatenate([M.rows, M.cols]))
    if len(active) <= FEW_ENTRY_ROWS:
        w, vecs = gather_permute_eig(M, tol)
    elif M.dim > DENSE_SKIP_ORDER:
        return None  # too dense to decompose profitably
    else:
        w, U = np.linalg.eigh(M.materialize())
        keep = np.abs(w) > tol * np.abs(w).max()
        w, vecs = w[keep], U[:, keep].T
    r = len(w)
    if r == 0 or r > M.dim // 2:
        return None
    kind = CoeffKind.RANK_ONE if r == 1 else CoeffKind.LOW_RANK
    return M.with_spectral(w, vecs, kind)


def promote_coefficient(M: CoeffMatrix, tol: float = RANK_TOL) -> CoeffMatrix:
    """Attach a spectral form where one exists: rank-one first, then the
    eigendecomposition round."""
    if M.kind is CoeffKind.ZERO:
        return M
    hit = detect_rank_one(M, tol)
    if hit is not None:
        lam, a = hit
        return M.with_spectral(np.array([lam]), a.reshape(1, -1), CoeffKind.RANK_ONE)
    low = detect_low_rank(M, tol)
    return low if low is not None else M


def scale_objective(problem: SdpProblem,
                    trigger: float = SCALE_TRIGGER) -> tuple[SdpProblem, float]:
    """Divide C by its Frobenius norm when it exceeds ``trigger``."""
    norm = problem.c_norm()
    if norm <= trigger:
        return problem, 1.0
    C_new = []
    for c in problem.C:
        scaled = CoeffMatrix(kind=c.kind, dim=c.dim, rows=c.rows, cols=c.cols,
                             vals=c.vals / norm,
                             eigvals=None if c.eigvals is None else c.eigvals / norm,
                             eigvecs=c.eigvecs)
        C_new.append(scaled)
    return problem.replace_objective(C_new), norm


def _is_identity(row, blocks) -> bool:
    for k, coeff in enumerate(row):
        dim = abs(blocks[k])
        if coeff.nnz != dim:
            return False
        if not (np.array_equal(coeff.rows, np.arange(dim))
                and np.array_equal(coeff.cols, np.arange(dim))
                and np.allclose(coeff.vals, 1.0)):
            return False
    return True


def detect_structures(problem: SdpProblem,
                      multi_block_threshold: int = MULTI_BLOCK_THRESHOLD) -> StructureFlags:
    """Run the seven structure detectors; see the module docstring."""
    flags = StructureFlags()
    m, blocks = problem.m, problem.blocks
    total_dim = problem.total_dim

    # implied trace: one constraint equal to the identity, or single-entry
    # unit diagonal constraints covering every coordinate exactly once
    for i in range(m):
        if _is_identity(problem.A[i], blocks):
            flags.implied_trace = float(problem.b[i])
            break
    if flags.implied_trace is None:
        covered = {}
        ok = True
        for i in range(m):
            touched = []
            for k, coeff in enumerate(problem.A[i]):
                if coeff.nnz == 0:
                    continue
                if coeff.nnz != 1 or coeff.rows[0] != coeff.cols[0] or coeff.vals[0] != 1.0:
                    touched = None
                    break
                touched.append((k, int(coeff.rows[0])))
            if touched is None or len(touched) != 1:
                ok = False
                break
            if touched[0] in covered:
                ok = False
                break
            covered[touched[0]] = i
        if ok and len(covered) == total_dim:
            flags.implied_trace = float(np.sum(problem.b))

    # implied dual bounds from diagonal-block columns with a single entry
    lb = np.full(m, -np.inf)
    ub = np.full(m, np.inf)
    any_bound = False
    for k in range(problem.nblocks):
        if not problem.is_diag(k):
            continue
        data = problem.block_data(k)
        Dc = data.D.tocsc()
        for t in range(data.dim):
            lo, hi = Dc.indptr[t], Dc.indptr[t + 1]
            if hi - lo != 1:
                continue
            i = int(Dc.indices[lo])
            d = float(Dc.data[lo])
            c_t = float(data.c[t])
            if d > 0:
                ub[i] = min(ub[i], c_t / d)
            else:
                lb[i] = max(lb[i], c_t / d)
            any_bound = True
    if any_bound:
        flags.implied_dual_bounds = (lb, ub)

    # empty primal interior: a psd rank-one constraint with zero rhs
    for i in range(m):
        if abs(problem.b[i]) > 1e-12:
            continue
        nz = [c for c in problem.A[i] if c.nnz]
        if len(nz) == 1 and nz[0].rank == 1 and nz[0].eigvals is not None:
            flags.empty_primal_interior = True
            break

    # empty dual interior: A* y = C consistent in the least-squares sense
    upper_sz = sum((abs(s) * (abs(s) + 1)) // 2 for s in blocks)
    if m * upper_sz <= 2_000_000:
        cols = []
        for i in range(m):
            cols.append(_vec_upper(problem.A[i], blocks))
        G = np.column_stack(cols) if cols else np.zeros((upper_sz, 0))
        cvec = _vec_upper(problem.C, blocks)
        if G.size:
            sol, *_ = np.linalg.lstsq(G, cvec, rcond=None)
            resid = np.linalg.norm(G @ sol - cvec)
            if resid <= 1e-10 * (1.0 + np.linalg.norm(cvec)):
                flags.empty_dual_interior = True

    flags.feasibility_problem = all(c.nnz == 0 for c in problem.C)
    sdp_coeffs = [problem.A[i][k] for i in range(m)
                  for k in range(problem.nblocks) if not problem.is_diag(k)]
    flags.dense_problem = bool(sdp_coeffs) and all(
        c.kind is CoeffKind.DENSE for c in sdp_coeffs)
    flags.multi_block = problem.nblocks > multi_block_threshold
    return flags


def _vec_upper(row, blocks) -> np.ndarray:
    """Stack per-block upper triangles with off-diagonals weighted sqrt(2),
    making Euclidean inner products match matrix inner products."""
    parts = []
    for k, coeff in enumerate(row):
        dim = abs(blocks[k])
        v = np.zeros((dim * (dim + 1)) // 2)
        if coeff.nnz:
            idx = coeff.rows * dim - (coeff.rows * (coeff.rows + 1)) // 2 + coeff.cols
            w = np.where(coeff.rows == coeff.cols, 1.0, np.sqrt(2.0))
            v[idx] = coeff.vals * w
        parts.append(v)
    return np.concatenate(parts)


def apply_structure_params(flags: StructureFlags, params, lmax_c: float | None = None):
    """Adjust solver parameters per the detected structures; returns the
    new params and human-readable notes."""
    notes = []
    if flags.feasibility_problem:
        params = replace(params, skip_phase_b=True)
        notes.append("feasibility problem: phase B skipped")
    if flags.empty_dual_interior:
        params = replace(params, theta=params.theta * 10.0)
        notes.append("empty dual interior: theta x10")
    if flags.dense_problem:
        params = replace(params, kappa_mem=1.5)
        notes.append("dense problem: kappa_mem=1.5")
    if flags.implied_trace is not None and lmax_c is not None:
        bound = flags.implied_trace * max(lmax_c, 0.0)
        params = replace(params, initial_primal_bound=bound)
        notes.append(f"implied trace {flags.implied_trace:g}: initial bound {bound:g}")
    if flags.empty_primal_interior:
        notes.append("empty primal interior detected")
    if flags.multi_block:
        notes.append("multi-block problem")
    return params, tuple(notes)


def presolve(problem: SdpProblem, rank_tol: float = RANK_TOL):
    """Full presolve pass: spectral promotion, objective scaling, structure
    detection.  Returns (problem, info)."""
    A_new = []
    for i in range(problem.m):
        row = []
        for k in range(problem.nblocks):
            c = problem.A[i][k]
            row.append(c if problem.is_diag(k) else promote_coefficient(c, rank_tol))
        A_new.append(row)
    C_new = [c if problem.is_diag(k) else promote_coefficient(c, rank_tol)
             for k, c in enumerate(problem.C)]
    promoted = SdpProblem(problem.blocks, A_new, C_new, problem.b,
                          dual_bounds=problem.dual_bounds, name=problem.name)
    scaled, scale = scale_objective(promoted)
    flags = detect_structures(scaled)
    return scaled, PresolveInfo(flags=flags, objective_scale=scale)
