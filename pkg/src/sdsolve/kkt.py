"""Conic KKT solver: Schur complement assembly and normal-equation solves.

The Schur matrix has entries M[i, j] = <A_i, S^{-1} A_j S^{-1}> summed over
blocks.  Rows are permuted so the most expensive ones come first and each
row picks one of five assembly techniques from a flop model:

    1 RANK_OUTER  accumulate sum_r lam_r (S^{-1}a_r)(S^{-1}a_r)', then
                  sparse inner products against the later rows
    2 RANK_QUAD   back-solve the eigenvectors once, evaluate quadratic forms
    3 INV_BOTH    form S^{-1} A S^{-1} densely, then sparse inner products
    4 INV_LEFT    form S^{-1} A only; one length-n dot per stored entry
    5 ENTRYWISE   evaluate <S^{-1} A S^{-1}, A_j> entry by entry

Techniques 1-2 need a spectral form of the row coefficient (attached by the
presolver); 3-5 need S^{-1}, whose one-time formation cost is charged once
per iteration.  Diagonal (LP) blocks contribute through a closed-form
vectorized path instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import _kernels as krn
from . import linalg
from .linalg import FactorHandle, PcgState
from .model import DiagBlockData, SdpProblem

KAPPA_MEM = 3.0


class Technique(IntEnum):
    RANK_OUTER = 1
    RANK_QUAD = 2
    INV_BOTH = 3
    INV_LEFT = 4
    ENTRYWISE = 5


@dataclass
class RowPlan:
    """Permutation and per-row technique choice for the assembly."""

    sigma: np.ndarray  # processing order: original row indices
    technique: list  # per original row
    predicted_flops: np.ndarray  # per original row; nonincreasing along sigma
    kappa_mem: float = KAPPA_MEM


def _flops(t: Technique, f: float, r: float, n: float, suffix: float,
           kappa: float) -> float:
    if t is Technique.RANK_OUTER:
        return r * (n * n + 2 * n * n) + kappa * suffix
    if t is Technique.RANK_QUAD:
        return r * (n * n + kappa * suffix)
    if t is Technique.INV_BOTH:
        return n * kappa * f + n**3 + kappa * suffix
    if t is Technique.INV_LEFT:
        return n * kappa * f + kappa * (n + 1) * suffix
    return kappa * (2 * kappa * f + 1) * suffix


def plan_rows(f, r, n, kappa_mem: float = KAPPA_MEM) -> RowPlan:
    """Choose row order and per-row technique.

    Parameters are per-row arrays: nonzero count ``f``, spectral rank ``r``
    (negative when no spectral form exists), block order ``n``.

    The order sorts rows by their cost as if placed leftmost; techniques are
    then re-chosen with the actual suffix sums.  When every row has a
    spectral form, a plan restricted to the spectral techniques is compared
    against the free plan plus the one-time inverse formation cost, and the
    cheaper one wins.
    """
    f = np.asarray(f, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    m = len(f)
    if m == 0:
        return RowPlan(sigma=np.empty(0, np.int64), technique=[],
                       predicted_flops=np.empty(0), kappa_mem=kappa_mem)
    total_f = float(f.sum())

    def candidates(i: int, spectral_only: bool):
        if spectral_only:
            return (Technique.RANK_OUTER, Technique.RANK_QUAD)
        if r[i] >= 0:
            return tuple(Technique)
        return (Technique.INV_BOTH, Technique.INV_LEFT, Technique.ENTRYWISE)

    # pass 1: leftmost-position proxy cost fixes the permutation
    proxy = np.array([
        min(_flops(t, f[i], max(r[i], 0.0), n[i], total_f, kappa_mem)
            for t in candidates(i, False))
        for i in range(m)
    ])
    sigma = np.argsort(-proxy, kind="stable").astype(np.int64)

    # pass 2: with suffix sums known, re-choose the technique per row
    suffix = np.cumsum(f[sigma][::-1])[::-1]

    def pick(spectral_only: bool):
        techs: list = [None] * m
        total = 0.0
        for pos, i in enumerate(sigma):
            best, best_cost = None, np.inf
            for t in candidates(int(i), spectral_only):
                cost = _flops(t, f[i], max(r[i], 0.0), n[i], suffix[pos], kappa_mem)
                if cost < best_cost - 1e-12:
                    best, best_cost = t, cost
            # fixed tie-break: tiny rank-one rows always use the quadratic form
            if r[i] == 1 and f[i] <= 2 and not spectral_only:
                best = Technique.RANK_QUAD
                best_cost = _flops(best, f[i], 1.0, n[i], suffix[pos], kappa_mem)
            techs[int(i)] = best
            total += best_cost
        return techs, total

    techs_free, cost_free = pick(spectral_only=False)
    uses_inverse = any(t in (Technique.INV_BOTH, Technique.INV_LEFT,
                             Technique.ENTRYWISE) for t in techs_free)
    if uses_inverse:
        cost_free += float(np.max(n)) ** 3
        if np.all(r >= 0):
            techs_spec, cost_spec = pick(spectral_only=True)
            if cost_spec <= cost_free:
                techs_free = techs_spec
    return RowPlan(sigma=sigma, technique=techs_free, predicted_flops=proxy,
                   kappa_mem=kappa_mem)


def plan_for_problem(problem: SdpProblem, kappa_mem: float = KAPPA_MEM) -> RowPlan:
    """Build row statistics from the problem and plan the assembly."""
    m = problem.m
    f = np.zeros(m)
    r = np.zeros(m)
    n = np.ones(m)
    spectral_ok = np.ones(m, dtype=bool)
    for k in range(problem.nblocks):
        if problem.is_diag(k):
            continue
        data = problem.block_data(k)
        for i in range(m):
            c = data.coeff[i]
            if c.nnz == 0:
                continue
            f[i] += c.nnz
            n[i] = max(n[i], data.dim)
            if c.rank is None:
                spectral_ok[i] = False
            else:
                r[i] += c.rank
    r[~spectral_ok] = -1.0
    return plan_rows(f, r, n, kappa_mem)


@dataclass
class SchurAux:
    """Inner products against S^{-1} shared by the Newton right-hand sides.

    asinv[i] = <A_i, S^{-1}>, and the *_csinv / *_rsinv variants replace
    S^{-1} by S^{-1} C S^{-1} and S^{-1} R S^{-1}.  The trailing scalars are
    the same contractions taken with C and R on the left.
    """

    asinv: np.ndarray
    asinv_csinv: np.ndarray
    asinv_rsinv: np.ndarray
    csinv: float = 0.0
    csinvcsinv: float = 0.0
    csinv_rsinv: float = 0.0
    rsinv: float = 0.0
    rsinv_rsinv: float = 0.0


@dataclass
class SchurSystem:
    M: np.ndarray
    aux: SchurAux
    plan: RowPlan
    factor: FactorHandle | None = None
    pcg: PcgState | None = None
    sinv: list = field(default_factory=list)  # per-block S^{-1} (None for diag)


def _coeff_inner(B: np.ndarray, coeff) -> float:
    """<coeff, B> for a triplet coefficient against a dense symmetric B."""
    if coeff.nnz == 0:
        return 0.0
    w = np.where(coeff.rows != coeff.cols, 2.0, 1.0)
    return float(np.dot(coeff.vals * w, B[coeff.rows, coeff.cols]))


def sinv_blocks(problem: SdpProblem, S_factors) -> list:
    """Per-block explicit inverse of S (1/s vectors for diagonal blocks)."""
    out = []
    for k in range(problem.nblocks):
        if problem.is_diag(k):
            out.append(1.0 / S_factors[k])
        else:
            out.append(linalg.inverse(S_factors[k]))
    return out


def compute_aux(problem: SdpProblem, S_factors, R_blocks, sinv=None) -> SchurAux:
    """Fill the auxiliary inner products for the current S (and R)."""
    if sinv is None:
        sinv = sinv_blocks(problem, S_factors)
    m = problem.m
    aux = SchurAux(asinv=np.zeros(m), asinv_csinv=np.zeros(m),
                   asinv_rsinv=np.zeros(m))
    buf = np.zeros(m)
    for k in range(problem.nblocks):
        data = problem.block_data(k)
        if problem.is_diag(k):
            si = sinv[k]
            aux.asinv += data.D @ si
            cw = data.c * si * si
            aux.asinv_csinv += data.D @ cw
            aux.csinv += float(data.c @ si)
            aux.csinvcsinv += float(data.c @ cw)
            if R_blocks is not None and R_blocks[k] is not None:
                rk = R_blocks[k]
                rw = rk * si * si
                aux.asinv_rsinv += data.D @ rw
                aux.csinv_rsinv += float(data.c @ rw)
                aux.rsinv += float(rk @ si)
                aux.rsinv_rsinv += float(rk @ rw)
            continue
        Si = sinv[k]
        krn.gather_inner_all(Si, data.rows, data.cols, data.vals, data.offs, buf)
        aux.asinv += buf
        cd = data.c_coeff
        if cd.nnz:
            Cd = cd.materialize()
            BC = Si @ Cd @ Si
            krn.gather_inner_all(BC, data.rows, data.cols, data.vals, data.offs, buf)
            aux.asinv_csinv += buf
            aux.csinv += _coeff_inner(Si, cd)
            aux.csinvcsinv += _coeff_inner(BC, cd)
        if R_blocks is not None and R_blocks[k] is not None:
            Rk = np.ascontiguousarray(R_blocks[k])
            BR = Si @ Rk @ Si
            krn.gather_inner_all(BR, data.rows, data.cols, data.vals, data.offs, buf)
            aux.asinv_rsinv += buf
            if cd.nnz:
                aux.csinv_rsinv += _coeff_inner(BR, cd)
            aux.rsinv += float(np.sum(Rk * Si))
            aux.rsinv_rsinv += float(np.sum(Rk * BR))
    return aux


def assemble_schur(problem: SdpProblem, S_factors, R_blocks,
                   plan: RowPlan | None = None,
                   force_technique: Technique | None = None) -> SchurSystem:
    """Assemble M row by row with the planned techniques plus all auxiliary
    vectors; the objective C is handled like an extra leading row through
    the dense-inverse path."""
    if plan is None:
        plan = plan_for_problem(problem)
    m = problem.m
    sinv = sinv_blocks(problem, S_factors)
    M_half = np.zeros((m, m))  # one entry per (i, j) pair, folded at the end
    M_full = np.zeros((m, m))  # symmetric-complete diagonal-block terms
    for k in range(problem.nblocks):
        data = problem.block_data(k)
        if problem.is_diag(k):
            si = sinv[k]
            Dw = data.D.multiply(si * si)
            M_full += (Dw @ data.D.T).toarray()
            continue
        Si = sinv[k]
        sigma = plan.sigma
        for pos in range(m):
            i = int(sigma[pos])
            coeff = data.coeff[i]
            if coeff.nnz == 0:
                continue
            sel = sigma[pos:]
            tech = force_technique or plan.technique[i]
            if tech in (Technique.RANK_OUTER, Technique.RANK_QUAD) and coeff.rank is None:
                tech = Technique.INV_BOTH  # no spectral form: fall back
            row = M_half[i]
            if tech is Technique.RANK_OUTER:
                Y = Si @ coeff.eigvecs.T  # (n, r)
                B = (Y * coeff.eigvals) @ Y.T
                krn.inner_into(np.ascontiguousarray(B), data.rows, data.cols,
                               data.vals, data.offs, sel, row, 1.0)
            elif tech is Technique.RANK_QUAD:
                Y = np.ascontiguousarray((Si @ coeff.eigvecs.T).T)
                krn.quad_into(Y, coeff.eigvals, data.rows, data.cols,
                              data.vals, data.offs, sel, row, 1.0)
            elif tech is Technique.INV_BOTH:
                B = Si @ coeff.materialize() @ Si
                krn.inner_into(np.ascontiguousarray(B), data.rows, data.cols,
                               data.vals, data.offs, sel, row, 1.0)
            elif tech is Technique.INV_LEFT:
                Bleft = np.ascontiguousarray(Si @ coeff.materialize())
                krn.m4_into(Bleft, Si, data.rows, data.cols, data.vals,
                            data.offs, sel, row, 1.0)
            else:
                krn.m5_into(Si, coeff.rows, coeff.cols, coeff.vals,
                            data.rows, data.cols, data.vals, data.offs,
                            sel, row, 1.0)
    M = M_half + M_half.T
    M[np.diag_indices(m)] *= 0.5
    M += M_full
    aux = compute_aux(problem, S_factors, R_blocks, sinv=sinv)
    return SchurSystem(M=M, aux=aux, plan=plan, sinv=sinv)


def solve_normal(system: SchurSystem, rhs: np.ndarray, mode: str = "direct") -> np.ndarray:
    """Solve M x = rhs.  Direct mode factors once (Cholesky, then an
    indefinite factorization if that fails) and reuses the factor across
    calls; PCG mode runs restarted CG per the cached state, escalating the
    preconditioner on stall."""
    M = system.M
    m = len(rhs)
    if mode == "direct":
        if system.factor is None:
            try:
                system.factor = linalg.cholesky(M)
            except linalg.NotPositiveDefinite:
                system.factor = linalg.ldl_factor(M)
        x = linalg.factor_solve(system.factor, rhs)
        return x + linalg.factor_solve(system.factor, rhs - M @ x)
    if system.pcg is None:
        d = np.abs(M.diagonal()).copy()
        d[d == 0] = 1.0
        system.pcg = PcgState(precond="diagonal", diag=d,
                              max_iter=max(1, round(50 / max(m, 1))))
    state = system.pcg
    try:
        res = linalg.pcg_solve(M, rhs, state)
    except linalg.Breakdown:
        return linalg.ldl_solve(M, rhs)
    if not res.converged:
        state.stall_count += 1
        state.max_iter = min(200, 2 * state.max_iter)
        if state.stall_count >= 2 and state.precond != "cholesky":
            try:
                state.factor = linalg.cholesky(M)
                state.precond = "cholesky"
            except linalg.NotPositiveDefinite:
                return linalg.ldl_solve(M, rhs)
            state.stall_count = 0
        res = linalg.pcg_solve(M, rhs, state)
        if not res.converged:
            return linalg.ldl_solve(M, rhs)
    else:
        state.stall_count = 0
    return res.x
