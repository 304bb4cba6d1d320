"""Problem data model: block-structured coefficients and the constraint maps.

A problem instance holds the constraint matrices ``A_i``, the objective
matrix ``C`` and the right-hand side ``b`` of the conic pair

    (P) min <C, X>  s.t.  <A_i, X> = b_i,  X psd
    (D) max b'y     s.t.  sum_i A_i y_i + S = C,  S psd

where ``X`` and ``S`` range over a block-diagonal cone: zero or more dense
symmetric (SDP) blocks plus optional diagonal (LP) blocks.  Coefficients are
classified by structure so the Schur-complement assembly can pick the
cheapest evaluation strategy per constraint row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import _kernels as krn


class CoeffKind(Enum):
    ZERO = "zero"
    SPARSE = "sparse"
    DENSE = "dense"
    RANK_ONE = "rank_one"
    LOW_RANK = "low_rank"


class NonSymmetric(ValueError):
    """Input matrix is not symmetric within tolerance."""


class DimensionMismatch(ValueError):
    """Operand dimensions do not match the problem block structure."""


SYMMETRY_RTOL = 1e-14
SPARSITY_THRESHOLD = 0.25


@dataclass
class CoeffMatrix:
    """One coefficient matrix, stored as upper-triangle triplets.

    ``rows/cols/vals`` always describe the represented matrix exactly
    (i <= j, each pair at most once).  ``eigvals/eigvecs`` carry an optional
    spectral form ``sum_r eigvals[r] * outer(eigvecs[r], eigvecs[r])`` that
    reproduces the matrix; it is attached by the presolver for rank-one and
    low-rank coefficients and enables the cheap assembly strategies.
    """

    kind: CoeffKind
    dim: int
    rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    cols: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    vals: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))
    eigvals: np.ndarray | None = None
    eigvecs: np.ndarray | None = None  # shape (rank, dim)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def rank(self) -> int | None:
        """Known spectral rank, or None if no spectral form is attached."""
        if self.kind is CoeffKind.ZERO:
            return 0
        if self.eigvals is not None:
            return len(self.eigvals)
        return None

    def materialize(self) -> np.ndarray:
        """Dense symmetric ndarray of the represented matrix."""
        out = np.zeros((self.dim, self.dim))
        if self.nnz:
            out[self.rows, self.cols] = self.vals
            out[self.cols, self.rows] = self.vals
        return out

    def with_spectral(self, eigvals: np.ndarray, eigvecs: np.ndarray,
                      kind: CoeffKind) -> "CoeffMatrix":
        return CoeffMatrix(kind=kind, dim=self.dim, rows=self.rows,
                           cols=self.cols, vals=self.vals,
                           eigvals=np.asarray(eigvals, dtype=np.float64),
                           eigvecs=np.ascontiguousarray(eigvecs, dtype=np.float64))

    @staticmethod
    def zero(dim: int) -> "CoeffMatrix":
        return CoeffMatrix(kind=CoeffKind.ZERO, dim=dim)

    @staticmethod
    def from_triplets(dim: int, rows, cols, vals, kind: CoeffKind | None = None,
                      sparsity_threshold: float = SPARSITY_THRESHOLD) -> "CoeffMatrix":
        """Build from (i, j, v) entries; i > j entries are transposed and
        duplicates summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        swap = rows > cols
        rows, cols = np.where(swap, cols, rows), np.where(swap, rows, cols)
        # merge duplicates
        key = rows * dim + cols
        order = np.argsort(key, kind="stable")
        key, rows, cols, vals = key[order], rows[order], cols[order], vals[order]
        uniq, start = np.unique(key, return_index=True)
        if len(uniq) != len(key):
            summed = np.add.reduceat(vals, start)
            rows, cols, vals = rows[start], cols[start], summed
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        if kind is None:
            if len(vals) == 0:
                kind = CoeffKind.ZERO
            else:
                frac = nnz_fraction(dim, rows, cols)
                kind = CoeffKind.SPARSE if frac < sparsity_threshold else CoeffKind.DENSE
        return CoeffMatrix(kind=kind, dim=dim, rows=rows, cols=cols, vals=vals)

    @staticmethod
    def from_rank_one(dim: int, lam: float, a: np.ndarray) -> "CoeffMatrix":
        a = np.asarray(a, dtype=np.float64)
        dense = lam * np.outer(a, a)
        base = classify_coefficient(dense)
        return base.with_spectral(np.array([lam]), a.reshape(1, -1), CoeffKind.RANK_ONE)


def nnz_fraction(dim: int, rows: np.ndarray, cols: np.ndarray) -> float:
    """Fraction of nonzero entries in the full (two-triangle) matrix."""
    off = int(np.count_nonzero(rows != cols))
    diag = len(rows) - off
    return (2 * off + diag) / float(dim * dim)


def classify_coefficient(M: np.ndarray,
                         sparsity_threshold: float = SPARSITY_THRESHOLD) -> CoeffMatrix:
    """Classify a dense symmetric matrix into its cheapest representation.

    Zero matrices map to ZERO, matrices with nonzero fraction below
    ``sparsity_threshold`` to SPARSE, the rest to DENSE.  Rank-one and
    low-rank promotion is the presolver's job.

    Raises NonSymmetric if ``max|M - M'|`` exceeds ``1e-14 * max|M|``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSymmetric("expected a square matrix")
    scale = np.abs(M).max() if M.size else 0.0
    if scale > 0 and np.abs(M - M.T).max() > SYMMETRY_RTOL * scale:
        raise NonSymmetric("matrix is not symmetric")
    n = M.shape[0]
    iu, ju = np.triu_indices(n)
    vals = M[iu, ju]
    keep = vals != 0.0
    rows, cols, vals = iu[keep], ju[keep], vals[keep]
    if len(vals) == 0:
        return CoeffMatrix.zero(n)
    frac = nnz_fraction(n, rows, cols)
    kind = CoeffKind.SPARSE if frac < sparsity_threshold else CoeffKind.DENSE
    return CoeffMatrix(kind=kind, dim=n, rows=np.ascontiguousarray(rows, dtype=np.int64),
                       cols=np.ascontiguousarray(cols, dtype=np.int64),
                       vals=np.ascontiguousarray(vals))


@dataclass
class SdpBlockData:
    """Stacked per-block constraint data for the assembly kernels.

    The triplets of all m constraint coefficients restricted to this block
    are concatenated; ``offs[i]:offs[i+1]`` delimits constraint i.
    """

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    offs: np.ndarray
    coeff: list  # per-constraint CoeffMatrix
    c_coeff: CoeffMatrix

    @property
    def nnz_per_row(self) -> np.ndarray:
        return np.diff(self.offs)


@dataclass
class DiagBlockData:
    """Diagonal (LP) block: constraint diagonals as a sparse map."""

    dim: int
    D: sp.csr_matrix  # (m, dim)
    c: np.ndarray  # objective diagonal

    @property
    def nnz_per_row(self) -> np.ndarray:
        return np.diff(self.D.indptr)


class SdpProblem:
    """Block-structured SDP instance.

    Parameters
    ----------
    blocks : sequence of int
        Block orders; a negative entry flags a diagonal (LP) block of that
        order.
    A : list of list of CoeffMatrix
        ``A[i][k]`` is constraint i restricted to block k.
    C : list of CoeffMatrix
        Objective per block.
    b : (m,) array.
    dual_bounds : optional (l, u) pair of per-coordinate penalty bounds on y.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, blocks, A, C, b, dual_bounds=None, name: str = ""):
        self.blocks = [int(s) for s in blocks]
        self.A = A
        self.C = C
        self.b = np.asarray(b, dtype=np.float64)
        self.dual_bounds = dual_bounds
        self.name = name
        self.m = len(self.b)
        if len(A) != self.m:
            raise DimensionMismatch(f"A has {len(A)} rows, b has {self.m} entries")
        for i, row in enumerate(A):
            if len(row) != len(self.blocks):
                raise DimensionMismatch(f"constraint {i} covers {len(row)} blocks, "
                                        f"expected {len(self.blocks)}")
            for k, c in enumerate(row):
                if c.dim != abs(self.blocks[k]):
                    raise DimensionMismatch(
                        f"A[{i}][{k}] has dim {c.dim}, block order {abs(self.blocks[k])}")
        for k, c in enumerate(C):
            if c.dim != abs(self.blocks[k]):
                raise DimensionMismatch(f"C[{k}] has dim {c.dim}")
        self._block_data: list | None = None

    # -- structure ---------------------------------------------------------

    @property
    def nblocks(self) -> int:
        return len(self.blocks)

    @property
    def block_orders(self) -> list[int]:
        return [abs(s) for s in self.blocks]

    def is_diag(self, k: int) -> bool:
        return self.blocks[k] < 0

    @property
    def total_dim(self) -> int:
        return sum(self.block_orders)

    def block_data(self, k: int):
        """Stacked kernel-ready view of block k (cached)."""
        if self._block_data is None:
            self._block_data = [self._build_block(k) for k in range(self.nblocks)]
        return self._block_data[k]

    def _build_block(self, k: int):
        dim = abs(self.blocks[k])
        coeffs = [self.A[i][k] for i in range(self.m)]
        if self.is_diag(k):
            mat = sp.lil_matrix((self.m, dim))
            for i, c in enumerate(coeffs):
                if c.nnz:
                    mat[i, c.rows] = c.vals
            cdiag = np.zeros(dim)
            ck = self.C[k]
            if ck.nnz:
                cdiag[ck.rows] = ck.vals
            return DiagBlockData(dim=dim, D=mat.tocsr(), c=cdiag)
        offs = np.zeros(self.m + 1, dtype=np.int64)
        for i, c in enumerate(coeffs):
            offs[i + 1] = offs[i] + c.nnz
        rows = np.concatenate([c.rows for c in coeffs]) if offs[-1] else np.empty(0, np.int64)
        cols = np.concatenate([c.cols for c in coeffs]) if offs[-1] else np.empty(0, np.int64)
        vals = np.concatenate([c.vals for c in coeffs]) if offs[-1] else np.empty(0, np.float64)
        return SdpBlockData(dim=dim, rows=np.ascontiguousarray(rows, np.int64),
                            cols=np.ascontiguousarray(cols, np.int64),
                            vals=np.ascontiguousarray(vals, np.float64),
                            offs=offs, coeff=coeffs, c_coeff=self.C[k])

    # -- linear maps -------------------------------------------------------

    def primal_map(self, X_blocks) -> np.ndarray:
        """Apply the constraint map: component i is sum_k <A_ik, X_k>.

        SDP blocks expect (n, n) arrays, diagonal blocks (d,) vectors.
        """
        if len(X_blocks) != self.nblocks:
            raise DimensionMismatch("wrong number of blocks")
        out = np.zeros(self.m)
        for k in range(self.nblocks):
            data = self.block_data(k)
            X = np.asarray(X_blocks[k], dtype=np.float64)
            if self.is_diag(k):
                if X.shape != (data.dim,):
                    raise DimensionMismatch(f"block {k}: expected vector of length {data.dim}")
                out += data.D @ X
            else:
                if X.shape != (data.dim, data.dim):
                    raise DimensionMismatch(f"block {k}: expected {data.dim}x{data.dim}")
                buf = np.zeros(self.m)
                krn.gather_inner_all(np.ascontiguousarray(X), data.rows, data.cols,
                                     data.vals, data.offs, buf)
                out += buf
        return out

    def adjoint_map(self, y: np.ndarray) -> list:
        """Apply the adjoint: per block, sum_i y_i A_ik (dense accumulation)."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.m,):
            raise DimensionMismatch(f"y has shape {y.shape}, expected ({self.m},)")
        out = []
        for k in range(self.nblocks):
            data = self.block_data(k)
            if self.is_diag(k):
                out.append(np.asarray(data.D.T @ y).ravel())
            else:
                acc = np.zeros((data.dim, data.dim))
                krn.adjoint_accum(acc, data.rows, data.cols, data.vals, data.offs, y)
                out.append(acc)
        return out

    def objective_blocks(self) -> list:
        """C materialized per block (vectors for diagonal blocks)."""
        out = []
        for k in range(self.nblocks):
            if self.is_diag(k):
                out.append(np.asarray(self.block_data(k).c))
            else:
                out.append(self.C[k].materialize())
        return out

    def c_norm(self) -> float:
        """Frobenius norm of C over all blocks."""
        total = 0.0
        for k, c in enumerate(self.C):
            off = c.rows != c.cols
            total += np.sum(np.where(off, 2.0, 1.0) * c.vals ** 2)
        return float(np.sqrt(total))

    def replace_objective(self, C_new) -> "SdpProblem":
        return SdpProblem(self.blocks, self.A, C_new, self.b,
                          dual_bounds=self.dual_bounds, name=self.name)
