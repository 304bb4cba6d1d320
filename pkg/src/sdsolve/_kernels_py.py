"""Pure-numpy fallback for the assembly kernels.

Same contracts as the compiled module ``sdsolve._core``; selected at import
time by ``sdsolve._kernels`` when the extension is unavailable or disabled.

Triplet convention throughout: ``rows/cols/vals`` store the upper triangle
(r <= c) of symmetric matrices, concatenated over constraints with segment
boundaries in ``offs``; off-diagonal entries count twice in inner products.
"""

from __future__ import annotations

import numpy as np


def _segment_sums(t: np.ndarray, offs: np.ndarray) -> np.ndarray:
    cs = np.concatenate(([0.0], np.cumsum(t)))
    return cs[offs[1:]] - cs[offs[:-1]]


def gather_inner_all(B, rows, cols, vals, offs, out):
    """out[i] = <A_i, B> for every constraint segment i."""
    if len(vals) == 0:
        out[:] = 0.0
        return
    w = np.where(rows != cols, 2.0, 1.0)
    t = vals * w * B[rows, cols]
    out[:] = _segment_sums(t, offs)


def adjoint_accum(out, rows, cols, vals, offs, y):
    """out += sum_i y[i] * A_i, writing both triangles."""
    if len(vals) == 0:
        return
    scale = np.repeat(y, np.diff(offs))
    t = scale * vals
    np.add.at(out, (rows, cols), t)
    off = rows != cols
    np.add.at(out, (cols[off], rows[off]), t[off])


def scatter_add(out, rows, cols, vals, scale):
    """out += scale * A for a single triplet matrix."""
    if len(vals) == 0:
        return
    t = scale * vals
    np.add.at(out, (rows, cols), t)
    off = rows != cols
    np.add.at(out, (cols[off], rows[off]), t[off])


def inner_into(B, rows, cols, vals, offs, idx, out, scale):
    """out[j] += scale * <A_j, B> for j in idx."""
    if len(vals) == 0 or len(idx) == 0:
        return
    w = np.where(rows != cols, 2.0, 1.0)
    t = vals * w * B[rows, cols]
    seg = _segment_sums(t, offs)
    out[idx] += scale * seg[idx]


def quad_into(V, lam, rows, cols, vals, offs, idx, out, scale):
    """out[j] += scale * sum_r lam[r] * V[r]' A_j V[r] for j in idx."""
    if len(vals) == 0 or len(idx) == 0 or len(lam) == 0:
        return
    w = np.where(rows != cols, 2.0, 1.0)
    g = lam @ (V[:, rows] * V[:, cols])
    t = vals * w * g
    seg = _segment_sums(t, offs)
    out[idx] += scale * seg[idx]


def m4_into(Bleft, Sinv, rows, cols, vals, offs, idx, out, scale):
    """out[j] += scale * <Bleft @ Sinv, A_j> for j in idx.

    The fallback forms the product once; the compiled kernel instead takes
    one dot product per stored entry.
    """
    if len(vals) == 0 or len(idx) == 0:
        return
    inner_into(Bleft @ Sinv, rows, cols, vals, offs, idx, out, scale)


def m5_into(Sinv, ri, ci, vi, rows, cols, vals, offs, idx, out, scale):
    """out[j] += scale * <Sinv A_i Sinv, A_j> for j in idx, with A_i given
    by the triplets (ri, ci, vi), without forming the sandwich product."""
    if len(vi) == 0 or len(idx) == 0:
        return
    neq_i = (ri != ci).astype(np.float64)
    for j in idx:
        lo, hi = offs[j], offs[j + 1]
        if lo == hi:
            continue
        rj, cj, vj = rows[lo:hi], cols[lo:hi], vals[lo:hi]
        wj = np.where(rj != cj, 2.0, 1.0)
        t1 = Sinv[np.ix_(rj, ri)] * Sinv[np.ix_(cj, ci)]
        t2 = Sinv[np.ix_(rj, ci)] * Sinv[np.ix_(cj, ri)]
        out[j] += scale * (vj * wj) @ (t1 + t2 * neq_i) @ vi
