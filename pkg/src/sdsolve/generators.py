"""Seeded benchmark instance generators.

Three families: max-cut relaxations (diagonal constraints, quarter-Laplacian
objective), graph partitioning relaxations (diagonal + all-ones constraints,
a second psd block for the scaled-partition inequality and a diagonal slack
block for elementwise nonnegativity), and optimal diagonal preconditioning
(two psd blocks, already in dual form).
"""

from __future__ import annotations

import numpy as np

from .model import CoeffMatrix, SdpProblem


class InvalidSize(ValueError):
    pass


def _random_graph_laplacian(n: int, edge_prob: float, rng) -> np.ndarray:
    adj = rng.random((n, n)) < edge_prob
    adj = np.triu(adj, 1)
    adj = adj + adj.T
    deg = adj.sum(axis=1)
    return np.diag(deg).astype(float) - adj.astype(float)


def gen_maxcut(n: int, edge_prob: float = 0.5, seed: int = 0) -> SdpProblem:
    """Max-cut relaxation: min <-L/4, X>, diag(X) = 1, X psd."""
    if n < 2:
        raise InvalidSize("max-cut needs n >= 2")
    rng = np.random.default_rng(seed)
    L = _random_graph_laplacian(n, edge_prob, rng)
    if not L.any():
        L[0, 0] = L[1, 1] = 1.0
        L[0, 1] = L[1, 0] = -1.0  # guarantee at least one edge
    C = [CoeffMatrix.from_triplets(n, *_dense_upper(-L / 4.0))]
    A = [[CoeffMatrix.from_triplets(n, [i], [i], [1.0])] for i in range(n)]
    b = np.ones(n)
    return SdpProblem([n], A, C, b, name=f"maxcut_n{n}_s{seed}")


def _dense_upper(M: np.ndarray):
    iu, ju = np.triu_indices(M.shape[0])
    v = M[iu, ju]
    keep = v != 0.0
    return iu[keep], ju[keep], v[keep]


def gen_gpp(n: int, k: int = 2, beta: float = 0.0, edge_prob: float = 0.5,
            seed: int = 0) -> SdpProblem:
    """Graph partitioning relaxation with the scaled-partition psd block and
    elementwise nonnegativity through a diagonal slack block.

    beta <= 0 selects a default strictly inside the feasible range of the
    all-ones constraint (the boundary value n^2/k leaves the primal without
    an interior).
    """
    if n < 3 or not 2 <= k < n:
        raise InvalidSize("gpp needs n >= 3 and 2 <= k < n")
    rng = np.random.default_rng(seed)
    L = _random_graph_laplacian(n, edge_prob, rng)
    n_off = n * (n - 1) // 2
    blocks = [n, n, -n_off]
    m = n + 1 + n * (n + 1) // 2 + n_off
    zero_row = [CoeffMatrix.zero(n), CoeffMatrix.zero(n), CoeffMatrix.zero(n_off)]
    A: list = []
    b = np.zeros(m)
    # diag(X) = 1
    for i in range(n):
        row = list(zero_row)
        row[0] = CoeffMatrix.from_triplets(n, [i], [i], [1.0])
        A.append(row)
        b[len(A) - 1] = 1.0
    # <11', X> = beta
    iu, ju = np.triu_indices(n)
    row = list(zero_row)
    row[0] = CoeffMatrix.from_triplets(n, iu, ju, np.ones(len(iu)))
    A.append(row)
    if beta <= 0.0:
        c_min = (n - k) / (k * (n - 1))
        c = min(0.95, 1.5 * c_min)
        beta = n + c * n * (n - 1)
    b[len(A) - 1] = beta
    # coupling k X_ij - Y_ij = 1 entrywise
    for i in range(n):
        for j in range(i, n):
            row = list(zero_row)
            if i == j:
                row[0] = CoeffMatrix.from_triplets(n, [i], [i], [float(k)])
                row[1] = CoeffMatrix.from_triplets(n, [i], [i], [-1.0])
            else:
                row[0] = CoeffMatrix.from_triplets(n, [i], [j], [k / 2.0])
                row[1] = CoeffMatrix.from_triplets(n, [i], [j], [-0.5])
            A.append(row)
            b[len(A) - 1] = 1.0
    # off-diagonal nonnegativity X_ij = slack_t >= 0
    t = 0
    for i in range(n):
        for j in range(i + 1, n):
            row = list(zero_row)
            row[0] = CoeffMatrix.from_triplets(n, [i], [j], [0.5])
            row[2] = CoeffMatrix.from_triplets(n_off, [t], [t], [-1.0])
            A.append(row)
            t += 1
    C = [CoeffMatrix.from_triplets(n, *_dense_upper(L / 4.0)),
         CoeffMatrix.zero(n), CoeffMatrix.zero(n_off)]
    return SdpProblem(blocks, A, C, b, name=f"gpp_n{n}_k{k}_s{seed}")


def gen_diagprecond(n: int, density: float = 0.2, seed: int = 0,
                    diagonal_b: bool = False) -> SdpProblem:
    """Optimal diagonal preconditioning of an SPD matrix B, in dual form:
    variables (d, t), maximize t subject to D <= B and t B <= D."""
    if n < 2:
        raise InvalidSize("diagprecond needs n >= 2")
    rng = np.random.default_rng(seed)
    if diagonal_b:
        B = np.diag(rng.uniform(0.5, 5.0, size=n))
    else:
        O = np.where(rng.random((n, n)) < density, rng.uniform(-1, 1, (n, n)), 0.0)
        O = np.triu(O, 1)
        O = O + O.T
        B = O + np.diag(np.abs(O).sum(axis=1) + rng.uniform(0.5, 1.5, size=n))
    m = n + 1
    A: list = []
    for i in range(n):
        A.append([CoeffMatrix.from_triplets(n, [i], [i], [1.0]),
                  CoeffMatrix.from_triplets(n, [i], [i], [-1.0])])
    A.append([CoeffMatrix.zero(n),
              CoeffMatrix.from_triplets(n, *_dense_upper(B))])
    C = [CoeffMatrix.from_triplets(n, *_dense_upper(B)), CoeffMatrix.zero(n)]
    b = np.zeros(m)
    b[n] = 1.0
    return SdpProblem([n, n], A, C, b, name=f"diagprecond_n{n}_s{seed}")


FAMILIES = {
    "maxcut": gen_maxcut,
    "gpp": gen_gpp,
    "diagprecond": gen_diagprecond,
}
