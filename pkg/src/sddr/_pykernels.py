"""Pure-Python/numpy implementations of the hot kernels.

Semantics are the reference for the compiled ``_ckernels`` module; both are
checked against each other in the test suite.
"""
import numpy as np


def os_cfar_1d(x, guard, train, k, scale):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.size
    out = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        lo = max(0, i - guard - train)
        hi = min(n, i + guard + train + 1)
        cells = np.concatenate((x[lo:max(lo, i - guard)], x[min(hi, i + guard + 1):hi]))
        kk = max(1, -(-k * cells.size // (2 * train)))
        kth = np.partition(cells, kk - 1)[kk - 1]
        out[i] = x[i] > scale * kth
    return out


def nearest(P, Q, chunk=2048):
    """Exact nearest neighbour in Q for every row of P: (distances, indices)."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    dist = np.empty(P.shape[0])
    idx = np.empty(P.shape[0], dtype=np.int64)
    for s in range(0, P.shape[0], chunk):
        block = P[s:s + chunk]
        d2 = ((block[:, None, :] - Q[None, :, :]) ** 2).sum(-1)
        j = np.argmin(d2, axis=1)
        idx[s:s + chunk] = j
        dist[s:s + chunk] = np.sqrt(d2[np.arange(block.shape[0]), j])
    return dist, idx


def assignment(cost):
    """Minimum-cost assignment of rows to distinct columns (rows <= columns).

    Shortest augmenting path with dual potentials, O(n^2 m).
    Returns the column chosen for each row.
    """
    C = np.asarray(cost, dtype=np.float64)
    n, m = C.shape
    if n > m:
        raise ValueError("assignment needs rows <= columns")
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # p[j] = row matched to column j (1-based, 0 = free)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = C[i0 - 1] - u[i0] - v[1:]
            upd = free & (cur < minv[1:])
            minv[1:][upd] = cur[upd]
            way[1:][upd] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    cols = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j]:
            cols[p[j] - 1] = j - 1
    return cols
