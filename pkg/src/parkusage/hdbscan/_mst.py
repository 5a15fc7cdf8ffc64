from typing import NamedTuple

import numba
import numpy as np

from ._distances import _as_points


class SpanningTree(NamedTuple):
    """Minimum spanning tree as parallel arrays, sorted by ``weight``.

    Edge ``i`` joins points ``a[i] < b[i]`` at mutual-reachability ``weight[i]``.
    """

    a: np.ndarray
    b: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.weight)

    @property
    def total_weight(self):
        return float(self.weight.sum())


@numba.njit(cache=True)
def _prim(x, y, core_sq):
    # Dense Prim over the implicit complete graph.  Distances stay squared
    # until the end; sqrt is monotone so the tree is unchanged.
    n = x.shape[0]
    remaining = np.arange(1, n)
    best = np.full(n, np.inf)
    src = np.zeros(n, np.int64)
    out_a = np.empty(n - 1, np.int64)
    out_b = np.empty(n - 1, np.int64)
    out_w = np.empty(n - 1, np.float64)
    cur = 0
    m = n - 1
    for it in range(n - 1):
        cx = x[cur]
        cy = y[cur]
        cc = core_sq[cur]
        bi = -1
        bw = np.inf
        bj = n
        for r in range(m):
            j = remaining[r]
            dx = x[j] - cx
            dy = y[j] - cy
            d = dx * dx + dy * dy
            if core_sq[j] > d:
                d = core_sq[j]
            if cc > d:
                d = cc
            b = best[j]
            if d < b or (d == b and cur < src[j]):
                best[j] = d
                src[j] = cur
                b = d
            if b < bw or (b == bw and j < bj):
                bw = b
                bi = r
                bj = j
        out_a[it] = min(src[bj], bj)
        out_b[it] = max(src[bj], bj)
        out_w[it] = np.sqrt(bw)
        remaining[bi] = remaining[m - 1]
        m -= 1
        cur = bj
    return out_a, out_b, out_w


def build_mst(points, cores):
    """Minimum spanning tree of the complete mutual-reachability graph.

    Exact O(n^2) Prim; ties prefer the smaller point index.  Edges are
    returned in nondecreasing weight order (ties by endpoint indices).
    """
    pts = _as_points(points)
    cores = np.ascontiguousarray(cores, dtype=np.float64)
    n = len(pts)
    if n < 2:
        raise ValueError("a spanning tree needs at least 2 points")
    if cores.shape != (n,):
        raise ValueError("cores must hold one value per point")
    a, b, w = _prim(pts[:, 0].copy(), pts[:, 1].copy(), cores * cores)
    order = np.lexsort((b, a, w))
    return SpanningTree(a[order], b[order], w[order])


def build_hierarchy(mst, n_points=None):
    """Single-linkage merge list from a weight-sorted spanning tree.

    Returns an ``(n - 1, 4)`` array in SciPy linkage layout: the two merged
    component ids, the merge distance and the merged size.  Component ids
    below ``n`` are points; row ``i`` creates component ``n + i``.
    """
    a, b, w = (np.asarray(v) for v in mst)
    n = len(w) + 1 if n_points is None else n_points
    if len(w) != n - 1:
        raise RuntimeError(f"{len(w)} edges cannot span {n} points")
    if len(w) and np.any(np.diff(w) < 0):
        raise ValueError("spanning tree edges must be sorted by weight")

    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)
    out = np.empty((n - 1, 4))

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for i in range(n - 1):
        ra, rb = find(int(a[i])), find(int(b[i]))
        if ra == rb:
            raise RuntimeError("spanning tree contains a cycle")
        new = n + i
        parent[ra] = parent[rb] = new
        size[new] = size[ra] + size[rb]
        out[i] = (ra, rb, w[i], size[new])
    return out
