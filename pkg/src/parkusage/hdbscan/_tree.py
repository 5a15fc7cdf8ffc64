from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError


@dataclass(frozen=True)
class ClusterParams:
    """Clustering parameters.

    min_pts
        Neighbour count for core distances (density smoothing).
    min_cluster_size
        Smallest group of points the condensed tree treats as a cluster.
    """

    min_pts: int = 15
    min_cluster_size: int = 100

    def __post_init__(self):
        if int(self.min_pts) != self.min_pts or self.min_pts < 1:
            raise ConfigError(f"min_pts must be an integer >= 1, got {self.min_pts}")
        if int(self.min_cluster_size) != self.min_cluster_size or self.min_cluster_size < 2:
            raise ConfigError(
                f"min_cluster_size must be an integer >= 2, got {self.min_cluster_size}")


@dataclass(frozen=True)
class CondensedTree:
    """Cluster hierarchy after pruning splits smaller than ``min_cluster_size``.

    One row per edge: ``parent`` is a cluster id (``>= n_points``, root is
    ``n_points``), ``child`` a cluster id or a point index, ``lambda_val`` the
    ``1/distance`` level at which the child leaves the parent and
    ``child_size`` the number of points carried by the child.
    """

    parent: np.ndarray
    child: np.ndarray
    lambda_val: np.ndarray
    child_size: np.ndarray
    n_points: int
    min_cluster_size: int
    root_lambda: float

    @property
    def root(self):
        return self.n_points

    def cluster_ids(self):
        ids = np.unique(self.child[self.child >= self.n_points])
        return np.concatenate([[self.root], ids]).astype(np.int64)

    def birth_lambdas(self):
        birth = {self.root: self.root_lambda}
        is_cluster = self.child >= self.n_points
        for c, lam in zip(self.child[is_cluster], self.lambda_val[is_cluster]):
            birth[int(c)] = float(lam)
        return birth


@dataclass(frozen=True)
class ClusterModel:
    """Flat clustering: ``labels[i]`` is -1 (noise) or a cluster id in ``[0, K)``."""

    labels: np.ndarray
    stabilities: np.ndarray
    params: ClusterParams = field(default_factory=ClusterParams)

    @property
    def n_clusters(self):
        return len(self.stabilities)


def _leaves(dendro, node, n):
    out = []
    stack = [node]
    while stack:
        v = stack.pop()
        if v < n:
            out.append(v)
        else:
            row = dendro[v - n]
            stack.append(int(row[1]))
            stack.append(int(row[0]))
    return out


def condense_tree(dendrogram, min_cluster_size):
    """Condense a single-linkage merge list.

    Walking down from the root, a split only creates two new clusters when
    both sides hold at least ``min_cluster_size`` points.  Otherwise the
    points of each undersized side leave the parent at ``lambda = 1/distance``
    and the larger side, if big enough, continues as the parent cluster.

    Zero merge distances (exact duplicates) get the largest finite lambda in
    the tree so that stabilities stay finite.
    """
    if min_cluster_size < 2:
        raise ConfigError("min_cluster_size must be at least 2")
    dendro = np.asarray(dendrogram, dtype=np.float64).reshape(-1, 4)
    n = len(dendro) + 1
    dist = dendro[:, 2]
    positive = dist[dist > 0]
    lam_cap = 1.0 / positive.min() if len(positive) else 1.0
    with np.errstate(divide="ignore"):
        lam = np.where(dist > 0, 1.0 / np.where(dist > 0, dist, 1.0), lam_cap)
    root_lambda = float(lam[-1]) if len(lam) else lam_cap

    def size(v):
        return 1 if v < n else int(dendro[v - n, 3])

    parents, children, lams, sizes = [], [], [], []
    if n == 1:
        parents.append(1)
        children.append(0)
        lams.append(root_lambda)
        sizes.append(1)
    else:
        relabel = {2 * n - 2: n}
        next_label = n + 1
        # (dendrogram node, condensed cluster id) pairs still to expand
        todo = [(2 * n - 2, n)]
        while todo:
            node, cid = todo.pop()
            left, right = int(dendro[node - n, 0]), int(dendro[node - n, 1])
            lam_here = float(lam[node - n])
            ls, rs = size(left), size(right)
            big_l, big_r = ls >= min_cluster_size, rs >= min_cluster_size
            if big_l and big_r:
                for side, sz in ((left, ls), (right, rs)):
                    relabel[side] = next_label
                    parents.append(cid)
                    children.append(next_label)
                    lams.append(lam_here)
                    sizes.append(sz)
                    todo.append((side, next_label))
                    next_label += 1
                continue
            for side, big in ((left, big_l), (right, big_r)):
                if big:
                    todo.append((side, cid))
                else:
                    for p in _leaves(dendro, side, n):
                        parents.append(cid)
                        children.append(p)
                        lams.append(lam_here)
                        sizes.append(1)
    return CondensedTree(
        parent=np.asarray(parents, dtype=np.int64),
        child=np.asarray(children, dtype=np.int64),
        lambda_val=np.asarray(lams, dtype=np.float64),
        child_size=np.asarray(sizes, dtype=np.int64),
        n_points=n,
        min_cluster_size=int(min_cluster_size),
        root_lambda=root_lambda,
    )


def cluster_stabilities(tree):
    """Excess of mass of every condensed cluster: sum of ``(lambda - birth) * size``."""
    birth = tree.birth_lambdas()
    stab = {c: 0.0 for c in birth}
    for p, lam, sz in zip(tree.parent, tree.lambda_val, tree.child_size):
        stab[int(p)] += (lam - birth[int(p)]) * sz
    return stab


def extract_clusters(tree, allow_single_cluster=False, outlier_factor=4.0, params=None):
    """Pick the flat clustering with maximal total stability.

    A cluster is kept when its own stability is at least the best total its
    descendants can offer (ties go to the smaller id, the ancestor).  The
    root is a candidate only with ``allow_single_cluster``; when it wins, the
    points that fall out of it at a distance above ``outlier_factor`` times
    the median fall-out distance are labelled noise.

    Labels are assigned by decreasing cluster size, ties going to the cluster
    holding the smallest point index.
    """
    n = tree.n_points
    root = tree.root
    stab = cluster_stabilities(tree)
    is_cl = tree.child >= n
    kids = {c: [] for c in stab}
    up = {}
    for p, c in zip(tree.parent[is_cl], tree.child[is_cl]):
        kids[int(p)].append(int(c))
        up[int(c)] = int(p)

    selected = {}
    best = {}
    for c in sorted(stab, reverse=True):  # children always carry larger ids
        if c == root and not (allow_single_cluster and n >= tree.min_cluster_size):
            continue
        if not kids[c]:
            selected[c] = True
            best[c] = stab[c]
            continue
        below = sum(best[k] for k in kids[c])
        if stab[c] >= below:
            selected[c] = True
            best[c] = stab[c]
            stack = list(kids[c])
            while stack:
                d = stack.pop()
                selected[d] = False
                stack.extend(kids[d])
        else:
            selected[c] = False
            best[c] = below
    chosen = sorted(c for c, s in selected.items() if s)

    # point -> condensed cluster it finally leaves
    is_pt = ~is_cl
    home = np.full(n, -1, dtype=np.int64)
    home[tree.child[is_pt]] = tree.parent[is_pt]
    point_lambda = np.zeros(n)
    point_lambda[tree.child[is_pt]] = tree.lambda_val[is_pt]

    owner = {}
    for c in chosen:
        stack = [c]
        while stack:
            d = stack.pop()
            owner[d] = c
            stack.extend(kids[d])
    raw = np.array([owner.get(int(h), -1) for h in home], dtype=np.int64)

    if root in owner and len(chosen) == 1 and chosen[0] == root:
        fall_dist = 1.0 / point_lambda
        cut = outlier_factor * np.median(fall_dist)
        raw[fall_dist > cut] = -1
        if (raw >= 0).sum() < tree.min_cluster_size:
            raw[:] = -1
            chosen = []

    members = {}
    for i, c in enumerate(raw):
        if c >= 0:
            members.setdefault(int(c), []).append(i)
    ordered = sorted(members, key=lambda c: (-len(members[c]), members[c][0]))
    relabel = {c: k for k, c in enumerate(ordered)}
    labels = np.array([relabel.get(int(c), -1) for c in raw], dtype=np.int64)
    stabilities = np.array([stab[c] for c in ordered], dtype=np.float64)
    return ClusterModel(labels, stabilities,
                        params if params is not None else
                        ClusterParams(min_cluster_size=tree.min_cluster_size))
