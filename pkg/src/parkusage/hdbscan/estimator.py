import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from ._distances import core_distances
from ._mst import build_hierarchy, build_mst
from ._tree import ClusterModel, ClusterParams, condense_tree, extract_clusters


class HDBSCAN(ClusterMixin, BaseEstimator):
    """Hierarchical density-based clustering of planar points.

    Core distances smooth the density estimate, the minimum spanning tree of
    the mutual-reachability graph gives the full single-linkage hierarchy,
    and the flat clustering is the most stable set of non-nested clusters in
    the condensed tree (excess of mass).

    Parameters
    ----------
    min_cluster_size : int, default=100
        Groups smaller than this never count as clusters.
    min_pts : int, default=15
        Neighbour count used for core distances (the point itself excluded).
    allow_single_cluster : bool, default=False
        Let the root of the hierarchy be selected, so data without any
        qualifying split can still form one cluster.
    single_cluster_outlier_factor : float, default=4.0
        When the root is selected, points falling out of it at more than this
        multiple of the median fall-out distance are noise.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        Cluster id per point, -1 for noise.
    cluster_stabilities_ : ndarray of shape (n_clusters,)
    core_distances_ : ndarray of shape (n_samples,)
    minimum_spanning_tree_ : SpanningTree
    single_linkage_tree_ : ndarray of shape (n_samples - 1, 4)
    condensed_tree_ : CondensedTree
    model_ : ClusterModel
    """

    def __init__(self, min_cluster_size=100, min_pts=15, allow_single_cluster=False,
                 single_cluster_outlier_factor=4.0):
        self.min_cluster_size = min_cluster_size
        self.min_pts = min_pts
        self.allow_single_cluster = allow_single_cluster
        self.single_cluster_outlier_factor = single_cluster_outlier_factor

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        params = ClusterParams(self.min_pts, self.min_cluster_size)
        n = len(X)
        self.n_features_in_ = X.shape[1]
        if n < params.min_cluster_size:
            # nothing can reach cluster mass; skip the hierarchy entirely
            self.core_distances_ = None
            self.minimum_spanning_tree_ = None
            self.single_linkage_tree_ = None
            self.condensed_tree_ = None
            self.model_ = ClusterModel(np.full(n, -1, dtype=np.int64), np.empty(0), params)
        else:
            cores = core_distances(X, params.min_pts)
            mst = build_mst(X, cores)
            dendro = build_hierarchy(mst, n)
            tree = condense_tree(dendro, params.min_cluster_size)
            self.core_distances_ = cores
            self.minimum_spanning_tree_ = mst
            self.single_linkage_tree_ = dendro
            self.condensed_tree_ = tree
            self.model_ = extract_clusters(
                tree, self.allow_single_cluster, self.single_cluster_outlier_factor, params)
        self.labels_ = self.model_.labels
        self.cluster_stabilities_ = self.model_.stabilities
        return self


def cluster(points, params=None, **kwargs):
    """Cluster ``(n, 2)`` projected points; returns a :class:`ClusterModel`."""
    params = params or ClusterParams()
    est = HDBSCAN(min_cluster_size=params.min_cluster_size, min_pts=params.min_pts, **kwargs)
    return est.fit(points).model_
