"""Hierarchical density-based clustering (HDBSCAN*) for projected GPS points."""

from ._distances import core_distances, mutual_reachability
from ._mst import SpanningTree, build_hierarchy, build_mst
from ._tree import (
    ClusterModel,
    ClusterParams,
    CondensedTree,
    cluster_stabilities,
    condense_tree,
    extract_clusters,
)
from .estimator import HDBSCAN, cluster

__all__ = [
    "HDBSCAN",
    "ClusterModel",
    "ClusterParams",
    "CondensedTree",
    "SpanningTree",
    "build_hierarchy",
    "build_mst",
    "cluster",
    "cluster_stabilities",
    "condense_tree",
    "core_distances",
    "extract_clusters",
    "mutual_reachability",
]
