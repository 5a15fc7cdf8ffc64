import numpy as np
from scipy.spatial import cKDTree

from ..exceptions import ParameterError


def _as_points(points):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("points must have finite coordinates")
    return pts


def core_distances(points, k):
    """Distance from every point to its ``k``-th nearest other point.

    Neighbours come from an exact k-d tree query; the returned distances are
    recomputed as ``sqrt(dx**2 + dy**2)`` so they agree bit for bit with the
    distances used when building the spanning tree.
    """
    pts = _as_points(points)
    n = len(pts)
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    if k > n - 1:
        raise ParameterError(f"k={k} needs more than {n} points")
    # the point itself is among the k+1 nearest at distance 0, so the k-th
    # other neighbour is the (k+1)-th smallest distance overall
    _, idx = cKDTree(pts).query(pts, k=k + 1)
    diff = pts[idx] - pts[:, None, :]
    d = np.sqrt(diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1])
    d.sort(axis=1)
    return d[:, k].copy()


def euclidean(points, a, b):
    dx = points[a, 0] - points[b, 0]
    dy = points[a, 1] - points[b, 1]
    return np.sqrt(dx * dx + dy * dy)


def mutual_reachability(points, a, b, cores):
    """``max(core[a], core[b], |a - b|)``; ``a``, ``b`` may be index arrays."""
    pts = np.asarray(points, dtype=np.float64)
    cores = np.asarray(cores, dtype=np.float64)
    d = euclidean(pts, a, b)
    out = np.maximum(np.maximum(cores[a], cores[b]), d)
    if np.ndim(out) == 0:
        return float(out)
    return out
