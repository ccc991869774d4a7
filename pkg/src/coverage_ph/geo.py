"""Great-circle geometry and geographic nearest-neighbour graphs."""

from __future__ import annotations

import numpy as np

EARTH_RADIUS_M = 6371008.8


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters (broadcasts over arrays)."""
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = (
        np.sin((lat2 - lat1) / 2.0) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def pairwise_haversine_m(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    dist = haversine_m(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    # exact symmetry and zero diagonal
    dist = np.triu(dist, 1)
    return dist + dist.T


def knn_edges(lat, lon, k):
    """Undirected edge set of the k-nearest-neighbour graph.

    Each vertex is joined to its ``k`` geographically closest vertices (ties
    broken by index); the edge set is the union over all vertices, so some
    degrees exceed ``k``. Returns a sorted list of ``(i, j)`` with ``i < j``.
    """
    n = len(lat)
    if n < 2 or k <= 0:
        return []
    k = min(k, n - 1)
    dist = pairwise_haversine_m(lat, lon)
    np.fill_diagonal(dist, np.inf)
    idx = np.arange(n)
    edges = set()
    for i in range(n):
        order = np.lexsort((idx, dist[i]))[:k]
        for j in order:
            j = int(j)
            edges.add((min(i, j), max(i, j)))
    return sorted(edges)
