"""Brute-force references for testing.

Kept deliberately simple and independent of the production reduction: the
naive reducer rebuilds the boundary matrix from the simplex list and reduces
it left to right with no clearing and no shortcuts.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import CoverageError

NAIVE_MAX_SIMPLICES = 3000


class OracleTooLarge(CoverageError):
    pass


def boundary_columns(simplices):
    """Dense-in-spirit GF(2) boundary matrix: column j lists its facet rows, sorted."""
    pos = {tuple(s.vertices): i for i, s in enumerate(simplices)}
    cols = []
    for j, s in enumerate(simplices):
        verts = tuple(s.vertices)
        if len(verts) == 1:
            cols.append([])
            continue
        rows = sorted(pos[f] for f in combinations(verts, len(verts) - 1))
        assert all(r < j for r in rows), f"face after coface at {verts}"
        cols.append(rows)
    return cols


def naive_reduce(filtration, max_simplices=NAIVE_MAX_SIMPLICES):
    """All persistence pairs in dims 0 and 1 as ``(dim, birth, death, birth_verts, death_verts)``.

    ``death_verts`` is None for essential classes.
    """
    simplices = list(filtration.simplices)
    if len(simplices) > max_simplices:
        raise OracleTooLarge(f"{len(simplices)} simplices exceeds the oracle guard of {max_simplices}")
    R = [set(c) for c in boundary_columns(simplices)]
    low_owner = {}
    for j in range(len(R)):
        while R[j] and max(R[j]) in low_owner:
            R[j] = R[j] ^ R[low_owner[max(R[j])]]
        if R[j]:
            low_owner[max(R[j])] = j
    out = []
    for i, s in enumerate(simplices):
        dim = len(s.vertices) - 1
        if dim > 1 or R[i]:
            continue
        if i in low_owner:
            killer = simplices[low_owner[i]]
            out.append((dim, s.value, killer.value, tuple(s.vertices), tuple(killer.vertices)))
        else:
            out.append((dim, s.value, float("inf"), tuple(s.vertices), None))
    return out


def multiset(pairs, dim=None):
    return sorted((p[0], p[1], p[2]) for p in pairs if dim is None or p[0] == dim)


def enclosing_ball_radius(points):
    """Radius of the smallest ball containing 1-3 planar points (exhaustive over support sets)."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(P) == 1:
        return 0.0
    best = np.inf
    for size in (2, 3):
        for support in combinations(range(len(P)), size):
            ball = _ball_through(P[list(support)])
            if ball is None:
                continue
            center, radius = ball
            if np.all(np.linalg.norm(P - center, axis=1) <= radius * (1 + 1e-12) + 1e-12):
                best = min(best, radius)
    return float(best)


def _ball_through(S):
    if len(S) == 2:
        # half the chord, not |a - center|: avoids an extra rounding step
        center = (S[0] + S[1]) / 2.0
        return center, float(np.linalg.norm(S[0] - S[1])) / 2.0
    a, b, c = S
    ax, ay = b - a
    bx, by = c - a
    det = 2.0 * (ax * by - ay * bx)
    if abs(det) < 1e-15:
        return None
    ux = (by * (ax * ax + ay * ay) - ay * (bx * bx + by * by)) / det
    uy = (ax * (bx * bx + by * by) - bx * (ax * ax + ay * ay)) / det
    center = a + np.array([ux, uy])
    return center, float(np.hypot(ux, uy))


def cech_contains(points, eps, simplex):
    """Whether the closed eps-balls around the simplex's vertices share a point."""
    P = np.asarray(points, dtype=float)
    return enclosing_ball_radius(P[list(simplex)]) <= eps


def _perfect_matching(n_left, adjacency):
    graph = sp.csr_matrix(adjacency.astype(np.int8))
    match = maximum_bipartite_matching(graph, perm_type="column")
    return bool(np.all(match >= 0)) if n_left else True


def bottleneck(A, B):
    """Exact bottleneck distance between two diagrams of one dimension.

    ``A`` and ``B`` are iterables of ``(birth, death)``. Points may be matched
    to the diagonal at half their persistence. Essential points (infinite
    death) are matched among themselves by birth; differing counts give inf.
    """
    A = [(float(b), float(d)) for b, d in A]
    B = [(float(b), float(d)) for b, d in B]
    ea = sorted(b for b, d in A if d == np.inf)
    eb = sorted(b for b, d in B if d == np.inf)
    if len(ea) != len(eb):
        return float("inf")
    ess = max((abs(x - y) for x, y in zip(ea, eb)), default=0.0)
    fa = np.array([(b, d) for b, d in A if d != np.inf and d != b]).reshape(-1, 2)
    fb = np.array([(b, d) for b, d in B if d != np.inf and d != b]).reshape(-1, 2)
    na, nb = len(fa), len(fb)
    if na == 0 and nb == 0:
        return float(ess)
    cross = np.maximum(np.abs(fa[:, None, 0] - fb[None, :, 0]), np.abs(fa[:, None, 1] - fb[None, :, 1]))
    diag_a = (fa[:, 1] - fa[:, 0]) / 2.0
    diag_b = (fb[:, 1] - fb[:, 0]) / 2.0
    candidates = np.unique(np.concatenate([cross.ravel(), diag_a, diag_b, [0.0]]))

    size = na + nb
    # left: A points then B's diagonal copies; right: B points then A's diagonal copies
    def feasible(r):
        adj = np.zeros((size, size), dtype=bool)
        adj[:na, :nb] = cross <= r
        adj[np.arange(na), nb + np.arange(na)] = diag_a <= r
        adj[na + np.arange(nb), np.arange(nb)] = diag_b <= r
        adj[na:, nb:] = True
        return _perfect_matching(size, adj)

    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(max(candidates[lo], ess))
