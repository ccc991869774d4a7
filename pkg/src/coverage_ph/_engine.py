"""Compiled kernels for flag-complex persistence.

Dimension 0 is computed by union-find over the sorted edge list. Dimension 1
is computed by reducing the coboundary matrix implicitly (columns = edges in
reverse filtration order, rows = triangles), with the dimension-0 death edges
cleared beforehand. Triangles are never materialized; cofacets of an edge are
enumerated on the fly from the edge-value matrix.

Simplex order everywhere is (value, lexicographic vertex tuple). An edge
``(a, b)`` with ``a < b`` is encoded as ``a * n + b`` and a triangle
``(i, j, k)`` as ``(i * n + j) * n + k``, so integer order on codes is the
lexicographic tie-break.
"""

from __future__ import annotations

import heapq

import numpy as np
from numba import njit, types
from numba.typed import Dict

_INT64_ARRAY = types.int64[:]


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def union_find_h0(vertex_rank, edge_a, edge_b):
    """Elder-rule merges over edges given in filtration order.

    Returns (dying_vertex, killing_edge_index, is_death_edge). ``vertex_rank``
    is the position of each vertex in the vertex order.
    """
    n = vertex_rank.shape[0]
    m = edge_a.shape[0]
    parent = np.arange(n)
    oldest = np.arange(n)
    dying = np.empty(n, dtype=np.int64)
    killer = np.empty(n, dtype=np.int64)
    is_death = np.zeros(m, dtype=np.bool_)
    npairs = 0
    for e in range(m):
        ra = _find(parent, edge_a[e])
        rb = _find(parent, edge_b[e])
        if ra == rb:
            continue
        oa = oldest[ra]
        ob = oldest[rb]
        if vertex_rank[oa] < vertex_rank[ob]:
            dying[npairs] = ob
            parent[rb] = ra
        else:
            dying[npairs] = oa
            parent[ra] = rb
            oldest[rb] = ob
        killer[npairs] = e
        is_death[e] = True
        npairs += 1
    return dying[:npairs], killer[:npairs], is_death


@njit(cache=True)
def _tri_code(a, b, k, n):
    # a < b always; place k
    if k < a:
        return (k * n + a) * n + b
    if k < b:
        return (a * n + k) * n + b
    return (a * n + b) * n + k


@njit(cache=True)
def _min_cofacet(E, a, b, ev, n):
    best_v = np.inf
    best_c = -1
    for k in range(n):
        if k == a or k == b:
            continue
        v = E[a, k]
        w = E[b, k]
        if w > v:
            v = w
        if ev > v:
            v = ev
        if v == np.inf:
            continue
        if v < best_v:
            best_v = v
            best_c = _tri_code(a, b, k, n)
        elif v == best_v:
            c = _tri_code(a, b, k, n)
            if c < best_c:
                best_c = c
    return best_v, best_c


@njit(cache=True)
def _push_coboundary(heap, E, a, b, ev, n):
    for k in range(n):
        if k == a or k == b:
            continue
        v = E[a, k]
        w = E[b, k]
        if w > v:
            v = w
        if ev > v:
            v = ev
        if v == np.inf:
            continue
        heapq.heappush(heap, (v, _tri_code(a, b, k, n)))


@njit(cache=True)
def _pop_pivot(heap):
    while len(heap) > 0:
        top = heapq.heappop(heap)
        if len(heap) > 0 and heap[0][1] == top[1]:
            heapq.heappop(heap)
        else:
            return top
    return (np.inf, np.int64(-1))


@njit(cache=True)
def _odd_entries(codes):
    codes = np.sort(codes)
    out = np.empty(codes.shape[0], dtype=np.int64)
    cnt = 0
    i = 0
    while i < codes.shape[0]:
        j = i
        while j < codes.shape[0] and codes[j] == codes[i]:
            j += 1
        if (j - i) % 2 == 1:
            out[cnt] = codes[i]
            cnt += 1
        i = j
    return out[:cnt]


@njit(cache=True)
def cohomology_h1(E, edge_a, edge_b, edge_v, is_death):
    """Pair dimension-1 classes by implicit coboundary reduction.

    ``E`` is the symmetric edge-value matrix with ``inf`` for every edge that
    is not in the filtration. Returns (birth_edge_index, death_code,
    death_value, essential_edge_indices). Death codes are triangle codes.
    """
    n = E.shape[0]
    m = edge_a.shape[0]
    pivots = Dict.empty(key_type=types.int64, value_type=types.int64)
    reductions = Dict.empty(key_type=types.int64, value_type=_INT64_ARRAY)
    birth = np.empty(m, dtype=np.int64)
    dcode = np.empty(m, dtype=np.int64)
    dval = np.empty(m, dtype=np.float64)
    essential = np.empty(m, dtype=np.int64)
    npairs = 0
    ness = 0
    for e in range(m - 1, -1, -1):
        if is_death[e]:
            continue
        a = edge_a[e]
        b = edge_b[e]
        ev = edge_v[e]
        tv, tc = _min_cofacet(E, a, b, ev, n)
        if tc < 0:
            essential[ness] = e
            ness += 1
            continue
        if tc not in pivots:
            pivots[tc] = e
            birth[npairs] = e
            dcode[npairs] = tc
            dval[npairs] = tv
            npairs += 1
            continue
        # full reduction of this column
        heap = [(tv, tc)]
        heap.pop()
        _push_coboundary(heap, E, a, b, ev, n)
        added = [e]
        while True:
            pv, pc = _pop_pivot(heap)
            if pc < 0:
                essential[ness] = e
                ness += 1
                break
            if pc in pivots:
                heapq.heappush(heap, (pv, pc))
                other = pivots[pc]
                if other in reductions:
                    cols = reductions[other]
                else:
                    cols = np.array([other], dtype=np.int64)
                for f in cols:
                    added.append(f)
                    _push_coboundary(heap, E, edge_a[f], edge_b[f], edge_v[f], n)
            else:
                pivots[pc] = e
                if len(added) > 1:
                    reductions[e] = _odd_entries(np.array(added, dtype=np.int64))
                birth[npairs] = e
                dcode[npairs] = pc
                dval[npairs] = pv
                npairs += 1
                break
    return birth[:npairs], dcode[:npairs], dval[:npairs], essential[:ness]


@njit(cache=True)
def count_triangles(E, threshold):
    """Number of triangles whose three edges all have value <= threshold."""
    n = E.shape[0]
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            if E[i, j] > threshold:
                continue
            for k in range(j + 1, n):
                if E[i, k] <= threshold and E[j, k] <= threshold:
                    total += 1
    return total
