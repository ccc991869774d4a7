"""Weighted Vietoris-Rips filtrations (simplices up to dimension 2).

A vertex enters at its weight. An edge enters once both endpoint balls have
grown enough to meet, i.e. at ``max((d + w_i + w_j) / 2, w_i, w_j)``, and a
triangle enters with its last edge. Entry is non-strict: each simplex carries
the smallest parameter at which it is present.

Simplices are totally ordered by (value, dimension, lexicographic vertices).
"""

from __future__ import annotations

from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import _engine
from .errors import ConfigurationError, FiltrationError, FiltrationTooLargeError

MAX_DIM = 2
DEFAULT_MAX_TRIANGLES = 5_000_000


class FilteredSimplex(NamedTuple):
    vertices: tuple
    value: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


def _sort_key(s: FilteredSimplex):
    return (s.value, len(s.vertices), s.vertices)


def vertex_value(w_i):
    return float(w_i)


def edge_value(d_ij, w_i, w_j):
    """Entry time of the edge between two weighted vertices; ``inf`` if ``d_ij`` is."""
    if d_ij == np.inf:
        return np.inf
    return max((d_ij + w_i + w_j) / 2.0, w_i, w_j)


def triangle_value(d, w, i, j, k):
    return max(edge_value(d[i, j], w[i], w[j]), edge_value(d[i, k], w[i], w[k]), edge_value(d[j, k], w[j], w[k]))


def edge_value_matrix(d, w):
    """All edge values; each computed once and mirrored so the matrix is exactly symmetric.

    The diagonal is ``inf`` (no self-loops).
    """
    d = np.asarray(d, dtype=float)
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    iu = np.triu_indices(n, 1)
    wi, wj = w[iu[0]], w[iu[1]]
    vals = np.maximum(np.maximum((d[iu] + wi + wj) / 2.0, wi), wj)
    vals[d[iu] == np.inf] = np.inf
    E = np.full((n, n), np.inf)
    E[iu] = vals
    E[(iu[1], iu[0])] = vals
    return E


def enclosing_radius(d, w):
    """``min_i max_j`` edge value over finite entries.

    For dimensions >= 1 nothing persists past this value unless some
    distances are infinite.
    """
    w = np.asarray(w, dtype=float)
    if w.shape[0] == 1:
        return vertex_value(w[0])
    E = edge_value_matrix(d, w)
    finite = np.where(np.isfinite(E), E, -np.inf)
    row_max = finite.max(axis=1)
    row_max = row_max[np.isfinite(row_max)]
    if row_max.size == 0:
        return float(w.max())
    return float(row_max.min())


class WeightedFiltration:
    """A filtered simplicial complex of dimension <= 2.

    Either a flag complex described by ``vertex_values`` and an edge-value
    matrix (triangles implied, materialized on demand), or an explicit list of
    simplices built with :meth:`from_simplices`.
    """

    def __init__(self, vertex_values, edge_values=None, threshold=np.inf, node_ids=None,
                 max_triangles=DEFAULT_MAX_TRIANGLES, simplices=None):
        self.vertex_values = np.asarray(vertex_values, dtype=float)
        self.threshold = float(threshold)
        self.max_triangles = max_triangles
        n = self.vertex_values.shape[0]
        self.node_ids = tuple(node_ids) if node_ids is not None else tuple(str(i) for i in range(n))
        if edge_values is not None:
            E = np.array(edge_values, dtype=float)
            E[E > self.threshold] = np.inf
            np.fill_diagonal(E, np.inf)
            self.edge_values = E
        else:
            self.edge_values = None
        if simplices is not None:
            self.__dict__["simplices"] = simplices

    @classmethod
    def from_simplices(cls, items, node_ids=None):
        """Explicit filtration from ``(vertices, value)`` pairs.

        Checks that every face is present and enters no later than its coface.
        """
        simplices = []
        for verts, value in items:
            verts = tuple(int(v) for v in verts)
            if list(verts) != sorted(set(verts)) or not 1 <= len(verts) <= MAX_DIM + 1:
                raise FiltrationError(f"invalid simplex {verts}")
            simplices.append(FilteredSimplex(verts, float(value)))
        entry = {}
        for s in simplices:
            if s.vertices in entry:
                raise FiltrationError(f"duplicate simplex {s.vertices}")
            entry[s.vertices] = s.value
        for s in simplices:
            for drop in range(len(s.vertices) if s.dim else 0):
                face = s.vertices[:drop] + s.vertices[drop + 1:]
                if face not in entry:
                    raise FiltrationError(f"simplex {s.vertices} is missing its face {face}")
                if entry[face] > s.value:
                    raise FiltrationError(
                        f"non-monotone filtration: simplex {s.vertices} at {s.value} "
                        f"enters before its face {face} at {entry[face]}"
                    )
        simplices.sort(key=_sort_key)
        verts = [s for s in simplices if s.dim == 0]
        n = max((s.vertices[0] for s in verts), default=-1) + 1
        values = np.full(n, np.nan)
        for s in verts:
            values[s.vertices[0]] = s.value
        if np.isnan(values).any():
            raise FiltrationError("vertex indices must be contiguous from 0")
        return cls(values, node_ids=node_ids, simplices=simplices)

    @property
    def n(self) -> int:
        return self.vertex_values.shape[0]

    @property
    def is_flag(self) -> bool:
        return self.edge_values is not None

    def sorted_edges(self):
        """Edges as arrays ``(a, b, value)`` in filtration order."""
        if self.is_flag:
            iu, ju = np.triu_indices(self.n, 1)
            v = self.edge_values[iu, ju]
            keep = np.isfinite(v)
            iu, ju, v = iu[keep], ju[keep], v[keep]
            order = np.lexsort((ju, iu, v))
            return iu[order].astype(np.int64), ju[order].astype(np.int64), v[order]
        edges = [s for s in self.simplices if s.dim == 1]
        a = np.array([s.vertices[0] for s in edges], dtype=np.int64)
        b = np.array([s.vertices[1] for s in edges], dtype=np.int64)
        v = np.array([s.value for s in edges], dtype=float)
        return a, b, v

    def vertex_order(self):
        """Vertex indices sorted by (value, index)."""
        return np.lexsort((np.arange(self.n), self.vertex_values))

    def triangle_count(self) -> int:
        if not self.is_flag:
            return sum(1 for s in self.simplices if s.dim == 2)
        return int(_engine.count_triangles(self.edge_values, self.threshold))

    @cached_property
    def simplices(self):
        """All simplices in filtration order (materializes triangles of a flag complex)."""
        count = self.triangle_count()
        if count > self.max_triangles:
            raise FiltrationTooLargeError(
                f"filtration has {count} triangles, above the cap of {self.max_triangles}; "
                "lower the truncation or raise max_triangles"
            )
        out = [FilteredSimplex((i,), float(v)) for i, v in enumerate(self.vertex_values)]
        a, b, v = self.sorted_edges()
        out.extend(FilteredSimplex((int(x), int(y)), float(z)) for x, y, z in zip(a, b, v))
        E = self.edge_values
        n = self.n
        for i in range(n):
            for j in range(i + 1, n):
                eij = E[i, j]
                if eij == np.inf:
                    continue
                ks = np.arange(j + 1, n)
                tv = np.maximum(np.maximum(E[i, ks], E[j, ks]), eij)
                ok = np.isfinite(tv)
                out.extend(FilteredSimplex((i, j, int(k)), float(t)) for k, t in zip(ks[ok], tv[ok]))
        out.sort(key=_sort_key)
        return out

    def __iter__(self):
        return iter(self.simplices)

    def __len__(self):
        return len(self.simplices)


def resolve_truncation(d, w, truncation="auto", has_infinite=False):
    """Turn a truncation setting (``"auto"``, ``"none"``/None, or minutes) into a threshold."""
    if truncation is None or truncation == "none":
        return np.inf
    if truncation == "auto":
        # the cone argument behind the enclosing radius fails with inf distances
        return np.inf if has_infinite else enclosing_radius(d, w)
    try:
        value = float(truncation)
    except (TypeError, ValueError):
        raise ConfigurationError(f"truncation must be 'auto', 'none' or minutes, got {truncation!r}")
    if value <= 0:
        raise ConfigurationError(f"truncation must be positive, got {value}")
    return value


def build_filtration(model, max_dim=MAX_DIM, truncation="auto", max_triangles=DEFAULT_MAX_TRIANGLES):
    """Weighted Rips filtration of a :class:`~coverage_ph.distance_model.DistanceModel`.

    All vertices are kept; edges and triangles above the truncation value are
    dropped. ``inf`` distances never produce an edge.
    """
    if max_dim != MAX_DIM:
        raise ConfigurationError("only max_dim=2 is supported")
    has_inf = bool(np.isinf(model.d[~np.eye(model.n, dtype=bool)]).any()) if model.n > 1 else False
    threshold = resolve_truncation(model.d, model.w, truncation, has_inf)
    return WeightedFiltration(
        model.w,
        edge_value_matrix(model.d, model.w),
        threshold=threshold,
        node_ids=model.node_ids,
        max_triangles=max_triangles,
    )


def rips_filtration(d, w, truncation="none", node_ids=None, max_triangles=DEFAULT_MAX_TRIANGLES):
    """Filtration straight from a dissimilarity matrix and weights (no model needed)."""
    d = np.asarray(d, dtype=float)
    w = np.asarray(w, dtype=float)
    has_inf = bool(np.isinf(d[~np.eye(len(w), dtype=bool)]).any()) if len(w) > 1 else False
    threshold = resolve_truncation(d, w, truncation, has_inf)
    return WeightedFiltration(w, edge_value_matrix(d, w), threshold=threshold, node_ids=node_ids,
                              max_triangles=max_triangles)
