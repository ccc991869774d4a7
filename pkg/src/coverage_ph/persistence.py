"""Persistent homology in dimensions 0 and 1 over GF(2).

Two reduction routes produce identical pairings:

* ``"twist"``: explicit boundary-matrix column reduction with clearing,
  dimension 2 first. Works for any filtration, materializes every simplex.
* ``"cohomology"``: implicit coboundary reduction of a flag complex (union-find
  for dimension 0, death edges cleared before dimension 1). Triangles are
  enumerated on the fly, which is what makes city-sized inputs tractable.

Pairs of zero persistence are kept and flagged; reporting code filters them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _engine
from .errors import CoverageError, FiltrationError
from .filtration import WeightedFiltration

_PAD = -1


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float
    birth_simplex: tuple
    death_simplex: tuple | None
    region: str = ""

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def is_essential(self) -> bool:
        return self.death_simplex is None

    @property
    def is_zero(self) -> bool:
        return self.death == self.birth


def _pad(simplices, width=3):
    arr = np.full((len(simplices), width), _PAD, dtype=np.int64)
    for row, s in enumerate(simplices):
        if s is not None:
            arr[row, : len(s)] = s
    return arr


def _unpad(row):
    verts = tuple(int(v) for v in row if v != _PAD)
    return verts or None


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """Array-backed multiset of persistence pairs.

    ``region`` indexes into ``regions``; simplex vertex indices refer to
    ``node_ids[region]``. Essential pairs have ``death = inf`` and a death
    simplex row of ``-1``.
    """

    dim: np.ndarray
    birth: np.ndarray
    death: np.ndarray
    birth_simplex: np.ndarray
    death_simplex: np.ndarray
    region: np.ndarray
    regions: tuple = ("",)
    node_ids: tuple = ((),)

    @classmethod
    def empty(cls, label="", node_ids=()):
        z = np.zeros(0)
        return cls(z.astype(np.int64), z, z, _pad([]), _pad([]), z.astype(np.int64), (label,), (tuple(node_ids),))

    @classmethod
    def from_pairs(cls, pairs, label="", node_ids=()):
        pairs = list(pairs)
        return cls(
            dim=np.array([p.dim for p in pairs], dtype=np.int64),
            birth=np.array([p.birth for p in pairs], dtype=float),
            death=np.array([p.death for p in pairs], dtype=float),
            birth_simplex=_pad([p.birth_simplex for p in pairs]),
            death_simplex=_pad([p.death_simplex for p in pairs]),
            region=np.zeros(len(pairs), dtype=np.int64),
            regions=(label,),
            node_ids=(tuple(node_ids),),
        )

    def __len__(self):
        return int(self.dim.shape[0])

    def mask(self, dim=None, include_zero=False, finite=None):
        m = np.ones(len(self), dtype=bool)
        if dim is not None:
            m &= self.dim == dim
        if not include_zero:
            m &= self.death != self.birth
        if finite is True:
            m &= np.isfinite(self.death)
        elif finite is False:
            m &= ~np.isfinite(self.death)
        return m

    def pairs(self, dim=None, include_zero=False):
        idx = np.flatnonzero(self.mask(dim, include_zero))
        return [self._pair(int(i)) for i in idx]

    def _pair(self, i):
        return PersistencePair(
            dim=int(self.dim[i]),
            birth=float(self.birth[i]),
            death=float(self.death[i]),
            birth_simplex=_unpad(self.birth_simplex[i]),
            death_simplex=_unpad(self.death_simplex[i]),
            region=self.regions[int(self.region[i])],
        )

    def deaths(self, dim, include_zero=False):
        """Finite death values of one dimension."""
        return self.death[self.mask(dim, include_zero, finite=True)]

    def essential_count(self, dim):
        return int(self.mask(dim, include_zero=True, finite=False).sum())

    def zero_count(self, dim=None):
        m = self.death == self.birth
        if dim is not None:
            m &= self.dim == dim
        return int(m.sum())

    def simplex_ids(self, pair_index, which="death"):
        """Node ids of a pair's birth or death simplex."""
        rows = self.death_simplex if which == "death" else self.birth_simplex
        verts = _unpad(rows[pair_index])
        if verts is None:
            return ()
        ids = self.node_ids[int(self.region[pair_index])]
        return tuple(ids[v] for v in verts)

    def multiset(self, dim=None, include_zero=True):
        """Sorted ``(dim, birth, death)`` triples, for exact comparisons."""
        m = self.mask(dim, include_zero)
        return sorted(zip(self.dim[m].tolist(), self.birth[m].tolist(), self.death[m].tolist()))

    def select(self, mask):
        return PersistenceDiagram(
            self.dim[mask], self.birth[mask], self.death[mask], self.birth_simplex[mask],
            self.death_simplex[mask], self.region[mask], self.regions, self.node_ids,
        )

    def relabel(self, label, node_ids=None):
        if len(self.regions) != 1:
            raise CoverageError("only single-region diagrams can be relabelled")
        ids = self.node_ids if node_ids is None else (tuple(node_ids),)
        return PersistenceDiagram(
            self.dim, self.birth, self.death, self.birth_simplex, self.death_simplex,
            self.region, (label,), ids,
        )


def _assemble(dims, births, deaths, bsimp, dsimp, label, node_ids):
    dims = np.asarray(dims, dtype=np.int64)
    births = np.asarray(births, dtype=float)
    deaths = np.asarray(deaths, dtype=float)
    # deterministic pair order: dim, birth, death, then simplices
    keys = [dsimp[:, c] for c in (2, 1, 0)] + [bsimp[:, c] for c in (2, 1, 0)] + [deaths, births, dims]
    order = np.lexsort(keys) if len(dims) else np.zeros(0, dtype=np.int64)
    return PersistenceDiagram(
        dims[order], births[order], deaths[order], bsimp[order], dsimp[order],
        np.zeros(len(dims), dtype=np.int64), (label,), (tuple(node_ids),),
    )


def connected_components_0d(filtration: WeightedFiltration, label=""):
    """Dimension-0 pairs by union-find (elder rule, ties to the lower-ranked vertex)."""
    order = filtration.vertex_order()
    rank = np.empty(filtration.n, dtype=np.int64)
    rank[order] = np.arange(filtration.n)
    parent = list(range(filtration.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    oldest = list(range(filtration.n))
    vv = filtration.vertex_values
    dims, births, deaths, bs, ds = [], [], [], [], []
    a_arr, b_arr, v_arr = filtration.sorted_edges()
    for a, b, v in zip(a_arr.tolist(), b_arr.tolist(), v_arr.tolist()):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if rank[oldest[ra]] > rank[oldest[rb]]:
            ra, rb = rb, ra
        young = oldest[rb]
        parent[rb] = ra
        dims.append(0)
        births.append(vv[young])
        deaths.append(v)
        bs.append((young,))
        ds.append((a, b))
    for r in sorted({find(x) for x in range(filtration.n)}):
        dims.append(0)
        births.append(vv[oldest[r]])
        deaths.append(np.inf)
        bs.append((oldest[r],))
        ds.append(None)
    return _assemble(dims, births, deaths, _pad(bs), _pad(ds), label, filtration.node_ids)


def _reduce_twist(filtration: WeightedFiltration, label):
    simplices = filtration.simplices
    index = {}
    boundary = []
    for pos, s in enumerate(simplices):
        col = set()
        if s.dim > 0:
            for drop in range(len(s.vertices)):
                face = s.vertices[:drop] + s.vertices[drop + 1:]
                f = index.get(face)
                if f is None:
                    raise FiltrationError(f"simplex {s.vertices} precedes its face {face}")
                if simplices[f].value > s.value:
                    raise FiltrationError(
                        f"non-monotone filtration at simplex {s.vertices} (value {s.value})"
                    )
                col.add(f)
        index[s.vertices] = pos
        boundary.append(col)

    pivot_of = {}
    reduced = {}
    cleared = set()
    for dim in (2, 1):
        for j, s in enumerate(simplices):
            if s.dim != dim or j in cleared:
                continue
            col = set(boundary[j])
            while col:
                low = max(col)
                other = pivot_of.get(low)
                if other is None:
                    pivot_of[low] = j
                    reduced[j] = col
                    cleared.add(low)
                    break
                col ^= reduced[other]
    dims, births, deaths, bs, ds = [], [], [], [], []
    killed = set(pivot_of)
    killers = set(pivot_of.values())
    for low, j in pivot_of.items():
        b, d = simplices[low], simplices[j]
        if b.dim > 1:
            continue
        dims.append(b.dim)
        births.append(b.value)
        deaths.append(d.value)
        bs.append(b.vertices)
        ds.append(d.vertices)
    for pos, s in enumerate(simplices):
        if s.dim > 1 or pos in killed or pos in killers:
            continue
        # positive simplex never killed
        dims.append(s.dim)
        births.append(s.value)
        deaths.append(np.inf)
        bs.append(s.vertices)
        ds.append(None)
    return _assemble(dims, births, deaths, _pad(bs), _pad(ds), label, filtration.node_ids)


def _decode_triangle(code, n):
    return (int(code // (n * n)), int((code // n) % n), int(code % n))


def _reduce_cohomology(filtration: WeightedFiltration, label):
    n = filtration.n
    order = filtration.vertex_order()
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    a, b, v = filtration.sorted_edges()
    dying, killer, is_death = _engine.union_find_h0(rank, a, b)
    vv = filtration.vertex_values

    dims = [np.zeros(len(dying), dtype=np.int64)]
    births = [vv[dying]]
    deaths = [v[killer]]
    bs = [np.column_stack([dying, np.full((len(dying), 2), _PAD)])]
    ds = [np.column_stack([a[killer], b[killer], np.full(len(dying), _PAD)])]

    survivors = np.setdiff1d(np.arange(n), dying)
    dims.append(np.zeros(len(survivors), dtype=np.int64))
    births.append(vv[survivors])
    deaths.append(np.full(len(survivors), np.inf))
    bs.append(np.column_stack([survivors, np.full((len(survivors), 2), _PAD)]))
    ds.append(np.full((len(survivors), 3), _PAD))

    if len(a):
        be, dcode, dval, ess = _engine.cohomology_h1(filtration.edge_values, a, b, v, is_death)
        tri = np.column_stack([dcode // (n * n), (dcode // n) % n, dcode % n]).astype(np.int64)
        dims.append(np.ones(len(be), dtype=np.int64))
        births.append(v[be])
        deaths.append(dval)
        bs.append(np.column_stack([a[be], b[be], np.full(len(be), _PAD)]))
        ds.append(tri.reshape(-1, 3))

        dims.append(np.ones(len(ess), dtype=np.int64))
        births.append(v[ess])
        deaths.append(np.full(len(ess), np.inf))
        bs.append(np.column_stack([a[ess], b[ess], np.full(len(ess), _PAD)]))
        ds.append(np.full((len(ess), 3), _PAD))
    return _assemble(
        np.concatenate(dims), np.concatenate(births), np.concatenate(deaths),
        np.concatenate(bs).astype(np.int64), np.concatenate(ds).astype(np.int64),
        label, filtration.node_ids,
    )


def reduce(filtration: WeightedFiltration, method="auto", label=""):
    """Persistence diagram (dims 0 and 1) of a filtration.

    ``method="auto"`` uses the implicit cohomology route for flag complexes
    and the explicit twist reduction otherwise.
    """
    if method == "auto":
        method = "cohomology" if filtration.is_flag else "twist"
    if method == "cohomology":
        if not filtration.is_flag:
            raise FiltrationError("cohomology route needs a flag filtration")
        return _reduce_cohomology(filtration, label)
    if method == "twist":
        return _reduce_twist(filtration, label)
    raise ValueError(f"unknown reduction method {method!r}")


def merge_diagrams(diagrams):
    """Multiset union of diagrams from disjoint regions."""
    diagrams = list(diagrams)
    labels = [lab for dg in diagrams for lab in dg.regions]
    if len(set(labels)) != len(labels):
        raise CoverageError(f"duplicate region labels in merge: {labels}")
    if not diagrams:
        return PersistenceDiagram.empty()
    offsets = np.cumsum([0] + [len(dg.regions) for dg in diagrams])
    return PersistenceDiagram(
        dim=np.concatenate([dg.dim for dg in diagrams]),
        birth=np.concatenate([dg.birth for dg in diagrams]),
        death=np.concatenate([dg.death for dg in diagrams]),
        birth_simplex=np.concatenate([dg.birth_simplex for dg in diagrams]),
        death_simplex=np.concatenate([dg.death_simplex for dg in diagrams]),
        region=np.concatenate([dg.region + off for dg, off in zip(diagrams, offsets)]),
        regions=tuple(labels),
        node_ids=tuple(ids for dg in diagrams for ids in dg.node_ids),
    )
