"""Randomized invariants (hypothesis)."""

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from coverage_ph.analysis import death_stats, select_holes, summarize_deaths
from coverage_ph.distance_model import expected_round_trip, mode_round_trips, symmetrize
from coverage_ph.filtration import rips_filtration
from coverage_ph.oracle import bottleneck, multiset, naive_reduce
from coverage_ph.persistence import connected_components_0d, reduce

from test_analysis import diagram

finite = st.floats(0, 100, allow_nan=False)
pop = st.floats(1, 1e6, allow_nan=False)


@st.composite
def instances(draw, n_min=2, n_max=12):
    n = draw(st.integers(n_min, n_max))
    w = draw(arrays(float, n, elements=st.floats(0, 10)))
    # coarse grid values force plenty of ties
    upper = draw(arrays(float, n * (n - 1) // 2, elements=st.integers(0, 20).map(float)))
    d = np.zeros((n, n))
    d[np.triu_indices(n, 1)] = upper
    return d + d.T, w


@given(a=finite, b=finite, px=pop, py=pop)
def test_symmetrize_symmetric_and_between(a, b, px, py):
    assert symmetrize(a, b, px, py) == symmetrize(b, a, py, px)
    lo, hi = min(a, b), max(a, b)
    v = symmetrize(a, b, px, py)
    assert lo - 1e-9 <= v <= hi + 1e-9


@given(car=finite, pub=finite, walk=finite, c=st.floats(0, 1), bump=st.floats(0, 50))
def test_round_trip_monotone_in_each_mode(car, pub, walk, c, bump):
    base = expected_round_trip(car, pub, walk, c)
    assert expected_round_trip(car + bump, pub, walk, c) >= base
    assert expected_round_trip(car, pub + bump, walk, c) >= base
    assert expected_round_trip(car, pub, walk + bump, c) >= base


@settings(max_examples=40, deadline=None)
@given(times=arrays(float, 8, elements=st.floats(0.1, 30)), k=st.integers(0, 7), bump=st.floats(0, 20))
def test_mode_times_monotone(times, k, bump):
    edges = [(0, 1), (1, 2), (2, 3), (0, 3)]
    keys = [(a, b) for i, j in edges for a, b in ((i, j), (j, i))]
    base = mode_round_trips(4, edges, dict(zip(keys, times)))
    bumped = times.copy()
    bumped[k] += bump
    assert np.all(mode_round_trips(4, edges, dict(zip(keys, bumped))) >= base - 1e-12)


@settings(max_examples=60, deadline=None)
@given(instances())
def test_reduce_matches_oracle_with_ties(inst):
    d, w = inst
    f = rips_filtration(d, w)
    ref = multiset(naive_reduce(f))
    assert reduce(f, method="cohomology").multiset() == ref
    assert reduce(f, method="twist").multiset() == ref
    assert connected_components_0d(f).multiset(0) == [p for p in ref if p[0] == 0]


@settings(max_examples=40, deadline=None)
@given(instances(n_min=3))
def test_truncation_soundness(inst):
    d, w = inst
    full = reduce(rips_filtration(d, w, truncation="none"))
    trunc_f = rips_filtration(d, w, truncation="auto")
    trunc = reduce(trunc_f)
    t = trunc_f.threshold
    kept = lambda dg: sorted((p.dim, p.birth, p.death) for p in dg.pairs() if p.death <= t)
    assert kept(full) == kept(trunc)


@settings(max_examples=40, deadline=None)
@given(instances(n_min=3))
def test_euler_characteristic(inst):
    d, w = inst
    f = rips_filtration(d, w)
    pairs = reduce(f).pairs(include_zero=True)
    for t in sorted({s.value for s in f}):
        chi = sum((-1) ** s.dim for s in f if s.value <= t)
        b0 = sum(1 for p in pairs if p.dim == 0 and p.birth <= t < p.death)
        b1 = sum(1 for p in pairs if p.dim == 1 and p.birth <= t < p.death)
        tri = sum(1 for s in f if s.dim == 2 and s.value <= t)
        b2 = tri - sum(1 for p in pairs if p.dim == 1 and p.death <= t)
        assert b0 - b1 + b2 == chi


@settings(max_examples=30, deadline=None)
@given(points=st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)).map(sorted).map(tuple), max_size=5),
       others=st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)).map(sorted).map(tuple), max_size=5))
def test_bottleneck_symmetric(points, others):
    assert abs(bottleneck(points, others) - bottleneck(others, points)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(deaths=st.lists(st.floats(1, 200), min_size=2, max_size=30), c=st.floats(0.1, 10))
def test_stats_scale(deaths, c):
    a = summarize_deaths(deaths)
    b = summarize_deaths([c * x for x in deaths])
    assert np.isclose(b.median, c * a.median)
    assert np.isclose(b.variance, c * c * a.variance, rtol=1e-9, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(deaths=st.lists(st.integers(1, 100).map(float), min_size=2, max_size=20),
       z1=st.floats(-2, 3), z2=st.floats(-2, 3))
def test_selection_monotone(deaths, z1, z2):
    lo, hi = sorted((z1, z2))
    dg = diagram(deaths)
    stats = death_stats(dg, 1)
    pick = lambda z: {h.site_ids for h in select_holes(dg, 1, stats, z)}
    assert pick(hi) <= pick(lo)
