from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perclab.errors import (
    AddressError,
    ParameterError,
    ResourceError,
    UnsupportedFamilyError,
)
from perclab.graphs import (
    OrbitWeights,
    VertexRef,
    ball,
    build_family,
    family_from_dict,
    modular_ratio,
    neighbors,
    slab_component,
    window_from_dict,
    window_to_dict,
)

from .conftest import naive_ball


def test_oriented_tree_descriptor():
    g = build_family("oriented_tree", n1=1, n2=2)
    assert g.orbit_count == 1
    assert g.orbit_degrees == (4,)
    assert g.modular_base == 2


def test_modular_bases():
    assert build_family("oriented_tree", n1=3, n2=2).modular_base == Fraction(2, 3)
    assert build_family("fixed_end_tree", degree=4).modular_base == 3
    assert build_family("grandparent", b=3).modular_base == 3
    assert build_family("diestel_leader", k=2, n=3).modular_base == Fraction(2, 3)
    assert build_family("euclidean_lattice", d=3).modular_base == 1


def test_lattice_descriptor():
    g = build_family("euclidean_lattice", d=2)
    assert (g.orbit_count, g.orbit_degrees, g.modular_base) == (1, (4,), 1)
    assert g.unimodular


def test_subdivided_descriptor():
    g = build_family("subdivided-fixed-end-tree", degree=3)
    assert g.orbit_count == 2
    assert g.orbit_degrees == (3, 2)
    assert not g.unimodular


def test_oriented_origin_neighbors():
    g = build_family("oriented_tree", n1=1, n2=2)
    levels = sorted(w.level for w in g.neighbors(g.origin))
    assert levels == [-1, -1, 0, 1]
    assert g.origin.level == 0


def test_lattice_line_neighbors():
    g = build_family("euclidean_lattice", d=1)
    assert sorted(w.address for w in g.neighbors(g.origin)) == [(-1,), (1,)]


def test_grandparent_neighbors():
    g = build_family("grandparent", b=2)
    nbrs = g.neighbors(g.origin)
    assert len(nbrs) == 8
    assert len(set(nbrs)) == 8
    offsets = sorted(w.level for w in nbrs)
    # parent, grandparent above; children and grandchildren below
    assert offsets == [-2, -2, -2, -2, -1, -1, 1, 2]


@pytest.mark.parametrize(
    "kind, params, R, size",
    [
        ("oriented_tree", {"n1": 1, "n2": 2}, 1, 5),
        ("euclidean_lattice", {"d": 1}, 3, 7),
        ("grandparent", {"b": 2}, 1, 9),
    ],
)
def test_ball_examples(kind, params, R, size):
    g = build_family(kind, **params)
    assert len(ball(g, g.origin, R)) == size


def test_tree_ball_closed_forms():
    g = build_family("oriented_tree", n1=1, n2=2)
    for R in range(6):
        assert len(ball(g, g.origin, R)) == 1 + 4 * (3**R - 1) // 2
    z2 = build_family("euclidean_lattice", d=2)
    for R in range(6):
        assert len(ball(z2, z2.origin, R)) == 2 * R * R + 2 * R + 1


def test_ball_matches_naive_bfs(family):
    for R in range(4):
        win = ball(family, family.origin, R)
        ref = naive_ball(family, family.origin, R)
        assert set(win.vertices) == set(ref)
        assert all(win.dist[win.index[v]] == d for v, d in ref.items())


def test_window_boundary_and_edges(family):
    win = ball(family, family.origin, 3)
    for i, j in win.edges:
        assert 0 <= i < j < len(win)
    for i, v in enumerate(win.vertices):
        outside = any(w not in win.index for w in family.neighbors(v))
        assert (i in win.boundary) == outside
        if outside:
            assert win.dist[i] == 3


def test_degree_and_symmetry(family):
    win = ball(family, family.origin, 4)
    for v in win.vertices:
        nbrs = family.neighbors(v)
        assert len(nbrs) == family.orbit_degrees[v.orbit]
        for w in nbrs:
            assert v in family.neighbors(w)


def test_slot_pattern_is_orbit_invariant(family):
    win = ball(family, family.origin, 3)
    for v in win.vertices:
        pattern = family.slot_pattern(v.orbit)
        got = tuple((w.orbit, w.level - v.level) for w in family.neighbors(v))
        assert got == pattern


@pytest.mark.parametrize(
    "kind, params",
    [
        ("fixed_end_tree", {"degree": 2}),
        ("grandparent", {"b": 1}),
        ("oriented_tree", {"n1": 0, "n2": 2}),
        ("euclidean_lattice", {"d": 0}),
        ("no_such_family", {}),
    ],
)
def test_invalid_parameters(kind, params):
    with pytest.raises(ParameterError):
        build_family(kind, **params)


def test_malformed_address():
    g = build_family("oriented_tree", n1=1, n2=2)
    with pytest.raises(AddressError):
        neighbors(g, VertexRef(0, 0, (7,)))
    z = build_family("euclidean_lattice", d=2)
    with pytest.raises(AddressError):
        neighbors(z, VertexRef(0, 0, (1,)))
    t = build_family("fixed_end_tree", degree=3)
    with pytest.raises(AddressError):
        neighbors(t, VertexRef(0, 0, (5,)))


def test_modular_ratio_examples():
    g = build_family("oriented_tree", n1=1, n2=2)
    w = OrbitWeights.for_family(g)
    o = g.origin
    fwd = g.neighbor(o, 1)
    assert fwd.level == 1
    assert modular_ratio(g, w, o, fwd) == 2
    assert modular_ratio(g, w, o, o) == 1


def test_cocycle_exhaustive_small(family):
    w = OrbitWeights.for_family(family)
    verts = ball(family, family.origin, 2).vertices[:12]
    for x in verts:
        for y in verts:
            for z in verts:
                lhs = modular_ratio(family, w, x, y) * modular_ratio(family, w, y, z)
                assert lhs == modular_ratio(family, w, x, z)


def test_level_growth_diagnostics():
    for kind, params in [("oriented_tree", {"n1": 1, "n2": 2}), ("fixed_end_tree", {"degree": 3}), ("grandparent", {"b": 2})]:
        g = build_family(kind, **params)
        counts = []
        tops = []
        for R in (2, 4, 6, 8):
            win = ball(g, g.origin, R, budget=10**6) if kind != "grandparent" or R <= 6 else None
            if win is None:
                break
            counts.append(sum(v.level == 0 for v in win.vertices))
            tops.append(max(abs(v.level) for v in win.vertices))
        assert counts == sorted(set(counts)), (kind, counts)
        assert tops == sorted(set(tops))
    z = build_family("euclidean_lattice", d=2)
    assert {z.m(v) for v in ball(z, z.origin, 6).vertices} == {1}


def test_slab_examples():
    g = build_family("oriented_tree", n1=1, n2=2)
    w0 = slab_component(g, g.origin, 0, 10)
    assert len(w0) == 2
    w1 = slab_component(g, g.origin, 1, 3)
    assert {v.level for v in w1.vertices} == {0, 1}
    assert len(w1) > 2
    t = build_family("fixed_end_tree", degree=3)
    assert len(slab_component(t, t.origin, 0, 5)) == 1


def test_slab_requires_levels():
    z = build_family("euclidean_lattice", d=2)
    with pytest.raises(UnsupportedFamilyError):
        slab_component(z, z.origin, 1, 3)


def test_budget():
    g = build_family("oriented_tree", n1=1, n2=2)
    with pytest.raises(ResourceError):
        ball(g, g.origin, 10, budget=1000)


def test_window_round_trip(family):
    win = ball(family, family.origin, 2)
    doc = json.loads(json.dumps(window_to_dict(win)))
    again = window_from_dict(doc)
    assert again.vertices == win.vertices
    assert (again.edges == win.edges).all()
    assert again.boundary == win.boundary


def test_window_tamper_detected():
    g = build_family("oriented_tree", n1=1, n2=2)
    doc = window_to_dict(ball(g, g.origin, 2))
    doc["boundary"] = doc["boundary"][1:]
    with pytest.raises(ParameterError):
        window_from_dict(doc)


def test_family_round_trip(family):
    assert family_from_dict(json.loads(json.dumps(family.to_dict()))).to_dict() == family.to_dict()


def test_vertex_json_round_trip(family):
    for v in ball(family, family.origin, 2).vertices:
        assert family.vertex_from_json(json.loads(json.dumps(family.vertex_to_json(v)))) == v


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 7), min_size=0, max_size=12), st.sampled_from(range(9)))
def test_random_walk_symmetry(slots, which):
    from .conftest import FAMILY_SPECS

    kind, params = FAMILY_SPECS[which]
    g = build_family(kind, **params)
    v = g.origin
    for s in slots:
        nbrs = g.neighbors(v)
        w = nbrs[s % len(nbrs)]
        assert v in g.neighbors(w)
        assert g.slot_pattern(w.orbit) == tuple((u.orbit, u.level - w.level) for u in g.neighbors(w))
        v = w


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=4), st.lists(st.integers(0, 3), max_size=4))
def test_oriented_distance_matches_bfs(a, b):
    g = build_family("oriented_tree", n1=1, n2=2)

    def walk(slots):
        v = g.origin
        for s in slots:
            v = g.neighbor(v, s)
        return v

    x, y = walk(a), walk(b)
    d = g.distance(x, y)
    assert d <= len(a) + len(b)
    ref = naive_ball(g, x, d)
    assert ref.get(y) == d
