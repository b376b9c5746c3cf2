from __future__ import annotations

import json
import math
from collections import deque
from fractions import Fraction
from statistics import median

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perclab.errors import ParameterError, PreconditionError, UnsupportedFamilyError
from perclab.graphs import ball, build_family
from perclab.percolation import (
    Config,
    LazyConfig,
    RayDecoration,
    clusters,
    config_from_dict,
    config_to_dict,
    connectivity_estimate,
    decay_curve,
    decay_to_csv,
    ray_decoration_sample,
    sample_config,
    tilted_mass,
    tree_cluster,
)


def bfs_components(cfg):
    """Reference component labels by plain BFS over open edges."""
    win = cfg.window
    adj = [[] for _ in win.vertices]
    for e, (i, j) in enumerate(win.edges):
        if cfg.open[e]:
            adj[i].append(j)
            adj[j].append(i)
    label = [-1] * len(win)
    for s in range(len(win)):
        if label[s] >= 0:
            continue
        label[s] = s
        q = deque([s])
        while q:
            i = q.popleft()
            for j in adj[i]:
                if label[j] < 0:
                    label[j] = s
                    q.append(j)
    return label


def vertex_at(g, d):
    win = ball(g, g.origin, d)
    return win.vertices[int(np.flatnonzero(win.dist == d)[-1])]


def test_extreme_p():
    g = build_family("oriented_tree", n1=1, n2=2)
    win = ball(g, g.origin, 3)
    assert sample_config(win, 0.0, 1).n_open == 0
    assert sample_config(win, 1.0, 1).n_open == win.n_edges


def test_open_fraction_concentrates():
    g = build_family("euclidean_lattice", d=2)
    win = ball(g, g.origin, 71)
    E = win.n_edges
    assert E >= 10_000
    frac = sample_config(win, 0.5, 2024).n_open / E
    assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / E)


def test_bad_p():
    g = build_family("euclidean_lattice", d=1)
    with pytest.raises(ParameterError):
        sample_config(ball(g, g.origin, 2), 1.5, 0)


def test_regeneration_is_bit_exact(family):
    win = ball(family, family.origin, 3)
    a = sample_config(win, 0.4, 99)
    b = sample_config(ball(family, family.origin, 3), 0.4, 99)
    assert (a.open == b.open).all()
    assert not (a.open == sample_config(win, 0.4, 100).open).all() or win.n_edges < 8


def test_window_restriction_matches_lazy(family):
    big = sample_config(ball(family, family.origin, 3), 0.5, 5)
    lazy = LazyConfig(family, 0.5, 5)
    win = big.window
    for e, (i, j) in enumerate(win.edges):
        assert bool(big.open[e]) == lazy.is_open(win.vertices[i], win.vertices[j])
    small = sample_config(ball(family, family.origin, 2), 0.5, 5)
    for e, (i, j) in enumerate(small.window.edges):
        u, v = small.window.vertices[i], small.window.vertices[j]
        assert bool(small.open[e]) == big.is_open(u, v)


def test_is_open_outside_window():
    g = build_family("euclidean_lattice", d=1)
    cfg = sample_config(ball(g, g.origin, 1), 0.5, 0)
    far = ball(g, g.origin, 3).vertices[-1]
    with pytest.raises(PreconditionError):
        cfg.is_open(g.origin, far)


def test_cluster_examples():
    g = build_family("euclidean_lattice", d=1)
    win = ball(g, g.origin, 2)
    empty = Config(win, 0.0, 0, np.zeros(win.n_edges, dtype=bool))
    assert clusters(empty).n_clusters == 5
    full = Config(win, 1.0, 0, np.ones(win.n_edges, dtype=bool))
    assert clusters(full).n_clusters == 1
    o, right = g.origin, g.neighbor(g.origin, 0)
    mask = np.ones(win.n_edges, dtype=bool)
    mask[win.find_edge(o, right)] = False
    dec = clusters(Config(win, None, 0, mask))
    assert sorted(s.size for s in dec.stats.values()) == [2, 3]


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_union_find_matches_bfs(family, p):
    R = 2 if family.kind in ("grandparent", "diestel_leader") else 3
    win = ball(family, family.origin, R)
    assert len(win) <= 200 or family.kind == "euclidean_lattice"
    for seed in range(5):
        cfg = sample_config(win, p, seed)
        dec = clusters(cfg)
        ref = bfs_components(cfg)
        ids = dec.cluster_ids
        for i in range(len(win)):
            for j in range(i + 1, len(win)):
                assert (ids[i] == ids[j]) == (ref[i] == ref[j])
        assert sum(s.size for s in dec.stats.values()) == len(win)


def test_cluster_stats():
    g = build_family("oriented_tree", n1=1, n2=2)
    cfg = sample_config(ball(g, g.origin, 4), 0.6, 8)
    dec = clusters(cfg)
    win = cfg.window
    for root, s in dec.stats.items():
        members = [win.vertices[i] for i in range(len(win)) if dec.cluster_ids[i] == root]
        assert s.size == len(members)
        assert s.min_level == min(v.level for v in members)
        assert s.max_level == max(v.level for v in members)
        assert s.boundary_touch == any(win.index[v] in win.boundary for v in members)
        assert root == min(win.index[v] for v in members)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**32))
def test_monotone_coupling(p1, p2, seed):
    lo, hi = sorted((p1, p2))
    g = build_family("grandparent", b=2)
    cfg = sample_config(ball(g, g.origin, 2), hi, seed)
    low = cfg.at(lo)
    assert not (low.open & ~cfg.open).any()
    a, b = clusters(low), clusters(cfg)
    o = g.origin
    assert set(a.members(o)) <= set(b.members(o))
    assert (low.open == sample_config(cfg.window, lo, seed).open).all()


TREE_GRID = [
    ("oriented_tree", {"n1": 1, "n2": 2}),
    ("fixed_end_tree", {"degree": 3}),
    ("subdivided_fixed_end_tree", {"degree": 3}),
    ("euclidean_lattice", {"d": 1}),
]


@pytest.mark.parametrize("kind, params", TREE_GRID)
@pytest.mark.parametrize("p, d", [(0.3, 2), (0.7, 4), (0.5, 5)])
def test_tree_connectivity_exact(kind, params, p, d):
    g = build_family(kind, **params)
    ph, se = connectivity_estimate(g, p, g.origin, vertex_at(g, d), 20_000, seed=17)
    assert abs(ph - p**d) <= 3 * se


def test_connectivity_extremes():
    g = build_family("grandparent", b=2)
    y = vertex_at(g, 2)
    assert connectivity_estimate(g, 1.0, g.origin, y, 100, 0) == (1.0, 0.0)
    assert connectivity_estimate(g, 0.0, g.origin, y, 100, 0) == (0.0, 0.0)
    with pytest.raises(PreconditionError):
        connectivity_estimate(g, 0.5, g.origin, y, 99, 0)


def test_connectivity_workers_deterministic():
    g = build_family("oriented_tree", n1=1, n2=2)
    y = vertex_at(g, 4)
    one = connectivity_estimate(g, 0.5, g.origin, y, 5000, 3, workers=1)
    four = connectivity_estimate(g, 0.5, g.origin, y, 5000, 3, workers=4)
    assert one == four


def test_connectivity_matches_cluster_sampling():
    # the vectorized reachability agrees with union-find on the same trial streams
    g = build_family("grandparent", b=2)
    y = vertex_at(g, 2)
    win = ball(g, g.origin, 3)
    hits = sum(clusters(sample_config(win, 0.3, 21, trial=t)).connected(g.origin, y) for t in range(400))
    ph, _ = connectivity_estimate(g, 0.3, g.origin, y, 400, 21)
    assert ph == hits / 400


def test_decay_tree():
    g = build_family("oriented_tree", n1=1, n2=2)
    targets = [vertex_at(g, d) for d in range(1, 7)]
    rows = decay_curve(g, 0.5, g.origin, targets, 20_000, seed=4)
    for r in rows:
        assert abs(r.p_hat - 0.5**r.distance) <= 3 * r.se
    assert [r.running_min for r in rows] == list(np.minimum.accumulate([r.p_hat for r in rows]))
    ones = decay_curve(g, 1.0, g.origin, targets, 100, seed=4)
    assert all(r.p_hat == 1.0 for r in ones)
    text = decay_to_csv(rows)
    assert text.splitlines()[0].startswith("distance,p_hat,se,n_trials")


def test_decay_grandparent_monotone():
    g = build_family("grandparent", b=2)
    targets = [vertex_at(g, d) for d in range(1, 7)]
    rows = decay_curve(g, 0.1, g.origin, targets, 2000, seed=5, margin=0)
    for a, b in zip(rows, rows[1:]):
        assert b.p_hat <= a.p_hat + 3 * math.hypot(a.se, b.se)


def test_decay_requires_sorted_targets():
    g = build_family("oriented_tree", n1=1, n2=2)
    with pytest.raises(PreconditionError):
        decay_curve(g, 0.5, g.origin, [vertex_at(g, 3), vertex_at(g, 1)], 100, 0)


def test_tilted_mass_isolated_origin():
    g = build_family("oriented_tree", n1=1, n2=2)
    win = ball(g, g.origin, 3)
    mask = np.ones(win.n_edges, dtype=bool)
    for w in g.neighbors(g.origin):
        mask[win.find_edge(g.origin, w)] = False
    cfg = Config(win, None, 0, mask)
    assert tilted_mass(cfg, g.origin, [0, 1, 2, 3]) == [1, 1, 1, 1]


def test_tilted_mass_full_ball_oracle():
    # at p = 1 the mass of B(o, R) is a sum over the ball of q^level
    g = build_family("oriented_tree", n1=1, n2=2)
    cfg = sample_config(ball(g, g.origin, 6), 1.0, 0)
    masses = tilted_mass(cfg, g.origin, [1, 2, 4, 6])
    for R, m in zip([1, 2, 4, 6], masses):
        ref = sum(Fraction(2) ** v.level for v in ball(g, g.origin, R).vertices)
        assert m == ref
    assert masses == sorted(masses) and masses[-1] > 100


def test_tilted_mass_lazy_matches_window():
    g = build_family("oriented_tree", n1=1, n2=2)
    win_cfg = sample_config(ball(g, g.origin, 6), 0.5, 12)
    lazy = LazyConfig(g, 0.5, 12)
    assert tilted_mass(win_cfg, g.origin, [2, 4, 6]) == tilted_mass(lazy, g.origin, [2, 4, 6])
    cl = tree_cluster(lazy, g.origin, 6)
    dec = clusters(win_cfg)
    assert {win_cfg.window.index[v] for v in cl} == set(dec.members(g.origin))


def test_tilted_mass_straddles_heaviness_threshold():
    g = build_family("oriented_tree", n1=1, n2=2)
    low = [float(tilted_mass(LazyConfig(g, 0.35, s), g.origin, [20])[0]) for s in range(15)]
    high = [float(tilted_mass(LazyConfig(g, 0.5, s), g.origin, [20])[0]) for s in range(15)]
    # calibrated: medians differ by two orders of magnitude at R = 20
    assert median(high) > 20 * median(low)


def test_config_export_round_trip():
    g = build_family("grandparent", b=2)
    cfg = sample_config(ball(g, g.origin, 2), 0.3, 77)
    doc = json.loads(json.dumps(config_to_dict(cfg)))
    back = config_from_dict(doc)
    assert (back.open == cfg.open).all()
    assert back.p == cfg.p and back.seed == cfg.seed
    doc["open_rle"] = [0, doc["n_edges"]]
    with pytest.raises(ParameterError):
        config_from_dict(doc)


def test_ray_decoration_structure():
    g = build_family("fixed_end_tree", degree=3)
    win = ball(g, g.origin, 6)
    s = ray_decoration_sample(win, seed=9)
    assert not (s.omega1.open & ~s.omega2.open).any()
    # exactly one open offspring edge per vertex whose children lie in the window
    for v in win.vertices:
        kids = [g.child(v, i) for i in range(g.b)]
        if all(k in win.index for k in kids):
            assert sum(s.omega1.is_open(v, k) for k in kids) == 1
    # omega1 clusters are simple paths
    dec = clusters(s.omega1)
    for root in dec.stats:
        members = [i for i in range(len(win)) if dec.cluster_ids[i] == root]
        nedges = sum(
            1 for e, (i, j) in enumerate(win.edges) if s.omega1.open[e] and dec.cluster_ids[i] == root
        )
        assert nedges == len(members) - 1
        degs = [sum(1 for j, e in win.adjacency[i] if s.omega1.open[e]) for i in members]
        assert max(degs) <= 2


def test_ray_height_law():
    g = build_family("fixed_end_tree", degree=3)
    proc = RayDecoration(g, seed=1)
    heights = [proc.ray_height(v)[0] for v in ball(g, g.origin, 7).vertices]
    # P(n >= k) = 2^-k along the upward walk
    frac = np.mean(np.array(heights) >= 1)
    assert abs(frac - 0.5) < 0.05


def test_ray_decoration_family_check():
    g = build_family("oriented_tree", n1=1, n2=2)
    with pytest.raises(UnsupportedFamilyError):
        RayDecoration(g, 0)
