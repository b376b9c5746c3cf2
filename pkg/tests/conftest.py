from __future__ import annotations

import pytest

from perclab.graphs import build_family

FAMILY_SPECS = [
    ("fixed_end_tree", {"degree": 3}),
    ("grandparent", {"b": 2}),
    ("oriented_tree", {"n1": 1, "n2": 2}),
    ("oriented_tree", {"n1": 2, "n2": 2}),
    ("diestel_leader", {"k": 2, "n": 3}),
    ("subdivided_fixed_end_tree", {"degree": 3}),
    ("euclidean_lattice", {"d": 2}),
    ("euclidean_lattice", {"d": 2, "colored": True}),
    ("product_with_Z", {"base": {"family": "fixed_end_tree", "params": {"degree": 3}}, "d": 1}),
]


def family_id(run):
    kind, params = run
    simple = {k: v for k, v in params.items() if not isinstance(v, dict)}
    return kind + "".join(f"-{k}{v}" for k, v in simple.items())


@pytest.fixture(params=FAMILY_SPECS, ids=[family_id(s) for s in FAMILY_SPECS])
def family(request):
    kind, params = request.param
    return build_family(kind, **params)


def naive_ball(g, o, R):
    """Plain BFS returning {vertex: distance}; the reference for window enumeration."""
    dist = {o: 0}
    frontier = [o]
    for d in range(1, R + 1):
        nxt = []
        for v in frontier:
            for w in g.neighbors(v):
                if w not in dist:
                    dist[w] = d
                    nxt.append(w)
        frontier = nxt
    return dist
