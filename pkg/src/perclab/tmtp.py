"""Exact checks of the tilted mass-transport principle and of harmonicity.

All sums are over finite balls and use :class:`fractions.Fraction`, so every
identity is checked with zero tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import NumericError, PreconditionError, ResourceError
from .exact import solve_linear
from .graphs import (
    DEFAULT_BUDGET,
    GraphFamily,
    OrbitWeights,
    OrientedTree,
    VertexRef,
    Window,
    ball,
    modular_ratio,
)

__all__ = [
    "OrbitChain",
    "Transport",
    "cocycle_check",
    "harmonic_system_residuals",
    "harmonicity_residual",
    "lazy_orbit_chain",
    "solve_mu",
    "solve_mu_linear",
    "transport_suite",
    "verify_tmtp",
]


@dataclass(frozen=True)
class OrbitChain:
    orbits: tuple
    transition: tuple
    stationary: tuple


def _orbit_counts(g: GraphFamily):
    """counts[i][j] = number of neighbors of representative i lying in orbit j."""
    L = g.orbit_count
    counts = [[0] * L for _ in range(L)]
    for i, rep in enumerate(g.orbit_representatives()):
        for w in g.neighbors(rep):
            counts[i][w.orbit] += 1
    return counts


def _stationary(P):
    L = len(P)
    rows = [[P[i][j] - (1 if i == j else 0) for i in range(L)] for j in range(L)]
    rows.append([Fraction(1)] * L)
    return tuple(solve_linear(rows, [0] * L + [1]))


def lazy_orbit_chain(g: GraphFamily) -> OrbitChain:
    """The lazy simple random walk projected onto orbits, with its stationary law."""
    counts = _orbit_counts(g)
    L = g.orbit_count
    P = tuple(
        tuple(
            (Fraction(1, 2) if i == j else 0) + Fraction(counts[i][j], 2 * g.orbit_degrees[i])
            for j in range(L)
        )
        for i in range(L)
    )
    return OrbitChain(tuple(range(L)), P, _stationary(P))


def harmonic_system_residuals(g: GraphFamily, a) -> tuple:
    """Residual of ``sum_{z~y} [a_z m(z) - a_y m(y)]`` at each orbit representative."""
    out = []
    for y in g.orbit_representatives():
        my = g.m(y)
        out.append(sum((a[z.orbit] * g.m(z) - a[y.orbit] * my for z in g.neighbors(y)), Fraction(0)))
    return tuple(out)


def solve_mu_linear(g: GraphFamily) -> tuple:
    """Solve the harmonicity system together with ``sum a = 1`` by exact elimination."""
    L = g.orbit_count
    rows = []
    for y in g.orbit_representatives():
        row = [Fraction(0)] * L
        my = g.m(y)
        for z in g.neighbors(y):
            row[z.orbit] += g.m(z)
            row[y.orbit] -= my
        rows.append(row)
    rows.append([Fraction(1)] * L)
    return tuple(solve_linear(rows, [0] * L + [1]))


def solve_mu(g: GraphFamily) -> OrbitWeights:
    """Stationary law of the lazy orbit chain biased by 1/deg, cross-checked by a linear solve."""
    chain = lazy_orbit_chain(g)
    biased = [s / d for s, d in zip(chain.stationary, g.orbit_degrees)]
    total = sum(biased)
    mu = tuple(x / total for x in biased)
    linear = solve_mu_linear(g)
    if mu != linear:
        raise NumericError(f"biasing recipe {mu} disagrees with harmonic solve {linear}")
    res = harmonic_system_residuals(g, mu)
    if any(res):
        raise NumericError(f"mu leaves nonzero harmonic residuals {res}")
    return OrbitWeights(mu, g.orbit_m)


def harmonicity_residual(
    g: GraphFamily,
    w: OrbitWeights,
    x: VertexRef,
    win: Window,
    c: Callable | None = None,
):
    """Max over interior y of |Delta(x,y) - conductance-weighted mean of Delta(x,.) around y|."""
    interior = win.interior()
    if not interior:
        raise PreconditionError("window has no interior vertices")
    worst = Fraction(0)
    for i in interior:
        y = win.vertices[i]
        num = 0
        den = 0
        for z in g.neighbors(y):
            cz = 1 if c is None else c(y, z)
            num = num + cz * modular_ratio(g, w, x, z)
            den = den + cz
        r = abs(modular_ratio(g, w, x, y) - num / den)
        if r > worst:
            worst = r
    return worst


@dataclass(frozen=True)
class Transport:
    """A diagonally invariant mass transport with bounded support.

    ``evaluate`` must depend on (u, v) only through orbits, level difference
    and family-invariant relative position.
    """

    name: str
    evaluate: Callable
    support_radius: int


def transport_suite(g: GraphFamily) -> list:
    """The bundled transports applicable to ``g``."""

    def identity(u, v):
        return Fraction(int(u == v))

    def adjacency(u, v):
        return Fraction(sum(1 for z in g.neighbors(u) if z == v))

    def raising_edge(u, v):
        return Fraction(int(v.level > u.level and v in g.neighbors(u)))

    def orbit_weighted_adjacency(u, v):
        return adjacency(u, v) * (1 + u.orbit + 2 * v.orbit)

    def sphere(r, dlevel):
        def f(u, v):
            if v.level - u.level != dlevel:
                return Fraction(0)
            return Fraction(int(_distance_is(g, u, v, r)))

        return f

    suite = [
        Transport("identity", identity, 0),
        Transport("edge", adjacency, 1),
        Transport("raising_edge", raising_edge, 1),
        Transport("orbit_weighted_edge", orbit_weighted_adjacency, 1),
        Transport("sphere2_down1", sphere(2, -1), 2),
        Transport("sphere2_up1", sphere(2, 1), 2),
    ]
    if isinstance(g, OrientedTree):
        suite.append(Transport("forward_edge", lambda u, v: _forward(g, u, v), 1))
    if g.kind == "grandparent":
        suite.append(Transport("grandparent", lambda u, v: _grandparent(g, u, v), 1))
    return suite


def _distance_is(g, u, v, r):
    try:
        return g.distance(u, v, limit=r) == r
    except ResourceError:
        return False


def _forward(g: OrientedTree, u, v):
    return Fraction(int(v.level == u.level + 1 and v in g.neighbors(u)))


def _grandparent(g, u, v):
    nbrs = g.neighbors(u)
    return Fraction(int(v == nbrs[g.b + 1]))


def verify_tmtp(g: GraphFamily, w: OrbitWeights, f: Transport, budget: int = DEFAULT_BUDGET):
    """Both sides of the tilted mass-transport identity as exact rationals.

    lhs = sum_i a_i sum_x f(o_i, x); rhs = sum_i a_i sum_x f(x, o_i) Delta(o_i, x).
    """
    lhs = Fraction(0)
    rhs = Fraction(0)
    for i, rep in enumerate(g.orbit_representatives()):
        win = ball(g, rep, f.support_radius, budget=budget)
        ai = w.a[i]
        for x in win.vertices:
            out = f.evaluate(rep, x)
            if out:
                lhs += ai * out
            inc = f.evaluate(x, rep)
            if inc:
                rhs += ai * inc * modular_ratio(g, w, rep, x)
    return lhs, rhs


def cocycle_check(g: GraphFamily, w: OrbitWeights, trials: int, seed: int, radius: int = 4):
    """Max |Delta(x,y) Delta(y,z) - Delta(x,z)| over random triples in B(o, radius)."""
    verts = ball(g, g.origin, radius).vertices
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(verts), size=(trials, 3))
    worst = Fraction(0)
    for i, j, k in idx:
        x, y, z = verts[i], verts[j], verts[k]
        d = abs(modular_ratio(g, w, x, y) * modular_ratio(g, w, y, z) - modular_ratio(g, w, x, z))
        worst = max(worst, d)
    return worst
