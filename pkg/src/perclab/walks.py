"""Walk kernels on percolation configurations and electrical diagnostics.

Three kernels are supported, each written as a weight per neighbor slot of
the vertex's orbit (the weights never depend on the configuration):

* ``sqrt_biased``: slot weight ``sqrt(m(y)/m(x)) / nu(x)`` with
  ``nu(x) = sum_z sqrt(m(z)/m(x))`` over all neighbors;
* ``delayed_srw``: slot weight ``1/deg(x)``;
* ``plain_srw``: slot weight ``1/deg(x)`` on the whole graph, no config.

A step picks a slot by weight and moves along it if the edge is open,
otherwise stays put.  Exact distributions use :class:`~perclab.exact.Surd`.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import NumericError, ParameterError, PreconditionError
from .exact import Surd, sqrt_rational
from .graphs import GraphFamily, VertexRef
from .percolation import Config, tree_cluster
from .rng import stream_generator

__all__ = [
    "KERNEL_KINDS",
    "Kernel",
    "Network",
    "Trajectory",
    "biased_kernel",
    "cluster_network",
    "conductance_rows",
    "effective_conductance",
    "frequency",
    "frequency_pair",
    "kernel",
    "path_network",
    "reversed_kernel",
    "rooted_tree_network",
    "simulate_two_sided",
    "stationarity_check",
    "tree_cluster_network",
    "tree_cluster_predicate",
]

KERNEL_KINDS = ("sqrt_biased", "delayed_srw", "plain_srw")
CG_TOLERANCE = 1e-10


# ---------------------------------------------------------------------------
# slot weights
# ---------------------------------------------------------------------------


def _ratio(g: GraphFamily, orbit: int, slot_orbit: int, dlevel: int) -> Fraction:
    return g.orbit_m[slot_orbit] / g.orbit_m[orbit] * g.modular_base ** dlevel


@lru_cache(maxsize=None)
def _sqrt_slots(g: GraphFamily, orbit: int) -> tuple:
    """(per-slot sqrt(m(y)/m(x)), their sum nu)."""
    roots = tuple(sqrt_rational(_ratio(g, orbit, o2, dl)) for o2, dl in g.slot_pattern(orbit))
    return roots, sum(roots, Surd(0))


@lru_cache(maxsize=None)
def _plain_reverse_slots(g: GraphFamily, orbit: int) -> tuple:
    from .tmtp import solve_mu

    mu = solve_mu(g).a
    deg = g.orbit_degrees[orbit]
    return tuple(
        mu[o2] / mu[orbit] * _ratio(g, orbit, o2, dl) / deg for o2, dl in g.slot_pattern(orbit)
    )


def slot_probabilities(g: GraphFamily, orbit: int, kind: str, reverse: bool = False) -> tuple:
    """Exact per-slot step probabilities; they always sum to 1."""
    if kind == "sqrt_biased":
        roots, nu = _sqrt_slots(g, orbit)
        return tuple(r / nu for r in roots)
    if kind == "delayed_srw" or (kind == "plain_srw" and not reverse):
        deg = g.orbit_degrees[orbit]
        return (Fraction(1, deg),) * deg
    if kind == "plain_srw":
        return _plain_reverse_slots(g, orbit)
    raise ParameterError(f"unknown kernel kind {kind!r}; choose from {KERNEL_KINDS}")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _check_vertex(cfg, v):
    if isinstance(cfg, Config):
        win = cfg.window
        if v not in win.index:
            raise PreconditionError(f"{v} is not in the window")
        if win.is_boundary(v):
            raise PreconditionError(f"{v} is a boundary vertex; some edges are not represented")


def _distribution(g, v, probs, is_open):
    dist = {}
    moved = 0
    for w, q in zip(g.neighbors(v), probs):
        if is_open(v, w):
            dist[w] = dist.get(w, 0) + q
            moved = moved + q
    stay = 1 - moved
    if stay:
        dist[v] = dist.get(v, 0) + stay
    return dist


def biased_kernel(cfg, v: VertexRef) -> dict:
    """Exact square-root biased step distribution at ``v``; closed edges fold into the self-loop."""
    _check_vertex(cfg, v)
    g = cfg.graph
    return _distribution(g, v, slot_probabilities(g, v.orbit, "sqrt_biased"), cfg.is_open)


def _nu(g, v):
    return _sqrt_slots(g, v.orbit)[1]


def reversed_kernel(cfg, v: VertexRef) -> dict:
    """Time reversal ``nu(y)m(y) q(y,x) / (nu(x)m(x))`` of the biased kernel, computed slot by slot."""
    _check_vertex(cfg, v)
    g = cfg.graph
    mx = g.m(v)
    nx = _nu(g, v)
    dist = {}
    moved = 0
    for w in g.neighbors(v):
        if not cfg.is_open(v, w):
            continue
        ny = _nu(g, w)
        my = g.m(w)
        q_back = sqrt_rational(mx / my) / ny
        q = ny * my / (nx * mx) * q_back
        dist[w] = dist.get(w, 0) + q
        moved = moved + q
    stay = 1 - moved
    if stay:
        dist[v] = dist.get(v, 0) + stay
    return dist


@dataclass(frozen=True)
class Kernel:
    """A walk kernel bound to a configuration (``None`` for ``plain_srw``)."""

    kind: str
    graph: GraphFamily
    config: object = None
    reverse: bool = False

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ParameterError(f"unknown kernel kind {self.kind!r}; choose from {KERNEL_KINDS}")
        if self.kind != "plain_srw" and self.config is None:
            raise ParameterError(f"{self.kind} needs a configuration")

    def is_open(self, u, v) -> bool:
        return True if self.kind == "plain_srw" else self.config.is_open(u, v)

    def slot_probabilities(self, orbit: int) -> tuple:
        return slot_probabilities(self.graph, orbit, self.kind, self.reverse)

    def evaluate(self, v: VertexRef) -> dict:
        if self.kind != "plain_srw":
            _check_vertex(self.config, v)
        return _distribution(self.graph, v, self.slot_probabilities(v.orbit), self.is_open)

    def stationary_weight(self, v: VertexRef):
        """Unnormalized stationary weight: nu*m, deg, or mu*m*deg."""
        g = self.graph
        if self.kind == "sqrt_biased":
            return _nu(g, v) * g.m(v)
        if self.kind == "delayed_srw":
            return Fraction(g.orbit_degrees[v.orbit])
        from .tmtp import solve_mu

        return solve_mu(g).a[v.orbit] * g.m(v) * g.orbit_degrees[v.orbit]


def kernel(kind: str, cfg=None, graph: GraphFamily | None = None, reverse: bool = False) -> Kernel:
    g = graph if graph is not None else cfg.graph
    return Kernel(kind, g, cfg, reverse)


# ---------------------------------------------------------------------------
# stationarity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StationarityReport:
    stationarity: object
    detailed_balance: object
    n_vertices: int


def stationarity_check(cfg, kind: str = "sqrt_biased") -> StationarityReport:
    """Exact stationarity and detailed-balance deviations on the window interior.

    Edges leaving the interior are treated as closed, so the restricted kernel
    is a closed chain.  ``plain_srw`` ignores the configuration and is checked
    at interior vertices only; it is generally not reversible.
    """
    win = cfg.window
    g = win.graph
    interior = set(win.interior())
    inside = {win.vertices[i] for i in interior}
    if kind == "plain_srw":
        k = Kernel(kind, g)

        def is_open(u, v):
            return True

    else:
        k = Kernel(kind, g, cfg)

        def is_open(u, v):
            return u in inside and v in inside and cfg.is_open(u, v)

    pi = {}
    rows = {}
    for v in inside:
        pi[v] = k.stationary_weight(v)
        rows[v] = _distribution(g, v, k.slot_probabilities(v.orbit), is_open)
    inflow = {v: 0 for v in inside}
    for x, row in rows.items():
        for y, q in row.items():
            if y in inflow:
                inflow[y] = inflow[y] + pi[x] * q
    stat = 0
    for y in inside:
        if kind == "plain_srw" and any(w not in inside for w in g.neighbors(y)):
            continue
        stat = max(stat, abs(inflow[y] - pi[y]))
    db = 0
    for x, row in rows.items():
        for y, q in row.items():
            if y == x:
                continue
            back = rows[y].get(x, 0) if y in rows else None
            if back is None:
                continue
            db = max(db, abs(pi[x] * q - pi[y] * back))
    return StationarityReport(stat, db, len(inside))


# ---------------------------------------------------------------------------
# two-sided trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Positions ``w(n)`` for ``-len(backward)+1 <= n <= len(forward)-1``.

    ``forward[0] == backward[0] == start``.
    """

    forward: tuple
    backward: tuple
    seed: int
    kind: str
    truncated_forward: bool = False
    truncated_backward: bool = False

    @property
    def start(self) -> VertexRef:
        return self.forward[0]

    @property
    def truncated(self) -> bool:
        return self.truncated_forward or self.truncated_backward

    @property
    def lo(self) -> int:
        return -(len(self.backward) - 1)

    @property
    def hi(self) -> int:
        return len(self.forward) - 1

    def __getitem__(self, n: int) -> VertexRef:
        if not self.lo <= n <= self.hi:
            raise IndexError(f"index {n} outside [{self.lo}, {self.hi}]")
        return self.forward[n] if n >= 0 else self.backward[-n]

    def segment(self, m: int, n: int) -> list:
        """Positions for indices ``m <= k < n``."""
        if m < self.lo or n - 1 > self.hi:
            raise IndexError(f"[{m}, {n}) outside [{self.lo}, {self.hi}]")
        back = [self.backward[-k] for k in range(m, min(n, 0))]
        return back + list(self.forward[max(m, 0) : max(n, 0)])

    def indexed(self):
        for n in range(self.lo, self.hi + 1):
            yield n, self[n]

    def to_csv(self, g: GraphFamily) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "orbit", "level", "address"])
        for n, v in self.indexed():
            w.writerow([n, v.orbit, v.level, json.dumps(g.encode_address(v.address))])
        return buf.getvalue()


def _run(g, start, steps, k: Kernel, rng, stop):
    draws = rng.random(steps)
    # slot choice per orbit, vectorized; index == degree means "stay"
    slots = [
        np.searchsorted(np.cumsum([float(q) for q in k.slot_probabilities(orb)]), draws, side="right").tolist()
        for orb in range(g.orbit_count)
    ]
    always_open = k.kind == "plain_srw"
    neighbor = g.neighbor
    degrees = g.orbit_degrees
    pos = [start]
    v = start
    for t in range(steps):
        if stop is not None and stop(v):
            return tuple(pos), True
        s = slots[v.orbit][t]
        if s < degrees[v.orbit]:
            w = neighbor(v, s)
            if always_open or k.config.is_open(v, w):
                v = w
        pos.append(v)
    return tuple(pos), False


def simulate_two_sided(
    cfg,
    start: VertexRef,
    steps_forward: int,
    steps_backward: int,
    seed: int,
    kind: str = "sqrt_biased",
    graph: GraphFamily | None = None,
) -> Trajectory:
    """Forward steps follow the kernel, backward steps its time reversal.

    The two halves use independent Philox streams ``[seed, 0]`` and
    ``[seed, 1]``.  On a windowed config the walk halts at its first boundary
    contact and the trajectory is flagged as truncated.
    """
    if steps_forward < 0 or steps_backward < 0:
        raise ParameterError("step counts must be nonnegative")
    g = graph if graph is not None else cfg.graph
    fwd = Kernel(kind, g, cfg)
    bwd = Kernel(kind, g, cfg, reverse=True)
    if isinstance(cfg, Config):
        win = cfg.window
        if start not in win.index or win.is_boundary(start):
            raise PreconditionError("start must be an interior vertex of the window")
        stop = win.is_boundary
    else:
        stop = None
    f, tf = _run(g, start, steps_forward, fwd, stream_generator(seed, 0), stop)
    b, tb = _run(g, start, steps_backward, bwd, stream_generator(seed, 1), stop)
    return Trajectory(f, b, seed, kind, tf, tb)


def frequency(traj: Trajectory, cluster, m: int, n: int) -> Fraction:
    """Fraction of indices ``k`` in ``[m, n)`` with ``w(k)`` in ``cluster`` (a set or predicate)."""
    if not m < n:
        raise PreconditionError("frequency needs m < n")
    if m < traj.lo or n - 1 > traj.hi:
        raise PreconditionError(f"window [{m}, {n}) outside trajectory range [{traj.lo}, {traj.hi}]")
    member = cluster if callable(cluster) else cluster.__contains__
    hits = sum(1 for v in traj.segment(m, n) if member(v))
    return Fraction(hits, n - m)


# ---------------------------------------------------------------------------
# effective conductance
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Network:
    """Weighted graph on ``0..n_nodes-1``; node 0 is the source, ``sinks`` are wired together."""

    n_nodes: int
    edges: np.ndarray
    conductance: np.ndarray
    sinks: np.ndarray


@dataclass(frozen=True)
class ConductanceResult:
    value: float
    iterations: int
    residual: float


def effective_conductance(net: Network, tol: float = CG_TOLERANCE, maxiter: int = 100_000):
    """Conductance between node 0 (voltage 1) and the wired sinks (voltage 0)."""
    n = net.n_nodes
    sinks = np.zeros(n, dtype=bool)
    sinks[net.sinks] = True
    if sinks[0]:
        raise PreconditionError("the source must not be a sink")
    if not sinks.any():
        return ConductanceResult(0.0, 0, 0.0)
    a, b = net.edges[:, 0], net.edges[:, 1]
    c = np.asarray(net.conductance, dtype=np.float64)
    keep = ~(sinks[a] & sinks[b]) & (a != b)
    a, b, c = a[keep], b[keep], c[keep]
    W = sp.coo_matrix((np.concatenate([c, c]), (np.concatenate([a, b]), np.concatenate([b, a]))), shape=(n, n)).tocsr()
    deg = np.asarray(W.sum(axis=1)).ravel()
    free = np.flatnonzero(~sinks)[1:]
    if len(free) == 0:
        return ConductanceResult(float(deg[0]), 0, 0.0)
    L = (sp.diags(deg[free]) - W[free][:, free]).tocsr()
    rhs = np.asarray(W[free][:, [0]].todense()).ravel()
    count = [0]

    def cb(_):
        count[0] += 1

    M = sp.diags(1.0 / deg[free])
    x, info = cg(L, rhs, rtol=0.0, atol=tol * 1e-3, maxiter=maxiter, M=M, callback=cb)
    residual = float(np.abs(L @ x - rhs).max()) if len(rhs) else 0.0
    if info != 0 or residual > tol:
        raise NumericError(f"conductance solve did not converge (residual {residual:.3e})", residual)
    volt = np.zeros(n)
    volt[0] = 1.0
    volt[free] = x
    row = W.getrow(0)
    value = float(np.sum(row.data * (1.0 - volt[row.indices])))
    return ConductanceResult(value, count[0], residual)


def path_network(R: int) -> Network:
    """Half-line 0-1-...-R with unit conductances; sink at R."""
    idx = np.arange(R)
    return Network(R + 1, np.stack([idx, idx + 1], axis=1), np.ones(R), np.array([R]))


def rooted_tree_network(branching: int, depth: int) -> Network:
    """Complete rooted tree in heap order; the root has ``branching`` children; sinks are the leaves."""
    if depth < 1:
        raise ParameterError("depth must be at least 1")
    n = (branching ** (depth + 1) - 1) // (branching - 1)
    child = np.arange(1, n)
    parent = (child - 1) // branching
    first_leaf = (branching ** depth - 1) // (branching - 1)
    return Network(n, np.stack([parent, child], axis=1), np.ones(n - 1), np.arange(first_leaf, n))


def _conductance_value(g, u, v, weights):
    if weights == "unit":
        return 1.0
    if weights == "sqrt_m":
        return float(sqrt_rational(g.m(u) * g.m(v)))
    raise ParameterError(f"unknown conductance weights {weights!r}")


def _network_from(g, order, dist, edges, R, weights):
    index = {v: i for i, v in enumerate(order)}
    e = np.array([(index[u], index[v]) for u, v in edges], dtype=np.int64).reshape(-1, 2)
    c = np.array([_conductance_value(g, u, v, weights) for u, v in edges], dtype=np.float64)
    sinks = np.array([i for i, v in enumerate(order) if dist[v] == R], dtype=np.int64)
    return Network(len(order), e, c, sinks)


def cluster_network(cfg: Config, o: VertexRef, R: int, weights: str = "unit") -> Network:
    """Open cluster of ``o`` inside B(o, R) of a windowed config; sinks are at distance R.

    Distances are measured inside the window, so the window must contain B(o, R).
    """
    win = cfg.window
    g = win.graph
    if o not in win.index:
        raise PreconditionError(f"{o} is not in the window")
    from .percolation import _window_distances

    wd = _window_distances(win, win.index[o])
    if win.kind == "ball" and o == win.center and R > win.extent["radius"]:
        raise PreconditionError("R exceeds the window radius")
    dist = {o: 0}
    order = [o]
    q = deque([win.index[o]])
    while q:
        i = q.popleft()
        for j, e in win.adjacency[i]:
            v = win.vertices[j]
            if cfg.open[e] and wd[j] <= R and v not in dist:
                dist[v] = int(wd[j])
                order.append(v)
                q.append(j)
    edges = [
        (win.vertices[i], win.vertices[j])
        for (i, j), e in zip(win.edges.tolist(), range(win.n_edges))
        if cfg.open[e] and win.vertices[i] in dist and win.vertices[j] in dist
    ]
    return _network_from(g, order, dist, edges, R, weights)


def tree_cluster_network(cfg, o: VertexRef, R: int, weights: str = "unit") -> Network:
    """Open cluster of ``o`` within distance R on a tree family, explored lazily."""
    g = cfg.graph
    dist = tree_cluster(cfg, o, R)
    order = sorted(dist, key=lambda v: dist[v])
    order.remove(o)
    order.insert(0, o)
    edges = []
    for v in order[1:]:
        # on a tree the cluster parent is the unique neighbor one step closer
        for w in g.neighbors(v):
            if dist.get(w) == dist[v] - 1:
                edges.append((w, v))
                break
    return _network_from(g, order, dist, edges, R, weights)


def conductance_rows(build, radii) -> list:
    """``[{"R", "C_eff", "iterations", "residual"}]`` for ``build(R) -> Network``."""
    rows = []
    for R in radii:
        res = effective_conductance(build(R))
        rows.append({"R": R, "C_eff": res.value, "iterations": res.iterations, "residual": res.residual})
    return rows



# ---------------------------------------------------------------------------
# forward/backward frequency
# ---------------------------------------------------------------------------


def tree_cluster_predicate(cfg, o: VertexRef):
    """Membership test for the open cluster of ``o`` on a tree family.

    ``v`` belongs iff its neighbor one step toward ``o`` does and the edge
    between them is open; answers are memoized along the way.
    """
    g = cfg.graph
    if not g.is_tree:
        raise ParameterError(f"{g.kind} is not a tree")
    if o != g.origin:
        raise ParameterError("cluster predicates are rooted at the family origin")
    memo = {o: True}

    def member(v):
        ans = memo.get(v)
        if ans is not None:
            return ans
        path = []
        while ans is None:
            up = g.step_toward_origin(v)
            path.append((v, up))
            v = up
            ans = memo.get(v)
        for w, up in reversed(path):
            ans = ans and cfg.is_open(w, up)
            memo[w] = ans
        return ans

    return member


@dataclass(frozen=True)
class FrequencyPair:
    forward: Fraction
    backward: Fraction

    @property
    def gap(self) -> float:
        return float(abs(self.forward - self.backward))


def frequency_pair(cfg, n: int, seed: int, kind: str = "plain_srw") -> FrequencyPair:
    """Visit frequencies of the origin's cluster over ``[0, n)`` and ``[-n, 0)``."""
    g = cfg.graph
    o = g.origin
    traj = simulate_two_sided(cfg, o, n, n, seed, kind=kind)
    member = tree_cluster_predicate(cfg, o)
    return FrequencyPair(frequency(traj, member, 0, n), frequency(traj, member, -n, 0))
