"""Bernoulli bond percolation on windows and on lazily evaluated infinite graphs.

Edge ``e = {u, v}`` is open in trial ``t`` iff ``uniform(seed, t, edge_key(u, v)) < p``
(see :mod:`perclab.rng`).  The key depends only on the edge itself, so a
windowed :class:`Config` is the restriction of the infinite configuration seen
by :class:`LazyConfig`, and configs at different ``p`` are monotonically
coupled through the same uniforms.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ParameterError, PreconditionError, UnsupportedFamilyError
from .graphs import (
    FixedEndTree,
    GraphFamily,
    OrbitWeights,
    VertexRef,
    Window,
    ball,
    build_family,
    modular_ratio,
    slab_component,
)
from .rng import edge_key, open_mask, uniform, uniforms

__all__ = [
    "ClusterDecomposition",
    "ClusterStats",
    "Config",
    "DecayRow",
    "DecorationSample",
    "LazyConfig",
    "RayDecoration",
    "clusters",
    "config_from_dict",
    "config_to_dict",
    "connectivity_estimate",
    "decay_curve",
    "decay_to_csv",
    "ray_decoration_sample",
    "sample_config",
    "tilted_mass",
    "tree_cluster",
]

CONFIG_FORMAT_VERSION = 1
TRIAL_CHUNK = 2048


def _check_p(p):
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ParameterError(f"p must lie in [0, 1], got {p}")


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Config:
    """Open-edge bitset over ``window.edges``.

    ``uniforms`` keeps the per-edge coupling variables so :meth:`at` can move
    to another ``p`` without resampling.  ``p`` is ``None`` for configurations
    that are not Bernoulli samples.
    """

    window: Window
    p: float | None
    seed: int
    open: np.ndarray
    trial: int = 0
    uniforms: np.ndarray | None = field(default=None, repr=False)

    @property
    def graph(self) -> GraphFamily:
        return self.window.graph

    @property
    def n_open(self) -> int:
        return int(self.open.sum())

    def at(self, p: float) -> "Config":
        _check_p(p)
        if self.uniforms is None:
            raise PreconditionError("config carries no coupling variables")
        return Config(self.window, p, self.seed, self.uniforms < p, self.trial, self.uniforms)

    def is_open(self, u: VertexRef, v: VertexRef) -> bool:
        win = self.window
        if u not in win.index or v not in win.index:
            raise PreconditionError(f"edge {u}-{v} leaves the window")
        e = win.find_edge(u, v)
        return e is not None and bool(self.open[e])


def sample_config(win: Window, p: float, seed: int, trial: int = 0) -> Config:
    _check_p(p)
    u = uniforms(seed, [trial], win.edge_keys)[:, 0]
    return Config(win, p, seed, u < p, trial, u)


@dataclass(frozen=True)
class LazyConfig:
    """The same Bernoulli configuration, evaluated edge by edge on the infinite graph."""

    graph: GraphFamily
    p: float
    seed: int
    trial: int = 0

    def __post_init__(self):
        _check_p(self.p)

    def is_open(self, u: VertexRef, v: VertexRef) -> bool:
        g = self.graph
        k = edge_key(g.vertex_key(u), g.vertex_key(v))
        return uniform(self.seed, self.trial, k) < self.p


# ---------------------------------------------------------------------------
# clusters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterStats:
    size: int
    boundary_touch: bool
    min_level: int
    max_level: int


@dataclass(frozen=True, eq=False)
class ClusterDecomposition:
    """Union-find result; every vertex points at its cluster's smallest index."""

    window: Window
    parent: np.ndarray
    stats: dict

    @property
    def cluster_ids(self) -> np.ndarray:
        return self.parent

    @property
    def n_clusters(self) -> int:
        return len(self.stats)

    def root(self, v: VertexRef) -> int:
        return int(self.parent[self.window.index[v]])

    def connected(self, u: VertexRef, v: VertexRef) -> bool:
        return self.root(u) == self.root(v)

    def members(self, v: VertexRef) -> list:
        r = self.root(v)
        return [int(i) for i in np.flatnonzero(self.parent == r)]


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def clusters(cfg: Config) -> ClusterDecomposition:
    win = cfg.window
    n = len(win)
    parent = list(range(n))
    for e in np.flatnonzero(cfg.open):
        i, j = win.edges[e]
        ri, rj = _find(parent, int(i)), _find(parent, int(j))
        if ri != rj:
            # smaller index wins so roots are canonical
            if ri < rj:
                parent[rj] = ri
            else:
                parent[ri] = rj
    roots = np.array([_find(parent, i) for i in range(n)], dtype=np.int64)
    levels = np.array([v.level for v in win.vertices], dtype=np.int64)
    on_boundary = np.zeros(n, dtype=bool)
    on_boundary[list(win.boundary)] = True
    stats = {}
    order = np.argsort(roots, kind="stable")
    ids, starts, sizes = np.unique(roots[order], return_index=True, return_counts=True)
    for r, s, c in zip(ids, starts, sizes):
        idx = order[s : s + c]
        stats[int(r)] = ClusterStats(
            size=int(c),
            boundary_touch=bool(on_boundary[idx].any()),
            min_level=int(levels[idx].min()),
            max_level=int(levels[idx].max()),
        )
    return ClusterDecomposition(win, roots, stats)


# ---------------------------------------------------------------------------
# two-point connectivity
# ---------------------------------------------------------------------------


def _edge_sweep_order(win: Window, src: int) -> np.ndarray:
    dist = _window_distances(win, src)
    lo = np.minimum(dist[win.edges[:, 0]], dist[win.edges[:, 1]])
    return np.argsort(lo, kind="stable")


def _window_distances(win: Window, src: int) -> np.ndarray:
    if src == 0:
        return win.dist
    dist = np.full(len(win), -1, dtype=np.int64)
    dist[src] = 0
    q = deque([src])
    while q:
        i = q.popleft()
        for j, _ in win.adjacency[i]:
            if dist[j] < 0:
                dist[j] = dist[i] + 1
                q.append(j)
    return dist


def _reach_chunk(win, order, p, seed, src, targets, trials):
    """Number of trials in ``trials`` where each target is joined to ``src``."""
    opened = open_mask(seed, trials, win.edge_keys, p)
    reach = np.zeros((len(win), len(trials)), dtype=bool)
    reach[src] = True
    edges = win.edges
    while True:
        before = int(reach.sum())
        for e in order:
            i, j = edges[e]
            o = opened[e]
            reach[j] |= reach[i] & o
            reach[i] |= reach[j] & o
        if int(reach.sum()) == before:
            break
    return reach[targets].sum(axis=1)


def _reach_counts(win, p, seed, src, targets, trials, workers):
    _check_p(p)
    if trials < 1:
        raise ParameterError("trials must be positive")
    order = _edge_sweep_order(win, src)
    chunks = [np.arange(s, min(s + TRIAL_CHUNK, trials)) for s in range(0, trials, TRIAL_CHUNK)]

    def run(ch):
        return _reach_chunk(win, order, p, seed, src, targets, ch)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(ch) for ch in chunks]
    return np.sum(parts, axis=0)


def _estimate(count, trials):
    ph = count / trials
    return ph, math.sqrt(ph * (1.0 - ph) / trials)


def connectivity_estimate(
    g: GraphFamily,
    p: float,
    x: VertexRef,
    y: VertexRef,
    trials: int,
    seed: int,
    margin: int = 1,
    workers: int = 1,
):
    """Estimate P_p(x <-> y) inside B(x, d(x,y) + margin); returns ``(p_hat, se)``.

    Paths leaving the window are ignored, so this is a lower-bound estimator;
    on trees it is exact in expectation.
    """
    if trials < 100:
        raise PreconditionError("connectivity estimates need at least 100 trials")
    d = g.distance(x, y)
    win = ball(g, x, d + margin)
    count = _reach_counts(win, p, seed, 0, [win.index[y]], trials, workers)[0]
    return _estimate(int(count), trials)


@dataclass(frozen=True)
class DecayRow:
    target: VertexRef
    distance: int
    p_hat: float
    se: float
    n_trials: int
    running_min: float


def decay_curve(
    g: GraphFamily,
    p: float,
    o: VertexRef,
    targets,
    trials: int,
    seed: int,
    margin: int = 1,
    workers: int = 1,
) -> list:
    """Connectivity from ``o`` to each target, all targets read off the same trials."""
    targets = list(targets)
    if not targets:
        return []
    dists = [g.distance(o, t) for t in targets]
    if any(b < a for a, b in zip(dists, dists[1:])):
        raise PreconditionError("targets must be sorted by distance from o")
    win = ball(g, o, max(dists) + margin)
    counts = _reach_counts(win, p, seed, 0, [win.index[t] for t in targets], trials, workers)
    rows = []
    running = 1.0
    for t, d, c in zip(targets, dists, counts):
        ph, se = _estimate(int(c), trials)
        running = min(running, ph)
        rows.append(DecayRow(t, d, ph, se, trials, running))
    return rows


def decay_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["distance", "p_hat", "se", "n_trials", "running_min"])
    for r in rows:
        w.writerow([r.distance, repr(r.p_hat), repr(r.se), r.n_trials, repr(r.running_min)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# tilted cluster mass
# ---------------------------------------------------------------------------


def tree_cluster(cfg, o: VertexRef, radius: int) -> dict:
    """Open cluster of ``o`` truncated at graph distance ``radius`` on a tree family.

    Works with anything exposing ``graph`` and ``is_open``; returns ``{vertex: distance}``.
    """
    g = cfg.graph
    if not g.is_tree:
        raise UnsupportedFamilyError(f"{g.kind} is not a tree; use a windowed config")
    dist = {o: 0}
    q = deque([o])
    while q:
        v = q.popleft()
        dv = dist[v]
        if dv == radius:
            continue
        for w in g.neighbors(v):
            if w not in dist and cfg.is_open(v, w):
                dist[w] = dv + 1
                q.append(w)
    return dist


def tilted_mass(cfg, o: VertexRef, radii, weights: OrbitWeights | None = None) -> list:
    """Partial sums of Delta(o, x) over the cluster of ``o`` within each radius.

    ``cfg`` is a windowed :class:`Config` or, for tree families, a :class:`LazyConfig`.
    """
    from .tmtp import solve_mu

    radii = [int(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])) or (radii and radii[0] < 0):
        raise ParameterError("radii must be increasing and nonnegative")
    g = cfg.graph
    w = weights if weights is not None else solve_mu(g)
    if isinstance(cfg, Config):
        win = cfg.window
        if o not in win.index:
            raise PreconditionError(f"{o} is not in the window")
        src = win.index[o]
        if win.kind == "ball" and o == win.center and radii and radii[-1] > win.extent["radius"]:
            raise PreconditionError("radius exceeds the window radius")
        dist = _window_distances(win, src)
        dec = clusters(cfg)
        root = dec.parent[src]
        members = {win.vertices[i]: int(dist[i]) for i in np.flatnonzero(dec.parent == root)}
    else:
        members = tree_cluster(cfg, o, radii[-1] if radii else 0)
    classes = Counter((d, v.orbit, v.level) for v, d in members.items())
    by_dist = {}
    for (d, orbit, level), c in classes.items():
        rep = VertexRef(orbit, level, None)
        by_dist[d] = by_dist.get(d, Fraction(0)) + c * modular_ratio(g, w, o, rep)
    out = []
    total = Fraction(0)
    r_prev = -1
    for r in radii:
        total += sum((m for d, m in by_dist.items() if r_prev < d <= r), Fraction(0))
        out.append(total)
        r_prev = r
    return out


# ---------------------------------------------------------------------------
# ray decoration process on the fixed-end tree
# ---------------------------------------------------------------------------


def _child_index(v: VertexRef) -> int:
    return v.address[-1] if v.address else 0


@dataclass(frozen=True)
class RayDecoration:
    """Lazy ray process on a fixed-end tree.

    ``omega1`` keeps one uniformly chosen child edge per vertex, so its clusters
    are rays going down from a top vertex.  A remaining child edge below ``x``
    is added to ``omega2`` with probability ``2**-(n+1)`` where ``n`` is the
    distance from ``x`` up to the top of its ``omega1`` ray.
    """

    graph: FixedEndTree
    seed: int
    trial: int = 0

    def __post_init__(self):
        if not isinstance(self.graph, FixedEndTree):
            raise UnsupportedFamilyError("the ray decoration lives on fixed_end_tree only")

    def chosen_child(self, v: VertexRef) -> int:
        g = self.graph
        u = uniform(self.seed, 2 * self.trial, g.vertex_key(v))
        return min(int(u * g.b), g.b - 1)

    def in_omega1(self, parent: VertexRef, child: VertexRef) -> bool:
        return self.chosen_child(parent) == _child_index(child)

    def ray_height(self, x: VertexRef, stop=None) -> tuple:
        """``(n, left)``: steps from ``x`` to its ray top, and whether ``stop(v)`` fired on the way."""
        g = self.graph
        n = 0
        left = False
        while True:
            up = g.parent(x)
            if stop is not None and stop(up):
                left = True
            if self.chosen_child(up) != _child_index(x):
                return n, left
            x = up
            n += 1

    def _split(self, u, v):
        if u.level == v.level + 1:
            return u, v
        if v.level == u.level + 1:
            return v, u
        raise ParameterError(f"{u} and {v} are not adjacent")

    def is_open_omega1(self, u: VertexRef, v: VertexRef) -> bool:
        return self.in_omega1(*self._split(u, v))

    def is_open(self, u: VertexRef, v: VertexRef) -> bool:
        """Whether ``{u, v}`` is open in omega2."""
        x, y = self._split(u, v)
        if self.in_omega1(x, y):
            return True
        n, _ = self.ray_height(x)
        k = edge_key(self.graph.vertex_key(x), self.graph.vertex_key(y))
        return uniform(self.seed, 2 * self.trial + 1, k) < 0.5 ** (n + 1)


@dataclass(frozen=True, eq=False)
class DecorationSample:
    """Window restriction of a :class:`RayDecoration`.

    ``height[e]`` is ``n`` for edges outside omega1 and -1 on omega1;
    ``censored[e]`` marks edges whose ray top lies outside the window.
    """

    omega1: Config
    omega2: Config
    height: np.ndarray
    censored: np.ndarray


def ray_decoration_sample(win: Window, seed: int, trial: int = 0) -> DecorationSample:
    proc = RayDecoration(win.graph, seed, trial)
    E = win.n_edges
    om1 = np.zeros(E, dtype=bool)
    om2 = np.zeros(E, dtype=bool)
    height = np.full(E, -1, dtype=np.int64)
    censored = np.zeros(E, dtype=bool)
    outside = lambda v: v not in win.index  # noqa: E731
    for e, (i, j) in enumerate(win.edges):
        x, y = proc._split(win.vertices[i], win.vertices[j])
        if proc.in_omega1(x, y):
            om1[e] = om2[e] = True
            continue
        n, left = proc.ray_height(x, stop=outside)
        height[e] = n
        censored[e] = left
        om2[e] = proc.is_open(x, y)
    return DecorationSample(
        Config(win, None, seed, om1, trial),
        Config(win, None, seed, om2, trial),
        height,
        censored,
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def _rle(bits: np.ndarray) -> list:
    """Run lengths of alternating values, starting with a (possibly empty) closed run."""
    runs = []
    cur = False
    count = 0
    for b in bits.tolist():
        if b == cur:
            count += 1
        else:
            runs.append(count)
            cur = b
            count = 1
    runs.append(count)
    return runs


def _unrle(runs, n) -> np.ndarray:
    out = np.zeros(n, dtype=bool)
    pos = 0
    val = False
    for r in runs:
        out[pos : pos + r] = val
        pos += r
        val = not val
    if pos != n:
        raise ParameterError(f"run lengths cover {pos} edges, window has {n}")
    return out


def config_to_dict(cfg: Config) -> dict:
    win = cfg.window
    g = win.graph
    return {
        "format": "perclab.config",
        "version": CONFIG_FORMAT_VERSION,
        "family": g.kind,
        "params": g.params(),
        "window": {
            "kind": win.kind,
            "center": g.vertex_to_json(win.center),
            "extent": dict(win.extent),
        },
        "p": cfg.p,
        "seed": cfg.seed,
        "trial": cfg.trial,
        "n_edges": win.n_edges,
        "open_rle": _rle(cfg.open),
    }


def config_from_dict(obj: dict) -> Config:
    if obj.get("format") != "perclab.config" or obj.get("version") != CONFIG_FORMAT_VERSION:
        raise ParameterError("not a version-1 perclab config document")
    g = build_family(obj["family"], **obj["params"])
    w = obj["window"]
    center = g.vertex_from_json(w["center"])
    if w["kind"] == "ball":
        win = ball(g, center, int(w["extent"]["radius"]))
    else:
        win = slab_component(g, center, int(w["extent"]["n_levels"]), int(w["extent"]["depth"]))
    bits = _unrle(obj["open_rle"], win.n_edges)
    if obj["p"] is None:
        return Config(win, None, obj["seed"], bits, obj["trial"])
    cfg = sample_config(win, obj["p"], obj["seed"], obj["trial"])
    if not np.array_equal(cfg.open, bits):
        raise ParameterError("stored bits do not match the regenerated configuration")
    return cfg
