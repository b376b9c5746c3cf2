"""Heaviness thresholds of oriented trees and slab spectral scans.

The component of the origin inside ``n + 1`` consecutive levels of the
(1, n1, n2)-oriented tree is a periodic tree.  Its vertices are typed by
``(level i, entry)`` where ``entry`` is the edge type used to arrive
(``u`` unoriented, ``f`` forward from below, ``b`` backward from above).
Child counts per type:

======  ===========  ====================  ====================
entry   unoriented   forward (if i < n)    backward (if i > 0)
======  ===========  ====================  ====================
u       0            n1                    n2
f       1            n1                    n2 - 1
b       1            n1 - 1                n2
root    1            n1                    n2
======  ===========  ====================  ====================

The growth rate of the periodic tree is the Perron root of the type matrix,
and its reciprocal is the critical probability of the slab.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .errors import ConstructionError, NumericError, ParameterError
from .graphs import OrientedTree, slab_component

__all__ = [
    "SlabStateGraph",
    "SpectralRadius",
    "SpectralReport",
    "ThresholdValue",
    "growth_estimate",
    "ph_closed_form",
    "ph_limit_scan",
    "pu_lower_bound",
    "scan_to_csv",
    "slab_spectral_radius",
    "slab_state_graph",
]

ENTRY_TYPES = ("u", "f", "b")
ROOT = "root"


@dataclass(frozen=True)
class ThresholdValue:
    value: float
    exact: Fraction | None = None


def ph_closed_form(n1: int, n2: int) -> ThresholdValue:
    """Heaviness threshold of the (1, n1, n2)-oriented tree; exact ``1/(2k)`` when n1 = n2 = k."""
    if n1 < 1 or n2 < 1:
        raise ParameterError("n1 and n2 must be at least 1")
    if n1 == n2:
        # discriminant is a perfect square: (2k+1)^2 - 8k = (2k-1)^2
        return ThresholdValue(1 / (2 * n1), Fraction(1, 2 * n1))
    s = math.sqrt(n1 * n2)
    tot = n1 + n2
    return ThresholdValue((1 + 2 * s - math.sqrt((2 * s + 1) ** 2 - 4 * tot)) / (2 * tot))


def pu_lower_bound(b: int) -> float:
    """Cogrowth lower bound for the uniqueness threshold of (b+1)-regular tree times Z."""
    if b < 2:
        raise ParameterError("b must be at least 2")
    r = math.sqrt(b)
    return 1.0 / (r + 1.0 + math.sqrt(2.0 * r - 1.0))


# ---------------------------------------------------------------------------
# state graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SlabStateGraph:
    """Type graph of the slab tree; ``counts[s][t]`` children of type t under a type-s vertex."""

    n1: int
    n2: int
    n_levels: int
    states: tuple
    counts: dict = field(repr=False)

    @property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    def matrix(self) -> sp.csr_matrix:
        """Count matrix over the non-root states."""
        idx = {s: i for i, s in enumerate(self.states[1:])}
        rows, cols, vals = [], [], []
        for s, kids in self.counts.items():
            if s == ROOT:
                continue
            for t, c in kids.items():
                rows.append(idx[s])
                cols.append(idx[t])
                vals.append(c)
        N = len(idx)
        return sp.csr_matrix((vals, (rows, cols)), shape=(N, N), dtype=np.float64)

    def root_vector(self) -> np.ndarray:
        idx = {s: i for i, s in enumerate(self.states[1:])}
        r = np.zeros(len(idx))
        for t, c in self.counts[ROOT].items():
            r[idx[t]] += c
        return r

    def sphere_sizes(self, depth: int) -> list:
        """Number of slab-tree vertices at each distance 0..depth from the root (exact ints)."""
        sizes = [1]
        cur = dict(self.counts[ROOT])
        for _ in range(depth):
            sizes.append(sum(cur.values()))
            nxt = {}
            for s, c in cur.items():
                for t, k in self.counts[s].items():
                    nxt[t] = nxt.get(t, 0) + c * k
            cur = nxt
        return sizes[: depth + 1]

    def row_sums(self) -> list:
        return [sum(self.counts[s].values()) for s in self.states[1:]]


def _children(n1, n2, n, state):
    if state == ROOT:
        i, nu, nf, nb = 0, 1, n1, n2
    else:
        i, entry = state
        nu = 0 if entry == "u" else 1
        nf = n1 - (entry == "b")
        nb = n2 - (entry == "f")
    out = {}
    if nu:
        out[(i, "u")] = nu
    if i < n and nf > 0:
        out[(i + 1, "f")] = nf
    if i > 0 and nb > 0:
        out[(i - 1, "b")] = nb
    return out


def slab_state_graph(n1: int, n2: int, n: int, validate_depth: int | None = None) -> SlabStateGraph:
    """States reachable from the root at level 0 of levels ``0..n``.

    With ``validate_depth`` the sphere sizes are compared against a direct BFS
    of the slab component; any mismatch raises :class:`ConstructionError`.
    """
    if n < 0:
        raise ParameterError("n must be nonnegative")
    if n1 < 1 or n2 < 1:
        raise ParameterError("n1 and n2 must be at least 1")
    counts = {}
    order = [ROOT]
    stack = [ROOT]
    while stack:
        s = stack.pop()
        kids = _children(n1, n2, n, s)
        counts[s] = kids
        for t in kids:
            if t not in counts and t not in stack:
                order.append(t)
                stack.append(t)
    states = (ROOT,) + tuple(sorted(order[1:], key=lambda s: (s[0], ENTRY_TYPES.index(s[1]))))
    sg = SlabStateGraph(n1, n2, n, states, counts)
    if validate_depth is not None:
        want = sg.sphere_sizes(validate_depth)
        got = direct_sphere_sizes(n1, n2, n, validate_depth)
        if want != got:
            raise ConstructionError(f"state graph spheres {want} disagree with slab BFS {got}")
    return sg


def direct_sphere_sizes(n1: int, n2: int, n: int, depth: int) -> list:
    g = OrientedTree(n1, n2)
    win = slab_component(g, g.origin, n, depth)
    return np.bincount(win.dist, minlength=depth + 1).tolist()


# ---------------------------------------------------------------------------
# spectral radius
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralRadius:
    value: float
    lower: float
    upper: float
    iterations: int
    degenerate: bool = False

    @property
    def inv(self) -> float:
        return 1.0 / self.value


def slab_spectral_radius(
    sg: SlabStateGraph, tol: float = 1e-12, max_iter: int = 1_000_000, x0=None
) -> SpectralRadius:
    """Perron root by power iteration on ``A + I``, stopped by the Collatz-Wielandt bracket.

    For ``n = 0`` the slab components are finite; the result is flagged
    degenerate and reported as growth 1 (critical probability 1).
    """
    A = sg.matrix()
    if sg.n_levels == 0 or A.nnz == 0:
        return SpectralRadius(1.0, 1.0, 1.0, 0, degenerate=True)
    # shift makes the irreducible matrix primitive
    B = (A + sp.identity(A.shape[0], format="csr")).tocsr()
    x = np.ones(A.shape[0]) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    x /= x.max()
    lo, hi = 0.0, math.inf
    for it in range(1, max_iter + 1):
        y = B @ x
        r = y / x
        lo, hi = float(r.min()) - 1.0, float(r.max()) - 1.0
        x = y / y.max()
        if hi - lo <= tol * hi:
            break
    else:
        raise NumericError(f"power iteration stalled with bracket [{lo}, {hi}]", hi - lo)
    return SpectralRadius(0.5 * (lo + hi), lo, hi, it)


def growth_estimate(sg: SlabStateGraph, depth: int = 18) -> float:
    """Ball-growth ratio ``|B_depth| / |B_(depth-1)|`` of the slab tree."""
    s = np.cumsum(sg.sphere_sizes(depth), dtype=np.float64)
    return float(s[-1] / s[-2])


@dataclass(frozen=True)
class SpectralReport:
    n1: int
    n2: int
    rows: tuple
    closed_form: float
    monotone: bool
    states: tuple = ()

    @property
    def terminal_gap(self) -> float:
        return self.rows[-1][2] - self.closed_form


def ph_limit_scan(
    n1: int,
    n2: int,
    n_max: int,
    tol: float = 1e-12,
    bfs_depth: int = 18,
    ns=None,
) -> SpectralReport:
    """Rows ``(n, lambda_star, 1/lambda_star, bfs_growth)`` for ``n = 1..n_max``.

    Raises :class:`NumericError` if ``1/lambda_star`` increases by more than 1e-9.
    """
    if n_max < 2 and ns is None:
        raise ParameterError("n_max must be at least 2")
    ns = list(range(1, n_max + 1)) if ns is None else sorted(ns)
    cf = ph_closed_form(n1, n2).value
    rows = []
    states = []
    for n in ns:
        sg = slab_state_graph(n1, n2, n)
        lam = slab_spectral_radius(sg, tol=tol)
        rows.append((n, lam.value, lam.inv, growth_estimate(sg, bfs_depth)))
        states.append(len(sg.states) - 1)
    inv = [r[2] for r in rows]
    bad = [(a, b) for a, b in zip(inv, inv[1:]) if b > a + 1e-9]
    if bad:
        raise NumericError(f"1/lambda* increased along the scan: {bad[0]}")
    return SpectralReport(n1, n2, tuple(rows), cf, True, tuple(states))


def scan_to_csv(rep: SpectralReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n1", "n2", "n", "states", "lambda_star", "inv_lambda", "bfs_estimate", "closed_form", "gap"])
    for (n, lam, inv, bfs), k in zip(rep.rows, rep.states):
        w.writerow([rep.n1, rep.n2, n, k, repr(lam), repr(inv), repr(bfs), repr(rep.closed_form), repr(inv - rep.closed_form)])
    return buf.getvalue()
