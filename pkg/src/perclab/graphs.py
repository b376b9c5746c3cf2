"""Lazy canonical descriptors of the infinite graph families.

Every family exposes the same small surface: ``neighbors(v)`` in a fixed slot
order, orbit labels, a level function and a rational modular base ``q`` such
that the stabilizer measure of a vertex is ``orbit_m[orbit] * q**level``.

Addressing
----------
Fixed-end trees (``b`` children per vertex) use horocyclic coordinates.  Let
``o = v_0, v_1, v_2, ...`` be the ray from the origin towards the fixed end,
with ``v_j`` declared to be child 0 of ``v_{j+1}``.  A vertex at level ``l`` is
``(l, digits)``: the child indices read downwards from the lowest ray vertex
``v_J`` above it, so ``J = l + len(digits) >= 0``.  Canonical form forbids a
leading 0 digit when ``J > 0`` (that vertex would hang off ``v_{J-1}``).
Levels increase towards the end and ``m(parent)/m(child) = b``.

Oriented trees use the reduced word of the path from the origin.  Letter 0 is
the unoriented edge, ``1..n1`` the outgoing edges and ``n1+1..n1+n2`` the
incoming ones.  After arriving along a letter, the edge leading back is
relabelled (``u`` after ``u``, in-edge 0 after a forward step, out-edge 0
after a backward step), so a word is canonical iff no letter undoes the
previous one.  Words are interned and carry a stable rolling key, which keeps
hashing O(1) on long walks.

Diestel-Leader graphs DL(k, n) pair a vertex of the k-ary fixed-end tree at
level ``l`` with a vertex of the n-ary one at level ``-l``; ``level`` is the
first coordinate's height.  Along an edge raising that height,
``|Gamma_v u| = k`` (u is one of k children) and ``|Gamma_u v| = n`` (v picks
one of n children in the second tree), so ``m(v)/m(u) = k/n``.
"""

from __future__ import annotations

import weakref
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any

import numpy as np

from .errors import AddressError, ParameterError, ResourceError, UnsupportedFamilyError
from .rng import GOLDEN, MASK, key_of, mix64

__all__ = [
    "DEFAULT_BUDGET",
    "DiestelLeader",
    "EuclideanLattice",
    "FixedEndTree",
    "GraphFamily",
    "OrbitWeights",
    "Grandparent",
    "OrientedTree",
    "ProductWithZ",
    "SubdividedTree",
    "VertexRef",
    "Window",
    "Word",
    "ball",
    "build_family",
    "family_from_dict",
    "modular_ratio",
    "neighbors",
    "slab_component",
    "window_from_dict",
    "window_to_dict",
]

DEFAULT_BUDGET = 2_000_000
WINDOW_FORMAT_VERSION = 1


@dataclass(frozen=True, order=True)
class VertexRef:
    orbit: int
    level: int
    address: Any


# ---------------------------------------------------------------------------
# interned words for oriented trees
# ---------------------------------------------------------------------------


class Word:
    """Interned reduced word; equality is identity."""

    __slots__ = ("parent", "letter", "depth", "key", "__weakref__")
    _table: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()

    def __init__(self, parent, letter, key):
        self.parent = parent
        self.letter = letter
        self.depth = 0 if parent is None else parent.depth + 1
        self.key = key

    def child(self, letter: int) -> "Word":
        k = (id(self), letter)
        w = Word._table.get(k)
        if w is None:
            w = Word(self, letter, mix64((self.key * GOLDEN + letter + 1) & MASK))
            Word._table[k] = w
        return w

    def letters(self) -> tuple:
        out = []
        w = self
        while w.parent is not None:
            out.append(w.letter)
            w = w.parent
        return tuple(reversed(out))

    @staticmethod
    def from_letters(letters) -> "Word":
        w = EMPTY_WORD
        for a in letters:
            w = w.child(int(a))
        return w

    def __hash__(self):
        return self.key

    def __lt__(self, other):
        return self.letters() < other.letters()

    def __le__(self, other):
        return self.letters() <= other.letters()

    def __gt__(self, other):
        return self.letters() > other.letters()

    def __ge__(self, other):
        return self.letters() >= other.letters()

    def __reduce__(self):
        return (Word.from_letters, (self.letters(),))

    def __repr__(self):
        return f"Word{self.letters()}"


EMPTY_WORD = Word(None, None, 0x5EED)


# ---------------------------------------------------------------------------
# fixed-end tree coordinates
# ---------------------------------------------------------------------------


def _fe_parent(level, digits):
    return level + 1, digits[:-1]


def _fe_child(level, digits, i):
    if not digits and level > 0 and i == 0:
        return level - 1, ()
    return level - 1, digits + (i,)


def _fe_validate(b, level, digits):
    if not isinstance(digits, tuple) or not isinstance(level, int):
        raise AddressError(f"malformed fixed-end address {(level, digits)!r}")
    if any(not isinstance(d, int) or not 0 <= d < b for d in digits):
        raise AddressError(f"digit out of range in {digits!r}")
    junction = level + len(digits)
    if junction < 0:
        raise AddressError(f"address {(level, digits)!r} lies below the origin's ray")
    if digits and junction > 0 and digits[0] == 0:
        raise AddressError(f"non-canonical address {(level, digits)!r}")


def _fe_step_toward_origin(level, digits):
    if digits:
        return _fe_parent(level, digits)
    if level > 0:
        return level - 1, ()
    return None


def _fe_distance(a, b):
    (la, da), (lb, db) = a, b
    d = 0
    while la < lb:
        la, da = _fe_parent(la, da)
        d += 1
    while lb < la:
        lb, db = _fe_parent(lb, db)
        d += 1
    while da != db:
        la, da = _fe_parent(la, da)
        lb, db = _fe_parent(lb, db)
        d += 2
    return d


def _as_tuple(obj):
    if isinstance(obj, list):
        return tuple(_as_tuple(x) for x in obj)
    return obj


def _as_list(obj):
    if isinstance(obj, tuple):
        return [_as_list(x) for x in obj]
    return obj


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


class GraphFamily:
    """Common surface of the bundled families (see module docstring)."""

    kind: str = ""
    is_tree: bool = False
    has_levels: bool = True

    # -- parameters -----------------------------------------------------
    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.kind, "params": self.params()}

    @property
    def orbit_count(self) -> int:
        return len(self.orbit_degrees)

    @property
    def orbit_degrees(self) -> tuple:
        raise NotImplementedError

    @property
    def orbit_m(self) -> tuple:
        return (Fraction(1),) * self.orbit_count

    @property
    def modular_base(self) -> Fraction:
        raise NotImplementedError

    @property
    def unimodular(self) -> bool:
        return self.modular_base == 1 and len(set(self.orbit_m)) == 1

    @property
    def origin(self) -> VertexRef:
        raise NotImplementedError

    def orbit_representatives(self) -> tuple:
        return (self.origin,)

    # -- adjacency --------------------------------------------------------
    def neighbors(self, v: VertexRef) -> tuple:
        raise NotImplementedError

    def neighbor(self, v: VertexRef, slot: int) -> VertexRef:
        return self.neighbors(v)[slot]

    def vertex_degree(self, v: VertexRef) -> int:
        return self.orbit_degrees[v.orbit]

    def validate(self, v: VertexRef) -> None:
        raise NotImplementedError

    def slot_pattern(self, orbit: int) -> tuple:
        """``(neighbor orbit, level offset)`` for each neighbor slot; fixed per orbit."""
        rep = self.orbit_representatives()[orbit]
        return tuple((w.orbit, w.level - rep.level) for w in self.neighbors(rep))

    # -- measure ------------------------------------------------------------
    def m(self, v: VertexRef) -> Fraction:
        return self.orbit_m[v.orbit] * self.modular_base ** v.level

    # -- misc -----------------------------------------------------------------
    def vertex_key(self, v: VertexRef) -> int:
        return key_of((v.orbit, v.level, v.address))

    def distance(self, u: VertexRef, v: VertexRef, limit: int = 64) -> int:
        if u == v:
            return 0
        seen = {u}
        frontier = [u]
        for d in range(1, limit + 1):
            nxt = []
            for x in frontier:
                for y in self.neighbors(x):
                    if y == v:
                        return d
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        raise ResourceError(f"distance exceeds search limit {limit}")

    def step_toward_origin(self, v: VertexRef):
        raise UnsupportedFamilyError(f"{self.kind} has no tree path structure")

    def encode_address(self, address):
        return _as_list(address)

    def decode_address(self, obj):
        return _as_tuple(obj)

    def vertex_to_json(self, v: VertexRef) -> list:
        return [v.orbit, v.level, self.encode_address(v.address)]

    def vertex_from_json(self, obj) -> VertexRef:
        orbit, level, address = obj
        v = VertexRef(int(orbit), int(level), self.decode_address(address))
        self.validate(v)
        return v

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


@dataclass(frozen=True, repr=False)
class FixedEndTree(GraphFamily):
    """Regular tree of the given degree with the end-fixing group."""

    degree: int
    kind = "fixed_end_tree"
    is_tree = True

    def __post_init__(self):
        if self.degree < 3:
            raise ParameterError("fixed_end_tree needs degree >= 3")

    @property
    def b(self):
        return self.degree - 1

    def params(self):
        return {"degree": self.degree}

    @property
    def orbit_degrees(self):
        return (self.degree,)

    @property
    def modular_base(self):
        return Fraction(self.b)

    @property
    def origin(self):
        return VertexRef(0, 0, ())

    def validate(self, v):
        if v.orbit != 0:
            raise AddressError(f"bad orbit {v.orbit}")
        _fe_validate(self.b, v.level, v.address)

    def parent(self, v):
        lv, d = _fe_parent(v.level, v.address)
        return VertexRef(0, lv, d)

    def child(self, v, i):
        lv, d = _fe_child(v.level, v.address, i)
        return VertexRef(0, lv, d)

    def neighbors(self, v):
        return (self.parent(v),) + tuple(self.child(v, i) for i in range(self.b))

    def neighbor(self, v, slot):
        return self.parent(v) if slot == 0 else self.child(v, slot - 1)

    def distance(self, u, v, limit=None):
        return _fe_distance((u.level, u.address), (v.level, v.address))

    def step_toward_origin(self, v):
        s = _fe_step_toward_origin(v.level, v.address)
        return None if s is None else VertexRef(0, *s)


@dataclass(frozen=True, repr=False)
class Grandparent(GraphFamily):
    """Fixed-end tree with ``b`` children plus an edge from each vertex to its grandparent."""

    b: int
    kind = "grandparent"

    def __post_init__(self):
        if self.b < 2:
            raise ParameterError("grandparent needs b >= 2")

    def params(self):
        return {"b": self.b}

    @property
    def orbit_degrees(self):
        return (self.b + 2 + self.b * self.b,)

    @property
    def modular_base(self):
        return Fraction(self.b)

    @property
    def origin(self):
        return VertexRef(0, 0, ())

    def validate(self, v):
        if v.orbit != 0:
            raise AddressError(f"bad orbit {v.orbit}")
        _fe_validate(self.b, v.level, v.address)

    def neighbors(self, v):
        lv, d = v.level, v.address
        parent = _fe_parent(lv, d)
        children = [_fe_child(lv, d, i) for i in range(self.b)]
        grandparent = _fe_parent(*parent)
        grandchildren = [_fe_child(c[0], c[1], j) for c in children for j in range(self.b)]
        return tuple(VertexRef(0, a, x) for a, x in [parent, *children, grandparent, *grandchildren])


@dataclass(frozen=True, repr=False)
class OrientedTree(GraphFamily):
    """Regular tree of degree ``1 + n1 + n2`` with a (1, n1, n2)-orientation."""

    n1: int
    n2: int
    kind = "oriented_tree"
    is_tree = True

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ParameterError("oriented_tree needs n1, n2 >= 1")

    def params(self):
        return {"n1": self.n1, "n2": self.n2}

    @property
    def b(self):
        return self.n1 + self.n2

    @property
    def orbit_degrees(self):
        return (self.b + 1,)

    @property
    def modular_base(self):
        return Fraction(self.n2, self.n1)

    @property
    def origin(self):
        return VertexRef(0, 0, EMPTY_WORD)

    def letter_offset(self, letter):
        if letter == 0:
            return 0
        return 1 if letter <= self.n1 else -1

    def back_letter(self, word):
        """Letter leading from ``word`` back towards the origin (None at the origin)."""
        last = word.letter
        if last is None:
            return None
        if last == 0:
            return 0
        return self.n1 + 1 if last <= self.n1 else 1

    def neighbor(self, v, slot):
        w = v.address
        if slot == self.back_letter(w):
            return VertexRef(0, v.level - self.letter_offset(w.letter), w.parent)
        return VertexRef(0, v.level + self.letter_offset(slot), w.child(slot))

    def neighbors(self, v):
        return tuple(self.neighbor(v, s) for s in range(self.b + 1))

    def validate(self, v):
        if v.orbit != 0 or not isinstance(v.address, Word):
            raise AddressError(f"malformed oriented-tree vertex {v!r}")
        level = 0
        w = v.address
        letters = w.letters()
        prev = EMPTY_WORD
        for a in letters:
            if not 0 <= a <= self.b:
                raise AddressError(f"letter {a} out of range")
            if a == self.back_letter(prev):
                raise AddressError(f"word {letters} backtracks")
            level += self.letter_offset(a)
            prev = prev.child(a)
        if level != v.level:
            raise AddressError(f"level {v.level} does not match word height {level}")

    def vertex_key(self, v):
        return v.address.key

    def distance(self, u, v, limit=None):
        a, b = u.address, v.address
        d = 0
        while a.depth > b.depth:
            a, d = a.parent, d + 1
        while b.depth > a.depth:
            b, d = b.parent, d + 1
        while a is not b:
            a, b, d = a.parent, b.parent, d + 2
        return d

    def step_toward_origin(self, v):
        w = v.address
        if w.parent is None:
            return None
        return VertexRef(0, v.level - self.letter_offset(w.letter), w.parent)

    def encode_address(self, address):
        return list(address.letters())

    def decode_address(self, obj):
        return Word.from_letters(obj)


@dataclass(frozen=True, repr=False)
class DiestelLeader(GraphFamily):
    """DL(k, n): horocyclic product of the k-ary and n-ary fixed-end trees."""

    k: int
    n: int
    kind = "diestel_leader"

    def __post_init__(self):
        if self.k < 2 or self.n < 2:
            raise ParameterError("diestel_leader needs k, n >= 2")

    def params(self):
        return {"k": self.k, "n": self.n}

    @property
    def orbit_degrees(self):
        return (self.k + self.n,)

    @property
    def modular_base(self):
        return Fraction(self.k, self.n)

    @property
    def has_levels(self):
        return self.k != self.n

    @property
    def origin(self):
        return VertexRef(0, 0, ((), ()))

    def neighbors(self, v):
        x, y = v.address
        lv = v.level
        up_x = _fe_parent(lv, x)[1]
        down_y = _fe_parent(-lv, y)[1]
        out = [VertexRef(0, lv + 1, (up_x, _fe_child(-lv, y, j)[1])) for j in range(self.n)]
        out += [VertexRef(0, lv - 1, (_fe_child(lv, x, i)[1], down_y)) for i in range(self.k)]
        return tuple(out)

    def validate(self, v):
        if v.orbit != 0 or not (isinstance(v.address, tuple) and len(v.address) == 2):
            raise AddressError(f"malformed DL vertex {v!r}")
        x, y = v.address
        _fe_validate(self.k, v.level, x)
        _fe_validate(self.n, -v.level, y)


@dataclass(frozen=True, repr=False)
class ProductWithZ(GraphFamily):
    """Cartesian product of a base family with Z^d."""

    base: GraphFamily
    d: int = 1
    kind = "product_with_Z"

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError("product_with_Z needs d >= 1")

    def params(self):
        return {"base": self.base.to_dict(), "d": self.d}

    @property
    def orbit_degrees(self):
        return tuple(x + 2 * self.d for x in self.base.orbit_degrees)

    @property
    def orbit_m(self):
        return self.base.orbit_m

    @property
    def modular_base(self):
        return self.base.modular_base

    @property
    def has_levels(self):
        return self.base.has_levels

    def _lift(self, bv, zs):
        return VertexRef(bv.orbit, bv.level, (bv.address, zs))

    def _base_vertex(self, v):
        return VertexRef(v.orbit, v.level, v.address[0])

    @property
    def origin(self):
        return self._lift(self.base.origin, (0,) * self.d)

    def orbit_representatives(self):
        return tuple(self._lift(r, (0,) * self.d) for r in self.base.orbit_representatives())

    def neighbors(self, v):
        zs = v.address[1]
        out = [self._lift(w, zs) for w in self.base.neighbors(self._base_vertex(v))]
        for i in range(self.d):
            for s in (1, -1):
                z2 = zs[:i] + (zs[i] + s,) + zs[i + 1:]
                out.append(VertexRef(v.orbit, v.level, (v.address[0], z2)))
        return tuple(out)

    def validate(self, v):
        if not (isinstance(v.address, tuple) and len(v.address) == 2):
            raise AddressError(f"malformed product vertex {v!r}")
        zs = v.address[1]
        if not (isinstance(zs, tuple) and len(zs) == self.d and all(isinstance(z, int) for z in zs)):
            raise AddressError(f"bad Z^d coordinate {zs!r}")
        self.base.validate(self._base_vertex(v))

    def vertex_key(self, v):
        return mix64(self.base.vertex_key(self._base_vertex(v)) ^ key_of(v.address[1]))

    def encode_address(self, address):
        return [self.base.encode_address(address[0]), list(address[1])]

    def decode_address(self, obj):
        return (self.base.decode_address(obj[0]), tuple(int(z) for z in obj[1]))


@dataclass(frozen=True, repr=False)
class SubdividedTree(GraphFamily):
    """Fixed-end tree with a new vertex at the midpoint of every edge.

    Orbit 0 holds tree vertices, orbit 1 midpoints.  A midpoint is addressed
    by its lower endpoint and sits on the level of its upper endpoint, with
    relative measure ``1/b`` (it shares the stabilizer of its lower endpoint).
    """

    degree: int
    kind = "subdivided_fixed_end_tree"
    is_tree = True

    def __post_init__(self):
        if self.degree < 3:
            raise ParameterError("subdivided_fixed_end_tree needs degree >= 3")

    @property
    def b(self):
        return self.degree - 1

    def params(self):
        return {"degree": self.degree}

    @property
    def orbit_degrees(self):
        return (self.degree, 2)

    @property
    def orbit_m(self):
        return (Fraction(1), Fraction(1, self.b))

    @property
    def modular_base(self):
        return Fraction(self.b)

    @property
    def origin(self):
        return VertexRef(0, 0, ())

    def orbit_representatives(self):
        return (self.origin, VertexRef(1, 0, (0,)))

    def neighbors(self, v):
        if v.orbit == 0:
            up = VertexRef(1, v.level + 1, v.address)
            downs = tuple(
                VertexRef(1, v.level, _fe_child(v.level, v.address, i)[1]) for i in range(self.b)
            )
            return (up,) + downs
        lower = v.level - 1
        upper = _fe_parent(lower, v.address)
        return (VertexRef(0, upper[0], upper[1]), VertexRef(0, lower, v.address))

    def validate(self, v):
        if v.orbit == 0:
            _fe_validate(self.b, v.level, v.address)
        elif v.orbit == 1:
            _fe_validate(self.b, v.level - 1, v.address)
        else:
            raise AddressError(f"bad orbit {v.orbit}")

    def step_toward_origin(self, v):
        if v.orbit == 0:
            s = _fe_step_toward_origin(v.level, v.address)
            if s is None:
                return None
            if s[0] > v.level:  # towards the parent
                return VertexRef(1, v.level + 1, v.address)
            return VertexRef(1, v.level, s[1])
        lower = VertexRef(0, v.level - 1, v.address)
        s = _fe_step_toward_origin(lower.level, lower.address)
        if s is None or s[0] < lower.level:
            return lower
        return self.neighbors(v)[0]


@dataclass(frozen=True, repr=False)
class EuclideanLattice(GraphFamily):
    """Z^d; ``colored=True`` splits vertices into two orbits by coordinate parity."""

    d: int
    colored: bool = False
    kind = "euclidean_lattice"
    has_levels = False

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError("euclidean_lattice needs d >= 1")

    @property
    def is_tree(self):
        return self.d == 1

    def params(self):
        return {"d": self.d, "colored": self.colored}

    @property
    def orbit_degrees(self):
        return (2 * self.d,) * (2 if self.colored else 1)

    @property
    def modular_base(self):
        return Fraction(1)

    def _orbit(self, zs):
        return sum(zs) % 2 if self.colored else 0

    @property
    def origin(self):
        return VertexRef(0, 0, (0,) * self.d)

    def orbit_representatives(self):
        if not self.colored:
            return (self.origin,)
        return (self.origin, VertexRef(1, 0, (1,) + (0,) * (self.d - 1)))

    def neighbors(self, v):
        zs = v.address
        out = []
        for i in range(self.d):
            for s in (1, -1):
                z2 = zs[:i] + (zs[i] + s,) + zs[i + 1:]
                out.append(VertexRef(self._orbit(z2), 0, z2))
        return tuple(out)

    def validate(self, v):
        zs = v.address
        if not (isinstance(zs, tuple) and len(zs) == self.d and all(isinstance(z, int) for z in zs)):
            raise AddressError(f"malformed lattice address {zs!r}")
        if v.level != 0 or v.orbit != self._orbit(zs):
            raise AddressError(f"bad orbit/level for {v!r}")

    def distance(self, u, v, limit=None):
        return sum(abs(a - b) for a, b in zip(u.address, v.address))

    def step_toward_origin(self, v):
        if self.d != 1:
            return GraphFamily.step_toward_origin(self, v)
        (z,) = v.address
        if z == 0:
            return None
        z2 = z - 1 if z > 0 else z + 1
        return VertexRef(self._orbit((z2,)), 0, (z2,))


_KINDS = {
    "fixed_end_tree": lambda p: FixedEndTree(int(p["degree"])),
    "grandparent": lambda p: Grandparent(int(p["b"])),
    "oriented_tree": lambda p: OrientedTree(int(p["n1"]), int(p["n2"])),
    "diestel_leader": lambda p: DiestelLeader(int(p["k"]), int(p["n"])),
    "subdivided_fixed_end_tree": lambda p: SubdividedTree(int(p["degree"])),
    "euclidean_lattice": lambda p: EuclideanLattice(int(p["d"]), bool(p.get("colored", False))),
    "product_with_Z": lambda p: ProductWithZ(family_from_dict(p["base"]), int(p.get("d", 1))),
}


def build_family(kind: str, **params) -> GraphFamily:
    """Construct a family descriptor, e.g. ``build_family("oriented_tree", n1=1, n2=2)``."""
    kind = kind.replace("-", "_")
    if kind not in _KINDS:
        raise ParameterError(f"unknown family {kind!r}; choose from {sorted(_KINDS)}")
    try:
        return _KINDS[kind](params)
    except KeyError as exc:
        raise ParameterError(f"{kind} missing parameter {exc.args[0]!r}") from None


def neighbors(g: GraphFamily, v: VertexRef) -> tuple:
    """Validated neighbor enumeration; the method form skips the address check."""
    g.validate(v)
    return g.neighbors(v)


def family_from_dict(obj: dict) -> GraphFamily:
    if isinstance(obj, GraphFamily):
        return obj
    return build_family(obj["family"], **obj["params"])


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Window:
    """A finite canonical piece of an infinite family.

    ``vertices`` are in BFS order from ``center``; ``edges`` is an (E, 2) array
    of vertex indices with ``i < j`` sorted lexicographically; ``dist`` holds
    the BFS distance from the center inside the explored region.
    """

    graph: GraphFamily
    kind: str
    center: VertexRef
    extent: dict
    vertices: tuple
    edges: np.ndarray
    multiplicity: np.ndarray
    boundary: frozenset
    dist: np.ndarray
    index: dict = field(repr=False)

    def __len__(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def vertex_keys(self) -> np.ndarray:
        g = self.graph
        return np.array([g.vertex_key(v) for v in self.vertices], dtype=np.uint64)

    @cached_property
    def edge_keys(self) -> np.ndarray:
        from .rng import edge_key

        vk = [int(k) for k in self.vertex_keys]
        return np.array([edge_key(vk[i], vk[j]) for i, j in self.edges], dtype=np.uint64)

    @cached_property
    def edge_index(self) -> dict:
        return {(int(i), int(j)): e for e, (i, j) in enumerate(self.edges)}

    @cached_property
    def adjacency(self) -> list:
        adj = [[] for _ in self.vertices]
        for e, (i, j) in enumerate(self.edges):
            adj[i].append((int(j), e))
            adj[j].append((int(i), e))
        return adj

    def is_boundary(self, v: VertexRef) -> bool:
        return self.index[v] in self.boundary

    def interior(self) -> list:
        return [i for i in range(len(self.vertices)) if i not in self.boundary]

    def find_edge(self, u: VertexRef, v: VertexRef):
        i, j = self.index.get(u), self.index.get(v)
        if i is None or j is None:
            return None
        return self.edge_index.get((min(i, j), max(i, j)))


def _explore(g, o, admit, depth, budget):
    g.validate(o)
    index = {o: 0}
    order = [o]
    dist = [0]
    q = deque([o])
    while q:
        v = q.popleft()
        dv = dist[index[v]]
        if depth is not None and dv >= depth:
            continue
        for w in g.neighbors(v):
            if w not in index and admit(w):
                index[w] = len(order)
                order.append(w)
                dist.append(dv + 1)
                if len(order) > budget:
                    raise ResourceError(f"window exceeds budget of {budget} vertices")
                q.append(w)
    return order, index, dist


def _finish(g, kind, center, extent, order, index, dist):
    edges = []
    mult = []
    boundary = set()
    for i, v in enumerate(order):
        counts = Counter(g.neighbors(v))
        for w, c in counts.items():
            j = index.get(w)
            if j is None:
                boundary.add(i)
            elif i < j:
                edges.append((i, j))
                mult.append(c)
    if edges:
        e = np.array(edges, dtype=np.int64)
        perm = np.lexsort((e[:, 1], e[:, 0]))
        e = e[perm]
        mult = np.array(mult, dtype=np.int64)[perm]
    else:
        e = np.zeros((0, 2), dtype=np.int64)
        mult = np.zeros(0, dtype=np.int64)
    return Window(
        graph=g,
        kind=kind,
        center=center,
        extent=extent,
        vertices=tuple(order),
        edges=e,
        multiplicity=mult,
        boundary=frozenset(boundary),
        dist=np.array(dist, dtype=np.int64),
        index=index,
    )


def ball(g: GraphFamily, o: VertexRef, R: int, budget: int = DEFAULT_BUDGET) -> Window:
    """The ball B(o, R) with boundary = vertices having a neighbor outside it."""
    if R < 0:
        raise ParameterError("radius must be nonnegative")
    order, index, dist = _explore(g, o, lambda w: True, R, budget)
    return _finish(g, "ball", o, {"radius": R}, order, index, dist)


def slab_component(
    g: GraphFamily, o: VertexRef, n_levels: int, depth: int, budget: int = DEFAULT_BUDGET
) -> Window:
    """BFS (to ``depth``) of the component of ``o`` in levels ``level(o) .. level(o)+n_levels``."""
    if not g.has_levels:
        raise UnsupportedFamilyError(f"{g.kind} has trivial levels (modular base 1)")
    if n_levels < 0 or depth < 0:
        raise ParameterError("n_levels and depth must be nonnegative")
    lo, hi = o.level, o.level + n_levels
    order, index, dist = _explore(g, o, lambda w: lo <= w.level <= hi, depth, budget)
    extent = {"n_levels": n_levels, "depth": depth}
    return _finish(g, "slab_component", o, extent, order, index, dist)


def window_to_dict(win: Window) -> dict:
    g = win.graph
    return {
        "format": "perclab.window",
        "version": WINDOW_FORMAT_VERSION,
        "family": g.kind,
        "params": g.params(),
        "kind": win.kind,
        "center": g.vertex_to_json(win.center),
        "extent": dict(win.extent),
        "vertices": [g.vertex_to_json(v) for v in win.vertices],
        "edges": [[int(i), int(j), int(c)] for (i, j), c in zip(win.edges, win.multiplicity)],
        "boundary": sorted(int(i) for i in win.boundary),
    }


def window_from_dict(obj: dict) -> Window:
    """Rebuild a window from its JSON form; the enumeration is redone and compared."""
    if obj.get("format") != "perclab.window" or obj.get("version") != WINDOW_FORMAT_VERSION:
        raise ParameterError("not a version-1 perclab window document")
    g = build_family(obj["family"], **obj["params"])
    center = g.vertex_from_json(obj["center"])
    ext = obj["extent"]
    if obj["kind"] == "ball":
        win = ball(g, center, int(ext["radius"]))
    elif obj["kind"] == "slab_component":
        win = slab_component(g, center, int(ext["n_levels"]), int(ext["depth"]))
    else:
        raise ParameterError(f"unknown window kind {obj['kind']!r}")
    if window_to_dict(win) != obj:
        raise ParameterError("window document does not match its canonical enumeration")
    return win


# ---------------------------------------------------------------------------
# modular function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitWeights:
    """Orbit weights ``a`` (summing to 1) and relative stabilizer measures ``m``."""

    a: tuple
    m: tuple

    def __post_init__(self):
        a = tuple(Fraction(x) for x in self.a)
        m = tuple(Fraction(x) for x in self.m)
        if len(a) != len(m):
            raise ParameterError("a and m must have one entry per orbit")
        if sum(a) != 1:
            raise ParameterError(f"orbit weights must sum to 1, got {sum(a)}")
        if any(x <= 0 for x in a + m):
            raise ParameterError("orbit weights and measures must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "m", m)

    @classmethod
    def for_family(cls, g: GraphFamily, a=None) -> "OrbitWeights":
        L = g.orbit_count
        if a is None:
            a = (Fraction(1, L),) * L
        return cls(tuple(a), g.orbit_m)


def modular_ratio(g: GraphFamily, w: OrbitWeights, u: VertexRef, v: VertexRef) -> Fraction:
    """Delta(u, v) = a_v m(v) / (a_u m(u)), exactly."""
    r = (w.a[v.orbit] * w.m[v.orbit]) / (w.a[u.orbit] * w.m[u.orbit])
    return r * g.modular_base ** (v.level - u.level)
