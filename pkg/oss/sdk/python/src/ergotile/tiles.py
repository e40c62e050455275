"""Multitiles, their order relations, trees and forests.

A multitile ``s = (i, m, l1)`` of a :class:`TileSystem` with gap ``e`` has
time interval ``I_s = 2^i [m, m+1]`` and three frequency intervals

    omega_{s,j} = 2^-i [l_j / 5, l_j / 5 + 1],   l2 = l1 + e,   l3 = l1 + l2.

All order predicates are evaluated in integer coordinates (time in units of
``2^imin``, frequency in units of ``2^-imax / 5``) so they are exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import numpy.typing as npt

from ergotile.exceptions import ParameterError, PreconditionError
from ergotile.grids import DyadicInterval, Grid, Interval, as_fraction
from ergotile.rng import SplitMix64

logger = logging.getLogger(__name__)

IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]

COMPONENTS = (1, 2, 3)
_MAX_SPAN = 40


# ----------------------------------------------------------------------
# Tile systems
# ----------------------------------------------------------------------


def lemma_margins(e: int, delta: int, c_sep: Fraction, c_enl: Fraction) -> tuple[Fraction, Fraction]:
    """Slack of the two inequalities that make s'_i < s_i force s'_j <~' s_j.

    Returns ``(separation_slack, enlargement_slack)``; both must be
    positive (resp. non-negative) for a sound system.
    """
    ratio = Fraction(2**delta + 1, 2**delta - 1)
    worst_gap = min(Fraction(abs(e), 2) - Fraction(5, 2), abs(e) - Fraction(15, 2))
    separation = worst_gap - Fraction(5, 2) * c_sep * ratio
    enlargement = Fraction(5, 2) * c_enl - (abs(e) + Fraction(15, 2))
    return separation, enlargement


@dataclass(frozen=True)
class TileSystem:
    """Constants and grid choices shared by a family of multitiles.

    Scales ``i`` are restricted to ``i = scale_residue (mod lcm(delta, 4))``
    so that time lengths differ by factors of at least ``2^delta`` and every
    frequency interval lies in one grid ``G(5, t, L_j)``. ``l1_residue`` fixes
    ``L_1 = l1 mod 5``.
    """

    e: int
    delta: int
    c_sep: Fraction = Fraction(10)
    c_enl: Fraction | None = None
    scale_residue: int = 0
    l1_residue: int = 0

    def __post_init__(self) -> None:
        if self.e == 0:
            raise ParameterError("e must be nonzero")
        if self.delta < 1:
            raise ParameterError(f"delta must be >= 1, got {self.delta}")
        object.__setattr__(self, "c_sep", as_fraction(self.c_sep))
        enl = Fraction(10 * abs(self.e)) if self.c_enl is None else as_fraction(self.c_enl)
        object.__setattr__(self, "c_enl", enl)
        object.__setattr__(self, "l1_residue", self.l1_residue % 5)

    @classmethod
    def paper(cls, delta: int = 1000) -> TileSystem:
        return cls(e=100, delta=delta, c_sep=Fraction(10))

    @classmethod
    def test(cls, delta: int = 4) -> TileSystem:
        return cls(e=24, delta=delta, c_sep=Fraction(2))

    @property
    def enlargement(self) -> Fraction:
        assert self.c_enl is not None
        return self.c_enl

    @property
    def period(self) -> int:
        return self.delta * 4 // math.gcd(self.delta, 4)

    def admits_scale(self, i: int) -> bool:
        return (i - self.scale_residue) % self.period == 0

    def scales(self, lo: int, hi: int) -> list[int]:
        """Admissible scales in [lo, hi]."""
        return [i for i in range(lo, hi + 1) if self.admits_scale(i)]

    def residue(self, j: int) -> int:
        """L_j = l_j mod 5."""
        return (self.l1_residue * (1, 1, 2)[j - 1] + (0, self.e, self.e)[j - 1]) % 5

    def frequency_grid(self, j: int) -> Grid:
        return Grid.family(5, (-self.scale_residue) % 4, self.residue(j))

    def rescaled(self, k: int) -> TileSystem:
        return TileSystem(self.e, self.delta, self.c_sep, self.c_enl, self.scale_residue + k, self.l1_residue)

    def margins(self) -> tuple[Fraction, Fraction]:
        return lemma_margins(self.e, self.delta, self.c_sep, self.enlargement)

    def check(self) -> None:
        """Raise ParameterError unless the order relations are consistent."""
        separation, enlargement = self.margins()
        if separation <= 0:
            raise ParameterError(
                f"e={self.e}, c_sep={self.c_sep}, delta={self.delta}: separation margin {float(separation):g} <= 0"
            )
        if enlargement < 0:
            raise ParameterError(
                f"e={self.e}, c_enl={self.c_enl}: enlargement margin {float(enlargement):g} < 0"
            )


def check_system_constraints(system: TileSystem) -> tuple[Fraction, Fraction]:
    """Validate ``system`` and return its margins."""
    system.check()
    return system.margins()


# ----------------------------------------------------------------------
# Multitiles
# ----------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Multitile:
    i: int
    m: int
    l1: int
    e: int

    @property
    def l2(self) -> int:
        return self.l1 + self.e

    @property
    def l3(self) -> int:
        return 2 * self.l1 + self.e

    def l(self, j: int) -> int:  # noqa: E743
        return (self.l1, self.l2, self.l3)[j - 1]

    @property
    def interval(self) -> DyadicInterval:
        return DyadicInterval(self.i, self.m)

    def omega(self, j: int) -> DyadicInterval:
        lj = self.l(j)
        return DyadicInterval(-self.i, lj // 5, Fraction(lj % 5, 5))

    @property
    def length(self) -> Fraction:
        return self.interval.length

    def rescaled(self, k: int) -> Multitile:
        """s(k): time interval dilated by 2^k, frequencies by 2^-k."""
        return Multitile(self.i + k, self.m, self.l1, self.e)

    def __str__(self) -> str:
        return f"s(i={self.i}, m={self.m}, l=({self.l1},{self.l2},{self.l3}))"


def generate_multitiles(
    system: TileSystem,
    scales: Iterable[int],
    time_window: Interval,
    frequency_window: Interval,
) -> list[Multitile]:
    """All multitiles with I_s inside ``time_window`` and omega_{s,1} inside ``frequency_window``."""
    out: list[Multitile] = []
    time_grid = Grid.standard()
    for i in sorted(set(scales)):
        if not system.admits_scale(i):
            continue
        members = [iv for iv in time_grid.members([i], time_window) if time_window.contains(iv.as_interval())]
        scale = Fraction(2) ** i
        first = math.ceil(5 * frequency_window.lo * scale)
        last = math.floor(5 * (frequency_window.hi * scale - 1))
        first += (system.l1_residue - first) % 5
        l1_values = range(first, last + 1, 5)
        out.extend(Multitile(i, iv.index, l1, system.e) for iv in members for l1 in l1_values)
    logger.debug("generated %d multitiles", len(out))
    return sorted(out)


# ----------------------------------------------------------------------
# Integer coordinates and the order relations
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Coords:
    tlo: IntArray
    thi: IntArray
    flo: IntArray  # shape (3, n)
    fhi: IntArray


def _coords(tiles: Sequence[Multitile], imin: int | None = None, imax: int | None = None) -> _Coords:
    scales = np.array([s.i for s in tiles], dtype=np.int64)
    if scales.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return _Coords(empty, empty, np.zeros((3, 0), np.int64), np.zeros((3, 0), np.int64))
    lo_scale = int(scales.min()) if imin is None else imin
    hi_scale = int(scales.max()) if imax is None else imax
    if hi_scale - lo_scale > _MAX_SPAN:
        # Python integers past the int64 range
        dtype: type = object
        up = np.array([2 ** (int(i) - lo_scale) for i in scales], dtype=object)
        down = np.array([2 ** (hi_scale - int(i)) for i in scales], dtype=object)
    else:
        dtype = np.int64
        up = np.power(2, scales - lo_scale).astype(np.int64)
        down = np.power(2, hi_scale - scales).astype(np.int64)
    m = np.array([s.m for s in tiles], dtype=dtype)
    ls = np.array([[s.l(j) for s in tiles] for j in COMPONENTS], dtype=dtype)
    return _Coords(m * up, (m + 1) * up, ls * down, (ls + 5) * down)


def _strict_below(a: _Coords, b: _Coords, j: int, ia: object, ib: object) -> BoolArray:
    """a_j < b_j with broadcasting index expressions ``ia``/``ib``."""
    k = j - 1
    time_in = (b.tlo[ib] <= a.tlo[ia]) & (a.thi[ia] <= b.thi[ib]) & (a.thi[ia] - a.tlo[ia] < b.thi[ib] - b.tlo[ib])
    freq_in = (a.flo[k][ia] <= b.flo[k][ib]) & (b.fhi[k][ib] <= a.fhi[k][ia])
    return np.asarray(time_in & freq_in)


def _lesssim(
    a: _Coords, b: _Coords, j: int, ia: object, ib: object, c_enl: Fraction, c_sep: Fraction | None
) -> BoolArray:
    """a_j <~ b_j (and, with ``c_sep``, the separated variant <~')."""
    k = j - 1
    time_in = (b.tlo[ib] <= a.tlo[ia]) & (a.thi[ia] <= b.thi[ib])
    dc = np.abs((a.flo[k][ia] + a.fhi[k][ia]) - (b.flo[k][ib] + b.fhi[k][ib]))
    len_a = a.fhi[k][ia] - a.flo[k][ia]
    len_b = b.fhi[k][ib] - b.flo[k][ib]
    # omega_b inside c_enl * omega_a:  |2c_b - 2c_a| + |omega_b| <= c_enl |omega_a|
    enlarged = c_enl.denominator * (dc + len_b) <= c_enl.numerator * len_a
    out = time_in & enlarged
    if c_sep is not None:
        out &= c_sep.denominator * dc > c_sep.numerator * (len_a + len_b)
    return np.asarray(out)


@dataclass(frozen=True)
class Comparison:
    """Relations of s' to s in component j."""

    lt: bool
    le: bool
    lesssim: bool
    lesssim_prime: bool


def compare(s: Multitile, s_prime: Multitile, j: int, system: TileSystem) -> Comparison:
    """Flags for s'_j < s_j, s'_j <= s_j, s'_j <~ s_j and s'_j <~' s_j."""
    c = _coords([s_prime, s])
    lt = bool(_strict_below(c, c, j, 0, 1))
    same = s.interval == s_prime.interval and s.omega(j) == s_prime.omega(j)
    lesssim = bool(_lesssim(c, c, j, 0, 1, system.enlargement, None))
    prime = bool(_lesssim(c, c, j, 0, 1, system.enlargement, system.c_sep))
    return Comparison(lt=lt, le=lt or same, lesssim=lesssim, lesssim_prime=prime)


class TileIndex:
    """Sorted tile list with precomputed order matrices.

    ``below(j)[a, b]`` is True iff ``tiles[a]_j < tiles[b]_j``.
    """

    def __init__(self, tiles: Iterable[Multitile]) -> None:
        self.tiles: list[Multitile] = sorted(set(tiles))
        self.position: dict[Multitile, int] = {s: n for n, s in enumerate(self.tiles)}
        self._coords = _coords(self.tiles)
        self._below: dict[int, BoolArray] = {}

    def __len__(self) -> int:
        return len(self.tiles)

    def below(self, j: int) -> BoolArray:
        if j not in self._below:
            c = self._coords
            self._below[j] = _strict_below(c, c, j, np.s_[:, None], np.s_[None, :])
        return self._below[j]

    def lengths(self) -> npt.NDArray[np.float64]:
        return np.array([float(s.length) for s in self.tiles])

    def mask(self, subset: Iterable[Multitile]) -> BoolArray:
        out = np.zeros(len(self.tiles), dtype=bool)
        for s in subset:
            out[self.position[s]] = True
        return out


# ----------------------------------------------------------------------
# Trees
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Tree:
    """An i-tree: every member other than the top satisfies s_i < top_i."""

    kind: int
    top: Multitile
    members: tuple[Multitile, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in COMPONENTS:
            raise ParameterError(f"tree type must be 1, 2 or 3, got {self.kind}")
        object.__setattr__(self, "members", tuple(sorted(set(self.members))))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Multitile]:
        return iter(self.members)

    @property
    def contains_top(self) -> bool:
        return self.top in self.members

    def with_top(self) -> tuple[Multitile, ...]:
        return self.members if self.contains_top else (*self.members, self.top)


def tree_violations(tree: Tree) -> list[Multitile]:
    """Members breaking the tree condition or sharing a time interval."""
    others = [s for s in tree.members if s != tree.top]
    if not others:
        return []
    c = _coords([*others, tree.top])
    n = len(others)
    ok = _strict_below(c, c, tree.kind, np.arange(n), np.full(n, n))
    bad = [s for s, good in zip(others, ok) if not good]
    seen: dict[DyadicInterval, Multitile] = {}
    for s in tree.members:
        if s.interval in seen:
            bad.append(s)
        seen[s.interval] = s
    return bad


def is_lacunary(tree: Tree, j: int, system: TileSystem) -> bool:
    """s_j <~' top_j for every member other than the top."""
    others = [s for s in tree.members if s != tree.top]
    if not others:
        return True
    c = _coords([*others, tree.top])
    n = len(others)
    return bool(np.all(_lesssim(c, c, j, np.arange(n), np.full(n, n), system.enlargement, system.c_sep)))


def maximal_tree(tiles: Iterable[Multitile], top: Multitile, i: int, index: TileIndex | None = None) -> Tree:
    """{s in S' : s_i < top_i} together with the top."""
    pool = list(tiles)
    if index is None:
        index = TileIndex([*pool, top])
    mask = index.mask(pool)
    col = index.below(i)[:, index.position[top]]
    members = [index.tiles[n] for n in np.flatnonzero(mask & col)]
    return Tree(i, top, (*members, top))


# ----------------------------------------------------------------------
# Size and the tree paraproduct
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SizeResult:
    value: float
    top: Multitile | None = None
    kind: int = 0

    def tree(self, tiles: Iterable[Multitile], index: TileIndex | None = None) -> Tree | None:
        """The maximal tree realizing the size."""
        if self.top is None:
            return None
        pool = list(tiles)
        tree = maximal_tree(pool, self.top, self.kind, index)
        if self.top in pool:
            return tree
        return Tree(tree.kind, tree.top, tuple(s for s in tree.members if s != self.top))


def size(
    tiles: Iterable[Multitile],
    j: int,
    coefficients: Mapping[Multitile, complex],
    index: TileIndex | None = None,
    extra_tops: Iterable[Multitile] = (),
) -> SizeResult:
    """The j-size of ``tiles``: max over tops and tree types i != j.

    Candidate tops are the tiles themselves plus ``extra_tops``; an extra
    top contributes only the members strictly below it.
    """
    pool = list(dict.fromkeys(tiles))
    if not pool:
        return SizeResult(0.0)
    extra = [t for t in extra_tops if t not in set(pool)]
    if index is None or any(t not in index.position for t in [*pool, *extra]):
        index = TileIndex([*pool, *extra])
    inside = index.mask(pool)
    weights = np.zeros(len(index))
    for s in pool:
        weights[index.position[s]] = abs(coefficients[s]) ** 2
    candidates = inside | index.mask(extra)
    lengths = index.lengths()
    best = SizeResult(0.0)
    best_value = -1.0
    for i in COMPONENTS:
        if i == j:
            continue
        energy = index.below(i).T.astype(np.float64) @ weights + weights
        values = np.where(candidates, np.sqrt(energy / lengths), -1.0)
        n = int(np.argmax(values))
        if values[n] > best_value:
            best_value = float(values[n])
            best = SizeResult(float(values[n]), index.tiles[n], i)
    return best


@dataclass(frozen=True)
class ParaproductResult:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return self.lhs / self.rhs


def tree_paraproduct(tree: Tree, coefficients: Sequence[Mapping[Multitile, complex]]) -> ParaproductResult:
    """Sum over the tree of |I_s|^-1/2 prod |c_j(s)| against |I_T| prod size_j(T)."""
    if len(coefficients) != 3:
        raise ParameterError("three coefficient maps are required")
    members = list(tree.members)
    lhs = sum(
        float(s.length) ** -0.5 * math.prod(abs(c[s]) for c in coefficients) for s in members
    )
    index = TileIndex(members)
    sizes = [size(members, j, coefficients[j - 1], index).value for j in COMPONENTS]
    rhs = float(tree.top.length) * math.prod(sizes)
    return ParaproductResult(float(lhs), rhs)


# ----------------------------------------------------------------------
# Strong disjointness and disintegration
# ----------------------------------------------------------------------


def conflict_matrix(tree: Tree, other: Tree, j: int) -> tuple[list[Multitile], list[Multitile], BoolArray]:
    """Pairs (s, s') of the two trees, tops included, that break strong j-disjointness."""
    left = list(tree.with_top())
    right = list(other.with_top())
    scales = [s.i for s in (*left, *right)]
    lo, hi = min(scales), max(scales)
    a = _coords(left, lo, hi)
    b = _coords(right, lo, hi)
    top_a = _coords([tree.top], lo, hi)
    top_b = _coords([other.top], lo, hi)
    k = j - 1
    ia, ib = np.s_[:, None], np.s_[None, :]

    def overlap(lo1: IntArray, hi1: IntArray, lo2: IntArray, hi2: IntArray) -> BoolArray:
        return np.asarray((lo1 < hi2) & (lo2 < hi1))

    rect = overlap(a.tlo[ia], a.thi[ia], b.tlo[ib], b.thi[ib]) & overlap(
        a.flo[k][ia], a.fhi[k][ia], b.flo[k][ib], b.fhi[k][ib]
    )
    # omega_{s,j} strictly inside omega_{s',j} forces I_{s'} away from I_T
    a_in_b = (b.flo[k][ib] <= a.flo[k][ia]) & (a.fhi[k][ia] <= b.fhi[k][ib]) & (
        a.fhi[k][ia] - a.flo[k][ia] < b.fhi[k][ib] - b.flo[k][ib]
    )
    b_in_a = (a.flo[k][ia] <= b.flo[k][ib]) & (b.fhi[k][ib] <= a.fhi[k][ia]) & (
        b.fhi[k][ib] - b.flo[k][ib] < a.fhi[k][ia] - a.flo[k][ia]
    )
    near_b = overlap(top_a.tlo[0], top_a.thi[0], b.tlo, b.thi)[None, :]
    near_a = overlap(top_b.tlo[0], top_b.thi[0], a.tlo, a.thi)[:, None]
    return left, right, np.asarray(rect | (a_in_b & near_b) | (b_in_a & near_a))


def strongly_disjoint(
    tree: Tree, other: Tree, j: int
) -> tuple[bool, tuple[Multitile, Multitile] | None]:
    """Strong j-disjointness of two trees, tops included.

    Returns ``(True, None)`` or ``(False, (s, s'))`` for a violating pair.
    """
    left, right, bad = conflict_matrix(tree, other, j)
    hits = np.argwhere(bad)
    if hits.size:
        p, q = hits[0]
        return False, (left[int(p)], right[int(q)])
    return True, None


def disintegrate(subset: Iterable[Multitile], i: int, top: Multitile | None = None) -> list[Tree]:
    """Split a subset of an i-tree into i-trees with disjoint top intervals.

    The tops are the maximal elements under <_i; every other tile goes to
    the unique top above it.

    Raises
    ------
    PreconditionError
        If the frequency intervals omega_{s,i} are not pairwise nested (so
        no i-tree holds the subset), or if ``top`` is given and some tile
        is not below it.
    """
    tiles = sorted(set(subset))
    if not tiles:
        return []
    index = TileIndex(tiles if top is None else [*tiles, top])
    c = _coords(tiles)
    k = i - 1
    nested = (c.flo[k][:, None] < c.fhi[k][None, :]) & (c.flo[k][None, :] < c.fhi[k][:, None])
    if not np.all(nested):
        p, q = np.argwhere(~nested)[0]
        raise PreconditionError(f"{tiles[int(p)]} and {tiles[int(q)]} lie in no common {i}-tree")
    if top is not None:
        below = index.below(i)[:, index.position[top]]
        stray = [s for s in tiles if s != top and not below[index.position[s]]]
        if stray:
            raise PreconditionError(f"{stray[0]} is not below the top {top}")
    order = index.below(i)
    pos = np.array([index.position[s] for s in tiles])
    sub = order[np.ix_(pos, pos)]
    maximal = ~sub.any(axis=1)
    trees: list[Tree] = []
    for n in np.flatnonzero(maximal):
        members = [tiles[int(q)] for q in np.flatnonzero(sub[:, n])]
        trees.append(Tree(i, tiles[int(n)], (*members, tiles[int(n)])))
    return trees


# ----------------------------------------------------------------------
# Forests
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Forest:
    """Trees sharing a lacunary component j."""

    j: int
    trees: tuple[Tree, ...] = ()

    def __len__(self) -> int:
        return len(self.trees)

    def tiles(self) -> list[Multitile]:
        return [s for tree in self.trees for s in tree.members]

    def top_mass(self) -> Fraction:
        return sum((tree.top.length for tree in self.trees), Fraction(0))


@dataclass(frozen=True)
class ForestStats:
    """Counting function N_F as (interval, count) pieces and its norms."""

    pieces: tuple[tuple[Interval, int], ...]
    l1: Fraction
    sup: int
    bmo: Fraction


def counting_function(forest: Forest) -> list[tuple[Interval, int]]:
    """N_F = sum of 1_{I_T} as a step function on its support."""
    tops = [tree.top.interval for tree in forest.trees]
    cuts = sorted({p for iv in tops for p in (iv.lo, iv.hi)})
    pieces: list[tuple[Interval, int]] = []
    for lo, hi in zip(cuts, cuts[1:]):
        count = sum(1 for iv in tops if iv.lo <= lo and hi <= iv.hi)
        if count:
            pieces.append((Interval(lo, hi), count))
    return pieces


def forest_bmo(forest: Forest) -> Fraction:
    """sup over dyadic I of |I|^-1 times the top mass inside I."""
    tops = [tree.top.interval for tree in forest.trees]
    if not tops:
        return Fraction(0)
    reach = max(max(abs(iv.lo), abs(iv.hi)) for iv in tops)
    ceiling = max(iv.scale for iv in tops) + max(1, math.ceil(math.log2(float(reach) + 1))) + 1
    candidates: set[DyadicInterval] = set()
    for iv in tops:
        node = iv
        while node.scale <= ceiling:
            candidates.add(node)
            node = node.parent()
    best = Fraction(0)
    for cand in candidates:
        mass = sum((iv.length for iv in tops if cand.contains(iv)), Fraction(0))
        best = max(best, mass / cand.length)
    return best


def forest_stats(forest: Forest) -> ForestStats:
    pieces = counting_function(forest)
    l1 = sum((iv.length * n for iv, n in pieces), Fraction(0))
    sup = max((n for _, n in pieces), default=0)
    return ForestStats(tuple(pieces), l1, sup, forest_bmo(forest))


def mutually_strongly_disjoint(
    trees: Sequence[Tree], j: int, system: TileSystem
) -> tuple[bool, str]:
    """Pairwise strong j-disjointness plus j-lacunarity of every tree."""
    for tree in trees:
        if not is_lacunary(tree, j, system):
            return False, f"tree with top {tree.top} is not {j}-lacunary"
    for p, first in enumerate(trees):
        for second in trees[p + 1 :]:
            ok, pair = strongly_disjoint(first, second, j)
            if not ok:
                assert pair is not None
                return False, f"{pair[0]} and {pair[1]} break strong {j}-disjointness"
    return True, ""


# ----------------------------------------------------------------------
# Rescaling and the order-relation battery
# ----------------------------------------------------------------------


def rescale(tiles: Iterable[Multitile], k: int) -> list[Multitile]:
    return sorted(s.rescaled(k) for s in tiles)


def rescale_coefficients(coefficients: Mapping[Multitile, complex], k: int) -> dict[Multitile, complex]:
    """Coefficients of the L-infinity normalized dilation by 2^k."""
    factor = 2.0 ** (k / 2)
    return {s.rescaled(k): c * factor for s, c in coefficients.items()}


@dataclass(frozen=True)
class OrderBattery:
    pairs: int
    violations: int
    witness: str = ""


def _random_tile(system: TileSystem, rng: SplitMix64, scales: Sequence[int], spread: int) -> Multitile:
    i = scales[int(rng.integers(0, len(scales)))]
    m = int(rng.integers(-spread, spread))
    l1 = 5 * int(rng.integers(-spread, spread)) + system.l1_residue
    return Multitile(i, m, l1, system.e)


def _tile_below(system: TileSystem, s: Multitile, i: int, finer: int, rng: SplitMix64) -> Multitile | None:
    """A tile s' at scale ``finer`` with s'_i < s_i, or None if the grid has none."""
    ratio = 2 ** (s.i - finer)
    m = s.m * ratio + int(rng.integers(0, min(ratio, 2**52)))
    member = system.frequency_grid(i).member_at(-finer, s.omega(i).lo)
    li = 5 * member.index + int(member.offset * 5)
    if i == 1:
        l1 = li
    elif i == 2:
        l1 = li - system.e
    else:
        if (li - system.e) % 2:
            return None
        l1 = (li - system.e) // 2
    return Multitile(finer, m, l1, system.e)


def order_battery(
    system: TileSystem, rng: SplitMix64, pairs: int, scales: Sequence[int], spread: int = 64
) -> OrderBattery:
    """Random pairs with s'_i < s_i; counts pairs where some s'_j <~' s_j fails."""
    usable = sorted(i for i in scales if system.admits_scale(i))
    if len(usable) < 2:
        raise ParameterError("order battery needs at least two admissible scales")
    done = violations = 0
    witness = ""
    while done < pairs:
        s = _random_tile(system, rng, usable[1:], spread)
        finer = usable[int(rng.integers(0, usable.index(s.i)))]
        i = int(rng.integers(1, 4))
        s_prime = _tile_below(system, s, i, finer, rng)
        if s_prime is None or not compare(s, s_prime, i, system).lt:
            continue
        done += 1
        for j in COMPONENTS:
            if j != i and not compare(s, s_prime, j, system).lesssim_prime:
                violations += 1
                witness = witness or f"{s_prime} <_{i} {s} but not <~'_{j}"
                break
    logger.info("order battery: %d pairs, %d violations", done, violations)
    return OrderBattery(done, violations, witness)
