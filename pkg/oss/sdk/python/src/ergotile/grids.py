"""Dyadic and shifted-dyadic interval arithmetic.

All combinatorial predicates use exact rationals (``fractions.Fraction``);
floats only appear in :func:`chi_weight`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import numpy.typing as npt

from ergotile.exceptions import ParameterError

logger = logging.getLogger(__name__)

Rational = Fraction | int


def _pow2(k: int) -> Fraction:
    return Fraction(2) ** k


def as_fraction(value: Rational | float) -> Fraction:
    """Exact rational from an int, Fraction or decimal float literal."""
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


# ----------------------------------------------------------------------
# Intervals
# ----------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Interval:
    """Closed interval [lo, hi] with rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.hi < self.lo:
            raise ParameterError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def center(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def dilate(self, factor: Rational) -> Interval:
        """Same center, length multiplied by ``factor``."""
        half = Fraction(factor) * self.length / 2
        return Interval(self.center - half, self.center + half)

    def contains(self, other: Interval) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def contains_point(self, x: Rational) -> bool:
        return self.lo <= x <= self.hi

    def intersects(self, other: Interval) -> bool:
        """Closed intersection (touching endpoints count)."""
        return self.lo <= other.hi and other.lo <= self.hi

    def overlaps(self, other: Interval) -> bool:
        """Interiors intersect."""
        return self.lo < other.hi and other.lo < self.hi

    def distance(self, other: Interval) -> Fraction:
        return max(Fraction(0), other.lo - self.hi, self.lo - other.hi)

    def as_floats(self) -> tuple[float, float]:
        return float(self.lo), float(self.hi)


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """The interval 2^scale * [index + offset, index + 1 + offset]."""

    scale: int
    index: int
    offset: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        off = Fraction(self.offset)
        if not 0 <= off < 1:
            raise ParameterError(f"offset {off} outside [0, 1)")
        object.__setattr__(self, "offset", off)

    @property
    def lo(self) -> Fraction:
        return _pow2(self.scale) * (self.index + self.offset)

    @property
    def hi(self) -> Fraction:
        return _pow2(self.scale) * (self.index + 1 + self.offset)

    @property
    def length(self) -> Fraction:
        return _pow2(self.scale)

    @property
    def center(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def as_interval(self) -> Interval:
        return Interval(self.lo, self.hi)

    def contains(self, other: DyadicInterval | Interval) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def strictly_contains(self, other: DyadicInterval | Interval) -> bool:
        return self.contains(other) and (self.lo, self.hi) != (other.lo, other.hi)

    def overlaps(self, other: DyadicInterval | Interval) -> bool:
        return self.lo < other.hi and other.lo < self.hi

    def disjoint(self, other: DyadicInterval | Interval) -> bool:
        """Interiors disjoint."""
        return not self.overlaps(other)

    def dilate(self, factor: Rational) -> Interval:
        return self.as_interval().dilate(factor)

    def parent(self) -> DyadicInterval:
        """Standard-dyadic parent; only meaningful for offset 0."""
        return DyadicInterval(self.scale + 1, self.index // 2, self.offset)


def union_measure(intervals: Iterable[Interval | DyadicInterval]) -> Fraction:
    """Exact Lebesgue measure of a finite union of intervals."""
    spans = sorted((iv.lo, iv.hi) for iv in intervals)
    total = Fraction(0)
    cur_lo: Fraction | None = None
    cur_hi = Fraction(0)
    for lo, hi in spans:
        if cur_lo is None or lo > cur_hi:
            if cur_lo is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_lo is not None:
        total += cur_hi - cur_lo
    return total


def covers(family: Iterable[Interval | DyadicInterval], target: Interval) -> bool:
    """True iff the union of ``family`` contains ``target`` (closed sweep)."""
    spans = sorted((iv.lo, iv.hi) for iv in family if iv.hi >= target.lo and iv.lo <= target.hi)
    reach = target.lo
    for lo, hi in spans:
        if lo > reach:
            return False
        reach = max(reach, hi)
        if reach >= target.hi:
            return True
    return reach >= target.hi


# ----------------------------------------------------------------------
# Grids
# ----------------------------------------------------------------------


class GridKind(str, Enum):
    STANDARD = "S"
    SHIFTED = "D"
    FAMILY = "G"


@dataclass(frozen=True)
class Grid:
    """A nested family of (shifted) dyadic intervals.

    Use the constructors :meth:`standard`, :meth:`shifted` and
    :meth:`family` rather than the raw dataclass.
    """

    kind: GridKind
    d: int = 0
    n: int = 0
    t: int = 0
    shift: int = 0

    @classmethod
    def standard(cls) -> Grid:
        return cls(GridKind.STANDARD)

    @classmethod
    def shifted(cls, d: int) -> Grid:
        """The grid D_d: offsets (-1)^k d/3 at scale k."""
        if d not in (0, 1, 2):
            raise ParameterError(f"shifted grid index must be 0, 1 or 2, got {d}")
        return cls(GridKind.SHIFTED, d=d)

    @classmethod
    def family(cls, n: int, t: int, shift: int) -> Grid:
        """The grid G_{N,t,L}: offset L/N, scales congruent to t mod N-1.

        Raises
        ------
        ParameterError
            If N is even or < 3, if t or L is out of range, or if
            2^(N-1) is not 1 mod N (the scales then fail to nest).
        """
        if n < 3 or n % 2 == 0:
            raise ParameterError(f"N must be odd and >= 3, got {n}")
        if not 0 <= t <= n - 2:
            raise ParameterError(f"t must lie in [0, {n - 2}], got {t}")
        if not 0 <= shift <= n - 1:
            raise ParameterError(f"L must lie in [0, {n - 1}], got {shift}")
        if pow(2, n - 1, n) != 1:
            raise ParameterError(f"2^(N-1) is not 1 mod N for N={n}; G_(N,t,L) would not nest")
        return cls(GridKind.FAMILY, n=n, t=t, shift=shift)

    @property
    def name(self) -> str:
        if self.kind is GridKind.STANDARD:
            return "S"
        if self.kind is GridKind.SHIFTED:
            return f"D{self.d}"
        return f"G({self.n},{self.t},{self.shift})"

    @property
    def denominator(self) -> int:
        """Common denominator of all offsets."""
        if self.kind is GridKind.SHIFTED:
            return 3
        if self.kind is GridKind.FAMILY:
            return self.n
        return 1

    def admits_scale(self, scale: int) -> bool:
        if self.kind is GridKind.FAMILY:
            return (scale - self.t) % (self.n - 1) == 0
        return True

    def offset(self, scale: int) -> Fraction:
        if self.kind is GridKind.SHIFTED:
            return Fraction((-1) ** (scale % 2) * self.d, 3) % 1
        if self.kind is GridKind.FAMILY:
            return Fraction(self.shift, self.n)
        return Fraction(0)

    def member(self, scale: int, index: int) -> DyadicInterval:
        if not self.admits_scale(scale):
            raise ParameterError(f"scale {scale} not in grid {self.name}")
        return DyadicInterval(scale, index, self.offset(scale))

    def member_at(self, scale: int, x: Rational) -> DyadicInterval:
        """The member of the given scale whose half-open span [lo, hi) holds x."""
        index = math.floor(Fraction(x) / _pow2(scale) - self.offset(scale))
        return self.member(scale, index)

    def members(self, scales: Iterable[int], window: Interval) -> list[DyadicInterval]:
        """Members whose interiors meet ``window``, ordered by (scale, index)."""
        out: list[DyadicInterval] = []
        for scale in sorted(set(scales)):
            if not self.admits_scale(scale):
                continue
            off = self.offset(scale)
            first = math.floor(window.lo / _pow2(scale) - off)
            last = math.ceil(window.hi / _pow2(scale) - off) - 1
            out.extend(DyadicInterval(scale, j, off) for j in range(first, last + 1))
        return [iv for iv in out if iv.overlaps(window)]


def grid_members(grid: Grid, scales: Iterable[int], window: Interval) -> list[DyadicInterval]:
    """Members of ``grid`` at the given scales meeting ``window``."""
    return grid.members(scales, window)


def _scaled_endpoints(
    grid: Grid, scale: int, base: int, window: Interval
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    # coordinates in units of 2^-base / denominator
    q = grid.denominator
    off = grid.offset(scale) * q
    assert off.denominator == 1
    first = math.floor(window.lo / _pow2(scale) - grid.offset(scale))
    last = math.ceil(window.hi / _pow2(scale) - grid.offset(scale)) - 1
    j = np.arange(first, last + 1, dtype=np.int64)
    unit = 2 ** (scale + base)
    lo = unit * (j * q + int(off))
    return lo, lo + unit * q


def nestedness_violations(grid: Grid, scales: Sequence[int], window: Interval) -> int:
    """Count pairs (I', I) of members, |I'| < |I|, that overlap without I' inside I.

    Vectorized with integer coordinates; equal scales are disjoint by
    construction and not counted.
    """
    admissible = sorted(s for s in set(scales) if grid.admits_scale(s))
    if not admissible:
        return 0
    base = -min(0, admissible[0])
    q = grid.denominator
    violations = 0
    for pos, small in enumerate(admissible):
        lo, hi = _scaled_endpoints(grid, small, base, window)
        for big in admissible[pos + 1 :]:
            unit = 2 ** (big + base)
            off = int(grid.offset(big) * q)
            j = np.floor_divide(lo - unit * off, unit * q)
            big_hi = unit * ((j + 1) * q + off)
            violations += int(np.count_nonzero(hi > big_hi))
    if violations:
        logger.debug("grid %s: %d nestedness violations", grid.name, violations)
    return violations


def family_disjoint(grids: Sequence[Grid], scales: Iterable[int], window: Interval) -> bool:
    """True iff the member sets of the grids are pairwise disjoint."""
    scales = list(scales)
    seen: dict[tuple[Fraction, Fraction], str] = {}
    for grid in grids:
        for iv in grid.members(scales, window):
            key = (iv.lo, iv.hi)
            if key in seen and seen[key] != grid.name:
                return False
            seen[key] = grid.name
    return True


# ----------------------------------------------------------------------
# Localization weight
# ----------------------------------------------------------------------


def chi_weight(
    interval: Interval | DyadicInterval,
    x: float | npt.ArrayLike,
    exponent: float = 1.0,
) -> float | npt.NDArray[np.float64]:
    """chi_I(x)^M = (1 + ((x - c(I)) / |I|)^2)^(-M/2)."""
    if exponent < 0:
        raise ParameterError(f"exponent must be >= 0, got {exponent}")
    c = float(interval.center)
    ell = float(interval.length)
    u = (np.asarray(x, dtype=np.float64) - c) / ell
    out = (1.0 + u * u) ** (-exponent / 2.0)
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------
# Sparsity
# ----------------------------------------------------------------------


def regular_cover(interval: Interval, d: int | None = None) -> tuple[int, DyadicInterval] | None:
    """Find d and J' in D_d with J subset J' subset 3J.

    Tries the grids D_0, D_1, D_2 (or only ``d``) at every scale 2^k in
    [|J|, 3|J|]. Always succeeds when |J| is a power of two.
    """
    triple = interval.dilate(3)
    k_min = math.ceil(math.log2(interval.length)) - 1
    candidates = (0, 1, 2) if d is None else (d,)
    for k in range(k_min, k_min + 4):
        if not interval.length <= _pow2(k) <= 3 * interval.length:
            continue
        for dd in candidates:
            member = Grid.shifted(dd).member_at(k, interval.lo)
            if member.contains(interval) and triple.contains(member.as_interval()):
                return dd, member
    return None


@dataclass(frozen=True)
class SparsityReport:
    """Outcome of an (A, d)-sparsity check."""

    sparse: bool
    witness: str = ""
    enlargements: tuple[DyadicInterval, ...] = ()


def _pair_conflict(
    a: DyadicInterval,
    b: DyadicInterval,
    amplitude: Fraction,
    gap_multiplier: Fraction,
    separation_multiplier: Fraction,
) -> str:
    if a.scale != b.scale:
        if abs(a.scale - b.scale) < gap_multiplier * amplitude:
            return (
                f"scale ratio 2^{abs(a.scale - b.scale)} below 2^{float(gap_multiplier * amplitude):g}"
                f" for {a} and {b}"
            )
        return ""
    dist = a.as_interval().distance(b.as_interval())
    if dist < separation_multiplier * amplitude * a.length:
        return f"distance {dist} < {separation_multiplier * amplitude}|I| for {a} and {b}"
    return ""


def is_sparse(
    intervals: Sequence[DyadicInterval],
    amplitude: Rational | float,
    d: int,
    gap_multiplier: Rational | float = 100,
    separation_multiplier: Rational | float = 100,
) -> SparsityReport:
    """Check (A, d)-sparsity of a family of standard dyadic intervals.

    (i) distinct lengths differ by a factor >= 2^(gap*A); (ii) equal
    lengths are at distance >= sep*A*|I|; (iii) each A*I has a D_d
    enlargement inside 3A*I.
    """
    amp = as_fraction(amplitude)
    if amp < 1:
        raise ParameterError(f"A must be >= 1, got {amp}")
    gap = as_fraction(gap_multiplier)
    sep = as_fraction(separation_multiplier)
    items = sorted(set(intervals))
    for pos, a in enumerate(items):
        for b in items[pos + 1 :]:
            witness = _pair_conflict(a, b, amp, gap, sep)
            if witness:
                return SparsityReport(False, witness)
    enlargements: list[DyadicInterval] = []
    for iv in items:
        cover = regular_cover(iv.dilate(amp), d)
        if cover is None:
            return SparsityReport(False, f"{amp}*{iv} has no D_{d} enlargement inside 3A*I")
        enlargements.append(cover[1])
    return SparsityReport(True, "", tuple(enlargements))


@dataclass(frozen=True)
class SparseClass:
    d: int
    intervals: tuple[DyadicInterval, ...]


def sparsify(
    intervals: Sequence[DyadicInterval],
    amplitude: Rational | float,
    gap_multiplier: Rational | float = 100,
    separation_multiplier: Rational | float = 100,
) -> list[SparseClass]:
    """Greedy colouring into (A, d)-sparse classes.

    Intervals are visited by (scale, position) and placed in the first
    class whose d regularizes them and whose members they do not conflict
    with under (i) or (ii).

    Raises
    ------
    ParameterError
        If some A*I admits no D_d enlargement for any d.
    """
    amp = as_fraction(amplitude)
    gap = as_fraction(gap_multiplier)
    sep = as_fraction(separation_multiplier)
    classes: list[tuple[int, list[DyadicInterval]]] = []
    for iv in sorted(set(intervals), key=lambda v: (v.scale, v.lo)):
        feasible = [dd for dd in (0, 1, 2) if regular_cover(iv.dilate(amp), dd) is not None]
        if not feasible:
            raise ParameterError(f"{amp}*{iv} admits no d-regular enlargement")
        for d, members in classes:
            if d in feasible and not any(_pair_conflict(iv, m, amp, gap, sep) for m in members):
                members.append(iv)
                break
        else:
            classes.append((feasible[0], [iv]))
    logger.debug("sparsify: %d intervals into %d classes (A=%s)", len(intervals), len(classes), amp)
    return [SparseClass(d, tuple(members)) for d, members in classes]


@dataclass(frozen=True)
class SparsifyReport:
    """One sparsify run with its class count L against A^2."""

    amplitude: Fraction
    intervals: int
    classes: tuple[SparseClass, ...]

    @property
    def ratio(self) -> float:
        return len(self.classes) / float(self.amplitude) ** 2


def sparsify_report(
    intervals: Sequence[DyadicInterval],
    amplitude: Rational | float,
    gap_multiplier: Rational | float = 100,
    separation_multiplier: Rational | float = 100,
) -> SparsifyReport:
    classes = sparsify(intervals, amplitude, gap_multiplier, separation_multiplier)
    return SparsifyReport(as_fraction(amplitude), len(set(intervals)), tuple(classes))
