"""Tree selection and the estimates built on it.

The greedy selection sweeps tops by the centre of their j-th frequency
interval (lowest first, then leftmost time interval, then smallest scale).
With each selected top, the other lacunary maximal trees at that top and
the members that would break strong disjointness with an earlier tree leave
the pool and join the remainder, so forest and remainder partition the
input. Every run re-checks the size bound on that remainder and strong
disjointness with the definitional predicates in :mod:`ergotile.tiles`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import numpy.typing as npt

from ergotile.config import parallel_map
from ergotile.exceptions import InvariantViolation, ParameterError, PreconditionError
from ergotile.grids import DyadicInterval, Interval, covers, union_measure
from ergotile.rng import SplitMix64
from ergotile.signals import SampledFunction, level_set_profile
from ergotile.tiles import (
    COMPONENTS,
    Forest,
    ForestStats,
    Multitile,
    TileIndex,
    TileSystem,
    Tree,
    conflict_matrix,
    forest_stats,
    is_lacunary,
    mutually_strongly_disjoint,
    size,
)
from ergotile.wavepackets import Band, PacketBank, natural_spectrum

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
Coefficients = Mapping[Multitile, complex]

SIZE_SLACK = 1e-12


# ----------------------------------------------------------------------
# Stopping data
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StoppingData:
    """Scale blocks u_1 < ... < u_J with weights h_1..h_{J-1}.

    A tile of length 2^i belongs to block j when u_j <= i < u_{j+1}.
    ``kappas`` optionally holds per-block stopping times sampled on the
    grid, each with values in {u_j, ..., u_{j+1} - 1}.
    """

    u: tuple[int, ...]
    weights: tuple[SampledFunction, ...]
    kappas: tuple[npt.NDArray[np.int64], ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.u) < 2 or any(x >= y for x, y in zip(self.u, self.u[1:])):
            raise ParameterError(f"U must be strictly increasing with at least two entries, got {self.u}")
        if len(self.weights) != len(self.u) - 1:
            raise ParameterError(f"expected {len(self.u) - 1} weights, got {len(self.weights)}")
        total = sum(np.abs(w.values) ** 2 for w in self.weights)
        defect = float(np.max(np.abs(total - 1.0)))
        if defect > 1e-10:
            raise ParameterError(f"sum of |h_j|^2 deviates from 1 by {defect:.3g}")
        for j, kappa in enumerate(self.kappas):
            if kappa.size and (kappa.min() < self.u[j] or kappa.max() >= self.u[j + 1]):
                raise ParameterError(f"stopping time {j + 1} leaves [{self.u[j]}, {self.u[j + 1]})")

    @property
    def blocks(self) -> int:
        return len(self.u) - 1

    def block(self, scale: int) -> int | None:
        """j with u_j <= scale < u_{j+1}, 1-based."""
        for j in range(self.blocks):
            if self.u[j] <= scale < self.u[j + 1]:
                return j + 1
        return None

    def block_of(self, s: Multitile) -> int:
        j = self.block(s.i)
        if j is None:
            raise PreconditionError(f"{s} lies outside the scale blocks {self.u}")
        return j

    @classmethod
    def single(cls, u: Sequence[int], a: int, b: int) -> StoppingData:
        """h_1 = 1 and every other weight 0."""
        one = SampledFunction.from_callable(lambda x: np.ones_like(x), a, b)
        zero = SampledFunction.zeros(a, b)
        return cls(tuple(u), (one, *[zero] * (len(u) - 2)))

    @classmethod
    def random(cls, u: Sequence[int], rng: SplitMix64, a: int, b: int) -> StoppingData:
        """Weights constant on unit cells, normalized so sum |h_j|^2 = 1; random stopping times."""
        blocks = len(u) - 1
        grid = SampledFunction.zeros(a, b)
        cells = np.floor(grid.x).astype(np.int64) + 2**a
        raw = rng.complex_normal(blocks * 2 ** (a + 1)).reshape(blocks, 2 ** (a + 1))
        raw /= np.sqrt(np.sum(np.abs(raw) ** 2, axis=0))[None, :]
        weights = tuple(SampledFunction(a, b, raw[j][cells]) for j in range(blocks))
        kappas = tuple(
            np.asarray(rng.integers(u[j], u[j + 1], 2 ** (a + 1)), dtype=np.int64)[cells] for j in range(blocks)
        )
        return cls(tuple(u), weights, kappas)


# ----------------------------------------------------------------------
# Bessel-type selection
# ----------------------------------------------------------------------


def selection_key(s: Multitile, j: int) -> tuple[Fraction, Fraction, int]:
    return s.omega(j).center, s.interval.lo, s.i


@dataclass(frozen=True)
class BesselResult:
    """S' = remainder + forest tiles."""

    j: int
    sigma: float
    remainder: tuple[Multitile, ...]
    forest: Forest
    remainder_size: float
    top_mass: float
    ratio: float
    stats: ForestStats

    @property
    def selected(self) -> list[Multitile]:
        return self.forest.tiles()


def _tree_energies(index: TileIndex, pool: npt.NDArray[np.bool_], weights: FloatArray, i: int) -> FloatArray:
    w = np.where(pool, weights, 0.0)
    return index.below(i).T.astype(np.float64) @ w + w


def bessel_decompose(
    tiles: Iterable[Multitile],
    j: int,
    coefficients: Coefficients,
    system: TileSystem,
    sigma: float | None = None,
    norm_squared: float = 1.0,
) -> BesselResult:
    """Remove trees of j-size above sigma/2 until the rest has j-size <= sigma/2.

    ``sigma`` defaults to the j-size of ``tiles``. ``norm_squared`` is
    ||F||_2^2 for the reported ratio sum |I_T| sigma^2 / ||F||^2.

    Raises
    ------
    InvariantViolation
        If the remainder size or the strong disjointness re-check fails.
    """
    pool_tiles = sorted(set(tiles))
    if sigma is None:
        sigma = size(pool_tiles, j, coefficients).value
    if not pool_tiles or sigma == 0.0:
        empty = Forest(j, ())
        return BesselResult(j, sigma, tuple(pool_tiles), empty, 0.0, 0.0, 0.0, forest_stats(empty))
    index = TileIndex(pool_tiles)
    pool = np.ones(len(index), dtype=bool)
    weights = np.array([abs(coefficients[s]) ** 2 for s in index.tiles])
    lengths = index.lengths()
    threshold = (sigma / 2.0) ** 2 * (1.0 + SIZE_SLACK)
    order = sorted(range(len(index)), key=lambda n: selection_key(index.tiles[n], j))
    kinds = [i for i in COMPONENTS if i != j]
    trees: list[Tree] = []
    set_aside: list[Multitile] = []
    while True:
        energies = {i: _tree_energies(index, pool, weights, i) for i in kinds}
        choice: tuple[int, int] | None = None
        for n in order:
            if not pool[n]:
                continue
            for i in kinds:
                if energies[i][n] > threshold * lengths[n]:
                    choice = (n, i)
                    break
            if choice is not None:
                break
        if choice is None:
            break
        n, kind = choice
        top = index.tiles[n]
        below = {i: index.below(i)[:, n] & pool for i in kinds}
        members = [index.tiles[q] for q in np.flatnonzero(below[kind])] + [top]
        shadow = [index.tiles[q] for i in kinds if i != kind for q in np.flatnonzero(below[i] & ~below[kind])]
        candidate = Tree(kind, top, tuple(members))
        keep, deferred = _trim_against(candidate, trees, j)
        if keep is None:
            set_aside.extend(candidate.members)
        else:
            trees.append(keep)
            set_aside.extend(deferred)
        set_aside.extend(shadow)
        for s in (*candidate.members, *shadow):
            pool[index.position[s]] = False
        logger.debug("j=%d: top %s (type %d), %d members", j, top, kind, len(candidate))
    remainder = tuple(sorted([*(index.tiles[q] for q in np.flatnonzero(pool)), *set_aside]))
    remainder_size = size(remainder, j, coefficients).value
    if remainder_size > sigma / 2.0 * (1.0 + 1e-9):
        raise InvariantViolation(f"{j}-size {remainder_size:.6g} of the remainder exceeds sigma/2 = {sigma / 2:.6g}")
    ok, witness = mutually_strongly_disjoint(trees, j, system)
    if not ok:
        raise InvariantViolation(f"selected forest is not mutually strongly {j}-disjoint: {witness}")
    forest = Forest(j, tuple(trees))
    mass = float(forest.top_mass())
    ratio = mass * sigma**2 / norm_squared if norm_squared else 0.0
    logger.info(
        "bessel j=%d sigma=%.4g: %d trees, %d tiles set aside into the remainder", j, sigma, len(trees), len(set_aside)
    )
    return BesselResult(j, sigma, remainder, forest, remainder_size, mass, ratio, forest_stats(forest))


def _trim_against(candidate: Tree, trees: Sequence[Tree], j: int) -> tuple[Tree | None, list[Multitile]]:
    """Drop members of ``candidate`` that clash with earlier trees.

    Returns ``(None, [])`` when the top itself clashes.
    """
    dropped: set[Multitile] = set()
    for tree in trees:
        _, right, bad = conflict_matrix(tree, candidate, j)
        for q in np.flatnonzero(bad.any(axis=0)):
            dropped.add(right[int(q)])
    if candidate.top in dropped:
        return None, []
    if not dropped:
        return candidate, []
    kept = [s for s in candidate.members if s not in dropped]
    return Tree(candidate.kind, candidate.top, tuple(kept)), sorted(dropped)


def block_functions(h: SampledFunction, stopping: StoppingData) -> list[SampledFunction]:
    """h * h_j for each block."""
    return [h * w for w in stopping.weights]


def _pair_with_blocks(
    tiles: Iterable[Multitile], functions: Sequence[SampledFunction], stopping: StoppingData, bank: PacketBank
) -> dict[Multitile, complex]:
    spectra = [natural_spectrum(fn) for fn in functions]
    return {s: bank.phi(s, 3).pair(spectra[stopping.block_of(s) - 1]) for s in tiles}


@dataclass(frozen=True)
class MaximalBesselResult:
    result: BesselResult
    blocks: int
    exceptional_measure: float
    bounds: dict[float, float]

    @property
    def ratios(self) -> dict[float, float]:
        """sum |I_T| over the bound, per exponent epsilon."""
        return {eps: (self.result.top_mass / b if b else 0.0) for eps, b in self.bounds.items()}


def maximal_bessel_decompose(
    tiles: Iterable[Multitile],
    h: SampledFunction,
    stopping: StoppingData,
    bank: PacketBank,
    system: TileSystem,
    exceptional_measure: float,
    sigma: float | None = None,
    epsilons: Sequence[float] = (0.25, 0.5),
) -> MaximalBesselResult:
    """3-size selection for H_s = h h_{j(s)} with the J^(1/8) bound ledger."""
    tiles = list(tiles)
    coefficients = _pair_with_blocks(tiles, block_functions(h, stopping), stopping, bank)
    result = bessel_decompose(tiles, 3, coefficients, system, sigma)
    big_j = len(stopping.u)
    bounds: dict[float, float] = {}
    for eps in epsilons:
        s = result.sigma
        if s == 0.0 or exceptional_measure == 0.0:
            bounds[eps] = 0.0
        else:
            bounds[eps] = big_j ** 0.125 * s**-2 * (s * math.sqrt(exceptional_measure)) ** -eps
    return MaximalBesselResult(result, big_j, exceptional_measure, bounds)


# ----------------------------------------------------------------------
# Single tree estimate
# ----------------------------------------------------------------------


def time_convexification(tree: Tree) -> set[DyadicInterval]:
    """Dyadic I with I_s inside I inside I_s' for tiles s, s' of the tree."""
    intervals = {s.interval for s in tree.with_top()}
    out: set[DyadicInterval] = set()
    for iv in intervals:
        node = iv
        while any(other.contains(node) for other in intervals):
            out.add(node)
            node = node.parent()
    return out


def chi_square_mass(interval: DyadicInterval, exceptional: Sequence[Interval]) -> float:
    """integral over E of chi_I^2, in closed form."""
    c = float(interval.center)
    ell = float(interval.length)
    total = 0.0
    for piece in exceptional:
        lo, hi = piece.as_floats()
        total += ell * (math.atan((hi - c) / ell) - math.atan((lo - c) / ell))
    return total


def boundary_family(tree: Tree, convex: set[DyadicInterval] | None = None) -> list[DyadicInterval]:
    """Dyadic J meeting 2 I_T, with no smaller member of P_T inside 3J and a neighbour J_i in P_T."""
    convex = time_convexification(tree) if convex is None else convex
    top = tree.top.interval
    doubled = top.dilate(2)
    scales = sorted({iv.scale for iv in convex})
    out: list[DyadicInterval] = []
    for scale in scales:
        step = Fraction(2) ** scale
        first = math.floor(doubled.lo / step)
        last = math.ceil(doubled.hi / step) - 1
        for index in range(first, last + 1):
            cand = DyadicInterval(scale, index)
            if not cand.overlaps(doubled):
                continue
            triple = cand.dilate(3)
            if any(iv.scale < scale and triple.contains(iv.as_interval()) for iv in convex):
                continue
            if any(DyadicInterval(scale, index + shift) in convex for shift in range(-3, 4)):
                out.append(cand)
    return out


@dataclass(frozen=True)
class SingleTreeResult:
    lhs: float
    rhs: float
    family: tuple[DyadicInterval, ...]
    covered: bool

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return self.lhs / self.rhs


def single_tree_check(
    tree: Tree,
    exceptional: Sequence[Interval],
    h: SampledFunction,
    stopping: StoppingData,
    bank: PacketBank,
    system: TileSystem,
) -> SingleTreeResult:
    """Both sides of the single tree estimate and the covering family.

    Raises
    ------
    PreconditionError
        If the tree is not 3-lacunary.
    """
    if not is_lacunary(tree, 3, system):
        raise PreconditionError(f"tree with top {tree.top} is not 3-lacunary")
    members = list(tree.members)
    coefficients = _pair_with_blocks(members, block_functions(h, stopping), stopping, bank)
    energy = sum(abs(c) ** 2 for c in coefficients.values())
    lhs = math.sqrt(energy / float(tree.top.length))
    convex = time_convexification(tree)
    rhs = max((chi_square_mass(iv, exceptional) / float(iv.length) for iv in convex), default=0.0)
    family = boundary_family(tree, convex)
    covered = covers(family, tree.top.interval.dilate(2))
    return SingleTreeResult(lhs, rhs, tuple(family), covered)


# ----------------------------------------------------------------------
# Model square function
# ----------------------------------------------------------------------


def block_sums(
    tiles: Iterable[Multitile],
    c1: Coefficients,
    c2: Coefficients,
    stopping: StoppingData,
    bank: PacketBank,
) -> list[SampledFunction]:
    """B_j = sum over block-j tiles of |I_s|^-1/2 c1 c2 phi_{s,3}."""
    grouped: list[list[Multitile]] = [[] for _ in range(stopping.blocks)]
    for s in tiles:
        grouped[stopping.block_of(s) - 1].append(s)

    def combine(group: list[Multitile]) -> SampledFunction:
        return bank.combine((bank.phi(s, 3), float(s.length) ** -0.5 * c1[s] * c2[s]) for s in group)

    return parallel_map(combine, grouped)


def root_sum_squares(blocks: Sequence[SampledFunction]) -> FloatArray:
    return np.sqrt(sum(np.abs(b.values) ** 2 for b in blocks))


def realizing_weights(blocks: Sequence[SampledFunction]) -> list[SampledFunction]:
    """h_j = conj(B_j) / M, with h_1 = 1 where M vanishes."""
    total = root_sum_squares(blocks)
    safe = np.where(total > 0.0, total, 1.0)
    out = []
    for j, blk in enumerate(blocks):
        values = np.where(total > 0.0, np.conj(blk.values) / safe, 1.0 if j == 0 else 0.0)
        out.append(blk.like(values))
    return out

# ----------------------------------------------------------------------
# Global decomposition
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class LevelReport:
    n: int
    tiles: int
    top_mass: float
    bound: float
    stats: tuple[ForestStats, ...]

    @property
    def ratio(self) -> float:
        return self.top_mass / self.bound if self.bound else 0.0


@dataclass
class _LevelRun:
    levels: dict[int, list[Multitile]] = field(default_factory=dict)
    trees: dict[int, list[Tree]] = field(default_factory=dict)
    reports: list[LevelReport] = field(default_factory=list)
    leftover: list[Multitile] = field(default_factory=list)


def _level_exponent(value: float) -> int:
    return math.floor(-math.log2(value)) if value > 0.0 else 0


def _iterate_levels(
    tiles: Sequence[Multitile],
    passes: Sequence[tuple[int, Coefficients]],
    system: TileSystem,
    start: int,
    n_max: int,
    bound: Callable[[int], float],
) -> _LevelRun:
    """Selections at sigma = 2^-n for n = start, start + 1, ...; each remainder feeds the next pass."""
    run = _LevelRun()
    pool = list(tiles)
    n = start
    while pool and n <= start + n_max:
        selected: list[Multitile] = []
        trees: list[Tree] = []
        stats: list[ForestStats] = []
        mass = 0.0
        for j, coefficients in passes:
            result = bessel_decompose(pool, j, coefficients, system, 2.0**-n)
            selected.extend(result.selected)
            trees.extend(result.forest.trees)
            stats.append(result.stats)
            mass += result.top_mass
            pool = list(result.remainder)
        run.levels[n] = selected
        run.trees[n] = trees
        run.reports.append(LevelReport(n, len(selected), mass, bound(n), tuple(stats)))
        n += 1
    run.leftover = pool
    return run


@dataclass(frozen=True)
class DecompositionReport:
    """Every ledger of the weak-type argument for one tile set."""

    gamma: int
    levels: tuple[LevelReport, ...]
    unresolved: int
    exceptional_measure: float
    exceptional_bound: float
    tail_l1: float
    tail_bound: float
    tail_level_measure: float
    v_measure: float
    pairing: float
    upper_levels: tuple[LevelReport, ...]
    upper_ledger: float
    weak_l1: tuple[tuple[float, float], ...]
    norms: tuple[float, float]

    @classmethod
    def empty(cls, norms: tuple[float, float] = (0.0, 0.0)) -> DecompositionReport:
        return cls(0, (), 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, (), 0.0, (), norms)

    @property
    def weak_l1_max(self) -> float:
        return max((v for _, v in self.weak_l1), default=0.0)


def _outside(x: FloatArray, intervals: Sequence[Interval]) -> npt.NDArray[np.bool_]:
    mask = np.ones(x.size, dtype=bool)
    for iv in intervals:
        lo, hi = iv.as_floats()
        mask &= ~((x >= lo) & (x <= hi))
    return mask


def bilinear_pair(band: Band, natural: ComplexArray) -> complex:
    """integral of F times the packet, without conjugation."""
    mirrored = Band(band.a, band.b, -band.indices, np.conj(band.values))
    return mirrored.pair(natural)


def full_decomposition(
    tiles: Iterable[Multitile],
    f: SampledFunction,
    g: SampledFunction,
    stopping: StoppingData,
    bank: PacketBank,
    system: TileSystem,
    n_max: int = 20,
    lambdas: Sequence[float] | None = None,
) -> DecompositionReport:
    """Split S into size levels and evaluate the ledgers of the weak-type argument.

    ``f`` and ``g`` are normalized to unit L2 norm first; their original
    norms are reported. Levels with n <= 0 form S', the rest S''.

    Raises
    ------
    InvariantViolation
        If the levels do not partition S, the exceptional set outgrows its
        bound, or the pairing identity on V fails.
    """
    tiles = sorted(set(tiles))
    norms = (f.l2_norm(), g.l2_norm())
    if not tiles or norms[0] == 0.0 or norms[1] == 0.0:
        return DecompositionReport.empty(norms)
    f = f * (1.0 / norms[0])
    g = g * (1.0 / norms[1])
    c1 = bank.coefficients(f, tiles, 1)
    c2 = bank.coefficients(g, tiles, 2)
    index = TileIndex(tiles)
    gamma = max(_level_exponent(size(tiles, 1, c1, index).value), _level_exponent(size(tiles, 2, c2, index).value))
    run = _iterate_levels(tiles, [(1, c1), (2, c2)], system, gamma, n_max, lambda n: 2.0 ** (2 * n))
    placed = [s for level in run.levels.values() for s in level] + run.leftover
    if sorted(placed) != tiles:
        raise InvariantViolation(f"levels hold {len(placed)} tiles, expected {len(tiles)}")
    lower = [s for n, level in run.levels.items() if n <= 0 for s in level]
    upper = [s for n, level in run.levels.items() if n > 0 for s in level] + run.leftover

    exceptional: list[Interval] = []
    exceptional_bound = Fraction(0)
    for n, trees in run.trees.items():
        if n > 0:
            continue
        for tree in trees:
            exceptional.append(tree.top.interval.dilate(Fraction(2) ** -n))
            exceptional_bound += Fraction(2) ** -n * tree.top.length
    measure = union_measure(exceptional)
    if measure > exceptional_bound:
        raise InvariantViolation(f"|E| = {float(measure):.6g} exceeds {float(exceptional_bound):.6g}")

    outside = _outside(f.x, exceptional)
    lower_square = root_sum_squares(block_sums(lower, c1, c2, stopping, bank))
    tail_l1 = float(np.sum(lower_square[outside]) * f.step)
    tail_bound = sum(2.0**n for n, level in run.levels.items() if n <= 0 and level)
    tail_level = float(np.sum((lower_square > 1.0) & outside) * f.step)

    upper_blocks = block_sums(upper, c1, c2, stopping, bank)
    upper_square = root_sum_squares(upper_blocks)
    v_mask = upper_square > 1.0
    v_measure = float(np.sum(v_mask) * f.step)
    pairing = upper_ledger = 0.0
    upper_reports: list[LevelReport] = []
    if v_measure > 0.0:
        indicator = f.like(v_mask / math.sqrt(v_measure))
        spectra = [natural_spectrum(indicator * h) for h in realizing_weights(upper_blocks)]
        c3 = {s: bilinear_pair(bank.phi(s, 3), spectra[stopping.block_of(s) - 1]) for s in upper}
        pairing = float(np.sum(upper_square * indicator.values.real) * f.step)
        model = complex(sum(float(s.length) ** -0.5 * c1[s] * c2[s] * c3[s] for s in upper))
        if abs(model - pairing) > 1e-8 * max(1.0, abs(pairing)):
            raise InvariantViolation(f"pairing on V is {pairing:.10g}, tile sum gives {model:.10g}")
        start = _level_exponent(size(upper, 3, c3).value)
        big_j = len(stopping.u)
        upper_run = _iterate_levels(
            upper, [(3, c3)], system, start, n_max, lambda n: big_j**0.125 * 2.0 ** (2.5 * n)
        )
        upper_reports = upper_run.reports
        upper_ledger = sum(2.0 ** (-3 * r.n) * r.top_mass for r in upper_reports)

    total = root_sum_squares(block_sums(tiles, c1, c2, stopping, bank))
    grid = list(lambdas) if lambdas is not None else [2.0**p for p in range(-6, 4)]
    profile = level_set_profile(total, f.step, grid)
    logger.info(
        "decomposition: gamma=%d, %d levels, |E|=%.4g, |V|=%.4g", gamma, len(run.reports), float(measure), v_measure
    )
    return DecompositionReport(
        gamma=gamma,
        levels=tuple(run.reports),
        unresolved=len(run.leftover),
        exceptional_measure=float(measure),
        exceptional_bound=float(exceptional_bound),
        tail_l1=tail_l1,
        tail_bound=tail_bound,
        tail_level_measure=tail_level,
        v_measure=v_measure,
        pairing=pairing,
        upper_levels=tuple(upper_reports),
        upper_ledger=upper_ledger,
        weak_l1=tuple((float(lam), float(v)) for lam, v in zip(grid, profile)),
        norms=norms,
    )


# ----------------------------------------------------------------------
# Fixed-scale almost orthogonality
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class GramReport:
    quadratic: float
    mass: float
    schur: float
    class_row_sums: dict[int, float]
    off_diagonal_constant: float
    decay_exponent: float | None

    @property
    def ratio(self) -> float:
        return self.quadratic / self.mass if self.mass else 0.0


def _band_matrix(bands: Sequence[Band]) -> ComplexArray:
    rows = np.zeros((len(bands), bands[0].size), dtype=np.complex128)
    for r, band in enumerate(bands):
        np.add.at(rows[r], band.natural(), band.values)
    return rows


def fixed_scale_gram(
    tiles: Sequence[Multitile],
    k: int,
    coefficients: Sequence[complex] | Coefficients,
    bank: PacketBank,
    decay_power: int = 10,
) -> GramReport:
    """||sum a_s psi_{s,3}||^2 against sum |a_s|^2 for tiles of length 2^k.

    Packets are normalized so a single tile gives ratio 1. The Gram matrix
    yields the Schur bound (max row sum, asserted), the row sums of each
    omega_3 class, the constant C with |G| <= C (1 + dist / 2^k)^-10 within
    a class, and the fitted decay exponent of those entries.

    Raises
    ------
    PreconditionError
        If some tile has a different scale.
    InvariantViolation
        If the quadratic form exceeds the Schur bound.
    """
    tiles = list(tiles)
    if not tiles:
        return GramReport(0.0, 0.0, 0.0, {}, 0.0, None)
    if any(s.i != k for s in tiles):
        raise PreconditionError(f"all tiles must have |I_s| = 2^{k}")
    if isinstance(coefficients, Mapping):
        a = np.array([coefficients[s] for s in tiles], dtype=np.complex128)
    else:
        a = np.asarray(coefficients, dtype=np.complex128)
    bands = [bank.psi3(s) for s in tiles]
    rows = _band_matrix(bands)
    norm_squared = bands[0].l2_norm() ** 2
    period = bands[0].period
    gram = rows @ rows.conj().T / (period * norm_squared)
    combined = a @ rows
    quadratic = float(np.sum(np.abs(combined) ** 2) / (period * norm_squared))
    mass = float(np.sum(np.abs(a) ** 2))
    row_sums = np.sum(np.abs(gram), axis=1)
    schur = float(np.max(row_sums))
    if quadratic > schur * mass * (1.0 + 1e-9) + 1e-14:
        raise InvariantViolation(f"quadratic form {quadratic:.6g} exceeds Schur bound {schur * mass:.6g}")

    classes: dict[int, list[int]] = {}
    for r, s in enumerate(tiles):
        classes.setdefault(s.l3, []).append(r)
    class_row_sums = {
        l3: float(np.max(np.sum(np.abs(gram[np.ix_(members, members)]), axis=1))) for l3, members in classes.items()
    }
    scale = 2.0**k
    constant = 0.0
    logs: list[tuple[float, float]] = []
    for members in classes.values():
        for p, r in enumerate(members):
            for q in members[p + 1 :]:
                dist = float(tiles[r].interval.as_interval().distance(tiles[q].interval.as_interval())) / scale
                entry = abs(gram[r, q])
                constant = max(constant, entry * (1.0 + dist) ** decay_power)
                if dist > 0.0 and entry > 1e-14:
                    logs.append((math.log1p(dist), math.log(entry)))
    exponent = None
    if len({x for x, _ in logs}) >= 2:
        xs, ys = np.array(logs).T
        exponent = float(-np.polyfit(xs, ys, 1)[0])
        if exponent < 8.0:
            logger.warning("fitted Gram decay exponent %.3g is below 8", exponent)
    return GramReport(quadratic, mass, schur, class_row_sums, constant, exponent)
