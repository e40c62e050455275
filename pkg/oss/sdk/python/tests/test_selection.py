"""Tests for stopping data, tree selection and the decomposition ledgers."""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from ergotile.exceptions import ParameterError, PreconditionError
from ergotile.grids import DyadicInterval, Interval
from ergotile.kernels import ThetaProfile
from ergotile.rng import SplitMix64
from ergotile.selection import (
    StoppingData,
    bessel_decompose,
    boundary_family,
    chi_square_mass,
    fixed_scale_gram,
    full_decomposition,
    maximal_bessel_decompose,
    realizing_weights,
    single_tree_check,
    time_convexification,
)
from ergotile.signals import SampledFunction, gaussian
from ergotile.tiles import Multitile, TileSystem, Tree, generate_multitiles
from ergotile.wavepackets import PacketBank

F = Fraction
A, B = 5, 8
U = (-4, 0, 4)


@pytest.fixture(scope="module")
def system() -> TileSystem:
    return TileSystem.test()


@pytest.fixture(scope="module")
def bank() -> PacketBank:
    return PacketBank(ThetaProfile.test(), A, B)


@pytest.fixture(scope="module")
def pool(system: TileSystem) -> list[Multitile]:
    """Scales -4 and 0 over [-1, 1) x [0, 16)."""
    return generate_multitiles(system, [-4, 0], Interval(F(-1), F(1)), Interval(F(0), F(16)))


def tile(i: int, m: int, l1: int) -> Multitile:
    return Multitile(i, m, l1, 24)


class TestStoppingData:
    def test_single_block_lookup(self) -> None:
        """Block j holds scales u_j <= i < u_{j+1}."""
        data = StoppingData.single((0, 2, 4), 3, 4)
        assert data.blocks == 2
        assert (data.block(1), data.block(3), data.block(4)) == (1, 2, None)
        with pytest.raises(PreconditionError):
            data.block_of(tile(5, 0, 0))

    def test_scales_must_increase(self) -> None:
        with pytest.raises(ParameterError, match="strictly increasing"):
            StoppingData.single((0,), 3, 4)

    def test_weight_count(self) -> None:
        one = SampledFunction.from_callable(lambda x: np.ones_like(x), 3, 4)
        with pytest.raises(ParameterError, match="weights"):
            StoppingData((0, 1, 2), (one,))

    def test_weights_must_be_normalized(self) -> None:
        """sum |h_j|^2 = 1 pointwise."""
        zero = SampledFunction.zeros(3, 4)
        with pytest.raises(ParameterError, match="deviates"):
            StoppingData((0, 1, 2), (zero, zero))

    def test_stopping_time_range(self) -> None:
        one = SampledFunction.from_callable(lambda x: np.ones_like(x), 3, 4)
        kappa = np.full(one.size, 5, dtype=np.int64)
        with pytest.raises(ParameterError, match="stopping time"):
            StoppingData((0, 2), (one,), (kappa,))

    def test_random_is_valid(self, rng: SplitMix64) -> None:
        """Random weights are normalized and the stopping times stay inside their blocks."""
        data = StoppingData.random((0, 3, 5, 9), rng, 3, 4)
        assert len(data.kappas) == 3
        for j, kappa in enumerate(data.kappas):
            assert data.u[j] <= kappa.min() and kappa.max() < data.u[j + 1]

    def test_realizing_weights(self) -> None:
        """h_j = conj(B_j) / M turns sum h_j B_j into M."""
        grid = SampledFunction.zeros(3, 4)
        blocks = [grid.like(np.full(grid.size, 3.0)), grid.like(np.full(grid.size, 4.0j))]
        h = realizing_weights(blocks)
        paired = h[0].values * blocks[0].values + h[1].values * blocks[1].values
        assert np.allclose(paired, 5.0)

    def test_realizing_weights_at_zero(self) -> None:
        """Where every block vanishes h_1 = 1."""
        zero = SampledFunction.zeros(3, 4)
        h = realizing_weights([zero, zero])
        assert np.all(h[0].values == 1.0)
        assert np.all(h[1].values == 0.0)


class TestBesselSelection:
    def test_empty_pool(self, system: TileSystem) -> None:
        result = bessel_decompose([], 1, {}, system)
        assert result.forest.trees == ()
        assert result.remainder == ()

    def test_zero_coefficients(self, system: TileSystem, pool: list[Multitile]) -> None:
        """sigma = 0 selects nothing."""
        result = bessel_decompose(pool, 1, {s: 0j for s in pool}, system)
        assert result.sigma == 0.0
        assert result.selected == []
        assert len(result.remainder) == len(pool)

    @pytest.mark.parametrize("j", [1, 2, 3])
    def test_partition_and_remainder_size(
        self, j: int, system: TileSystem, pool: list[Multitile], rng: SplitMix64
    ) -> None:
        """Remainder and forest partition the pool; the remainder has size <= sigma/2."""
        values = rng.complex_normal(len(pool))
        coefficients = {s: complex(v) for s, v in zip(pool, values)}
        result = bessel_decompose(pool, j, coefficients, system)
        assert result.forest.trees
        placed = Counter([*result.remainder, *result.selected])
        assert placed == Counter(pool)
        assert result.remainder_size <= result.sigma / 2 * (1 + 1e-9)
        assert result.top_mass == pytest.approx(float(result.forest.top_mass()))

    def test_maximal_with_unit_weight_matches_plain_selection(
        self, system: TileSystem, pool: list[Multitile], bank: PacketBank
    ) -> None:
        """With h_1 = 1 on the only occupied block the maximal selection is the plain 3-size selection."""
        stopping = StoppingData.single((-8, 4, 8), A, B)
        assert stopping.blocks == 2
        assert {stopping.block_of(s) for s in pool} == {1}
        h = gaussian(A, B, width=0.5).modulate(6.0)
        out = maximal_bessel_decompose(pool, h, stopping, bank, system, 1.0)
        plain = bessel_decompose(pool, 3, bank.coefficients(h, pool, 3), system)
        assert out.result.sigma == plain.sigma
        assert out.result.forest.trees == plain.forest.trees
        assert out.result.remainder == plain.remainder
        assert out.result.top_mass == plain.top_mass

    def test_maximal_with_zero_weight(
        self, system: TileSystem, pool: list[Multitile], bank: PacketBank
    ) -> None:
        """A vanishing h gives no trees and zero ratios."""
        stopping = StoppingData.single(U, A, B)
        out = maximal_bessel_decompose(pool, SampledFunction.zeros(A, B), stopping, bank, system, 1.0)
        assert out.result.selected == []
        assert out.blocks == len(U)
        assert out.ratios == {0.25: 0.0, 0.5: 0.0}


class TestSingleTree:
    TOP = tile(0, 0, 0)
    BELOW = tile(-4, 0, 0)

    def test_time_convexification(self) -> None:
        """Every dyadic interval between I_s and I_T is filled in."""
        convex = time_convexification(Tree(1, self.TOP, (self.TOP, self.BELOW)))
        assert convex == {DyadicInterval(k, 0) for k in range(-4, 1)}

    def test_chi_square_mass_closed_form(self) -> None:
        """The integral of chi_I^2 over I itself is 2 |I| arctan(1/2)."""
        mass = chi_square_mass(DyadicInterval(0, 0), [Interval(F(0), F(1))])
        assert mass == pytest.approx(2.0 * math.atan(0.5))

    def test_boundary_family_covers_doubled_top(self) -> None:
        """For a one-tile tree the family is the top and its two neighbours."""
        family = boundary_family(Tree(3, self.TOP, (self.TOP,)))
        assert sorted(iv.index for iv in family) == [-1, 0, 1]

    def test_check_with_zero_weight(self, system: TileSystem, bank: PacketBank) -> None:
        """h = 0 makes the left side vanish; the family covers 2 I_T."""
        tree = Tree(3, self.TOP, (self.TOP,))
        result = single_tree_check(
            tree, [Interval(F(0), F(1))], SampledFunction.zeros(A, B), StoppingData.single(U, A, B), bank, system
        )
        assert result.lhs == 0.0
        assert result.rhs == pytest.approx(2.0 * math.atan(0.5))
        assert result.ratio == 0.0
        assert result.covered


class TestDecomposition:
    def test_zero_function_gives_empty_report(
        self, system: TileSystem, pool: list[Multitile], bank: PacketBank
    ) -> None:
        stopping = StoppingData.single(U, A, B)
        report = full_decomposition(pool, SampledFunction.zeros(A, B), gaussian(A, B), stopping, bank, system)
        assert report.levels == ()
        assert report.weak_l1_max == 0.0
        assert report.norms[0] == 0.0

    def test_ledgers_on_gaussians(
        self, system: TileSystem, pool: list[Multitile], bank: PacketBank, rng: SplitMix64
    ) -> None:
        """The exceptional set stays within its bound and every tile is placed."""
        stopping = StoppingData.random(U, rng, A, B)
        f = gaussian(A, B, width=0.5).modulate(3.0)
        g = gaussian(A, B, center=0.25).modulate(8.0)
        report = full_decomposition(pool, f, g, stopping, bank, system, n_max=12)
        assert report.exceptional_measure <= report.exceptional_bound + 1e-12
        assert sum(level.tiles for level in report.levels) + report.unresolved == len(pool)
        assert report.norms[0] == pytest.approx(f.l2_norm())


class TestFixedScaleGram:
    def test_single_tile_ratio_is_one(self, bank: PacketBank) -> None:
        report = fixed_scale_gram([tile(0, 0, 0)], 0, [2.0 + 0j], bank)
        assert report.ratio == pytest.approx(1.0)
        assert report.schur == pytest.approx(1.0)

    def test_quadratic_form_within_schur(self, bank: PacketBank, rng: SplitMix64) -> None:
        """Translates at one scale are almost orthogonal."""
        tiles = [tile(0, m, 0) for m in range(-6, 6)] + [tile(0, m, 5) for m in range(-6, 6)]
        coefficients = rng.complex_normal(len(tiles))
        report = fixed_scale_gram(tiles, 0, coefficients, bank)
        assert report.ratio <= report.schur * (1 + 1e-9)
        assert set(report.class_row_sums) == {24, 34}

    def test_mixed_scales_rejected(self, bank: PacketBank) -> None:
        with pytest.raises(PreconditionError):
            fixed_scale_gram([tile(0, 0, 0), tile(-4, 0, 0)], 0, [1.0, 1.0], bank)

    def test_empty(self, bank: PacketBank) -> None:
        assert fixed_scale_gram([], 0, [], bank).ratio == 0.0
