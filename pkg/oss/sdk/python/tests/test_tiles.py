"""Tests for tile systems, the order relations, trees and forests."""

from __future__ import annotations

from fractions import Fraction

import pytest

from ergotile.exceptions import ParameterError, PreconditionError
from ergotile.grids import Interval
from ergotile.rng import SplitMix64
from ergotile.tiles import (
    Forest,
    Multitile,
    TileSystem,
    Tree,
    check_system_constraints,
    compare,
    disintegrate,
    forest_stats,
    generate_multitiles,
    is_lacunary,
    maximal_tree,
    mutually_strongly_disjoint,
    order_battery,
    rescale_coefficients,
    size,
    strongly_disjoint,
    tree_paraproduct,
    tree_violations,
)

F = Fraction
E = 24


def tile(i: int, m: int, l1: int) -> Multitile:
    return Multitile(i, m, l1, E)


TOP = tile(0, 0, 0)
BELOW = tile(-4, 0, 0)
STRAY = tile(-4, 0, 5)


class TestTileSystem:
    def test_profile_margins(self) -> None:
        """The test profile has separation margin 23/6 and enlargement margin 1137/2."""
        assert check_system_constraints(TileSystem.test()) == (F(23, 6), F(1137, 2))

    def test_paper_profile_is_consistent(self) -> None:
        """e=100, delta=1000, c_sep=10 passes the constraint check."""
        separation, enlargement = check_system_constraints(TileSystem.paper())
        assert separation > 0
        assert enlargement >= 0

    def test_small_gap_rejected(self) -> None:
        """A gap too small for the separation constant fails the check."""
        with pytest.raises(ParameterError, match="separation"):
            TileSystem(e=8, delta=1, c_sep=F(2)).check()

    def test_zero_gap_rejected(self) -> None:
        with pytest.raises(ParameterError):
            TileSystem(e=0, delta=4)

    def test_default_enlargement(self) -> None:
        """c_enl defaults to 10 |e|."""
        assert TileSystem(e=-30, delta=4).enlargement == F(300)

    def test_scale_period(self) -> None:
        """Admissible scales repeat with period lcm(delta, 4)."""
        assert TileSystem.test().period == 4
        assert TileSystem(e=24, delta=6).period == 12
        assert TileSystem.test().scales(-5, 5) == [-4, 0, 4]
        assert not TileSystem.test().admits_scale(2)

    def test_rescaled_system_shifts_residue(self) -> None:
        """Rescaling by k moves the admissible scales by k."""
        assert TileSystem.test().rescaled(1).scales(-5, 5) == [-3, 1, 5]


class TestMultitiles:
    def test_derived_frequencies(self) -> None:
        """l2 = l1 + e and l3 = 2 l1 + e."""
        s = tile(0, 0, 5)
        assert (s.l2, s.l3) == (29, 34)
        assert s.omega(1).as_interval() == Interval(F(1), F(2))
        assert s.omega(3).as_interval() == Interval(F(34, 5), F(39, 5))

    def test_generate_counts(self) -> None:
        """Scales -4 and 0 over [-1, 1) x [0, 16) give 32 + 32 tiles."""
        tiles = generate_multitiles(TileSystem.test(), [-4, -2, 0], Interval(F(-1), F(1)), Interval(F(0), F(16)))
        assert len(tiles) == 64
        assert {s.i for s in tiles} == {-4, 0}
        assert all(s.l1 % 5 == 0 for s in tiles)

    def test_rescale_coefficients(self) -> None:
        """Dilation by 2^k multiplies coefficients by 2^(k/2)."""
        out = rescale_coefficients({TOP: 1.0 + 0j}, 2)
        assert list(out) == [tile(2, 0, 0)]
        assert abs(out[tile(2, 0, 0)] - 2.0) < 1e-12


class TestOrderRelations:
    def test_tree_order_in_first_component(self) -> None:
        """A finer tile below the top with a wider first frequency interval is < in component 1."""
        flags = compare(TOP, BELOW, 1, TileSystem.test())
        assert flags.lt and flags.le and flags.lesssim

    def test_other_components_are_separated(self) -> None:
        """s'_1 < s_1 forces s'_2 <~' s_2 and not s'_2 < s_2."""
        flags = compare(TOP, BELOW, 2, TileSystem.test())
        assert not flags.lt
        assert flags.lesssim_prime

    def test_equal_tiles_are_le_not_lt(self) -> None:
        flags = compare(TOP, TOP, 1, TileSystem.test())
        assert flags.le and not flags.lt

    def test_paper_system_spans_many_scales(self) -> None:
        """Scales 1000 apart compare exactly."""
        system = TileSystem.paper()
        flags = compare(Multitile(1000, 0, 0, 100), Multitile(0, 0, 0, 100), 1, system)
        assert flags.lt

    def test_order_battery_has_no_violations(self, rng: SplitMix64) -> None:
        """Random pairs on the test profile never break the separated order."""
        result = order_battery(TileSystem.test(), rng, 200, [-8, -4, 0, 4, 8], spread=16)
        assert result.pairs == 200
        assert result.violations == 0
        assert result.witness == ""

    def test_order_battery_needs_two_scales(self, rng: SplitMix64) -> None:
        with pytest.raises(ParameterError):
            order_battery(TileSystem.test(), rng, 10, [0, 1, 2])


class TestTrees:
    def test_valid_tree(self) -> None:
        """Top plus one tile below it has no violations."""
        assert tree_violations(Tree(1, TOP, (TOP, BELOW))) == []

    def test_violating_member_reported(self) -> None:
        """A member outside the top's frequency interval is flagged."""
        assert STRAY in tree_violations(Tree(1, TOP, (TOP, BELOW, STRAY)))

    def test_bad_kind(self) -> None:
        with pytest.raises(ParameterError):
            Tree(4, TOP)

    def test_maximal_tree(self) -> None:
        """Only tiles below the top in component 1 are collected."""
        tree = maximal_tree([BELOW, STRAY], TOP, 1)
        assert set(tree.members) == {TOP, BELOW}

    def test_lacunary_in_other_component(self) -> None:
        """A 1-tree is 2-lacunary on the test profile."""
        system = TileSystem.test()
        tree = Tree(1, TOP, (TOP, BELOW))
        assert is_lacunary(tree, 2, system)
        assert mutually_strongly_disjoint([tree], 2, system) == (True, "")

    def test_disintegrate_single_tree(self) -> None:
        """A nested subset becomes one tree under its maximal element."""
        trees = disintegrate([TOP, BELOW], 1)
        assert len(trees) == 1
        assert trees[0].top == TOP
        assert set(trees[0].members) == {TOP, BELOW}

    def test_disintegrate_is_idempotent(self) -> None:
        """Each tree returned by disintegrate comes back unchanged when disintegrated again."""
        pool = generate_multitiles(TileSystem.test(), [-4, 0], Interval(F(-1), F(1)), Interval(F(0), F(16)))
        pieces = []
        for top in pool:
            tree = maximal_tree(pool, top, 1)
            headless = [s for s in tree.members if s != top]
            pieces.extend(disintegrate(tree.members, 1))
            pieces.extend(disintegrate(headless, 1))
        assert any(len(piece) > 1 for piece in pieces)
        for piece in pieces:
            assert disintegrate(piece.members, 1) == [piece]
            assert disintegrate(piece.members, 1, top=piece.top) == [piece]

    def test_disintegrate_rejects_unnested(self) -> None:
        """Disjoint frequency intervals at one scale fit in no tree."""
        with pytest.raises(PreconditionError):
            disintegrate([BELOW, STRAY], 1)

    def test_strong_disjointness(self) -> None:
        """A tree overlaps itself; far-apart trees are strongly disjoint."""
        near = Tree(1, TOP, (TOP,))
        far = Tree(1, tile(0, 10, 50), (tile(0, 10, 50),))
        assert strongly_disjoint(near, near, 1)[0] is False
        assert strongly_disjoint(near, far, 1) == (True, None)


class TestSizeAndParaproduct:
    def test_single_tile_size(self) -> None:
        """The size of one unit tile is its coefficient modulus."""
        assert size([TOP], 1, {TOP: 3.0 + 0j}).value == pytest.approx(3.0)

    def test_empty_size(self) -> None:
        assert size([], 1, {}).value == 0.0

    def test_single_tile_paraproduct_is_sharp(self) -> None:
        """For one tile both sides of the paraproduct estimate agree."""
        coefficients = [{TOP: 2.0 + 0j}, {TOP: 3.0j}, {TOP: 0.5 + 0j}]
        result = tree_paraproduct(Tree(1, TOP, (TOP,)), coefficients)
        assert result.lhs == pytest.approx(3.0)
        assert result.ratio == pytest.approx(1.0)

    def test_paraproduct_needs_three_maps(self) -> None:
        with pytest.raises(ParameterError):
            tree_paraproduct(Tree(1, TOP, (TOP,)), [{TOP: 1.0}])


class TestForests:
    def test_counting_function(self) -> None:
        """Tops [0,1], [10,11] and [0,2]: N_F has L1 mass 4, sup 2 and BMO 3/2."""
        tops = [tile(0, 0, 0), tile(0, 10, 50), tile(1, 0, 0)]
        forest = Forest(1, tuple(Tree(1, t, (t,)) for t in tops))
        stats = forest_stats(forest)
        assert stats.l1 == F(4)
        assert stats.sup == 2
        assert stats.bmo == F(3, 2)
        assert forest.top_mass() == F(4)

    def test_empty_forest(self) -> None:
        stats = forest_stats(Forest(2))
        assert (stats.l1, stats.sup, stats.bmo) == (F(0), 0, F(0))
