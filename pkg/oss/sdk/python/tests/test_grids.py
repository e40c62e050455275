"""Tests for dyadic intervals, grids and sparsity."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergotile.exceptions import ParameterError
from ergotile.grids import (
    DyadicInterval,
    Grid,
    Interval,
    chi_weight,
    covers,
    family_disjoint,
    is_sparse,
    nestedness_violations,
    regular_cover,
    sparsify,
    sparsify_report,
    union_measure,
)

F = Fraction
WINDOW = Interval(F(-32), F(32))


class TestIntervals:
    def test_empty_interval_rejected(self) -> None:
        """hi < lo raises."""
        with pytest.raises(ParameterError):
            Interval(F(1), F(0))

    def test_offset_range(self) -> None:
        """Dyadic offsets must lie in [0, 1)."""
        with pytest.raises(ParameterError):
            DyadicInterval(0, 0, F(1))

    def test_dyadic_endpoints(self) -> None:
        """2^scale [index + offset, index + 1 + offset]."""
        iv = DyadicInterval(-2, 3, F(1, 3))
        assert (iv.lo, iv.hi) == (F(10, 12), F(13, 12))
        assert iv.length == F(1, 4)

    def test_parent(self) -> None:
        """The standard parent doubles the scale."""
        assert DyadicInterval(0, 3).parent() == DyadicInterval(1, 1)
        assert DyadicInterval(0, -1).parent() == DyadicInterval(1, -1)

    def test_dilate_keeps_center(self) -> None:
        """Dilation keeps the center."""
        out = Interval(F(0), F(2)).dilate(3)
        assert (out.lo, out.hi) == (F(-2), F(4))

    def test_union_measure_merges_overlaps(self) -> None:
        """Overlapping pieces are counted once."""
        pieces = [Interval(F(0), F(2)), Interval(F(1), F(3)), Interval(F(5), F(6))]
        assert union_measure(pieces) == F(4)

    def test_covers(self) -> None:
        """A gap in the family breaks coverage."""
        family = [Interval(F(0), F(1)), Interval(F(1), F(2))]
        assert covers(family, Interval(F(0), F(2)))
        assert not covers([family[0], Interval(F(F(3, 2)), F(2))], Interval(F(0), F(2)))

    def test_chi_weight_at_center(self) -> None:
        """chi_I equals 1 at the center and decays away from it."""
        iv = Interval(F(0), F(2))
        assert chi_weight(iv, 1.0, 4.0) == pytest.approx(1.0)
        assert chi_weight(iv, 11.0, 4.0) == pytest.approx((1 + 25.0) ** -2)


class TestGrids:
    @pytest.mark.parametrize("grid", [Grid.standard(), Grid.shifted(0), Grid.shifted(1), Grid.shifted(2)])
    def test_standard_and_shifted_grids_nest(self, grid: Grid) -> None:
        """S and D_d are nested over a range of scales."""
        assert nestedness_violations(grid, list(range(-6, 7)), WINDOW) == 0

    @pytest.mark.parametrize("n", [3, 5, 7])
    def test_family_grids_nest(self, n: int) -> None:
        """Every G_{N,t,L} is nested."""
        scales = list(range(-8, 9))
        for t in range(n - 1):
            for shift in range(n):
                assert nestedness_violations(Grid.family(n, t, shift), scales, WINDOW) == 0

    def test_family_shifts_disjoint(self) -> None:
        """G_{5,t,L} for different L share no member."""
        grids = [Grid.family(5, 1, shift) for shift in range(5)]
        assert family_disjoint(grids, range(-8, 9), WINDOW)

    def test_shifted_offsets_alternate(self) -> None:
        """D_1 alternates between offsets 1/3 and 2/3."""
        grid = Grid.shifted(1)
        assert grid.offset(0) == F(1, 3)
        assert grid.offset(1) == F(2, 3)

    @pytest.mark.parametrize("args", [(4, 0, 0), (9, 0, 0), (5, 4, 0), (5, 0, 5), (1, 0, 0)])
    def test_bad_family_parameters(self, args: tuple[int, int, int]) -> None:
        """Even N, N failing 2^(N-1) = 1 mod N, or t, L out of range raise."""
        with pytest.raises(ParameterError):
            Grid.family(*args)

    def test_member_at_rejects_foreign_scale(self) -> None:
        """G_{5,0,L} only has scales divisible by 4."""
        with pytest.raises(ParameterError):
            Grid.family(5, 0, 1).member_at(1, F(0))

    def test_member_at_holds_point(self) -> None:
        """The member containing x has x in [lo, hi)."""
        member = Grid.family(5, 0, 2).member_at(4, F(7))
        assert member.lo <= 7 < member.hi


class TestSparsity:
    def test_regular_cover_of_unit_interval(self) -> None:
        """A dyadic interval is its own D_0 enlargement."""
        assert regular_cover(Interval(F(0), F(1))) == (0, DyadicInterval(0, 0))

    def test_neighbours_not_sparse(self) -> None:
        """Adjacent same-scale intervals violate the separation condition."""
        report = is_sparse([DyadicInterval(0, 0), DyadicInterval(0, 1)], 1, 0, 2, 2)
        assert not report.sparse
        assert "distance" in report.witness

    def test_close_scales_not_sparse(self) -> None:
        """Scales closer than gap * A violate the scale-gap condition."""
        report = is_sparse([DyadicInterval(0, 0), DyadicInterval(1, 40)], 1, 0, 2, 2)
        assert not report.sparse

    def test_amplitude_below_one(self) -> None:
        """A < 1 is rejected."""
        with pytest.raises(ParameterError):
            is_sparse([DyadicInterval(0, 0)], F(1, 2), 0)

    @settings(max_examples=25, deadline=None)
    @given(
        st.lists(
            st.builds(DyadicInterval, st.integers(-4, 4), st.integers(-40, 40)),
            min_size=1,
            max_size=25,
        )
    )
    def test_sparsify_classes_are_sparse(self, family: list[DyadicInterval]) -> None:
        """Every class produced by sparsify passes the sparsity check and the classes partition the input."""
        classes = sparsify(family, 1, 2, 2)
        assert sorted(iv for cls in classes for iv in cls.intervals) == sorted(set(family))
        for cls in classes:
            assert is_sparse(list(cls.intervals), 1, cls.d, 2, 2).sparse

    def test_class_count_against_amplitude(self) -> None:
        """Four neighbours at one scale need three classes when A = 1 and gaps are 2|I|."""
        family = [DyadicInterval(0, m) for m in range(4)]
        report = sparsify_report(family, 1, 2, 2)
        assert report.intervals == 4
        assert [sorted(iv.index for iv in cls.intervals) for cls in report.classes] == [[0, 3], [1], [2]]
        assert report.ratio == 3.0
        assert sparsify_report(family + family, 2, 2, 2).intervals == 4

    def test_ratio_divides_by_amplitude_squared(self) -> None:
        report = sparsify_report([DyadicInterval(0, 0)], 2, 2, 2)
        assert len(report.classes) == 1
        assert report.ratio == pytest.approx(0.25)
