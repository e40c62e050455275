"""Tests for sampled functions, transforms and the test classes."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from ergotile.exceptions import ParameterError
from ergotile.grids import Interval
from ergotile.rng import SplitMix64
from ergotile.signals import (
    SampledFunction,
    TestClassSpec,
    gaussian,
    hl_maximal,
    indicator,
    level_set_profile,
    parseval_defect,
    partition_bump,
    random_test_function,
    smooth_step,
    transform_pair,
    weak_l1_norm,
)

A, B = 4, 6


class TestProfiles:
    def test_smooth_step_limits(self) -> None:
        """0 below 0, 1 above 1, 1/2 at the midpoint."""
        out = smooth_step([-1.0, 0.0, 0.5, 1.0, 2.0])
        assert out == pytest.approx([0.0, 0.0, 0.5, 1.0, 1.0])

    def test_partition_bump_translates_sum_to_one(self) -> None:
        """Integer translates of the bump form a partition of unity."""
        u = np.linspace(3.0, 7.0, 401)
        total = sum(partition_bump(u - k) for k in range(0, 10))
        assert np.max(np.abs(total - 1.0)) < 1e-12


class TestSampledFunction:
    def test_wrong_length_rejected(self) -> None:
        """Sample counts must match the grid."""
        with pytest.raises(ParameterError):
            SampledFunction(A, B, np.zeros(7))

    def test_values_are_read_only(self) -> None:
        """Samples are frozen after construction."""
        f = gaussian(A, B)
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_gaussian_is_its_own_transform(self) -> None:
        """exp(-pi x^2) transforms to exp(-pi xi^2)."""
        f = gaussian(A, B)
        assert np.max(np.abs(f.spectrum() - np.exp(-np.pi * f.xi**2))) < 1e-10

    def test_transform_round_trip(self) -> None:
        """from_spectrum inverts spectrum."""
        f = gaussian(A, B, center=1.0, width=0.5).modulate(2.0)
        _, back = transform_pair(f)
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_parseval(self) -> None:
        """||f||_2 equals ||f^||_2 with the 1/P weight."""
        assert parseval_defect(gaussian(A, B, center=-2.0)) < 1e-12

    def test_translate_by_steps(self) -> None:
        """Translation moves samples and zero-fills."""
        f = gaussian(A, B)
        g = f.translate(1.0)
        shift = int(1.0 / f.step)
        assert np.allclose(g.values[shift:], f.values[:-shift])
        assert np.all(g.values[:shift] == 0)

    def test_translate_off_grid(self) -> None:
        """Shifts must be multiples of the step."""
        with pytest.raises(ParameterError):
            gaussian(A, B).translate(0.3 * 2.0**-B)

    def test_compression_preserves_l1(self) -> None:
        """Dil^1 with j < 0 keeps the L1 norm of a well-localized function."""
        f = gaussian(A, B)
        assert f.dilate(-1).l1_norm() == pytest.approx(f.l1_norm(), rel=1e-6)

    def test_inner_product_conjugates_second_argument(self) -> None:
        """<f, i f> = -i ||f||^2."""
        f = gaussian(A, B)
        assert f.inner(f * 1j) == pytest.approx(-1j * f.l2_norm() ** 2)


class TestWeakL1:
    def test_constant_function(self) -> None:
        """A constant of height 1 on n samples has weak-L1 norm n * step."""
        values = np.zeros(64)
        values[:16] = 1.0
        assert weak_l1_norm(values, 0.5) == pytest.approx(8.0)

    def test_zero_function(self) -> None:
        """The zero function has weak-L1 norm 0."""
        assert weak_l1_norm(np.zeros(8), 1.0) == 0.0

    def test_level_set_profile(self) -> None:
        """lambda * |{|F| > lambda}| at chosen thresholds."""
        out = level_set_profile([1.0, 2.0, 3.0, 4.0], 1.0, [0.5, 2.0, 4.0])
        assert list(out) == pytest.approx([2.0, 4.0, 0.0])

    def test_maximal_function_dominates(self) -> None:
        """M f >= |f| pointwise."""
        f = gaussian(A, B, center=3.0)
        assert np.all(hl_maximal(f).values.real >= f.modulus() - 1e-15)


class TestTestClasses:
    SPEC = (Interval(Fraction(-2), Fraction(-1)), Interval(Fraction(3), Fraction(4)))

    def test_indicator_measure(self) -> None:
        """The sampled indicator has L1 norm |E|."""
        assert indicator(list(self.SPEC), A, B).l1_norm() == pytest.approx(2.0)

    def test_sup_class_bounded_by_one_on_e(self) -> None:
        """Elements of X(E) satisfy |h| <= 1_E."""
        h = random_test_function(TestClassSpec(self.SPEC, "sup"), SplitMix64(3), A, B)
        support = indicator(list(self.SPEC), A, B).values.real > 0
        assert np.all(h.modulus() <= 1.0)
        assert np.all(h.values[~support] == 0)

    def test_l2_class_has_unit_norm_bound(self) -> None:
        """Elements of X_2(E) have ||h||_2 <= 1."""
        h = random_test_function(TestClassSpec(self.SPEC, "l2"), SplitMix64(4), A, B)
        assert h.l2_norm() <= 1.0
        assert h.sup_norm() <= 2.0**-0.5 + 1e-12
