"""Tests for kernel families, validation, the split and the discrete kernels."""

from __future__ import annotations

import numpy as np
import pytest

from ergotile.exceptions import ParameterError, UnsupportedKernelError
from ergotile.kernels import (
    ThetaProfile,
    average_profile,
    custom_kernel,
    discrete_kernels,
    error_weight_ledger,
    error_weight_sum,
    hilbert_profile,
    lp_piece,
    make_kernel,
    series_weight_ledger,
    split_kernel,
    validate_kernel,
)


class TestProfiles:
    def test_average_profile_bounds(self) -> None:
        """1_[0,1] <= K_M <= 1_[-1/M, 1+1/M]."""
        x = np.linspace(-1.0, 2.0, 3001)
        k = average_profile(x, 4)
        assert np.all(k[(x >= 0) & (x <= 1)] == 1.0)
        assert np.all(k[(x < -0.25) | (x > 1.25)] == 0.0)
        assert np.all((k >= 0) & (k <= 1))

    def test_hilbert_profile(self) -> None:
        """K_M equals 1/x outside [-1, 1] and vanishes near 0."""
        x = np.array([-3.0, -1.0, 0.0, 0.5, 1.0, 2.0])
        assert hilbert_profile(x, 4) == pytest.approx([-1 / 3, -1.0, 0.0, 0.0, 1.0, 0.5])


class TestMakeKernel:
    def test_average_integral(self) -> None:
        """The smoothed average integrates to 1 + 1/M."""
        assert make_kernel("average", 4).integral() == pytest.approx(1.25, abs=1e-10)

    def test_hilbert_one_sided_limits(self) -> None:
        """The Hilbert-type symbol tends to -i pi at 0+ and i pi at 0-."""
        report = validate_kernel(make_kernel("hilbert", 4))
        assert report.limit_plus == pytest.approx(-1j * np.pi, abs=1e-6)
        assert report.limit_minus == pytest.approx(1j * np.pi, abs=1e-6)
        assert not report.vanishing_holds

    def test_constants_finite(self) -> None:
        """Every symbol constant of the average kernel is finite."""
        report = validate_kernel(make_kernel("average", 8))
        assert len(report.constants) == 4
        assert all(np.isfinite(c) for c in report.constants)

    @pytest.mark.parametrize("kind, m", [("hilbert", 1), ("custom", 4)])
    def test_rejected(self, kind: str, m: int) -> None:
        """M < 2 and the custom kind raise ParameterError."""
        with pytest.raises(ParameterError):
            make_kernel(kind, m)

    def test_unknown_kind(self) -> None:
        """Unknown kinds fail in the enum."""
        with pytest.raises(ValueError):
            make_kernel("fejer", 4)

    def test_custom_kernel_without_spatial_profile(self) -> None:
        """A symbol-only kernel has no spatial samples."""
        kernel = custom_kernel(lambda xi: np.zeros(np.atleast_1d(xi).shape, dtype=np.complex128))
        with pytest.raises(ParameterError):
            kernel.spatial_samples([0.0])


class TestSplit:
    def test_partition_and_reconstruction(self) -> None:
        """The Littlewood-Paley pieces sum to 1 and eta + pieces rebuild K."""
        split = split_kernel(make_kernel("hilbert", 4), theta=ThetaProfile.test())
        xi = np.linspace(-64.0, 64.0, 2049)
        assert split.partition_defect(xi) <= 1e-8
        assert split.reconstruction_defect(xi) <= 1e-8

    def test_residual_kernel_vanishes_at_zero(self) -> None:
        """K - eta satisfies the vanishing condition."""
        residual = split_kernel(make_kernel("hilbert", 4)).residual_kernel()
        assert validate_kernel(residual).vanishing_holds

    def test_symbol_without_limits(self) -> None:
        """A log singularity at 0 has no one-sided limits."""
        kernel = custom_kernel(lambda xi: np.log(np.abs(np.atleast_1d(xi))).astype(np.complex128))
        with pytest.raises(UnsupportedKernelError):
            split_kernel(kernel)

    def test_lp_piece_support(self) -> None:
        """q(xi / 2^j) vanishes outside 2^(j-1) <= |xi| <= 2^(j+1)."""
        xi = np.array([0.0, 0.9, 1.0, 2.0, 4.0, 4.1, -3.0])
        out = lp_piece(xi, 1)
        assert out[0] == 0.0 and out[1] == 0.0 and out[5] == 0.0
        assert out[3] == pytest.approx(1.0)

    def test_theta_i_annulus(self) -> None:
        """theta_i lives on [low/2, high] * 2^-i."""
        theta = ThetaProfile.test()
        lo, hi = theta.annulus(1)
        xi = np.array([0.5 * lo - 0.1, 0.5 * (lo + hi), hi + 0.1])
        out = theta.theta_i(1, xi)
        assert out[0] == pytest.approx(0.0) and out[2] == pytest.approx(0.0)
        assert out[1] > 0


class TestDiscreteKernels:
    def test_h_and_o_differences_agree(self) -> None:
        """H_k - H_k' = O_k - O_k' exactly."""
        first, second = discrete_kernels(2, 4), discrete_kernels(4, 4)
        for i in range(-20, 21):
            assert first.H(i) - second.H(i) == first.O(i) - second.O(i)

    def test_tail_is_one_over_i(self) -> None:
        """Outside [-2^k, 2^k) H_k is 1/i."""
        kernels = discrete_kernels(3, 4)
        assert kernels.H(9) == pytest.approx(1 / 9)
        assert kernels.A(9) == 0

    def test_weight_ledger_bounded(self) -> None:
        """sum |A_{k,M}| stays bounded as k grows."""
        assert max(series_weight_ledger(k, 4) for k in range(1, 9)) <= 1.5

    def test_comparison_ratio_finite(self) -> None:
        """H_k is close to the dilated continuous kernel."""
        assert np.isfinite(discrete_kernels(3, 4).comparison_ratio())

    @pytest.mark.parametrize("k, m", [(0, 4), (2, 1)])
    def test_bad_parameters(self, k: int, m: int) -> None:
        """k >= 1 and M >= 2 are required."""
        with pytest.raises(ParameterError):
            discrete_kernels(k, m)

    def test_error_weights_shrink_with_m(self) -> None:
        """The averaging error family has total weight O(1/M) for r >= 8 M^2."""
        for m in (4, 8, 16):
            assert max(error_weight_ledger(m, [8.0 * m * m, 16.0 * m * m])) <= 3.0 / m
        assert error_weight_sum(16, 2048.0) < error_weight_sum(4, 2048.0)
