"""Tests for the window, frame expansions and bilinear packets."""

from __future__ import annotations

import numpy as np
import pytest

from ergotile.exceptions import ResolutionError
from ergotile.kernels import ThetaProfile
from ergotile.signals import gaussian
from ergotile.tiles import Multitile, TileSystem, Tree
from ergotile.wavepackets import (
    PacketBank,
    PacketCoefficients,
    analyze,
    bilinear_decay,
    bilinear_packet,
    make_packet,
    make_window,
    natural_spectrum,
    nonvanishing,
    packet_band,
    resolution_band,
    round_trip_error,
    synthesize,
    tree_projection,
)

A, B = 4, 6
THETA = ThetaProfile.test()


class TestWindow:
    def test_partition_of_unity(self) -> None:
        """The 1/5-translates of |psi^|^2 sum to 1."""
        assert make_window().partition_error <= 1e-8

    def test_norm_squared(self) -> None:
        """||psi||^2 = 1/5."""
        assert make_window().norm_squared == pytest.approx(0.2, abs=1e-9)

    def test_support(self) -> None:
        """psi^ lives on [0, 2/5]."""
        assert make_window().external_energy == 0.0


class TestFrame:
    def test_resolution_band(self) -> None:
        """Resolvable scales run from 1 - b to a - 1."""
        assert resolution_band(5, 8) == (-7, 4)

    @pytest.mark.parametrize("i", [-2, 0, 2])
    def test_round_trip(self, i: int) -> None:
        """synthesize(analyze(f, i)) reproduces f."""
        f = gaussian(A, B, center=1.0, width=0.75).modulate(3.0)
        assert round_trip_error(f, i) <= 1e-6

    def test_scale_outside_band(self) -> None:
        """Scales outside the band raise ResolutionError."""
        with pytest.raises(ResolutionError):
            analyze(gaussian(A, B), A)

    def test_coefficient_matches_packet_pairing(self) -> None:
        """analyze agrees with pairing against a single packet."""
        f = gaussian(A, B, center=-1.0).modulate(0.7)
        coeffs = analyze(f, 0)
        direct = packet_band(0, 1, 3, A, B).pair(natural_spectrum(f))
        assert coeffs.get(1, 3) == pytest.approx(direct, abs=1e-10)

    def test_synthesis_of_one_coefficient_is_the_packet(self) -> None:
        """A single unit coefficient synthesizes to psi_{i,m,l}."""
        coeffs = analyze(gaussian(A, B), 0)
        values = np.zeros_like(coeffs.values)
        values[int(3 - coeffs.l_values[0]), 1 + values.shape[1] // 2] = 1.0
        one = PacketCoefficients(coeffs.i, coeffs.a, coeffs.b, coeffs.l_values, values)
        packet = make_packet(0, 1, 3, A, B).samples()
        assert (synthesize(one) - packet).l2_norm() < 1e-10


class TestPackets:
    def test_packet_frequency_support(self) -> None:
        """psi_{i,m,l} has no energy outside its frequency box."""
        assert make_packet(-1, 2, 7, A, B).external_energy() <= 1e-12

    def test_packet_norm(self) -> None:
        """||psi_{i,m,l}||^2 is close to 1/5."""
        assert make_packet(0, 0, 4, A, B).band.l2_norm() ** 2 == pytest.approx(0.2, rel=1e-3)

    def test_disjoint_frequencies_are_orthogonal(self) -> None:
        """Packets with disjoint frequency intervals are orthogonal."""
        first = make_packet(0, 0, 0, A, B).samples()
        second = make_packet(0, 3, 10, A, B).samples()
        assert abs(first.inner(second)) < 1e-10

    def test_nonvanishing(self) -> None:
        """Gap 24 meets the test theta annulus, gap 2 does not."""
        assert nonvanishing(24, THETA)
        assert not nonvanishing(2, THETA)

    def test_violating_packet_vanishes(self) -> None:
        """A bilinear packet whose gap misses theta_i is zero."""
        packet = bilinear_packet(0, (0, 0), (3, 5), THETA, A, B)
        assert packet.l2_norm() <= 1e-8

    def test_bilinear_packet_support(self) -> None:
        """phi lives in the box with l3 = l1 + l2."""
        packet = bilinear_packet(0, (1, 0), (3, 27), THETA, A, B)
        assert packet.l3 == 30
        assert packet.l2_norm() > 0
        assert packet.external_energy() <= 1e-12

    def test_decay_constants_finite(self) -> None:
        """Norms decrease in |m1 - m2| and the fitted constants are finite."""
        decay = bilinear_decay(0, (0, 24), THETA, orders=(2,), a=A, b=B)
        assert decay.ratios[0] == pytest.approx(1.0)
        assert np.isfinite(decay.constants[2])


class TestPacketBank:
    def test_coefficients_match_inner_products(self) -> None:
        """<f, phi_{s,j}> from the bank equals the sampled inner product."""
        bank = PacketBank(THETA, A, B)
        s = Multitile(0, 1, 0, 24)
        f = gaussian(A, B, center=1.0).modulate(2.0)
        for j in (1, 2, 3):
            expected = f.inner(bank.phi(s, j).function())
            assert bank.coefficients(f, [s], j)[s] == pytest.approx(expected, abs=1e-10)

    def test_psi3_uses_l3(self) -> None:
        """psi_{s,3} has frequency index l3 = 2 l1 + e."""
        bank = PacketBank(THETA, A, B)
        s = Multitile(0, 0, 5, 24)
        assert np.array_equal(bank.psi3(s).indices, packet_band(0, 0, 34, A, B).indices)


class TestTreeProjection:
    SYSTEM = TileSystem.test()
    TOP = Multitile(0, 0, 0, 24)

    def test_single_packet_identity(self) -> None:
        """A one-tile tree is reproduced exactly by the multiplier form."""
        tree = Tree(3, self.TOP, (self.TOP,))
        out = tree_projection(tree, {self.TOP: 1.0 + 0.5j}, 0, self.SYSTEM, PacketBank(THETA, A, B))
        assert out.relative_error <= 1e-6
        assert out.direct.l2_norm() > 0

    def test_truncation_above_all_scales(self) -> None:
        """With k above every scale the projection is 0."""
        tree = Tree(3, self.TOP, (self.TOP,))
        out = tree_projection(tree, {self.TOP: 1.0}, 2, self.SYSTEM, PacketBank(THETA, A, B))
        assert out.direct.l2_norm() == 0.0
