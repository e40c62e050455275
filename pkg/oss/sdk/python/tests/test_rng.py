"""Tests for the SplitMix64 stream."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergotile.rng import SplitMix64


class TestReferenceOutputs:
    def test_seed_zero_matches_reference(self) -> None:
        """The first outputs for seed 0 match the published SplitMix64 values."""
        stream = SplitMix64(0)
        assert stream.next_u64() == 0xE220A8397B1DCDAF
        assert stream.next_u64() == 0x6E789E6AA1B965F4
        assert stream.next_u64() == 0x06C45D188009454F

    def test_block_draw_equals_sequential_draws(self) -> None:
        """Drawing a block gives the same bits as drawing one at a time."""
        block = SplitMix64(42).next_u64(5)
        single = SplitMix64(42)
        assert [int(v) for v in block] == [single.next_u64() for _ in range(5)]

    def test_seed_reduced_modulo_2_64(self) -> None:
        """Seeds are taken modulo 2**64."""
        assert SplitMix64(2**64 + 3).next_u64() == SplitMix64(3).next_u64()


class TestDistributions:
    def test_uniform_in_unit_interval(self, rng: SplitMix64) -> None:
        """Uniform draws lie in [0, 1)."""
        u = np.asarray(rng.uniform(1000))
        assert np.all(u >= 0.0) and np.all(u < 1.0)

    @settings(max_examples=50, deadline=None)
    @given(low=st.integers(-1000, 1000), width=st.integers(1, 1000), seed=st.integers(0, 2**64 - 1))
    def test_integers_in_range(self, low: int, width: int, seed: int) -> None:
        """Integer draws stay in [low, high)."""
        out = np.asarray(SplitMix64(seed).integers(low, low + width, 20))
        assert np.all(out >= low) and np.all(out < low + width)

    def test_empty_range_rejected(self, rng: SplitMix64) -> None:
        """An empty integer range raises."""
        with pytest.raises(ValueError):
            rng.integers(3, 3)

    def test_permutation_is_a_permutation(self, rng: SplitMix64) -> None:
        """permutation(n) contains each index once."""
        assert sorted(int(v) for v in rng.permutation(50)) == list(range(50))

    def test_normal_moments(self, rng: SplitMix64) -> None:
        """Box-Muller draws have mean near 0 and variance near 1."""
        z = rng.normal(20001)
        assert z.shape == (20001,)
        assert abs(float(np.mean(z))) < 0.05
        assert abs(float(np.var(z)) - 1.0) < 0.05

    def test_choice_distinct(self, rng: SplitMix64) -> None:
        """choice returns distinct items, capped at the population size."""
        picked = rng.choice(list("abcdef"), 10)
        assert sorted(picked) == list("abcdef")


class TestSpawn:
    def test_spawn_independent_of_counter(self) -> None:
        """Children depend on the key, not on how far the parent has advanced."""
        parent = SplitMix64(9)
        first = parent.spawn(3).next_u64()
        parent.next_u64(100)
        assert parent.spawn(3).next_u64() == first

    def test_distinct_keys_give_distinct_streams(self) -> None:
        """Different keys give different children."""
        parent = SplitMix64(9)
        assert parent.spawn(1).next_u64() != parent.spawn(2).next_u64()
