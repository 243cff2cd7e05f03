import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shaptree import (
    AdditiveModel,
    CallableModel,
    GameContext,
    SamplingConfig,
    builtin_model,
    derive_seed,
    exact_shapley,
    instability,
    instability_from_vectors,
    sampled_shapley,
    shapley_value,
)

from conftest import brute_shapley, table_game


class TestExact:
    def test_matches_permutation_enumeration(self):
        for seed in range(6):
            game = table_game(5, seed)
            est = exact_shapley(game)
            np.testing.assert_allclose(est.values, brute_shapley(game), atol=1e-10)

    def test_glove_game(self, glove_game):
        np.testing.assert_allclose(
            exact_shapley(glove_game).values, [2 / 3, 1 / 6, 1 / 6], atol=1e-12
        )

    def test_and2_or2(self):
        np.testing.assert_allclose(
            exact_shapley(GameContext(builtin_model("and-2"))).values, [0.5, 0.5]
        )
        np.testing.assert_allclose(
            exact_shapley(GameContext(builtin_model("or-2"))).values, [0.5, 0.5]
        )

    def test_metadata(self):
        est = exact_shapley(table_game(3, 0))
        assert est.method == "exact"
        assert est.samples is None

    @given(seed=st.integers(0, 10_000), n=st.integers(1, 5))
    @settings(max_examples=30, deadline=None)
    def test_efficiency_axiom(self, seed, n):
        game = table_game(n, seed)
        est = exact_shapley(game)
        full = game.evaluate((1 << n) - 1)
        assert est.total() == pytest.approx(full - game.evaluate(0), abs=1e-9)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_dummy_axiom(self, seed):
        # Player 3 contributes nothing: its value must be exactly zero.
        rng = np.random.default_rng(seed)
        table = rng.normal(size=8)
        table[0] = 0.0

        def fn(mask):
            return float(table[mask & 0b111])

        est = exact_shapley(GameContext(CallableModel(4, fn)))
        assert est.values[3] == pytest.approx(0.0, abs=1e-12)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_symmetry_axiom(self, seed):
        # Players 0 and 1 are interchangeable by construction.
        rng = np.random.default_rng(seed)
        table = rng.normal(size=16)

        def fn(mask):
            canonical = mask
            if (mask & 0b11) in (0b01, 0b10):
                canonical = (mask & ~0b11) | 0b01
            return float(table[canonical]) if mask else 0.0

        est = exact_shapley(GameContext(CallableModel(4, fn)))
        assert est.values[0] == pytest.approx(est.values[1], abs=1e-12)

    def test_linearity_axiom(self):
        g1 = table_game(4, 11)
        g2 = table_game(4, 22)

        def combo(mask):
            return 2.0 * g1.evaluate(mask) - 3.0 * g2.evaluate(mask)

        est = exact_shapley(GameContext(CallableModel(4, combo)))
        expected = 2.0 * exact_shapley(g1).values - 3.0 * exact_shapley(g2).values
        np.testing.assert_allclose(est.values, expected, atol=1e-10)


class TestSampled:
    def test_efficiency_holds_per_sample(self):
        # Marginals telescope, so even a tiny sample is exactly efficient.
        game = table_game(6, 3)
        est = sampled_shapley(game, SamplingConfig(samples=7, seed=123))
        full = game.evaluate((1 << 6) - 1) - game.evaluate(0)
        assert est.total() == pytest.approx(full, abs=1e-9)

    def test_converges_to_exact(self):
        game = table_game(5, 9)
        exact = exact_shapley(game).values
        est = sampled_shapley(game, SamplingConfig(samples=6000, seed=0))
        np.testing.assert_allclose(est.values, exact, atol=0.1)

    def test_fixed_seed_reproducible(self):
        game = table_game(5, 4)
        a = sampled_shapley(game, SamplingConfig(samples=100, seed=77))
        b = sampled_shapley(game, SamplingConfig(samples=100, seed=77))
        np.testing.assert_array_equal(a.values, b.values)

    def test_worker_count_does_not_change_result(self):
        config = SamplingConfig(samples=64, seed=5)
        single = sampled_shapley(table_game(6, 8), config, workers=1)
        multi = sampled_shapley(table_game(6, 8), config, workers=4)
        np.testing.assert_array_equal(single.values, multi.values)

    def test_antithetic_pairs_halve_variance_on_additive_games(self):
        # With mirrored permutations an additive game is recovered exactly.
        model = AdditiveModel(weights=(1.0, -2.0, 3.0, 0.5))
        est = sampled_shapley(
            GameContext(model), SamplingConfig(samples=10, seed=2, antithetic=True)
        )
        np.testing.assert_allclose(est.values, model.weights, atol=1e-12)

    def test_error_estimate_shrinks(self):
        game = table_game(6, 13)
        small = sampled_shapley(game, SamplingConfig(samples=20, seed=1))
        large = sampled_shapley(game, SamplingConfig(samples=2000, seed=1))
        assert np.mean(large.std_error) < np.mean(small.std_error)

    def test_engine_dispatch(self):
        game = table_game(3, 1)
        np.testing.assert_array_equal(
            shapley_value(game, "exact").values, exact_shapley(game).values
        )
        est = shapley_value(game, SamplingConfig(samples=16, seed=3))
        assert est.method == "sampled"
        assert est.samples == 16


class TestSeeds:
    def test_derive_seed_is_pure(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)

    def test_derive_seed_separates_streams(self):
        seen = {derive_seed(0, i) for i in range(100)}
        assert len(seen) == 100

    def test_derive_seed_range(self):
        s = derive_seed(123456789, 42)
        assert 0 <= s < 2**64


class TestInstability:
    def test_identical_vectors(self):
        assert instability_from_vectors([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_both_zero(self):
        assert instability_from_vectors([0.0, 0.0], [0.0, 0.0]) == 0.0

    def test_known_value(self):
        # ||a-b|| = 2, ||a|| = ||b|| = 1 -> 2*2/(1+1) = 2.
        assert instability_from_vectors([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0)

    def test_exact_engine_is_stable(self):
        assert instability(table_game(4, 2), "exact") == 0.0

    def test_decreases_with_samples(self):
        game = GameContext(builtin_model("majority-3"))
        rough = instability(game, SamplingConfig(samples=10, seed=6))
        fine = instability(game, SamplingConfig(samples=1000, seed=6))
        assert fine < rough
