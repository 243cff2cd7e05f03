import numpy as np
import pytest

from shaptree import (
    AdditiveBigramModel,
    SpanSet,
    builtin_model,
    cohesion_score,
    instability_curve,
    nonadjacency_audit,
    run_andor_suite,
    shuffle_span,
    unlabeled_span_scores,
)
from shaptree.evaluation import SpanScores


class TestSpanSet:
    def test_root_and_singletons_dropped_by_default(self):
        s = SpanSet.from_pairs(5, [(0, 4), (1, 1), (1, 3), (0, 1)])
        assert s.spans == frozenset({(1, 3), (0, 1)})

    def test_include_root_keeps_full_span(self):
        s = SpanSet.from_pairs(5, [(0, 4), (1, 3)], include_root=True)
        assert (0, 4) in s.spans

    def test_invalid_span_rejected(self):
        with pytest.raises(ValueError):
            SpanSet(5, frozenset({(3, 1)}))
        with pytest.raises(ValueError):
            SpanSet(5, frozenset({(0, 5)}))

    def test_round_trip_through_dict(self):
        s = SpanSet.from_pairs(6, [(1, 2), (0, 3)])
        back = SpanSet.from_dict(s.to_dict())
        assert back == s

    def test_from_ground_truth_mirrors_convention(self):
        from shaptree import generate_andor_suite

        model = generate_andor_suite(5)[3]
        spans = SpanSet.from_ground_truth(model.ground_truth())
        assert (0, 4) not in spans.spans


class TestSpanScores:
    def test_perfect_match(self):
        a = SpanSet.from_pairs(5, [(0, 1), (2, 4)])
        assert unlabeled_span_scores(a, a) == SpanScores(1.0, 1.0, 1.0)

    def test_half_precision(self):
        pred = SpanSet.from_pairs(5, [(0, 1), (2, 4)])
        truth = SpanSet.from_pairs(5, [(0, 1)])
        scores = unlabeled_span_scores(pred, truth)
        assert scores.precision == pytest.approx(0.5)
        assert scores.recall == pytest.approx(1.0)
        assert scores.f1 == pytest.approx(2 / 3)

    def test_empty_sides_score_zero(self):
        empty = SpanSet.from_pairs(5, [])
        full = SpanSet.from_pairs(5, [(0, 1)])
        assert unlabeled_span_scores(empty, full) == SpanScores(0.0, 0.0, 0.0)
        assert unlabeled_span_scores(full, empty) == SpanScores(0.0, 0.0, 0.0)
        assert unlabeled_span_scores(empty, empty) == SpanScores(0.0, 0.0, 0.0)


class TestSuite:
    def test_small_suite_shape_and_determinism(self):
        report = run_andor_suite(n_vars=5, random_trials=2, seed=3)
        # 32 models; five deterministic strategies plus two random trials.
        assert len(report.rows) == 32 * (5 + 2)
        again = run_andor_suite(n_vars=5, random_trials=2, seed=3)
        assert report.to_csv() == again.to_csv()
        assert report.to_dict() == again.to_dict()

    def test_worker_count_does_not_matter(self):
        a = run_andor_suite(n_vars=5, random_trials=1, seed=9, workers=1)
        b = run_andor_suite(n_vars=5, random_trials=1, seed=9, workers=4)
        assert a.to_dict() == b.to_dict()

    def test_summary_has_both_forms_and_overall(self):
        report = run_andor_suite(n_vars=4, strategies=("density", "left"), random_trials=1, seed=0)
        summary = report.summary()
        assert set(summary) == {"density", "left"}
        for cell in summary.values():
            assert set(cell) == {"and-or", "or-and", "overall"}
            for scores in cell.values():
                assert 0.0 <= scores["f1"] <= 100.0

    def test_density_recall_dominates_f1_per_model(self):
        # Predicted trees nest, truth blocks are few: the greedy merge
        # sweeps up every true block when it scores at all.
        report = run_andor_suite(n_vars=5, strategies=("density",), random_trials=0, seed=0)
        for row in report.rows:
            assert row.recall >= row.f1 - 1e-9


class TestShuffleSpan:
    def test_is_a_permutation_and_seeded(self):
        rng = np.random.default_rng(0)
        out = shuffle_span([0, 1, 2, 3, 4], 1, 3, rng)
        assert sorted(out) == [0, 1, 2, 3, 4]
        again = shuffle_span([0, 1, 2, 3, 4], 1, 3, np.random.default_rng(0))
        assert out == again

    def test_whole_span_shuffle_reaches_other_orders(self):
        seen = {
            tuple(shuffle_span([0, 1, 2], 0, 2, np.random.default_rng(s)))
            for s in range(50)
        }
        assert len(seen) > 1

    def test_span_words_leave_their_slots(self):
        # With the span removed, the remaining words keep relative order.
        out = shuffle_span(list(range(6)), 2, 4, np.random.default_rng(1))
        rest = [w for w in out if w not in (2, 3, 4)]
        assert rest == [0, 1, 5]


class TestCohesion:
    def test_order_invariant_model_has_zero_drop(self):
        m = AdditiveBigramModel(
            weights=(0.5, -1.0, 2.0), bonuses={(0, 2): 1.0}, order_sensitive=False
        )
        result = cohesion_score([m], shuffles=30, seed=4)
        assert result.mean_drop == 0.0
        assert all(d == 0.0 for d in result.per_model_drops[0])

    def test_demo_text_matches_enumeration(self):
        # The tree picks span (1, 2).  Removing words 1 and 2 and reinserting
        # them uniformly gives 12 outcomes, 3 of which keep the bonus alive,
        # so the expected drop is 2.0 * (1 - 3/12) = 1.5.
        model = builtin_model("demo-text")
        result = cohesion_score([model], shuffles=400, seed=11)
        assert result.spans[0] == (1, 2)
        sigma = 2.0 * np.sqrt(0.25 * 0.75 / 400)
        assert result.mean_drop == pytest.approx(1.5, abs=3 * sigma)

    def test_requires_sequence_scoring(self):
        from shaptree import AdditiveModel

        with pytest.raises(TypeError):
            cohesion_score([AdditiveModel(weights=(1.0, 2.0))], shuffles=5, seed=0)

    def test_reproducible(self):
        model = builtin_model("demo-text")
        a = cohesion_score([model], shuffles=25, seed=8)
        b = cohesion_score([model], shuffles=25, seed=8)
        assert a.mean_drop == b.mean_drop


class TestInstabilityCurve:
    def test_exact_engine_is_flat_zero(self):
        curve = instability_curve(
            builtin_model("majority-3"), samples_grid=(10, 50), trials=3, seed=0, engine="exact"
        )
        assert all(v == 0.0 for v in curve.values())

    def test_sampled_curve_decreases(self):
        curve = instability_curve(
            builtin_model("majority-3"), samples_grid=(10, 1000), trials=10, seed=0
        )
        assert curve[1000] < curve[10]

    def test_reproducible(self):
        kwargs = dict(samples_grid=(10, 100), trials=5, seed=2)
        a = instability_curve(builtin_model("and-2"), **kwargs)
        b = instability_curve(builtin_model("and-2"), **kwargs)
        assert a == b


class TestNonadjacencyAudit:
    def test_adjacent_only_models_never_flag(self):
        models = [
            AdditiveBigramModel(weights=(0.2,) * 5, bonuses={(0, 1): 1.0, (3, 4): 2.0}),
            AdditiveBigramModel(weights=(1.0,) * 4, bonuses={(1, 2): 1.5}),
        ]
        report = nonadjacency_audit(models, steps=3)
        assert all(rate == 0.0 for rate in report.rates())

    def test_planted_long_range_pair_flags_first_step(self):
        model = AdditiveBigramModel(weights=(0.1, 0.1, 0.1, 0.1), bonuses={(0, 2): 5.0})
        report = nonadjacency_audit([model], steps=2)
        assert report.rates()[0] == 1.0
