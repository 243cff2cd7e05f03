"""Evaluation harnesses: span scoring, batch experiments, stability checks.

Span convention
---------------
Tree quality is measured as unlabeled span overlap between a built tree and a
reference structure.  Both sides contribute the spans of their multi-position
constituents only, and the whole-input span is excluded from both sides by
default: every binary tree over ``n`` positions contains the full span and
single positions, so neither carries information about the structure.
"""
from __future__ import annotations

import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .game import EXACT_PLAYER_LIMIT, GameContext, PlayerSet
from .interaction import fused_contribution
from .metrics import BenefitCache, merge_candidate, nonadjacent_density
from .models import TwoLevelBooleanModel, generate_andor_suite
from .shapley import Engine, SamplingConfig, derive_seed, instability, resolve_engine
from .tree import InteractionTree, TreeRecipe, TreeSchemaError, _argmax_leftmost, build_tree

__all__ = [
    "SpanSet",
    "SpanScores",
    "unlabeled_span_scores",
    "SuiteRow",
    "SuiteReport",
    "run_andor_suite",
    "CohesionResult",
    "cohesion_score",
    "shuffle_span",
    "instability_curve",
    "AuditReport",
    "nonadjacency_audit",
]

SPANS_SCHEMA = "shaptree.spans/1"


@dataclass(frozen=True)
class SpanSet:
    """A set of multi-position spans ``(start, end)`` over ``n`` positions.

    Invariant: ``0 <= start < end <= n - 1`` for every span — single
    positions are not spans.  Whether the whole-input span belongs in the set
    is decided at construction (``include_root``), so comparisons never mix
    conventions.
    """

    n: int
    spans: frozenset[tuple[int, int]]

    def __post_init__(self):
        for s, e in self.spans:
            if not (0 <= s < e <= self.n - 1):
                raise ValueError(f"invalid span ({s}, {e}) for {self.n} positions")

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Sequence[int]], include_root: bool = False) -> "SpanSet":
        spans = {(int(s), int(e)) for s, e in pairs}
        spans = {(s, e) for s, e in spans if e > s}  # single positions are not spans
        if not include_root:
            spans.discard((0, n - 1))
        return cls(n, frozenset(spans))

    @classmethod
    def from_tree(cls, tree: InteractionTree, include_root: bool = False) -> "SpanSet":
        return cls(tree.n_players, tree.internal_spans(include_root=include_root))

    @classmethod
    def from_ground_truth(cls, truth, include_root: bool = False) -> "SpanSet":
        return cls.from_pairs(truth.n, truth.spans(), include_root=include_root)

    @classmethod
    def coerce(cls, value, n: int) -> "SpanSet":
        """Best-effort conversion used by the estimator's ``score``."""
        if isinstance(value, SpanSet):
            if value.n != n:
                raise ValueError("span sets are over different input sizes")
            return value
        if isinstance(value, InteractionTree):
            return cls.from_tree(value)
        if hasattr(value, "spans") and hasattr(value, "n"):
            return cls.from_ground_truth(value)
        return cls.from_pairs(n, value)

    def to_dict(self) -> dict:
        return {
            "schema": SPANS_SCHEMA,
            "n_players": self.n,
            "spans": sorted([s, e] for s, e in self.spans),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpanSet":
        if not isinstance(data, dict) or data.get("schema") != SPANS_SCHEMA:
            raise TreeSchemaError(f"expected a {SPANS_SCHEMA!r} document")
        try:
            # The file states its spans outright, so keep them as stated.
            return cls.from_pairs(int(data["n_players"]), data["spans"], include_root=True)
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeSchemaError(f"malformed span document: {exc}") from exc


@dataclass(frozen=True)
class SpanScores:
    precision: float
    recall: float
    f1: float


def unlabeled_span_scores(pred: SpanSet, truth: SpanSet) -> SpanScores:
    """Unlabeled precision/recall/F1 between two span sets.

    Empty sides score 0.0 rather than raising: a structure with no
    informative spans has matched nothing.
    """
    if pred.n != truth.n:
        raise ValueError("span sets are over different input sizes")
    matched = len(pred.spans & truth.spans)
    precision = matched / len(pred.spans) if pred.spans else 0.0
    recall = matched / len(truth.spans) if truth.spans else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0.0
        else 0.0
    )
    return SpanScores(precision=precision, recall=recall, f1=f1)


# ---------------------------------------------------------------------------
# Batch experiment over the generated two-level boolean models
# ---------------------------------------------------------------------------

DEFAULT_STRATEGIES = ("density", "si", "si-abs", "random", "left", "right")


@dataclass(frozen=True)
class SuiteRow:
    strategy: str
    trial: int
    index: int
    form: str
    f1: float
    recall: float
    precision: float


@dataclass
class SuiteReport:
    """Per-model scores for every strategy over a generated model suite."""

    n_vars: int
    seed: int
    random_trials: int
    strategies: tuple[str, ...]
    rows: list[SuiteRow] = field(default_factory=list)

    def summary(self) -> dict:
        """Mean scores in percent, per strategy and form, plus their average.

        ``overall`` is the average of the two form means (the forms are
        equally sized, so this is also the global mean).
        """
        out: dict = {}
        for strategy in self.strategies:
            rows = [r for r in self.rows if r.strategy == strategy]
            per_form = {}
            for form in ("and-or", "or-and"):
                sub = [r for r in rows if r.form == form]
                per_form[form] = {
                    "f1": 100.0 * float(np.mean([r.f1 for r in sub])),
                    "recall": 100.0 * float(np.mean([r.recall for r in sub])),
                    "precision": 100.0 * float(np.mean([r.precision for r in sub])),
                }
            per_form["overall"] = {
                key: (per_form["and-or"][key] + per_form["or-and"][key]) / 2.0
                for key in ("f1", "recall", "precision")
            }
            out[strategy] = per_form
        return out

    def to_dict(self, include_rows: bool = False) -> dict:
        out = {
            "schema": "shaptree.suite/1",
            "config": {
                "n_vars": self.n_vars,
                "seed": self.seed,
                "random_trials": self.random_trials,
                "strategies": list(self.strategies),
                "units": "percent",
            },
            "summary": self.summary(),
        }
        if include_rows:
            out["rows"] = [
                {
                    "strategy": r.strategy,
                    "trial": r.trial,
                    "index": r.index,
                    "form": r.form,
                    "f1": r.f1,
                    "recall": r.recall,
                    "precision": r.precision,
                }
                for r in self.rows
            ]
        return out

    def to_csv(self) -> str:
        lines = ["strategy,form,f1,recall,precision"]
        summary = self.summary()
        for strategy in self.strategies:
            for form in ("and-or", "or-and", "overall"):
                cell = summary[strategy][form]
                lines.append(
                    f"{strategy},{form},{cell['f1']:.4f},{cell['recall']:.4f},{cell['precision']:.4f}"
                )
        return "\n".join(lines) + "\n"


def _score_tree(tree: InteractionTree, truth_spans: SpanSet) -> SpanScores:
    return unlabeled_span_scores(SpanSet.from_tree(tree), truth_spans)


def _suite_rows_for_model(
    model: TwoLevelBooleanModel,
    strategies: Sequence[str],
    random_trials: int,
    seed: int,
) -> list[SuiteRow]:
    game = GameContext(model)
    game.value_table()  # one vectorised pass; every strategy reads from it
    truth = SpanSet.from_ground_truth(model.ground_truth())
    rows = []
    for strategy in strategies:
        if strategy == "random":
            trials = [
                TreeRecipe("random", seed=derive_seed(seed, model.index, t), annotate=False)
                for t in range(random_trials)
            ]
        else:
            trials = [TreeRecipe(strategy, annotate=False)]
        for t, recipe in enumerate(trials):
            tree = build_tree(game, recipe, engine="exact")
            scores = _score_tree(tree, truth)
            rows.append(
                SuiteRow(
                    strategy=strategy,
                    trial=t,
                    index=model.index,
                    form=model.form,
                    f1=scores.f1,
                    recall=scores.recall,
                    precision=scores.precision,
                )
            )
    return rows


def run_andor_suite(
    n_vars: int = 11,
    strategies: Sequence[str] = DEFAULT_STRATEGIES,
    random_trials: int = 10,
    seed: int = 0,
    workers: int | None = None,
) -> SuiteReport:
    """Score every strategy against every generated two-level boolean model.

    Each model's ground truth is its own block structure; every strategy
    builds its tree with the exact engine, the ``random`` strategy running
    ``random_trials`` seeded repetitions per model.  Results are identical
    for a given ``seed`` regardless of ``workers``.
    """
    models = generate_andor_suite(n_vars)
    strategies = tuple(strategies)
    per_model: list[list[SuiteRow]] = [[] for _ in models]

    def run(i: int) -> None:
        per_model[i] = _suite_rows_for_model(models[i], strategies, random_trials, seed)

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(len(models))))
    else:
        for i in range(len(models)):
            run(i)

    report = SuiteReport(
        n_vars=n_vars,
        seed=seed,
        random_trials=random_trials,
        strategies=strategies,
    )
    for rows in per_model:
        report.rows.extend(rows)
    return report


# ---------------------------------------------------------------------------
# Cohesion of extracted constituents under shuffling
# ---------------------------------------------------------------------------


def shuffle_span(order: Sequence[int], start: int, end: int, rng: np.random.Generator) -> list[int]:
    """Destroy a span's internal arrangement while keeping its words.

    The span's words are removed and re-inserted one at a time, each at a
    uniformly random position of the growing remainder, so the output is a
    permutation of ``order`` with the span scattered.
    """
    span = [w for w in order[start : end + 1]]
    remainder = [w for i, w in enumerate(order) if not start <= i <= end]
    for w in span:
        pos = int(rng.integers(0, len(remainder) + 1))
        remainder.insert(pos, w)
    return remainder


@dataclass
class CohesionResult:
    """Mean score drop caused by shuffling each model's strongest constituent."""

    mean_drop: float
    spans: list[tuple[int, int]]
    per_model_drops: list[np.ndarray]
    seed: int

    def per_model_means(self) -> list[float]:
        return [float(d.mean()) for d in self.per_model_drops]


def cohesion_score(
    models: Sequence,
    shuffles: int = 100,
    samples: int = 2000,
    seed: int | None = None,
    engine: Engine | None = None,
    workers: int | None = None,
) -> CohesionResult:
    """How much each model's score drops when its strongest constituent is shuffled.

    For each order-sensitive model: build the density tree, pick the internal
    node with the largest sampled contribution (``samples`` permutations),
    then run ``shuffles`` seeded shuffles of that span and average the drop of
    the full-sequence score.  Order-invariant models drop exactly 0.
    """
    resolved_seed = seed if seed is not None else secrets.randbits(63)
    spans: list[tuple[int, int]] = []
    all_drops: list[np.ndarray] = []
    for m_index, model in enumerate(models):
        if not callable(getattr(model, "score_sequence", None)):
            raise TypeError(
                "cohesion needs order-sensitive models exposing score_sequence(order)"
            )
        game = GameContext(model)
        n = game.n
        build_engine: Engine
        if engine is not None:
            build_engine = resolve_engine(engine)
        elif n <= EXACT_PLAYER_LIMIT:
            build_engine = "exact"
        else:
            build_engine = SamplingConfig(samples, derive_seed(resolved_seed, m_index, 1))
        tree = build_tree(game, TreeRecipe("density", annotate=False), engine=build_engine)

        internal = tree.internal_nodes()
        contributions = []
        for node in internal:
            cfg = SamplingConfig(samples, derive_seed(resolved_seed, m_index, 2, node.id))
            contributions.append(
                fused_contribution(
                    game, PlayerSet(node.mask, n), engine=cfg, workers=workers
                )
            )
        chosen = internal[_argmax_leftmost(contributions)]
        spans.append(chosen.span)

        identity = list(range(n))
        base_score = float(model.score_sequence(identity))
        rng = np.random.default_rng([resolved_seed, m_index, 3])
        drops = np.empty(shuffles, dtype=np.float64)
        for q in range(shuffles):
            shuffled = shuffle_span(identity, chosen.start, chosen.end, rng)
            drops[q] = base_score - float(model.score_sequence(shuffled))
        all_drops.append(drops)

    mean_drop = float(np.mean([d.mean() for d in all_drops])) if all_drops else 0.0
    return CohesionResult(
        mean_drop=mean_drop, spans=spans, per_model_drops=all_drops, seed=resolved_seed
    )


# ---------------------------------------------------------------------------
# Sampling stability
# ---------------------------------------------------------------------------


def instability_curve(
    model,
    samples_grid: Sequence[int] = (10, 100, 1000),
    trials: int = 20,
    seed: int = 0,
    workers: int | None = None,
    engine: str = "sampled",
) -> dict[int, float]:
    """Mean run-to-run disagreement of contribution estimates per sample count.

    Each trial measures the disagreement of two independently seeded runs;
    the curve should fall as the sample count grows.  With ``engine="exact"``
    the curve is identically zero (the exact engine has no run-to-run
    variation), which makes a handy harness sanity check.
    """
    game = model if isinstance(model, GameContext) else GameContext(model)
    out: dict[int, float] = {}
    for T in samples_grid:
        if engine == "exact":
            values = [instability(game, "exact") for _ in range(trials)]
        else:
            values = [
                instability(
                    game, SamplingConfig(int(T), derive_seed(seed, T, trial)), workers=workers
                )
                for trial in range(trials)
            ]
        out[int(T)] = float(np.mean(values))
    return out


# ---------------------------------------------------------------------------
# Non-adjacent interaction audit
# ---------------------------------------------------------------------------


@dataclass
class AuditReport:
    """Per-step rates of non-adjacent interactions beating the chosen merge."""

    steps: int
    flags: list[list[bool]]  # flags[model][step]

    def rates(self) -> list[float]:
        out = []
        for step in range(self.steps):
            hits = [f[step] for f in self.flags if len(f) > step]
            out.append(float(np.mean(hits)) if hits else 0.0)
        return out


def nonadjacency_audit(
    models: Sequence,
    steps: int = 5,
    engine: Engine = "exact",
    workers: int | None = None,
    margin: float = 1e-9,
) -> AuditReport:
    """Check the adjacency assumption of density-guided merging.

    At each of the first ``steps`` merges of the density strategy, a model is
    flagged when some non-adjacent frontier pair has higher interaction
    density than the pair actually chosen, beyond ``margin`` (densities that
    are mathematically zero carry float residue from the subset sums, so an
    exact comparison would flag noise).  Models with only short-range
    interactions should never be flagged.
    """
    flags: list[list[bool]] = []
    for model in models:
        game = model if isinstance(model, GameContext) else GameContext(model)
        cache = BenefitCache(game, engine, workers=workers)
        frontier = [1 << i for i in range(game.n)]
        model_flags: list[bool] = []
        for _ in range(min(steps, game.n - 1)):
            if len(frontier) < 2:
                break
            candidates = [
                merge_candidate(cache, frontier, i) for i in range(len(frontier) - 1)
            ]
            densities = [c.modeled_density() for c in candidates]
            chosen = _argmax_leftmost(densities)
            threshold = densities[chosen]
            flagged = False
            for i in range(len(frontier)):
                for j in range(i + 2, len(frontier)):
                    if nonadjacent_density(cache, frontier, i, j) > threshold + margin:
                        flagged = True
                        break
                if flagged:
                    break
            model_flags.append(flagged)
            left, right = frontier[chosen], frontier[chosen + 1]
            frontier[chosen : chosen + 2] = [left | right]
        flags.append(model_flags)
    return AuditReport(steps=steps, flags=flags)
