"""Scikit-learn style front door for building interaction trees.

The estimator-shaped wrapper exists so the package drops into sklearn-flavoured
code: construct with hyper-parameters, ``fit`` on a value model, read fitted
attributes, ``get_params``/``set_params``/``clone`` all behave.  ``fit`` takes
the model itself as ``X`` — the "data" of an explanation is the model being
explained — and ``y`` is accepted and ignored for pipeline compatibility.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .evaluation import SpanSet, unlabeled_span_scores
from .game import GameContext
from .shapley import SamplingConfig
from .tree import InteractionTree, TreeRecipe, build_tree, canonical_strategy

__all__ = ["InteractionTreeExplainer"]


class InteractionTreeExplainer(BaseEstimator):
    """Builds the interaction tree of a value model.

    Parameters
    ----------
    strategy : which merge strategy to use (see ``shaptree.tree.STRATEGIES``).
    engine : "exact", "sampled", or a ready ``SamplingConfig``.
    samples : permutation count when ``engine="sampled"``.
    random_state : seed for the sampling engine and the ``random`` strategy.
    annotate : store interaction quantities on the tree's nodes.
    workers : thread count for batched evaluation (None = serial).
    """

    def __init__(
        self,
        strategy: str = "density",
        engine: str | SamplingConfig = "exact",
        samples: int = 2000,
        random_state: int | None = None,
        annotate: bool = True,
        workers: int | None = None,
    ):
        self.strategy = strategy
        self.engine = engine
        self.samples = samples
        self.random_state = random_state
        self.annotate = annotate
        self.workers = workers

    def _resolved_engine(self):
        if isinstance(self.engine, SamplingConfig):
            return self.engine
        if self.engine == "exact":
            return "exact"
        if self.engine == "sampled":
            return SamplingConfig(samples=self.samples, seed=self.random_state)
        raise ValueError(
            f"engine must be 'exact', 'sampled' or a SamplingConfig, got {self.engine!r}"
        )

    def fit(self, X, y=None):
        """Build the tree for the value model ``X``."""
        game = X if isinstance(X, GameContext) else GameContext(X)
        recipe = TreeRecipe(
            strategy=canonical_strategy(self.strategy),
            seed=self.random_state,
            annotate=self.annotate,
        )
        self.tree_: InteractionTree = build_tree(
            game, recipe, engine=self._resolved_engine(), workers=self.workers
        )
        self.n_players_ = game.n
        self.spans_ = self.tree_.internal_spans()
        return self

    def explain(self, X) -> InteractionTree:
        """Fit on ``X`` and return the tree."""
        return self.fit(X).tree_

    def score(self, X=None, y=None) -> float:
        """Unlabeled span F1 of the fitted tree against reference spans.

        ``y`` may be a ``SpanSet``, anything with ``spans()`` (a ground-truth
        tree), or an iterable of ``(start, end)`` pairs.  ``X`` is ignored;
        it exists for sklearn's ``score(X, y)`` calling convention.
        """
        check_is_fitted(self, "tree_")
        truth = SpanSet.coerce(y, self.n_players_)
        pred = SpanSet.from_tree(self.tree_)
        return unlabeled_span_scores(pred, truth).f1
