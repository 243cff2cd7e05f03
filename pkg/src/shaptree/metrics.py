"""Merge-quality metrics over a frontier of candidate tree nodes.

During bottom-up tree construction the frontier is an ordered list of
disjoint player groups (each a bitmask).  These metrics score an adjacent
pair against its surroundings: how much of the interaction mass touching the
pair flows *between* its two nodes (worth merging) versus towards the
outside neighbours (better to wait).

All ratios are scale-free — multiplying the game's scores by a constant
leaves them unchanged — and fall back to 0.0 when every term in the
denominator vanishes.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass
from typing import Sequence

from . import _dense
from .game import GameContext, PlayerSet
from .interaction import BetweenDecomposition, fused_contribution, interaction_benefit
from .shapley import Engine, SamplingConfig, derive_seed, resolve_engine

__all__ = [
    "BenefitCache",
    "MergeCandidate",
    "merge_candidate",
    "modeled_density",
    "unmodeled_density",
    "nonadjacent_density",
    "inter_ratio",
]


class BenefitCache:
    """Per-game memo of fused contributions and interaction benefits.

    Tree construction asks for the same group's numbers many times as the
    frontier evolves; this cache keys them by group bitmask.  Under sampling,
    each group's queries use seeds derived from (seed, mask), so a cached
    value and a recomputed one are the same number.
    """

    def __init__(self, game: GameContext, engine: Engine = "exact", workers: int | None = None):
        self.game = game
        self.engine = resolve_engine(engine)
        self.workers = workers
        if isinstance(self.engine, SamplingConfig) and self.engine.seed is None:
            self.engine = SamplingConfig(
                self.engine.samples, secrets.randbits(63), self.engine.antithetic
            )
        self._contribution: dict[int, float] = {}
        self._benefit: dict[int, float] = {}

    def engine_for(self, mask: int, stream: int) -> Engine:
        """Engine for one derived sub-query, reproducible per (mask, stream)."""
        if self.engine == "exact":
            return "exact"
        return SamplingConfig(
            self.engine.samples,
            derive_seed(self.engine.seed, mask, stream),
            self.engine.antithetic,
        )

    def contribution(self, mask: int) -> float:
        """Fused contribution of the group, other players staying singletons."""
        if mask not in self._contribution:
            if self.engine == "exact":
                value = _dense.fused_value(
                    self.game.value_table(), self.game.popcounts(),
                    (1 << self.game.n) - 1, mask,
                )
            else:
                value = fused_contribution(
                    self.game, PlayerSet(mask, self.game.n),
                    engine=self.engine_for(mask, 1), workers=self.workers,
                )
            self._contribution[mask] = float(value)
        return self._contribution[mask]

    def benefit(self, mask: int) -> float:
        """Interaction benefit of the group (0.0 for singletons)."""
        if mask not in self._benefit:
            if mask.bit_count() == 1:
                value = 0.0
            elif self.engine == "exact":
                value = _dense.fused_benefit(
                    self.game.value_table(), self.game.popcounts(),
                    (1 << self.game.n) - 1, mask,
                )
            else:
                value = interaction_benefit(
                    self.game, PlayerSet(mask, self.game.n),
                    engine=self.engine_for(mask, 2), workers=self.workers,
                )
            self._benefit[mask] = float(value)
        return self._benefit[mask]

    def between(self, left_mask: int, right_mask: int) -> float:
        """Benefit created between two disjoint groups."""
        return (
            self.benefit(left_mask | right_mask)
            - self.benefit(left_mask)
            - self.benefit(right_mask)
        )


@dataclass(frozen=True)
class MergeCandidate:
    """An adjacent frontier pair with every term its densities need.

    ``left_outside`` / ``right_outside`` are the pair's interactions with its
    outside neighbours, ``None`` at a frontier boundary (boundary terms are
    simply omitted from the ratios).
    """

    index: int  # frontier position of the left node
    left_mask: int
    right_mask: int
    between: float
    left_outside: float | None
    right_outside: float | None
    left_contribution: float
    right_contribution: float

    def _denominator_terms(self) -> list[float]:
        terms = [abs(self.between)]
        if self.left_outside is not None:
            terms.append(abs(self.left_outside))
        if self.right_outside is not None:
            terms.append(abs(self.right_outside))
        terms.append(abs(self.left_contribution))
        terms.append(abs(self.right_contribution))
        return terms

    def modeled_density(self) -> float:
        """Share of the pair's interaction mass flowing between its nodes."""
        denom = sum(self._denominator_terms())
        if denom == 0.0:
            return 0.0
        return abs(self.between) / denom

    def unmodeled_density(self) -> float:
        """Share flowing to the outside neighbours instead."""
        denom = sum(self._denominator_terms())
        if denom == 0.0:
            return 0.0
        outside = 0.0
        if self.left_outside is not None:
            outside += abs(self.left_outside)
        if self.right_outside is not None:
            outside += abs(self.right_outside)
        return outside / denom


def merge_candidate(
    cache: BenefitCache, frontier: Sequence[int], index: int
) -> MergeCandidate:
    """Score the adjacent pair at ``(index, index + 1)`` of the frontier."""
    if not 0 <= index < len(frontier) - 1:
        raise IndexError("candidate index out of range")
    left, right = frontier[index], frontier[index + 1]
    return MergeCandidate(
        index=index,
        left_mask=left,
        right_mask=right,
        between=cache.between(left, right),
        left_outside=cache.between(frontier[index - 1], left) if index > 0 else None,
        right_outside=(
            cache.between(right, frontier[index + 2])
            if index + 2 < len(frontier)
            else None
        ),
        left_contribution=cache.contribution(left),
        right_contribution=cache.contribution(right),
    )


def modeled_density(candidate: MergeCandidate) -> float:
    return candidate.modeled_density()


def unmodeled_density(candidate: MergeCandidate) -> float:
    return candidate.unmodeled_density()


def nonadjacent_density(
    cache: BenefitCache, frontier: Sequence[int], i: int, j: int
) -> float:
    """Interaction density between two non-adjacent frontier nodes.

    The denominator collects the pair's own interaction, both nodes'
    interactions with *their* adjacent neighbours (up to four terms, boundary
    terms omitted) and both contributions, mirroring the adjacent-pair
    density so the two are comparable.
    """
    if j <= i + 1:
        raise ValueError("nodes must be non-adjacent (j > i + 1)")
    a, c = frontier[i], frontier[j]
    numerator = abs(cache.between(a, c))
    terms = [numerator]
    if i > 0:
        terms.append(abs(cache.between(frontier[i - 1], a)))
    terms.append(abs(cache.between(a, frontier[i + 1])))
    terms.append(abs(cache.between(frontier[j - 1], c)))
    if j + 1 < len(frontier):
        terms.append(abs(cache.between(c, frontier[j + 1])))
    terms.append(abs(cache.contribution(a)))
    terms.append(abs(cache.contribution(c)))
    denom = sum(terms)
    if denom == 0.0:
        return 0.0
    return numerator / denom


def inter_ratio(decomposition: BetweenDecomposition) -> float:
    """Share of a between-group benefit caused by genuinely mixed subsets.

    ``|cross| / (|cross| + |intra_left + intra_right|)``, 0.0 when both terms
    vanish.
    """
    cross = abs(decomposition.cross)
    intra = abs(decomposition.intra_left + decomposition.intra_right)
    denom = cross + intra
    if denom == 0.0:
        return 0.0
    return cross / denom
