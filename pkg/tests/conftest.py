"""Shared helpers: small random games and brute-force oracles.

The oracles here deliberately avoid the package's own closed-form kernels.
Everything is computed by enumerating permutations or coalitions directly,
so agreement is meaningful.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from shaptree import CallableModel, GameContext


def table_game(n: int, seed: int) -> GameContext:
    """Random game on n players backed by an explicit 2^n value table."""
    rng = np.random.default_rng(seed)
    table = rng.normal(size=2**n)
    table[0] = 0.0
    return GameContext(CallableModel(n, lambda mask: float(table[mask])))


def brute_shapley(game: GameContext) -> np.ndarray:
    """Average marginal contribution over all n! orderings."""
    n = game.n_players
    out = np.zeros(n)
    for perm in itertools.permutations(range(n)):
        mask = 0
        for player in perm:
            before = game.evaluate(mask)
            mask |= 1 << player
            out[player] += game.evaluate(mask) - before
    return out / math.factorial(n)


def brute_fused_contribution(game: GameContext, members, within=None) -> float:
    """Shapley value of a fused group, via permutations of the reduced game.

    The group moves as one unit; everything outside ``within`` stays at
    baseline.  This re-derives the reduction from scratch instead of calling
    the package's reduce() path.
    """
    n = game.n_players
    member_mask = 0
    for m in members:
        member_mask |= 1 << m
    if within is None:
        ambient = (1 << n) - 1
    else:
        ambient = 0
        for m in within:
            ambient |= 1 << m
    rest = [i for i in range(n) if (ambient >> i) & 1 and not (member_mask >> i) & 1]
    units = [member_mask] + [1 << i for i in rest]
    k = len(units)
    total = 0.0
    count = 0
    for perm in itertools.permutations(range(k)):
        mask = 0
        for unit_index in perm:
            before = game.evaluate(mask)
            mask |= units[unit_index]
            if unit_index == 0:
                total += game.evaluate(mask) - before
                break
        count += 1
    return total / count


def brute_solo_contribution(game: GameContext, player: int, absent, within=None) -> float:
    """Shapley value of one player with the ``absent`` players removed."""
    n = game.n_players
    if within is None:
        ambient = (1 << n) - 1
    else:
        ambient = 0
        for m in within:
            ambient |= 1 << m
    for a in absent:
        ambient &= ~(1 << a)
    return brute_fused_contribution(game, [player], within=[i for i in range(n) if (ambient >> i) & 1])


def brute_benefit(game: GameContext, members, within=None) -> float:
    """Fused contribution minus the members' solo contributions."""
    members = list(members)
    if len(members) == 1:
        return 0.0
    fused = brute_fused_contribution(game, members, within=within)
    solos = 0.0
    for m in members:
        others = [x for x in members if x != m]
        solos += brute_solo_contribution(game, m, absent=others, within=within)
    return fused - solos


@pytest.fixture
def glove_game() -> GameContext:
    """Classic three-player game: player 0 holds a left glove, 1 and 2 right."""

    def worth(mask: int) -> float:
        left = 1 if mask & 1 else 0
        right = ((mask >> 1) & 1) + ((mask >> 2) & 1)
        return float(min(left, right))

    return GameContext(CallableModel(3, worth))
