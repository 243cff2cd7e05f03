"""Interaction benefits of coalitions and their decomposition.

The *interaction benefit* of a group of players is what the group gains by
moving as one fused player instead of each member acting alone with the other
members absent: the fused group's contribution minus the sum of the members'
solo contributions.  Positive values mean cooperation (the group is worth
more together), negative values mean the members are adversarial or
redundant.

Every quantity takes an optional ``within`` ambient set; players outside it
are masked in all evaluations, never deleted, so positions keep their
meaning.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass

from .game import (
    CoalitionStructure,
    GameContext,
    PlayerSet,
    TooManyPlayersError,
    member_mask,
)
from . import _dense
from .shapley import (
    Engine,
    SamplingConfig,
    derive_seed,
    resolve_engine,
    sampled_shapley,
)

__all__ = [
    "ELEMENTARY_GROUP_LIMIT",
    "fused_contribution",
    "interaction_benefit",
    "between_benefit",
    "BetweenDecomposition",
    "between_decomposition",
    "elementary_components",
]

# Elementary components enumerate all subsets of the group; past this size
# the dictionary alone would be unreasonable.
ELEMENTARY_GROUP_LIMIT = 15


def _ambient(game: GameContext, within) -> int:
    if within is None:
        return (1 << game.n) - 1
    return member_mask(within, game.n)


def _group(game: GameContext, members, ambient: int) -> int:
    m = member_mask(members, game.n)
    if m == 0:
        raise ValueError("the group must contain at least one player")
    if m & ~ambient:
        raise ValueError("the group must lie inside the ambient player set")
    return m


def _sub(config: SamplingConfig, base: int, index: int) -> SamplingConfig:
    return SamplingConfig(config.samples, derive_seed(base, index), config.antithetic)


def _seed_base(config: SamplingConfig) -> int:
    return config.seed if config.seed is not None else secrets.randbits(63)


def fused_contribution(
    game: GameContext,
    members,
    within=None,
    engine: Engine = "exact",
    workers: int | None = None,
) -> float:
    """Contribution of the members moving as one fused player.

    The reduced game keeps every other ambient player as a singleton; the
    returned number is the fused player's Shapley value there.
    """
    engine = resolve_engine(engine)
    ambient = _ambient(game, within)
    fused = _group(game, members, ambient)
    if engine == "exact":
        return _dense.fused_value(game.value_table(), game.popcounts(), ambient, fused)
    group = PlayerSet(fused, game.n)
    structure = CoalitionStructure.fuse(game.n, [group], within=PlayerSet(ambient, game.n))
    reduced = game.reduce(structure)
    estimate = sampled_shapley(reduced, engine, workers=workers)
    return float(estimate.values[structure.block_index(group)])


def interaction_benefit(
    game: GameContext,
    members,
    within=None,
    engine: Engine = "exact",
    workers: int | None = None,
) -> float:
    """Interaction benefit of the group within the ambient set.

    Fused contribution minus each member's solo contribution, the solo runs
    taking place with the *other* group members absent.  Exactly 0.0 for
    singletons.  Under sampling, the sub-queries draw deterministically
    derived seeds and share the game's evaluation memo.
    """
    engine = resolve_engine(engine)
    ambient = _ambient(game, within)
    fused = _group(game, members, ambient)
    if engine == "exact":
        return _dense.fused_benefit(game.value_table(), game.popcounts(), ambient, fused)
    if fused.bit_count() == 1:
        return 0.0
    base = _seed_base(engine)
    total = fused_contribution(
        game, PlayerSet(fused, game.n), within=PlayerSet(ambient, game.n),
        engine=_sub(engine, base, 0), workers=workers,
    )
    outside = ambient & ~fused
    for rank, player in enumerate(PlayerSet(fused, game.n).members()):
        solo_ambient = PlayerSet(outside | (1 << player), game.n)
        total -= fused_contribution(
            game, [player], within=solo_ambient,
            engine=_sub(engine, base, rank + 1), workers=workers,
        )
    return float(total)


def between_benefit(
    game: GameContext,
    left,
    right,
    within=None,
    engine: Engine = "exact",
    workers: int | None = None,
) -> float:
    """Interaction benefit created between two disjoint groups.

    The union's benefit minus what each group already had on its own:
    exactly the part of the union's interaction that involves both sides.
    """
    engine = resolve_engine(engine)
    ambient = _ambient(game, within)
    lm = _group(game, left, ambient)
    rm = _group(game, right, ambient)
    if lm & rm:
        raise ValueError("the two groups must be disjoint")
    if engine == "exact":
        table, pc = game.value_table(), game.popcounts()
        return (
            _dense.fused_benefit(table, pc, ambient, lm | rm)
            - _dense.fused_benefit(table, pc, ambient, lm)
            - _dense.fused_benefit(table, pc, ambient, rm)
        )
    base = _seed_base(engine)
    amb = PlayerSet(ambient, game.n)
    union = interaction_benefit(
        game, PlayerSet(lm | rm, game.n), within=amb,
        engine=_sub(engine, base, 101), workers=workers,
    )
    left_b = interaction_benefit(
        game, PlayerSet(lm, game.n), within=amb,
        engine=_sub(engine, base, 102), workers=workers,
    )
    right_b = interaction_benefit(
        game, PlayerSet(rm, game.n), within=amb,
        engine=_sub(engine, base, 103), workers=workers,
    )
    return float(union - left_b - right_b)


@dataclass(frozen=True)
class BetweenDecomposition:
    """Split of a between-group benefit into where the interaction lives.

    ``cross`` is the part caused by mixed subsets drawing from both groups.
    ``intra_left`` / ``intra_right`` are the shifts of each group's internal
    benefit caused by the other group's presence (internal benefit computed
    with the other group absent, minus with it present).  By construction
    ``between == cross + intra_left + intra_right``.
    """

    between: float
    cross: float
    intra_left: float
    intra_right: float


def between_decomposition(
    game: GameContext,
    left,
    right,
    within=None,
    engine: Engine = "exact",
    workers: int | None = None,
) -> BetweenDecomposition:
    engine = resolve_engine(engine)
    ambient = _ambient(game, within)
    lm = _group(game, left, ambient)
    rm = _group(game, right, ambient)
    if lm & rm:
        raise ValueError("the two groups must be disjoint")

    if engine == "exact":
        engines = ["exact"] * 5
    else:
        base = _seed_base(engine)
        engines = [_sub(engine, base, 201 + i) for i in range(5)]

    amb = PlayerSet(ambient, game.n)
    left_set, right_set = PlayerSet(lm, game.n), PlayerSet(rm, game.n)
    left_full = interaction_benefit(game, left_set, within=amb, engine=engines[0], workers=workers)
    right_full = interaction_benefit(game, right_set, within=amb, engine=engines[1], workers=workers)
    left_alone = interaction_benefit(
        game, left_set, within=PlayerSet(ambient & ~rm, game.n), engine=engines[2], workers=workers
    )
    right_alone = interaction_benefit(
        game, right_set, within=PlayerSet(ambient & ~lm, game.n), engine=engines[3], workers=workers
    )
    union = interaction_benefit(
        game, PlayerSet(lm | rm, game.n), within=amb, engine=engines[4], workers=workers
    )
    between = union - left_full - right_full
    intra_left = left_alone - left_full
    intra_right = right_alone - right_full
    cross = between - intra_left - intra_right
    return BetweenDecomposition(
        between=float(between),
        cross=float(cross),
        intra_left=float(intra_left),
        intra_right=float(intra_right),
    )


def elementary_components(
    game: GameContext,
    members,
    within=None,
    engine: Engine = "exact",
) -> dict[PlayerSet, float]:
    """Additive breakdown of a group's interaction benefit by sub-group.

    Returns, for every non-empty subset ``S'`` of the group, the interaction
    created by exactly that subset once all smaller subsets are accounted
    for: the subset's benefit (computed with the rest of the group absent)
    minus the components of its own proper subsets.  Singleton components are
    identically 0.0, and the components of size >= 2 sum back to the group's
    interaction benefit.
    """
    if resolve_engine(engine) != "exact":
        raise ValueError("elementary components require the exact engine")
    ambient = _ambient(game, within)
    fused = _group(game, members, ambient)
    if fused.bit_count() > ELEMENTARY_GROUP_LIMIT:
        raise TooManyPlayersError(
            f"elementary components enumerate 2**{fused.bit_count()} subsets "
            f"(limit is 2**{ELEMENTARY_GROUP_LIMIT})"
        )
    player_bits, benefits = _dense.fused_benefit_lattice(
        game.value_table(), game.popcounts(), ambient, fused
    )
    components = _dense.mobius_transform(benefits)
    out: dict[PlayerSet, float] = {}
    for local in range(1, len(components)):
        members_local = [player_bits[j] for j in range(len(player_bits)) if local >> j & 1]
        out[PlayerSet.of(members_local, game.n)] = float(components[local])
    return out
