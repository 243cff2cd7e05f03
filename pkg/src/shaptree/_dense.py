"""Exact engines over a dense table of coalition values.

Everything here takes the full ``2**n`` value table of a game (see
``GameContext.value_table``) plus its popcount index and works in vectorised
numpy.  Masks are plain ints; ``ambient`` restricts a computation to a subset
of players, everyone outside it being masked in every evaluated coalition.

The workhorse identity: the contribution of a fused group ``S`` inside
``ambient`` is a weighted sum over the subsets ``T`` of ``ambient \\ S`` of
``v(T | S) - v(T)``, with the weight ``|T|! (k - |T| - 1)! / k!`` where ``k``
is the number of players of the reduced game (the outsiders plus the fused
group as one player).
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

__all__ = [
    "shapley_weights",
    "submasks",
    "singleton_values",
    "fused_value",
    "fused_benefit",
    "fused_benefit_lattice",
    "mobius_transform",
    "pair_shap_interaction",
]


@lru_cache(maxsize=None)
def shapley_weights(k: int) -> np.ndarray:
    """``w[s] = s! (k - 1 - s)! / k!`` for ``s`` in ``0..k-1``.

    ``w[|T|]`` weights the marginal contribution of a player joining the
    coalition ``T`` in a ``k``-player game; the weights sum to 1 over full
    chains, i.e. ``sum_s C(k-1, s) * w[s] == 1``.
    """
    fact = [math.factorial(i) for i in range(k + 1)]
    return np.array(
        [fact[s] * fact[k - 1 - s] / fact[k] for s in range(k)], dtype=np.float64
    )


@lru_cache(maxsize=None)
def _pair_weights(k: int) -> np.ndarray:
    """``w[t] = t! (k - t - 2)! / (2 (k - 1)!)`` for ``t`` in ``0..k-2``.

    Weights of the pairwise interaction index in a ``k``-player game: the
    second-order analogue of the contribution weights above.
    """
    fact = [math.factorial(i) for i in range(k + 1)]
    return np.array(
        [fact[t] * fact[k - t - 2] / (2 * fact[k - 1]) for t in range(k - 1)],
        dtype=np.float64,
    )


def submasks(mask: int) -> np.ndarray:
    """All subsets of ``mask`` as an int64 array (size ``2**popcount``).

    Built by doubling: each bit of ``mask`` in turn is appended to every
    subset found so far, so the order is fixed and runs are reproducible.
    """
    out = np.zeros(1, dtype=np.int64)
    remaining = mask
    while remaining:
        bit = remaining & -remaining
        out = np.concatenate([out, out | bit])
        remaining ^= bit
    return out


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        bit = mask & -mask
        out.append(bit.bit_length() - 1)
        mask ^= bit
    return out


def singleton_values(table: np.ndarray, popcounts: np.ndarray, n: int) -> np.ndarray:
    """Contribution of every player in the full ``n``-player game."""
    idx = np.arange(1 << n, dtype=np.int64)
    w = shapley_weights(n)
    out = np.empty(n, dtype=np.float64)
    for a in range(n):
        without = idx[(idx >> a) & 1 == 0]
        out[a] = np.dot(
            w[popcounts[without]], table[without | (1 << a)] - table[without]
        )
    return out


def fused_value(
    table: np.ndarray, popcounts: np.ndarray, ambient: int, fused: int
) -> float:
    """Contribution of the group ``fused`` moving as one player, the other
    ``ambient`` players staying singletons and everyone else masked."""
    rest = ambient & ~fused
    subs = submasks(rest)
    k = int(popcounts[rest]) + 1
    w = shapley_weights(k)[popcounts[subs]]
    return float(np.dot(w, table[subs | fused] - table[subs]))


def fused_benefit(
    table: np.ndarray, popcounts: np.ndarray, ambient: int, fused: int
) -> float:
    """Interaction benefit of the group ``fused`` within ``ambient``.

    This is the group's fused contribution minus the sum of each member's
    solo contribution computed with the *other* members masked away.  All the
    terms share one subset enumeration of ``ambient \\ fused``, because every
    reduced game involved has exactly those outsiders plus one more player:

        benefit = sum_T w[|T|] * ( v(T|S) - sum_a v(T|{a}) + (|S|-1) v(T) )

    Singletons get exactly 0.0 by construction.
    """
    rest = ambient & ~fused
    subs = submasks(rest)
    k = int(popcounts[rest]) + 1
    w = shapley_weights(k)[popcounts[subs]]
    members = _bits(fused)
    acc = table[subs | fused].astype(np.float64, copy=True)
    for a in members:
        acc -= table[subs | (1 << a)]
    acc += (len(members) - 1) * table[subs]
    return float(np.dot(w, acc))


def fused_benefit_lattice(
    table: np.ndarray, popcounts: np.ndarray, ambient: int, members: int
) -> tuple[list[int], np.ndarray]:
    """Interaction benefit of every non-empty subset of ``members``.

    Each subset ``S'`` is evaluated within the ambient set
    ``(ambient \\ members) | S'`` — i.e. the rest of ``members`` is absent,
    not merely fused.  Returns the player list of ``members`` and an array
    indexed by local submask over that list (entry 0 is the empty set, 0.0).

    One shared enumeration of ``ambient \\ members`` serves every subset,
    since the outsiders are the same for all of them.
    """
    rest = ambient & ~members
    subs = submasks(rest)
    player_bits = _bits(members)
    s = len(player_bits)
    k = int(popcounts[rest]) + 1
    w = shapley_weights(k)[popcounts[subs]]
    base = table[subs].astype(np.float64, copy=False)
    solo = {a: table[subs | (1 << a)] for a in player_bits}

    out = np.zeros(1 << s, dtype=np.float64)
    for local in range(1, 1 << s):
        fused = 0
        for j in range(s):
            if local >> j & 1:
                fused |= 1 << player_bits[j]
        acc = table[subs | fused].astype(np.float64, copy=True)
        count = 0
        for j in range(s):
            if local >> j & 1:
                acc -= solo[player_bits[j]]
                count += 1
        acc += (count - 1) * base
        out[local] = np.dot(w, acc)
    return player_bits, out


def mobius_transform(values: np.ndarray) -> np.ndarray:
    """Inverse zeta transform over the subset lattice.

    Given ``f[S] = sum_{T subseteq S} g[T]``, recovers ``g`` in place-order:
    ``g[S] = f[S] - sum_{T strict subset of S} g[T]``.
    """
    out = values.astype(np.float64, copy=True)
    size = out.shape[0]
    bits = size.bit_length() - 1
    idx = np.arange(size)
    for j in range(bits):
        has = (idx >> j & 1) == 1
        out[has] -= out[idx[has] ^ (1 << j)]
    return out


def pair_shap_interaction(
    table: np.ndarray, blocks: list[int], i: int, j: int
) -> float:
    """Pairwise interaction index between blocks ``i`` and ``j`` of a reduced
    game whose players are the given (disjoint) blocks of original players.

    Computed exactly over subsets of the other blocks:

        sum_T w[|T|] * ( v(T|bi|bj) - v(T|bi) - v(T|bj) + v(T) )

    with the pairwise weights ``w[t] = t! (k-t-2)! / (2 (k-1)!)``.
    """
    k = len(blocks)
    if k < 2:
        raise ValueError("need at least two blocks")
    bi, bj = blocks[i], blocks[j]
    combos = np.zeros(1, dtype=np.int64)
    sizes = np.zeros(1, dtype=np.int64)
    for pos, bm in enumerate(blocks):
        if pos == i or pos == j:
            continue
        combos = np.concatenate([combos, combos | bm])
        sizes = np.concatenate([sizes, sizes + 1])
    w = _pair_weights(k)[sizes]
    val = (
        table[combos | bi | bj]
        - table[combos | bi]
        - table[combos | bj]
        + table[combos]
    )
    return float(np.dot(w, val))
