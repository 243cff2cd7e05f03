"""Shapley values: exact enumeration and permutation sampling.

A player's value is its average marginal contribution over all join orders.
The exact engine enumerates coalitions from the game's dense value table; the
sampling engine averages marginal contributions along ``samples`` random
permutations.  Sampling is unbiased, and because each permutation telescopes,
the sampled values sum *exactly* to ``v(everyone) - v(no one)`` — efficiency
is never approximate here.

Determinism: permutation ``t`` of a run draws from an RNG keyed by
``(seed, t)``, and the marginal matrix is reduced in a fixed order, so results
are identical for a given seed no matter how many workers computed them.
"""
from __future__ import annotations

import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _dense
from .game import GameContext

__all__ = [
    "SamplingConfig",
    "Engine",
    "ShapleyEstimate",
    "derive_seed",
    "exact_shapley",
    "sampled_shapley",
    "shapley_value",
    "instability",
    "instability_from_vectors",
]


@dataclass(frozen=True)
class SamplingConfig:
    """How to run the permutation-sampling engine.

    ``antithetic`` pairs every odd-indexed permutation with the reverse of
    the previous one, which cancels variance on near-additive games at no
    extra evaluation cost.
    """

    samples: int = 2000
    seed: int | None = None
    antithetic: bool = False

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


# What callers pass to choose an engine: the string "exact" or a sampling
# configuration.
Engine = Union[str, SamplingConfig]


def derive_seed(*parts: int) -> int:
    """Deterministically derive an independent 64-bit seed from integer parts.

    Used to key sub-computations (one Shapley query inside a larger
    procedure, one permutation inside a run) so that nested seeded work is
    reproducible without threading RNG objects through every call.
    """
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2)
    return int(state[0]) | int(state[1]) << 32


def _fresh_seed() -> int:
    return secrets.randbits(63)


def resolve_engine(engine: Engine) -> Engine:
    if engine == "exact":
        return "exact"
    if isinstance(engine, SamplingConfig):
        return engine
    raise ValueError(f"engine must be 'exact' or a SamplingConfig, got {engine!r}")


@dataclass(frozen=True)
class ShapleyEstimate:
    """Per-player contribution estimates plus how they were obtained."""

    values: np.ndarray
    method: str  # "exact" | "sampled"
    samples: int | None = None
    seed: int | None = None
    std_error: np.ndarray | None = None

    def total(self) -> float:
        return float(self.values.sum())

    def __len__(self) -> int:
        return len(self.values)


def exact_shapley(game: GameContext) -> ShapleyEstimate:
    """Exact contributions of every player (players capped, see value_table)."""
    table = game.value_table()
    values = _dense.singleton_values(table, game.popcounts(), game.n)
    return ShapleyEstimate(values=values, method="exact")


def _permutation(n: int, seed: int, t: int, antithetic: bool) -> np.ndarray:
    if antithetic and t % 2 == 1:
        return _permutation(n, seed, t - 1, antithetic)[::-1]
    return np.random.default_rng([seed, t]).permutation(n)


def _marginals_for(game: GameContext, perm: np.ndarray) -> np.ndarray:
    """Marginal contribution of each player along one join order."""
    n = game.n
    prefixes = np.empty(n + 1, dtype=object)
    mask = 0
    prefixes[0] = 0
    for step, player in enumerate(perm):
        mask |= 1 << int(player)
        prefixes[step + 1] = mask
    scores = game.evaluate_many(list(prefixes))
    out = np.empty(n, dtype=np.float64)
    out[perm] = np.diff(scores)
    return out


def sampled_shapley(
    game: GameContext, config: SamplingConfig, workers: int | None = None
) -> ShapleyEstimate:
    """Monte-Carlo contributions from ``config.samples`` random join orders."""
    seed = config.seed if config.seed is not None else _fresh_seed()
    n, T = game.n, config.samples
    marginals = np.empty((T, n), dtype=np.float64)

    def run(t: int) -> None:
        perm = _permutation(n, seed, t, config.antithetic)
        marginals[t] = _marginals_for(game, perm)

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(T)))
    else:
        for t in range(T):
            run(t)

    values = marginals.mean(axis=0)
    std_error = None
    if T > 1:
        std_error = marginals.std(axis=0, ddof=1) / np.sqrt(T)
    return ShapleyEstimate(
        values=values, method="sampled", samples=T, seed=seed, std_error=std_error
    )


def shapley_value(
    game: GameContext, engine: Engine = "exact", workers: int | None = None
) -> ShapleyEstimate:
    """Dispatch to the exact or sampling engine."""
    engine = resolve_engine(engine)
    if engine == "exact":
        return exact_shapley(game)
    return sampled_shapley(game, engine, workers=workers)


def instability_from_vectors(first: np.ndarray, second: np.ndarray) -> float:
    """Relative disagreement of two contribution vectors.

    ``2 * ||a - b|| / (||a|| + ||b||)``, with 0.0 when both vectors are zero
    (two runs that agree perfectly on "nothing matters" are stable).
    """
    a = np.asarray(first, dtype=np.float64)
    b = np.asarray(second, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("contribution vectors must have the same shape")
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(2.0 * np.linalg.norm(a - b) / denom)


def instability(
    game: GameContext, engine: Engine, workers: int | None = None
) -> float:
    """Disagreement between two independent runs of the same engine.

    The exact engine is deterministic, so its instability is identically 0.
    For the sampling engine the two runs use seeds derived from the config's
    seed, making the measurement itself reproducible.
    """
    engine = resolve_engine(engine)
    if engine == "exact":
        values = exact_shapley(game).values
        return instability_from_vectors(values, values)
    base = engine.seed if engine.seed is not None else _fresh_seed()
    first = sampled_shapley(
        game,
        SamplingConfig(engine.samples, derive_seed(base, 1), engine.antithetic),
        workers=workers,
    )
    second = sampled_shapley(
        game,
        SamplingConfig(engine.samples, derive_seed(base, 2), engine.antithetic),
        workers=workers,
    )
    return instability_from_vectors(first.values, second.values)
