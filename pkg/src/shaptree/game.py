"""Cooperative-game substrate: player sets, coalition structures, memoised games.

The package works with games in characteristic-function form: a value model
maps each coalition of players to a score.  Coalitions travel as bitmasks
(bit ``i`` set = player ``i`` present, clear = masked to baseline), so a
coalition never changes the meaning of the remaining positions.

Fusing players yields a *reduced game*: the fused group moves as one player
and is either entirely present or entirely masked.  Players left out of a
reduction stay masked in every evaluation, which is how a game is restricted
to a sub-universe of players.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .models import ValueModel

__all__ = [
    "EvaluationError",
    "TooManyPlayersError",
    "EXACT_PLAYER_LIMIT",
    "PlayerSet",
    "Coalition",
    "CoalitionStructure",
    "GameContext",
    "reduce_game",
]

# Exact engines enumerate all coalitions; past this point they refuse to run.
EXACT_PLAYER_LIMIT = 20


class EvaluationError(RuntimeError):
    """A value model failed to produce a finite score for a coalition."""


class TooManyPlayersError(ValueError):
    """An exact (exponential-cost) computation was requested for too many players."""


@dataclass(frozen=True)
class PlayerSet:
    """An immutable set of player indices within a universe of ``n`` players."""

    mask: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("universe size must be >= 1")
        if not 0 <= self.mask < (1 << self.n):
            raise ValueError(f"mask {self.mask:#x} out of range for universe of {self.n}")

    @classmethod
    def of(cls, members: Iterable[int], n: int) -> "PlayerSet":
        mask = 0
        for i in members:
            i = int(i)
            if not 0 <= i < n:
                raise ValueError(f"player {i} out of range for universe of {n}")
            mask |= 1 << i
        return cls(mask, n)

    @classmethod
    def full(cls, n: int) -> "PlayerSet":
        return cls((1 << n) - 1, n)

    @classmethod
    def empty(cls, n: int) -> "PlayerSet":
        return cls(0, n)

    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.mask >> i & 1)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __contains__(self, player: int) -> bool:
        return 0 <= player < self.n and bool(self.mask >> player & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members())

    def _coerce(self, other: "PlayerSet") -> int:
        if not isinstance(other, PlayerSet) or other.n != self.n:
            raise ValueError("player sets must share one universe")
        return other.mask

    def __or__(self, other: "PlayerSet") -> "PlayerSet":
        return PlayerSet(self.mask | self._coerce(other), self.n)

    def __and__(self, other: "PlayerSet") -> "PlayerSet":
        return PlayerSet(self.mask & self._coerce(other), self.n)

    def __sub__(self, other: "PlayerSet") -> "PlayerSet":
        return PlayerSet(self.mask & ~self._coerce(other), self.n)

    def complement(self) -> "PlayerSet":
        return PlayerSet(self.mask ^ (self.full(self.n).mask), self.n)

    def isdisjoint(self, other: "PlayerSet") -> bool:
        return not (self.mask & self._coerce(other))


# A coalition is nothing more than a set of players treated as one fused
# participant, so it shares the representation.
Coalition = PlayerSet


def member_mask(players, n: int) -> int:
    """Normalise a ``PlayerSet`` or iterable of player indices to a bitmask.

    Bare integers are rejected on purpose: an ``int`` could be read either as
    one player index or as a ready-made mask, and silent guesses about which
    one was meant are how off-by-one-player bugs happen.
    """
    if isinstance(players, PlayerSet):
        if players.n != n:
            raise ValueError(f"player set is over a universe of {players.n}, game has {n}")
        return players.mask
    if isinstance(players, (int, np.integer)):
        raise TypeError(
            "pass a PlayerSet or an iterable of player indices, not a bare int"
        )
    return PlayerSet.of(players, n).mask


@dataclass(frozen=True)
class CoalitionStructure:
    """An ordered tuple of disjoint player blocks, acting as the players of a
    reduced game.

    Original players that appear in no block stay masked in every evaluation;
    a structure over a subset of the universe is therefore the game restricted
    to that subset.  Blocks are ordered by their smallest member so that block
    index ``i`` is stable and position-meaningful.
    """

    n: int
    blocks: tuple[PlayerSet, ...]

    def __post_init__(self):
        seen = 0
        for b in self.blocks:
            if not isinstance(b, PlayerSet) or b.n != self.n:
                raise ValueError("blocks must be PlayerSets over the game's universe")
            if b.mask == 0:
                raise ValueError("blocks must be non-empty")
            if b.mask & seen:
                raise ValueError("blocks must be disjoint")
            seen |= b.mask
        lows = [min(b.members()) for b in self.blocks]
        if lows != sorted(lows):
            object.__setattr__(
                self, "blocks", tuple(b for _, b in sorted(zip(lows, self.blocks)))
            )

    @classmethod
    def fuse(cls, n: int, groups: Iterable[Iterable[int]] = (), within=None) -> "CoalitionStructure":
        """Structure in which each group is fused into one block and every
        other player of ``within`` (default: the whole universe) stays a
        singleton."""
        within_m = (1 << n) - 1 if within is None else member_mask(within, n)
        blocks = []
        fused = 0
        for g in groups:
            m = member_mask(g, n)
            if m & ~within_m:
                raise ValueError("groups must lie inside the ambient player set")
            if m & fused:
                raise ValueError("groups must be disjoint")
            blocks.append(PlayerSet(m, n))
            fused |= m
        for i in range(n):
            bit = 1 << i
            if within_m >> i & 1 and not fused >> i & 1:
                blocks.append(PlayerSet(bit, n))
        return cls(n, tuple(blocks))

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def block_of(self, player: int) -> int:
        """Index of the block containing ``player``."""
        for i, b in enumerate(self.blocks):
            if player in b:
                return i
        raise KeyError(f"player {player} is not covered by this structure")

    def block_index(self, players) -> int:
        """Index of the block that is exactly the given player set."""
        m = member_mask(players, self.n)
        for i, b in enumerate(self.blocks):
            if b.mask == m:
                return i
        raise KeyError("no block equals the given player set")

    def expand(self, block_mask: int) -> int:
        """Translate a coalition of block indices into original player bits."""
        out = 0
        for i, b in enumerate(self.blocks):
            if block_mask >> i & 1:
                out |= b.mask
        return out


class _ReducedModel:
    """View of a parent game whose players are the blocks of a structure."""

    def __init__(self, parent: "GameContext", structure: CoalitionStructure):
        self.parent = parent
        self.structure = structure
        self.n_players = len(structure)

    def score(self, mask: int) -> float:
        return self.parent.evaluate(self.structure.expand(mask))

    def score_batch(self, masks) -> np.ndarray:
        expanded = [self.structure.expand(int(m)) for m in np.asarray(masks).tolist()]
        return self.parent.evaluate_many(expanded)


class GameContext:
    """A value model together with a thread-safe memo of coalition scores.

    All engines in the package evaluate coalitions through a context, so
    repeated queries (and the many shared sub-coalitions of related queries)
    hit the model only once.  ``max_memo`` bounds the memo with
    least-recently-used eviction; the default keeps everything.
    """

    def __init__(self, model: ValueModel, max_memo: int | None = None):
        n = getattr(model, "n_players", None)
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise TypeError("model must expose a positive integer n_players")
        if not callable(getattr(model, "score", None)):
            raise TypeError("model must expose a score(mask) method")
        self.model = model
        self.n = int(n)
        self.max_memo = max_memo
        self._memo: OrderedDict[int, float] = OrderedDict()
        self._lock = threading.RLock()
        self._table: np.ndarray | None = None
        self._popcounts: np.ndarray | None = None

    @property
    def n_players(self) -> int:
        return self.n

    # -- scoring ---------------------------------------------------------

    def _score_raw(self, mask: int) -> float:
        try:
            value = float(self.model.score(mask))
        except EvaluationError:
            raise
        except Exception as exc:  # noqa: BLE001 - model code is arbitrary
            raise EvaluationError(f"model failed on mask {mask:#x}: {exc}") from exc
        if not math.isfinite(value):
            raise EvaluationError(f"model returned non-finite score {value!r} on mask {mask:#x}")
        return value

    def _normalise(self, coalition) -> int:
        if isinstance(coalition, PlayerSet):
            if coalition.n != self.n:
                raise ValueError("player set universe does not match the game")
            return coalition.mask
        if isinstance(coalition, (int, np.integer)):
            # evaluate() is the low-level hot path, so an int is taken as a
            # ready-made bitmask (unlike the player-argument APIs).
            mask = int(coalition)
            if not 0 <= mask < (1 << self.n):
                raise ValueError(f"mask {mask:#x} out of range for {self.n} players")
            return mask
        return PlayerSet.of(coalition, self.n).mask

    def evaluate(self, coalition) -> float:
        """Score one coalition (``PlayerSet``, bitmask int, or index iterable)."""
        mask = self._normalise(coalition)
        if self._table is not None:
            return float(self._table[mask])
        with self._lock:
            if mask in self._memo:
                self._memo.move_to_end(mask)
                return self._memo[mask]
        value = self._score_raw(mask)
        self._store(mask, value)
        return value

    def _store(self, mask: int, value: float) -> None:
        with self._lock:
            self._memo[mask] = value
            self._memo.move_to_end(mask)
            if self.max_memo is not None:
                while len(self._memo) > self.max_memo:
                    self._memo.popitem(last=False)

    def evaluate_many(self, coalitions: Iterable) -> np.ndarray:
        """Score many coalitions, batching memo misses through ``score_batch``
        when the model provides it."""
        masks = [self._normalise(c) for c in coalitions]
        if self._table is not None:
            return self._table[np.asarray(masks, dtype=np.int64)].astype(np.float64)
        out = np.empty(len(masks), dtype=np.float64)
        missing: dict[int, list[int]] = {}
        with self._lock:
            for pos, mask in enumerate(masks):
                if mask in self._memo:
                    self._memo.move_to_end(mask)
                    out[pos] = self._memo[mask]
                else:
                    missing.setdefault(mask, []).append(pos)
        if missing:
            order = list(missing)
            batch = getattr(self.model, "score_batch", None)
            if callable(batch):
                try:
                    values = np.asarray(batch(np.asarray(order, dtype=np.int64)), dtype=np.float64)
                except EvaluationError:
                    raise
                except Exception as exc:  # noqa: BLE001
                    raise EvaluationError(f"model batch scoring failed: {exc}") from exc
                if values.shape != (len(order),):
                    raise EvaluationError("score_batch returned a result of the wrong length")
                if not np.all(np.isfinite(values)):
                    raise EvaluationError("model returned non-finite scores in a batch")
            else:
                values = np.array([self._score_raw(m) for m in order], dtype=np.float64)
            for mask, value in zip(order, values):
                self._store(mask, float(value))
                for pos in missing[mask]:
                    out[pos] = value
        return out

    @property
    def baseline(self) -> float:
        """Score of the empty coalition (everything masked)."""
        return self.evaluate(0)

    # -- dense access ------------------------------------------------------

    def value_table(self) -> np.ndarray:
        """Scores of all ``2**n`` coalitions as one array (cached).

        This is the entry point of every exact engine, hence the hard player
        cap: the table has ``2**n`` entries.
        """
        if self._table is None:
            if self.n > EXACT_PLAYER_LIMIT:
                raise TooManyPlayersError(
                    f"an exact computation over {self.n} players would need "
                    f"2**{self.n} evaluations (limit is {EXACT_PLAYER_LIMIT}); "
                    "use a sampling engine instead"
                )
            with self._lock:
                if self._table is None:
                    masks = np.arange(1 << self.n, dtype=np.int64)
                    self._table = self.evaluate_many(masks)
                    self._memo.clear()  # the table supersedes the memo
        return self._table

    def popcounts(self) -> np.ndarray:
        """Bit counts of every mask index of :meth:`value_table` (cached)."""
        if self._popcounts is None:
            pc = np.zeros(1, dtype=np.uint8)
            for _ in range(self.n):
                pc = np.concatenate([pc, pc + 1])
            self._popcounts = pc
        return self._popcounts

    def memo_size(self) -> int:
        with self._lock:
            return len(self._memo)

    # -- reductions --------------------------------------------------------

    def reduce(self, structure: CoalitionStructure) -> "GameContext":
        """Game whose players are the blocks of ``structure``.

        The reduced game shares this context's memo: each block coalition is
        expanded to original player bits before scoring.
        """
        if structure.n != self.n:
            raise ValueError("structure universe does not match the game")
        return GameContext(_ReducedModel(self, structure))

    def restrict(self, within) -> "GameContext":
        """Game over the players of ``within`` only; everyone else stays masked."""
        return self.reduce(CoalitionStructure.fuse(self.n, (), within=within))


def reduce_game(game: GameContext, structure: CoalitionStructure) -> GameContext:
    """Functional alias for :meth:`GameContext.reduce`."""
    return game.reduce(structure)
