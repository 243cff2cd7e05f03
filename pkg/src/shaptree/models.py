"""Value models: objects that assign a score to a coalition of input positions.

A coalition is passed around as an integer bitmask over ``n_players``
positions.  Bit ``i`` set means position ``i`` is present; bit ``i`` clear
means the position is masked out (replaced by the model's baseline input).
Positions are never deleted, so index ``i`` refers to the same input slot in
every call.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

__all__ = [
    "ValueModel",
    "CallableModel",
    "AdditiveModel",
    "TwoLevelBooleanModel",
    "GroundTruthTree",
    "AdditiveBigramModel",
    "toy_text_model",
    "builtin_model",
    "generate_andor_suite",
    "suite_manifest",
    "composition_from_index",
    "model_from_config",
]


@runtime_checkable
class ValueModel(Protocol):
    """Anything that can score a coalition given as a bitmask.

    Implementations may additionally provide:

    ``score_batch(masks) -> np.ndarray``
        Vectorised scoring of many masks at once.
    ``score_sequence(order) -> float``
        Score the *full* input presented in a different left-to-right order
        (only meaningful for order-sensitive models).
    """

    n_players: int

    def score(self, mask: int) -> float: ...


def _check_mask(mask: int, n: int) -> int:
    mask = int(mask)
    if not 0 <= mask < (1 << n):
        raise ValueError(f"mask {mask:#x} out of range for {n} players")
    return mask


class CallableModel:
    """Adapts a plain ``mask -> float`` callable to the model interface."""

    def __init__(self, n_players: int, fn: Callable[[int], float]):
        if n_players < 1:
            raise ValueError("n_players must be >= 1")
        self.n_players = int(n_players)
        self._fn = fn

    def score(self, mask: int) -> float:
        return float(self._fn(_check_mask(mask, self.n_players)))


@dataclass(frozen=True)
class AdditiveModel:
    """Sum of per-position weights over the present positions, plus an offset.

    Additive games have no interactions at all, which makes this the standard
    negative control: every interaction benefit is zero and every sampled
    contribution estimate is exact.
    """

    weights: tuple[float, ...]
    offset: float = 0.0

    @property
    def n_players(self) -> int:
        return len(self.weights)

    def score(self, mask: int) -> float:
        mask = _check_mask(mask, self.n_players)
        total = self.offset
        for i, w in enumerate(self.weights):
            if mask >> i & 1:
                total += w
        return float(total)

    def score_batch(self, masks) -> np.ndarray:
        masks = np.asarray(masks, dtype=np.int64)
        present = (masks[:, None] >> np.arange(self.n_players)) & 1
        return self.offset + present @ np.asarray(self.weights, dtype=np.float64)


def _iter_blocks(blocks: Sequence[Sequence[int]]) -> tuple[tuple[int, int], ...]:
    out = []
    for b in blocks:
        s, e = int(b[0]), int(b[1])
        if s > e:
            raise ValueError(f"bad block ({s}, {e})")
        out.append((s, e))
    return tuple(out)


@dataclass(frozen=True)
class TwoLevelBooleanModel:
    """Two-level AND/OR function over contiguous blocks of binary variables.

    ``form="and-or"`` is a disjunction of conjunctions: each block is the AND
    of its variables and the blocks are joined by OR.  ``form="or-and"`` is
    the dual (OR within blocks, AND across blocks).

    Masked variables take the value ``baseline_bit``; present variables take
    their value from ``assignment`` (all ones when not given).  The score is
    1.0 or 0.0.
    """

    blocks: tuple[tuple[int, int], ...]
    form: str  # "and-or" | "or-and"
    baseline_bit: int = 0
    assignment: tuple[int, ...] | None = None
    index: int | None = None  # position in a generated suite, if any

    def __post_init__(self):
        object.__setattr__(self, "blocks", _iter_blocks(self.blocks))
        if self.form not in ("and-or", "or-and"):
            raise ValueError(f"unknown form {self.form!r}")
        pos = 0
        for s, e in self.blocks:
            if s != pos:
                raise ValueError("blocks must tile 0..n-1 contiguously")
            pos = e + 1
        if self.baseline_bit not in (0, 1):
            raise ValueError("baseline_bit must be 0 or 1")
        if self.assignment is not None:
            if len(self.assignment) != pos:
                raise ValueError("assignment length must equal the number of variables")
            if any(v not in (0, 1) for v in self.assignment):
                raise ValueError("assignment entries must be 0 or 1")

    @property
    def n_players(self) -> int:
        return self.blocks[-1][1] + 1

    def _values(self, mask: int) -> list[int]:
        n = self.n_players
        assign = self.assignment or (1,) * n
        return [assign[i] if mask >> i & 1 else self.baseline_bit for i in range(n)]

    def score(self, mask: int) -> float:
        mask = _check_mask(mask, self.n_players)
        vals = self._values(mask)
        inner = all if self.form == "and-or" else any
        outer = any if self.form == "and-or" else all
        return float(outer(inner(vals[s : e + 1]) for s, e in self.blocks))

    def score_batch(self, masks) -> np.ndarray:
        n = self.n_players
        masks = np.asarray(masks, dtype=np.int64)
        assign = np.asarray(self.assignment or (1,) * n, dtype=bool)
        present = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
        vals = np.where(present, assign, bool(self.baseline_bit))
        if self.form == "and-or":
            per_block = [vals[:, s : e + 1].all(axis=1) for s, e in self.blocks]
            out = np.logical_or.reduce(per_block)
        else:
            per_block = [vals[:, s : e + 1].any(axis=1) for s, e in self.blocks]
            out = np.logical_and.reduce(per_block)
        return out.astype(np.float64)

    def ground_truth(self) -> "GroundTruthTree":
        return GroundTruthTree(self.n_players, self.blocks)


@dataclass(frozen=True)
class GroundTruthTree:
    """The block structure a generated boolean model was built from.

    Its constituents are the multi-variable blocks plus the whole-input span;
    single variables are not constituents.
    """

    n: int
    blocks: tuple[tuple[int, int], ...]

    def spans(self) -> frozenset[tuple[int, int]]:
        out = {(s, e) for s, e in self.blocks if e > s}
        if self.n > 1:
            out.add((0, self.n - 1))
        return frozenset(out)


def composition_from_index(comp_index: int, n_vars: int) -> tuple[tuple[int, int], ...]:
    """Map an integer in ``[0, 2**(n_vars-1))`` to a contiguous composition.

    Bit ``j`` of ``comp_index`` set means there is a block boundary between
    positions ``j`` and ``j + 1``, so every composition of the input into
    contiguous blocks appears exactly once.
    """
    if not 0 <= comp_index < (1 << (n_vars - 1)):
        raise ValueError("composition index out of range")
    blocks = []
    start = 0
    for j in range(n_vars - 1):
        if comp_index >> j & 1:
            blocks.append((start, j))
            start = j + 1
    blocks.append((start, n_vars - 1))
    return tuple(blocks)


def generate_andor_suite(n_vars: int = 11, baseline_bit: int = 0) -> list[TwoLevelBooleanModel]:
    """All ``2**n_vars`` two-level AND/OR models over ``n_vars`` variables.

    The first ``2**(n_vars-1)`` entries are ``and-or`` models, one per
    contiguous composition in ``composition_from_index`` order; the second
    half repeats the compositions with form ``or-and``.  The mapping is pure,
    so index ``i`` always denotes the same model.
    """
    if n_vars < 2:
        raise ValueError("n_vars must be >= 2")
    half = 1 << (n_vars - 1)
    out = []
    for index in range(2 * half):
        form = "and-or" if index < half else "or-and"
        blocks = composition_from_index(index % half, n_vars)
        out.append(
            TwoLevelBooleanModel(
                blocks=blocks, form=form, baseline_bit=baseline_bit, index=index
            )
        )
    return out


def suite_manifest(models: Sequence[TwoLevelBooleanModel]) -> dict:
    """JSON-ready description of a generated model suite."""
    return {
        "schema": "shaptree.suite-manifest/1",
        "count": len(models),
        "n_vars": models[0].n_players if models else 0,
        "entries": [
            {
                "index": m.index,
                "form": m.form,
                "blocks": [list(b) for b in m.blocks],
                "baseline_bit": m.baseline_bit,
                "assignment": list(m.assignment) if m.assignment is not None else None,
                "ground_truth_spans": sorted(list(s) for s in m.ground_truth().spans()),
            }
            for m in models
        ],
    }


@dataclass(frozen=True)
class AdditiveBigramModel:
    """Toy text model: per-word weights plus pairwise bonuses.

    As a coalition game, a bonus ``(i, j) -> b`` fires whenever both words
    are present.  As a sequence scorer (``score_sequence``), the bonus fires
    only when word ``i`` immediately precedes word ``j`` in the presented
    order, which makes the model order-sensitive.  With
    ``order_sensitive=False`` the sequence score ignores word order entirely
    and equals the full-coalition score.
    """

    weights: tuple[float, ...]
    bonuses: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0
    order_sensitive: bool = True

    def __post_init__(self):
        n = len(self.weights)
        pairs = {}
        for (i, j), b in dict(self.bonuses).items():
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"bad bonus pair ({i}, {j})")
            pairs[(i, j)] = float(b)
        object.__setattr__(self, "bonuses", pairs)

    @property
    def n_players(self) -> int:
        return len(self.weights)

    def score(self, mask: int) -> float:
        mask = _check_mask(mask, self.n_players)
        total = self.offset
        for i, w in enumerate(self.weights):
            if mask >> i & 1:
                total += w
        for (i, j), b in self.bonuses.items():
            if mask >> i & 1 and mask >> j & 1:
                total += b
        return float(total)

    def score_batch(self, masks) -> np.ndarray:
        masks = np.asarray(masks, dtype=np.int64)
        present = ((masks[:, None] >> np.arange(self.n_players)) & 1).astype(bool)
        out = self.offset + present @ np.asarray(self.weights, dtype=np.float64)
        for (i, j), b in self.bonuses.items():
            out = out + b * (present[:, i] & present[:, j])
        return out

    def score_sequence(self, order: Sequence[int]) -> float:
        """Score the full input presented in the given word order."""
        if sorted(order) != list(range(self.n_players)):
            raise ValueError("order must be a permutation of all word indices")
        if not self.order_sensitive:
            return self.score((1 << self.n_players) - 1)
        total = self.offset + sum(self.weights)
        follows = {(order[k], order[k + 1]) for k in range(len(order) - 1)}
        for pair, b in self.bonuses.items():
            if pair in follows:
                total += b
        return float(total)


def toy_text_model(
    weights: Sequence[float],
    bigram_bonuses: Mapping[tuple[int, int], float] | None = None,
    offset: float = 0.0,
    order_sensitive: bool = True,
) -> AdditiveBigramModel:
    """Convenience factory for the additive-plus-bonuses toy text model."""
    return AdditiveBigramModel(
        weights=tuple(float(w) for w in weights),
        bonuses=dict(bigram_bonuses or {}),
        offset=offset,
        order_sensitive=order_sensitive,
    )


def builtin_model(name: str) -> ValueModel:
    """Small named models for CLI use and smoke tests."""
    registry: dict[str, Callable[[], ValueModel]] = {
        "and-2": lambda: TwoLevelBooleanModel(blocks=((0, 1),), form="and-or"),
        "or-2": lambda: TwoLevelBooleanModel(blocks=((0, 1),), form="or-and"),
        "xor-2": lambda: CallableModel(2, lambda m: float(m.bit_count() == 1)),
        "majority-3": lambda: CallableModel(3, lambda m: float(m.bit_count() >= 2)),
        "demo-text": lambda: AdditiveBigramModel(
            weights=(-1.0, 0.5, 0.5, -1.0), bonuses={(1, 2): 2.0}
        ),
    }
    try:
        return registry[name]()
    except KeyError:
        raise ValueError(
            f"unknown builtin model {name!r}; available: {', '.join(sorted(registry))}"
        ) from None


def model_from_config(config: Mapping) -> ValueModel:
    """Build a model from a plain dict, e.g. parsed from a JSON file.

    Recognised kinds: ``additive``, ``two_level_boolean``, ``andor_suite``
    (one entry of the generated suite) and ``bigram``.
    """
    cfg = dict(config)
    kind = cfg.pop("kind", None)
    if kind == "additive":
        return AdditiveModel(weights=tuple(float(w) for w in cfg.pop("weights")), offset=float(cfg.pop("offset", 0.0)))
    if kind == "two_level_boolean":
        return TwoLevelBooleanModel(
            blocks=tuple((int(s), int(e)) for s, e in cfg.pop("blocks")),
            form=str(cfg.pop("form")),
            baseline_bit=int(cfg.pop("baseline_bit", 0)),
            assignment=tuple(int(v) for v in cfg.pop("assignment")) if "assignment" in cfg else None,
        )
    if kind == "andor_suite":
        n_vars = int(cfg.pop("n_vars", 11))
        index = int(cfg.pop("index"))
        half = 1 << (n_vars - 1)
        if not 0 <= index < 2 * half:
            raise ValueError(f"suite index {index} out of range for n_vars={n_vars}")
        form = "and-or" if index < half else "or-and"
        return TwoLevelBooleanModel(
            blocks=composition_from_index(index % half, n_vars),
            form=form,
            baseline_bit=int(cfg.pop("baseline_bit", 0)),
            index=index,
        )
    if kind == "bigram":
        bonuses = {}
        for key, b in dict(cfg.pop("bonuses", {})).items():
            if isinstance(key, str):
                i, j = key.split("-")
            else:
                i, j = key
            bonuses[(int(i), int(j))] = float(b)
        return AdditiveBigramModel(
            weights=tuple(float(w) for w in cfg.pop("weights")),
            bonuses=bonuses,
            offset=float(cfg.pop("offset", 0.0)),
            order_sensitive=bool(cfg.pop("order_sensitive", True)),
        )
    raise ValueError(f"unknown model kind {kind!r}")
