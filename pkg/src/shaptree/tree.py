"""Greedy bottom-up interaction trees.

Starting from one leaf per player, the builder repeatedly merges the adjacent
frontier pair its strategy scores highest, until one root remains.  The
resulting binary tree is the hierarchy of coalitions the model's interactions
support; each internal node can be annotated with the interaction quantities
that justified its merge.

Strategies
----------
``density``
    Merge the pair with the highest modeled-interaction density (the method
    this package exists for).
``si`` / ``si-abs``
    Merge the pair with the highest (respectively highest-magnitude) pairwise
    interaction index, the classic attribution-interaction baseline.
``random``, ``left``, ``right``
    Controls: a seeded uniform choice, and fully left-/right-branching
    structures (``lb``/``rb`` are accepted as aliases).

Ties break towards the leftmost pair, deterministically.
"""
from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _dense
from .game import GameContext, PlayerSet
from .interaction import between_decomposition, fused_contribution
from .metrics import BenefitCache, inter_ratio, merge_candidate
from .shapley import Engine, SamplingConfig, derive_seed, resolve_engine

__all__ = [
    "STRATEGIES",
    "TreeRecipe",
    "TreeNode",
    "InteractionTree",
    "TreeSchemaError",
    "build_tree",
    "shap_interaction_pair",
    "node_contribution",
]

TREE_SCHEMA = "shaptree.tree/1"

STRATEGIES = ("density", "si", "si-abs", "random", "left", "right")
_ALIASES = {"lb": "left", "rb": "right", "ours": "density"}


class TreeSchemaError(ValueError):
    """A serialized tree (or span file) does not match the documented schema."""


def canonical_strategy(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGIES}")
    return name


@dataclass(frozen=True)
class TreeRecipe:
    """Everything that determines which tree gets built.

    ``seed`` only matters for the ``random`` strategy; ``annotate`` controls
    whether merge-time interaction quantities are stored on the nodes (off is
    noticeably faster for large batch runs).
    """

    strategy: str = "density"
    seed: int | None = None
    annotate: bool = True
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", canonical_strategy(self.strategy))

    @property
    def name(self) -> str:
        return self.label if self.label is not None else self.strategy


@dataclass
class TreeNode:
    """One tree node covering the contiguous span ``start..end`` (inclusive)."""

    id: int
    start: int
    end: int
    mask: int
    children: tuple[int, ...] = ()
    annotations: dict[str, float] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass
class InteractionTree:
    """A binary merge tree over ``n_players`` contiguous positions.

    ``nodes[i].id == i``; leaves occupy ids ``0..n_players-1`` and internal
    nodes follow in merge order, so the root is the last node.
    """

    n_players: int
    nodes: list[TreeNode]
    root: int
    meta: dict = field(default_factory=dict)
    labels: tuple[str, ...] | None = None

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def internal_nodes(self) -> list[TreeNode]:
        return [n for n in self.nodes if not n.is_leaf]

    def internal_spans(self, include_root: bool = False) -> frozenset[tuple[int, int]]:
        spans = {n.span for n in self.internal_nodes()}
        if not include_root:
            spans.discard((0, self.n_players - 1))
        return frozenset(spans)

    def merge_order(self) -> list[tuple[int, int]]:
        """Spans of the internal nodes in the order they were created."""
        return [n.span for n in self.nodes[self.n_players :]]

    # -- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": TREE_SCHEMA,
            "n_players": self.n_players,
            "root": self.root,
            "meta": dict(self.meta),
            "labels": list(self.labels) if self.labels is not None else None,
            "nodes": [
                {
                    "id": n.id,
                    "start": n.start,
                    "end": n.end,
                    "children": list(n.children),
                    "annotations": {k: n.annotations[k] for k in sorted(n.annotations)},
                }
                for n in self.nodes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "InteractionTree":
        if not isinstance(data, dict):
            raise TreeSchemaError("expected a JSON object")
        if data.get("schema") != TREE_SCHEMA:
            raise TreeSchemaError(
                f"expected a {TREE_SCHEMA!r} document, got schema {data.get('schema')!r}"
            )
        try:
            n = int(data["n_players"])
            nodes = []
            for raw in data["nodes"]:
                start, end = int(raw["start"]), int(raw["end"])
                mask = ((1 << (end - start + 1)) - 1) << start
                nodes.append(
                    TreeNode(
                        id=int(raw["id"]),
                        start=start,
                        end=end,
                        mask=mask,
                        children=tuple(int(c) for c in raw["children"]),
                        annotations={str(k): float(v) for k, v in raw.get("annotations", {}).items()},
                    )
                )
            tree = cls(
                n_players=n,
                nodes=nodes,
                root=int(data["root"]),
                meta=dict(data.get("meta", {})),
                labels=tuple(data["labels"]) if data.get("labels") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeSchemaError(f"malformed tree document: {exc}") from exc
        if [node.id for node in tree.nodes] != list(range(len(tree.nodes))):
            raise TreeSchemaError("node ids must be 0..len(nodes)-1 in order")
        if not 0 <= tree.root < len(tree.nodes):
            raise TreeSchemaError("root id out of range")
        for node in tree.nodes:
            if any(not 0 <= c < node.id for c in node.children):
                raise TreeSchemaError(
                    f"node {node.id} has children outside the ids built before it"
                )
        return tree

    # -- rendering -------------------------------------------------------

    def _label_of(self, node: TreeNode) -> str:
        if node.is_leaf:
            if self.labels is not None:
                return self.labels[node.start]
            return f"p{node.start}"
        return f"[{node.start}-{node.end}]"

    def to_ascii(self) -> str:
        """Plain-text rendering, one node per line."""
        lines: list[str] = []

        def walk(node_id: int, prefix: str, tail: str) -> None:
            node = self.nodes[node_id]
            extra = ""
            if not node.is_leaf and "modeled_density" in node.annotations:
                extra = f"  density={node.annotations['modeled_density']:.3f}"
            if not node.is_leaf and "benefit" in node.annotations:
                extra += f"  benefit={node.annotations['benefit']:+.3f}"
            lines.append(prefix + tail + self._label_of(node) + extra)
            if node.is_leaf:
                return
            if not tail:
                child_prefix = ""
            elif tail == "`-- ":
                child_prefix = prefix + "    "
            else:
                child_prefix = prefix + "|   "
            for i, child in enumerate(node.children):
                last = i == len(node.children) - 1
                walk(child, child_prefix, "`-- " if last else "|-- ")

        walk(self.root, "", "")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        """Graphviz rendering with annotations in the node labels."""
        out = ["digraph interaction_tree {", "  node [shape=box, fontname=monospace];"]
        for node in self.nodes:
            bits = [self._label_of(node)]
            for key in ("benefit", "between", "modeled_density", "contribution"):
                if key in node.annotations:
                    bits.append(f"{key}={node.annotations[key]:.4g}")
            label = "\\n".join(bits)
            out.append(f'  n{node.id} [label="{label}"];')
        for node in self.nodes:
            for child in node.children:
                out.append(f"  n{node.id} -> n{child};")
        out.append("}")
        return "\n".join(out) + "\n"


def _argmax_leftmost(scores: Sequence[float]) -> int:
    best, best_score = 0, scores[0]
    for i in range(1, len(scores)):
        if scores[i] > best_score:
            best, best_score = i, scores[i]
    return best


def shap_interaction_pair(
    game: GameContext, blocks: Sequence[int], i: int, j: int
) -> float:
    """Pairwise interaction index between two blocks of a fused frontier.

    The frontier's blocks are the players of the reduced game; the index is
    computed exactly from the dense value table (it enumerates all subsets of
    the remaining blocks, so no sampling variant is offered).
    """
    masks = [int(b) for b in blocks]
    return _dense.pair_shap_interaction(game.value_table(), masks, i, j)


def node_contribution(
    game: GameContext,
    members,
    engine: Engine = "exact",
    workers: int | None = None,
) -> float:
    """Contribution of a (fused) tree node; convenience re-export."""
    return fused_contribution(game, members, engine=engine, workers=workers)


def _annotate(
    node: TreeNode,
    cache: BenefitCache,
    game: GameContext,
    left: TreeNode,
    right: TreeNode,
    candidate,
) -> None:
    lm, rm = left.mask, right.mask
    engine = cache.engine if cache.engine == "exact" else cache.engine_for(node.mask, 3)
    decomposition = between_decomposition(
        game,
        PlayerSet(lm, game.n),
        PlayerSet(rm, game.n),
        engine=engine,
        workers=cache.workers,
    )
    node.annotations.update(
        {
            "contribution": cache.contribution(node.mask),
            "benefit": cache.benefit(node.mask),
            "left_benefit": cache.benefit(lm),
            "right_benefit": cache.benefit(rm),
            "between": cache.between(lm, rm),
            "cross": decomposition.cross,
            "intra_left": decomposition.intra_left,
            "intra_right": decomposition.intra_right,
            "inter_ratio": inter_ratio(decomposition),
            "modeled_density": candidate.modeled_density(),
            "unmodeled_density": candidate.unmodeled_density(),
        }
    )


def build_tree(
    game: GameContext,
    recipe: TreeRecipe | str = "density",
    engine: Engine = "exact",
    workers: int | None = None,
    labels: Sequence[str] | None = None,
) -> InteractionTree:
    """Build the merge tree for a game under the given recipe.

    ``engine`` selects how interaction quantities are computed ("exact" needs
    the dense table, sampling works at any size).  The ``si``/``si-abs``
    strategies are defined through the exact pairwise index and reject
    sampling engines.
    """
    if isinstance(recipe, str):
        recipe = TreeRecipe(strategy=recipe)
    engine = resolve_engine(engine)
    if isinstance(engine, SamplingConfig) and engine.seed is None:
        engine = SamplingConfig(engine.samples, secrets.randbits(63), engine.antithetic)
    n = game.n
    if labels is not None and len(labels) != n:
        raise ValueError("labels must have one entry per player")
    strategy = recipe.strategy
    if strategy in ("si", "si-abs") and engine != "exact":
        raise ValueError(f"strategy {strategy!r} is defined only for the exact engine")

    needs_cache = strategy == "density" or recipe.annotate
    cache = BenefitCache(game, engine, workers=workers) if needs_cache else None
    table = game.value_table() if strategy in ("si", "si-abs") else None

    seed = recipe.seed
    rng = None
    if strategy == "random":
        if seed is None:
            seed = secrets.randbits(63)
        rng = np.random.default_rng(derive_seed(seed, 0xD1CE))

    nodes = [TreeNode(id=i, start=i, end=i, mask=1 << i) for i in range(n)]
    if recipe.annotate and cache is not None:
        for node in nodes:
            node.annotations["contribution"] = cache.contribution(node.mask)

    frontier = list(range(n))
    while len(frontier) > 1:
        masks = [nodes[f].mask for f in frontier]
        k = len(frontier)
        candidates = None
        if strategy == "density":
            candidates = [merge_candidate(cache, masks, i) for i in range(k - 1)]
            index = _argmax_leftmost([c.modeled_density() for c in candidates])
        elif strategy == "si":
            index = _argmax_leftmost(
                [_dense.pair_shap_interaction(table, masks, i, i + 1) for i in range(k - 1)]
            )
        elif strategy == "si-abs":
            index = _argmax_leftmost(
                [abs(_dense.pair_shap_interaction(table, masks, i, i + 1)) for i in range(k - 1)]
            )
        elif strategy == "random":
            index = int(rng.integers(0, k - 1))
        elif strategy == "left":
            index = 0
        else:  # "right"
            index = k - 2

        left, right = nodes[frontier[index]], nodes[frontier[index + 1]]
        node = TreeNode(
            id=len(nodes),
            start=left.start,
            end=right.end,
            mask=left.mask | right.mask,
            children=(left.id, right.id),
        )
        if recipe.annotate:
            candidate = (
                candidates[index]
                if candidates is not None
                else merge_candidate(cache, masks, index)
            )
            _annotate(node, cache, game, left, right, candidate)
        nodes.append(node)
        frontier[index : index + 2] = [node.id]

    meta = {
        "strategy": strategy,
        "annotate": recipe.annotate,
        "engine": "exact" if engine == "exact" else "sampled",
    }
    if isinstance(engine, SamplingConfig):
        meta["samples"] = engine.samples
        meta["engine_seed"] = engine.seed
        meta["antithetic"] = engine.antithetic
    if strategy == "random":
        meta["seed"] = seed
    return InteractionTree(
        n_players=n,
        nodes=nodes,
        root=frontier[0],
        meta=meta,
        labels=tuple(labels) if labels is not None else None,
    )
