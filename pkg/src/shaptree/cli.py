"""Command-line interface: build trees, run the experiments, compare results.

Configuration resolution, per option: command-line flag, else environment
variable (``SHAPTREE_<OPTION>``), else the ``--config`` JSON file, else the
built-in default.  Unknown keys in the config file are rejected.  Every
command echoes the *result-determining* part of its resolved configuration
(model, engine, samples, seeds, ...) into its artifact; execution-only knobs
(worker count, output paths) are left out so that artifacts are byte-identical
across runs and worker counts.

Exit codes: 0 success, 2 configuration error, 3 model/bridge failure,
4 schema mismatch in a read artifact.
"""
from __future__ import annotations

import argparse
import json
import os
import secrets
import shlex
import sys
from pathlib import Path

from .bridge import ExternalModelClient
from .evaluation import (
    SpanSet,
    cohesion_score,
    instability_curve,
    run_andor_suite,
    unlabeled_span_scores,
)
from .game import EvaluationError, GameContext, TooManyPlayersError
from .models import (
    builtin_model,
    composition_from_index,
    generate_andor_suite,
    model_from_config,
    suite_manifest,
)
from .shapley import SamplingConfig
from .tree import (
    InteractionTree,
    TreeRecipe,
    TreeSchemaError,
    build_tree,
    canonical_strategy,
)

__all__ = ["main", "ConfigError"]

ENV_PREFIX = "SHAPTREE_"
EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_SCHEMA = 0, 2, 3, 4

# Row labels for the printed experiment table, keyed by strategy id.
_DISPLAY = {
    "density": "ours",
    "si": "si",
    "si-abs": "si-abs",
    "random": "random",
    "left": "lb",
    "right": "rb",
}


class ConfigError(Exception):
    """Bad flags, bad config file, or an unresolvable model spec."""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# Option catalogue per command: name -> (caster, default).  This single table
# drives flag/env/config-file resolution and unknown-key rejection.
_OPTIONS: dict[str, dict[str, tuple]] = {
    "explain": {
        "model": (str, None),
        "bridge": (str, None),
        "connect": (str, None),
        "pool": (int, 1),
        "timeout": (float, 30.0),
        "strategy": (str, "density"),
        "engine": (str, "exact"),
        "samples": (int, 2000),
        "seed": (int, None),
        "workers": (int, None),
        "labels": (str, None),
        "out": (str, None),
        "format": (str, "ascii,json"),
    },
    "andor": {
        "n_vars": (int, 11),
        "recipes": (str, "density,si,si-abs,random,left,right"),
        "random_trials": (int, 10),
        "seed": (int, 0),
        "workers": (int, None),
        "out": (str, None),
        "csv": (str, None),
        "manifest": (str, None),
    },
    "stability": {
        "model": (str, None),
        "bridge": (str, None),
        "connect": (str, None),
        "pool": (int, 1),
        "timeout": (float, 30.0),
        "engine": (str, "sampled"),
        "samples_grid": (str, "10,100,1000"),
        "trials": (int, 20),
        "seed": (int, None),
        "workers": (int, None),
        "out": (str, None),
        "csv": (str, None),
    },
    "cohesion": {
        "model": (str, None),
        "shuffles": (int, 100),
        "samples": (int, 2000),
        "seed": (int, None),
        "workers": (int, None),
        "out": (str, None),
    },
    "compare": {
        "include_root": (_parse_bool, False),
        "out": (str, None),
    },
}


def _resolve_options(args: argparse.Namespace, command: str) -> dict:
    """Merge flags, environment, and config file into one options dict."""
    catalogue = _OPTIONS[command]
    file_values: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_values = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(file_values) - set(catalogue)
        if unknown:
            raise ConfigError(
                f"unknown config keys for {command!r}: {', '.join(sorted(unknown))}"
            )

    resolved = {}
    for name, (cast, default) in catalogue.items():
        value = getattr(args, name, None)
        if value is None:
            env_key = ENV_PREFIX + name.upper()
            if env_key in os.environ:
                try:
                    value = cast(os.environ[env_key])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {env_key}: {exc}") from exc
        if value is None and name in file_values:
            raw = file_values[name]
            try:
                value = cast(raw) if isinstance(raw, str) else raw
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad config value for {name!r}: {exc}") from exc
        if value is None:
            value = default
        resolved[name] = value
    return resolved


def _resolve_model(opts: dict):
    """Turn the model/bridge/connect options into a live value model."""
    chosen = [key for key in ("model", "bridge", "connect") if opts.get(key)]
    if len(chosen) != 1:
        raise ConfigError("exactly one of --model, --bridge, --connect is required")
    if opts.get("model"):
        spec = opts["model"]
        if spec.startswith("andor:"):
            rest = spec[len("andor:") :]
            index_text, _, n_text = rest.partition("@")
            try:
                index = int(index_text)
                n_vars = int(n_text) if n_text else 11
            except ValueError as exc:
                raise ConfigError(f"bad suite model spec {spec!r}") from exc
            return model_from_config({"kind": "andor_suite", "index": index, "n_vars": n_vars}), spec
        if spec.endswith(".json") or os.path.sep in spec:
            try:
                with open(spec, "r", encoding="utf-8") as fh:
                    config = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read model file: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"model file is not valid JSON: {exc}") from exc
            try:
                return model_from_config(config), spec
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad model file {spec!r}: {exc}") from exc
        try:
            return builtin_model(spec), spec
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if opts.get("bridge"):
        argv = shlex.split(opts["bridge"])
        if not argv:
            raise ConfigError("--bridge needs a command line")
        client = ExternalModelClient.spawn(
            argv, pool_size=opts.get("pool", 1), timeout=opts.get("timeout", 30.0)
        )
        return client, f"bridge:{opts['bridge']}"
    address = opts["connect"]
    host, _, port_text = address.rpartition(":")
    if not host:
        raise ConfigError(f"--connect wants host:port, got {address!r}")
    try:
        port = int(port_text)
    except ValueError as exc:
        raise ConfigError(f"bad port in {address!r}") from exc
    client = ExternalModelClient.connect(
        host, port, pool_size=opts.get("pool", 1), timeout=opts.get("timeout", 30.0)
    )
    return client, f"connect:{address}"


def _resolve_engine(opts: dict, seed: int | None):
    name = opts.get("engine", "exact")
    if name == "exact":
        return "exact"
    if name == "sampled":
        return SamplingConfig(samples=opts.get("samples", 2000), seed=seed)
    raise ConfigError(f"engine must be 'exact' or 'sampled', got {name!r}")


def _resolve_seed(value: int | None) -> int:
    # Seeds default to fresh entropy but are always echoed in the artifact,
    # so any run can be reproduced from its output.
    return value if value is not None else secrets.randbits(32)


def _write_json(path: str | None, document: dict) -> None:
    text = json.dumps(document, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _write_text(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_explain(args: argparse.Namespace) -> int:
    opts = _resolve_options(args, "explain")
    formats = {f.strip() for f in opts["format"].split(",") if f.strip()}
    unknown = formats - {"json", "dot", "ascii"}
    if unknown:
        raise ConfigError(f"unknown formats: {', '.join(sorted(unknown))}")
    strategy = canonical_strategy(opts["strategy"])
    seed = _resolve_seed(opts["seed"])
    engine = _resolve_engine(opts, seed)
    model, model_spec = _resolve_model(opts)
    try:
        labels = opts["labels"].split(",") if opts["labels"] else None
        game = GameContext(model)
        recipe = TreeRecipe(strategy=strategy, seed=seed, annotate=True)
        tree = build_tree(game, recipe, engine=engine, workers=opts["workers"], labels=labels)
    finally:
        if hasattr(model, "close"):
            model.close()

    config_echo = {
        "command": "explain",
        "model": model_spec,
        "strategy": strategy,
        "engine": opts["engine"],
        "samples": opts["samples"] if opts["engine"] == "sampled" else None,
        "seed": seed,
        "labels": opts["labels"],
    }
    artifact = {"schema": "shaptree.explain/1", "config": config_echo, "tree": tree.to_dict()}
    if "ascii" in formats:
        sys.stdout.write(tree.to_ascii())
    if "dot" in formats:
        if not opts["out"]:
            raise ConfigError("--format dot needs --out to derive the .dot path")
        _write_text(str(Path(opts["out"]).with_suffix(".dot")), tree.to_dot())
    if "json" in formats:
        _write_json(opts["out"], artifact)
    return EXIT_OK


def cmd_andor(args: argparse.Namespace) -> int:
    opts = _resolve_options(args, "andor")
    strategies = tuple(
        canonical_strategy(name.strip()) for name in opts["recipes"].split(",") if name.strip()
    )
    if not strategies:
        raise ConfigError("--recipes must name at least one strategy")
    if opts["n_vars"] < 2 or opts["n_vars"] > 12:
        raise ConfigError("--n-vars must be between 2 and 12")
    report = run_andor_suite(
        n_vars=opts["n_vars"],
        strategies=strategies,
        random_trials=opts["random_trials"],
        seed=opts["seed"],
        workers=opts["workers"],
    )
    summary = report.summary()

    header = f"{'strategy':<10} {'form':<8} {'f1':>7} {'recall':>7} {'prec':>7}"
    lines = [header, "-" * len(header)]
    for strategy in strategies:
        for form in ("and-or", "or-and", "overall"):
            cell = summary[strategy][form]
            lines.append(
                f"{_DISPLAY.get(strategy, strategy):<10} {form:<8} "
                f"{cell['f1']:>7.2f} {cell['recall']:>7.2f} {cell['precision']:>7.2f}"
            )
    print("\n".join(lines))

    if opts["manifest"]:
        _write_json(opts["manifest"], suite_manifest(generate_andor_suite(opts["n_vars"])))
    if opts["csv"]:
        _write_text(opts["csv"], report.to_csv())
    if opts["out"]:
        _write_json(opts["out"], report.to_dict())
    return EXIT_OK


def cmd_stability(args: argparse.Namespace) -> int:
    opts = _resolve_options(args, "stability")
    if opts["engine"] not in ("exact", "sampled"):
        raise ConfigError(f"engine must be 'exact' or 'sampled', got {opts['engine']!r}")
    try:
        grid = [int(x) for x in opts["samples_grid"].split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --samples-grid: {exc}") from exc
    if not grid:
        raise ConfigError("--samples-grid must list at least one sample count")
    seed = _resolve_seed(opts["seed"])
    model, model_spec = _resolve_model(opts)
    try:
        curve = instability_curve(
            model,
            samples_grid=grid,
            trials=opts["trials"],
            seed=seed,
            workers=opts["workers"],
            engine=opts["engine"],
        )
    finally:
        if hasattr(model, "close"):
            model.close()

    artifact = {
        "schema": "shaptree.stability/1",
        "config": {
            "command": "stability",
            "model": model_spec,
            "engine": opts["engine"],
            "samples_grid": grid,
            "trials": opts["trials"],
            "seed": seed,
        },
        "curve": {str(T): curve[T] for T in grid},
    }
    for T in grid:
        print(f"samples={T}: instability={curve[T]:.6f}")
    if opts["csv"]:
        rows = ["samples,instability"] + [f"{T},{curve[T]!r}" for T in grid]
        _write_text(opts["csv"], "\n".join(rows) + "\n")
    if opts["out"]:
        _write_json(opts["out"], artifact)
    return EXIT_OK


def cmd_cohesion(args: argparse.Namespace) -> int:
    opts = _resolve_options(args, "cohesion")
    if not opts["model"]:
        raise ConfigError("--model is required")
    seed = _resolve_seed(opts["seed"])
    model, model_spec = _resolve_model({"model": opts["model"]})
    result = cohesion_score(
        [model],
        shuffles=opts["shuffles"],
        samples=opts["samples"],
        seed=seed,
        workers=opts["workers"],
    )
    span = result.spans[0]
    print(f"selected span: {span[0]}-{span[1]}")
    print(f"mean score drop over {opts['shuffles']} shuffles: {result.mean_drop:.6f}")
    if opts["out"]:
        _write_json(
            opts["out"],
            {
                "schema": "shaptree.cohesion/1",
                "config": {
                    "command": "cohesion",
                    "model": model_spec,
                    "shuffles": opts["shuffles"],
                    "samples": opts["samples"],
                    "seed": seed,
                },
                "result": {
                    "mean_drop": result.mean_drop,
                    "span": list(span),
                    "drops": [float(d) for d in result.per_model_drops[0]],
                },
            },
        )
    return EXIT_OK


def _load_spans(path: str, include_root: bool) -> SpanSet:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TreeSchemaError(f"{path!r} is not valid JSON: {exc}") from exc
    if isinstance(data, dict) and "tree" in data and isinstance(data["tree"], dict):
        data = data["tree"]  # accept whole explain artifacts
    if isinstance(data, dict) and data.get("schema") == "shaptree.spans/1":
        spans = SpanSet.from_dict(data)
        return SpanSet.from_pairs(spans.n, spans.spans, include_root=include_root)
    tree = InteractionTree.from_dict(data)
    return SpanSet.from_tree(tree, include_root=include_root)


def cmd_compare(args: argparse.Namespace) -> int:
    opts = _resolve_options(args, "compare")
    predicted = _load_spans(args.predicted, opts["include_root"])
    reference = _load_spans(args.reference, opts["include_root"])
    if predicted.n != reference.n:
        raise TreeSchemaError(
            f"documents disagree on input size: {predicted.n} vs {reference.n}"
        )
    scores = unlabeled_span_scores(predicted, reference)
    print(f"precision={scores.precision:.4f} recall={scores.recall:.4f} f1={scores.f1:.4f}")
    if opts["out"]:
        _write_json(
            opts["out"],
            {
                "schema": "shaptree.compare/1",
                "config": {
                    "command": "compare",
                    "predicted": args.predicted,
                    "reference": args.reference,
                    "include_root": opts["include_root"],
                },
                "scores": {
                    "precision": scores.precision,
                    "recall": scores.recall,
                    "f1": scores.f1,
                },
            },
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="builtin name, andor:<index>[@n_vars], or a model JSON file")
    parser.add_argument("--bridge", help="command line of an external model process (stdio)")
    parser.add_argument("--connect", help="host:port of an external model server (TCP)")
    parser.add_argument("--pool", type=int, help="bridge connection pool size")
    parser.add_argument("--timeout", type=float, help="bridge timeout in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shaptree",
        description="Build interaction trees of cooperative-game value models.",
    )
    parser.add_argument("--config", help="JSON file with option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="build and render one interaction tree")
    _add_model_flags(p)
    p.add_argument("--strategy", help="merge strategy (density, si, si-abs, random, left, right)")
    p.add_argument("--engine", help="exact or sampled")
    p.add_argument("--samples", type=int, help="permutations for the sampled engine")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--labels", help="comma-separated position labels")
    p.add_argument("--out", help="tree artifact path (JSON)")
    p.add_argument("--format", help="comma list of ascii,json,dot")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("andor", help="run the two-level boolean model experiment")
    p.add_argument("--n-vars", dest="n_vars", type=int)
    p.add_argument("--recipes", help="comma list of strategies (aliases ours/lb/rb accepted)")
    p.add_argument("--random-trials", dest="random_trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="summary artifact path (JSON)")
    p.add_argument("--csv", help="summary table path (CSV)")
    p.add_argument("--manifest", help="write the generated model manifest here (JSON)")
    p.set_defaults(func=cmd_andor)

    p = sub.add_parser("stability", help="sampling instability across sample counts")
    _add_model_flags(p)
    p.add_argument("--engine", help="exact or sampled")
    p.add_argument("--samples-grid", dest="samples_grid", help="comma list of sample counts")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="curve artifact path (JSON)")
    p.add_argument("--csv", help="curve path (CSV)")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("cohesion", help="score drop when the strongest constituent is shuffled")
    p.add_argument("--model", help="builtin name or model JSON file (needs sequence scoring)")
    p.add_argument("--shuffles", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="artifact path (JSON)")
    p.set_defaults(func=cmd_cohesion)

    p = sub.add_parser("compare", help="unlabeled span F1 between two tree/span files")
    p.add_argument("predicted", help="tree or span JSON file")
    p.add_argument("reference", help="tree or span JSON file")
    p.add_argument("--include-root", dest="include_root", action="store_const", const=True)
    p.add_argument("--out", help="scores artifact path (JSON)")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TooManyPlayersError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TreeSchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except EvaluationError as exc:  # includes BridgeError
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
