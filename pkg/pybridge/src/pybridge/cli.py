"""Launch an adapter around a user module's ``score_fn``.

The module is named either as an import path (``mypkg.model``) or a file path
(``path/to/model.py``) and must export ``score_fn``.  It may also export
``N_PLAYERS``, ``TOKENS``, and ``PAD_TOKEN`` as defaults for the matching
flags.
"""
from __future__ import annotations

import argparse
import importlib
import importlib.util
import sys
from pathlib import Path

from .adapter import AdapterConfig, serve

__all__ = ["main"]


def _load_module(spec: str):
    path = Path(spec)
    if spec.endswith(".py") or path.exists():
        module_spec = importlib.util.spec_from_file_location(path.stem, path)
        if module_spec is None or module_spec.loader is None:
            raise ImportError(f"cannot load {spec!r}")
        module = importlib.util.module_from_spec(module_spec)
        module_spec.loader.exec_module(module)
        return module
    return importlib.import_module(spec)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pybridge",
        description="Serve a Python scoring callable over the line-JSON wire protocol.",
    )
    parser.add_argument("module", help="import path or .py file exporting score_fn")
    parser.add_argument("--n", type=int, help="number of input positions")
    parser.add_argument("--tokens", help="comma-separated full input sequence")
    parser.add_argument("--pad-token", dest="pad_token", help="replacement for masked positions")
    parser.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    parser.add_argument("--batch-limit", dest="batch_limit", type=int, default=1024)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        module = _load_module(args.module)
    except Exception as exc:
        print(f"pybridge: cannot load {args.module!r}: {exc}", file=sys.stderr)
        return 2
    score_fn = getattr(module, "score_fn", None)
    if not callable(score_fn):
        print(f"pybridge: {args.module!r} does not export a callable score_fn", file=sys.stderr)
        return 2

    tokens = None
    if args.tokens is not None:
        tokens = args.tokens.split(",")
    elif getattr(module, "TOKENS", None) is not None:
        tokens = list(module.TOKENS)

    n = args.n
    if n is None:
        n = getattr(module, "N_PLAYERS", None)
    if n is None and tokens is not None:
        n = len(tokens)
    if n is None:
        print("pybridge: need --n, module N_PLAYERS, or tokens", file=sys.stderr)
        return 2

    pad = args.pad_token if args.pad_token is not None else getattr(module, "PAD_TOKEN", None)

    try:
        config = AdapterConfig(
            n_players=int(n),
            tokens=tokens,
            pad_token=pad,
            transport=args.transport,
            host=args.host,
            port=args.port,
            batch_limit=args.batch_limit,
        )
    except ValueError as exc:
        print(f"pybridge: {exc}", file=sys.stderr)
        return 2

    try:
        serve(score_fn, config)
    except KeyboardInterrupt:
        pass
    except Exception as exc:
        print(f"pybridge: startup failed: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
