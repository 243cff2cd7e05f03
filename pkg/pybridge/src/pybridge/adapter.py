"""Line-delimited JSON scoring server around a user callable.

The server side of the masked-input wire protocol: a client sends one JSON
object per line (``hello``, ``score``, ``score_batch``) and gets one reply
line per request.  Masks are strings of ``0``/``1`` where character ``i``
stands for input position ``i``; masked positions are replaced by a pad token
before the user's ``score_fn`` sees the sequence.

The loop is single-threaded and answers exactly one request at a time;
callers that want parallelism launch several adapters.  Bad input of any kind
— malformed JSON, unknown ops, wrong mask lengths, a raising ``score_fn`` —
is answered with an error frame and never kills the loop.
"""
from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass, field
from typing import Callable, Sequence

__all__ = ["PROTOCOL_VERSION", "AdapterConfig", "serve"]

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class AdapterConfig:
    """How the adapter presents a scoring callable to the wire.

    ``tokens`` is the full input sequence being explained (defaults to the
    position indices ``0..n_players-1``); ``pad_token`` is what a masked
    position becomes before ``score_fn`` runs.  ``transport`` is ``"stdio"``
    or ``"tcp"``; a TCP adapter serves one connection at a time.
    """

    n_players: int
    tokens: Sequence | None = None
    pad_token: object = None
    transport: str = "stdio"
    host: str = "127.0.0.1"
    port: int = 0
    batch_limit: int = 1024

    def __post_init__(self):
        if int(self.n_players) < 1:
            raise ValueError("n_players must be >= 1")
        if self.tokens is not None and len(self.tokens) != self.n_players:
            raise ValueError(
                f"got {len(self.tokens)} tokens for {self.n_players} players"
            )
        if self.transport not in ("stdio", "tcp"):
            raise ValueError(f"transport must be 'stdio' or 'tcp', not {self.transport!r}")
        if int(self.batch_limit) < 1:
            raise ValueError("batch_limit must be >= 1")


class _FrameError(Exception):
    """A request that can be answered with an error frame."""


def _as_scalar_or_vector(out):
    """Split a score_fn result into (scalar, None) or (None, vector)."""
    if isinstance(out, (int, float)) and not isinstance(out, bool):
        return float(out), None
    try:
        vector = [float(v) for v in out]
    except TypeError:
        return float(out), None  # scalar-like object exposing __float__
    if not vector:
        raise ValueError("score_fn returned an empty vector")
    return None, vector


class _Scorer:
    """Applies the pad policy and the fixed output-component selection.

    A vector-returning ``score_fn`` is reduced to a scalar using the component
    that is largest on the *full* input, decided once at startup: explanations
    track the model's predicted class, which must not flip as positions are
    masked out.
    """

    def __init__(self, score_fn: Callable, config: AdapterConfig):
        self.score_fn = score_fn
        self.n = config.n_players
        self.pad = config.pad_token
        self.tokens = (
            list(config.tokens) if config.tokens is not None else list(range(self.n))
        )
        scalar, vector = _as_scalar_or_vector(score_fn(list(self.tokens)))
        self.class_index = None if vector is None else max(
            range(len(vector)), key=vector.__getitem__
        )
        self.baseline = self.score("0" * self.n)

    def sequence(self, mask_text: str) -> list:
        return [
            tok if bit == "1" else self.pad
            for tok, bit in zip(self.tokens, mask_text)
        ]

    def score(self, mask_text: str) -> float:
        out = self.score_fn(self.sequence(mask_text))
        scalar, vector = _as_scalar_or_vector(out)
        if self.class_index is None:
            if scalar is None:
                raise _FrameError("score_fn switched from scalar to vector output")
            return scalar
        if vector is None:
            raise _FrameError("score_fn switched from vector to scalar output")
        if self.class_index >= len(vector):
            raise _FrameError(
                f"score_fn returned {len(vector)} components, "
                f"selected index is {self.class_index}"
            )
        return vector[self.class_index]


def _request_id(req) -> int:
    try:
        return int(req.get("id", 0))
    except (TypeError, ValueError):
        return 0


def _error(rid, message: str) -> dict:
    return {"op": "error", "id": rid, "message": str(message)}


def _checked_mask(value, n: int) -> str:
    if not isinstance(value, str):
        raise _FrameError("mask must be a string of 0/1 characters")
    if len(value) != n:
        raise _FrameError(f"mask has {len(value)} characters, expected {n}")
    if any(c not in "01" for c in value):
        raise _FrameError("mask may only contain 0 and 1")
    return value


def handle_line(line: str, scorer: _Scorer, config: AdapterConfig) -> dict:
    """One request in, one reply frame out.  Never raises."""
    try:
        req = json.loads(line)
    except json.JSONDecodeError:
        return _error(0, "malformed JSON")
    if not isinstance(req, dict):
        return _error(0, "expected a JSON object")
    rid = _request_id(req)
    op = req.get("op")
    try:
        if op == "hello":
            version = req.get("version", PROTOCOL_VERSION)
            if version != PROTOCOL_VERSION:
                raise _FrameError(f"unsupported protocol version {version!r}")
            if "n" in req and req["n"] != config.n_players:
                raise _FrameError(
                    f"adapter scores {config.n_players} players, "
                    f"client expects {req['n']}"
                )
            return {
                "op": "hello",
                "n": config.n_players,
                "baseline_score": scorer.baseline,
            }
        if op == "score":
            mask = _checked_mask(req.get("mask"), config.n_players)
            return {"op": "score", "id": rid, "score": scorer.score(mask)}
        if op == "score_batch":
            ids = req.get("ids")
            masks = req.get("masks")
            if not isinstance(ids, list) or not isinstance(masks, list):
                raise _FrameError("score_batch needs parallel 'ids' and 'masks' lists")
            if len(ids) != len(masks):
                raise _FrameError(
                    f"{len(ids)} ids for {len(masks)} masks"
                )
            if len(masks) > config.batch_limit:
                raise _FrameError(
                    f"batch of {len(masks)} exceeds the limit of {config.batch_limit}"
                )
            scores = [
                scorer.score(_checked_mask(m, config.n_players)) for m in masks
            ]
            return {"op": "score_batch", "ids": ids, "scores": scores}
        raise _FrameError(f"unknown op {op!r}")
    except _FrameError as exc:
        return _error(rid, str(exc))
    except Exception as exc:  # score_fn is arbitrary user code
        return _error(rid, f"scoring failed: {exc}")


def _serve_lines(lines, write, scorer: _Scorer, config: AdapterConfig) -> None:
    for line in lines:
        line = line.strip()
        if not line:
            continue
        write(json.dumps(handle_line(line, scorer, config)) + "\n")


def _serve_stdio(scorer: _Scorer, config: AdapterConfig) -> None:
    def write(text: str) -> None:
        sys.stdout.write(text)
        sys.stdout.flush()

    _serve_lines(sys.stdin, write, scorer, config)


def _serve_tcp(scorer: _Scorer, config: AdapterConfig) -> None:
    with socket.create_server((config.host, config.port)) as server:
        host, port = server.getsockname()[:2]
        # Announced on stderr so launchers can discover an ephemeral port.
        print(f"pybridge listening on {host}:{port}", file=sys.stderr, flush=True)
        while True:
            conn, _ = server.accept()
            with conn, conn.makefile("rwb") as stream:
                def write(text: str, _stream=stream) -> None:
                    _stream.write(text.encode("utf-8"))
                    _stream.flush()

                _serve_lines(
                    (raw.decode("utf-8", "replace") for raw in stream),
                    write,
                    scorer,
                    config,
                )


def serve(score_fn: Callable, config: AdapterConfig) -> None:
    """Run the protocol loop until the peer goes away.

    ``score_fn`` maps a token sequence (masked positions already replaced by
    the pad token) to one real number, or to a vector from which the
    full-input argmax component is selected.  The stdio transport returns on
    stdin EOF; the TCP transport accepts connections forever.
    """
    scorer = _Scorer(score_fn, config)
    if config.transport == "stdio":
        _serve_stdio(scorer, config)
    else:
        _serve_tcp(scorer, config)
