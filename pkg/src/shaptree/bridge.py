"""Client for scoring coalitions through an external model process.

Speaks a line-delimited JSON protocol over the stdio of a spawned subprocess
or over TCP.  One frame per line:

* handshake: client sends ``{"op": "hello", "version": 1}`` (plus ``"n"``
  when the caller already knows how many players to expect, letting the peer
  reject a mismatch); the peer answers
  ``{"op": "hello", "n": <int>, "baseline_score": <float>}``.
* scoring: ``{"op": "score", "id": k, "mask": "0110..."}`` is answered by
  ``{"op": "score", "id": k, "score": 0.42}``.  Masks are strings of ``0``/
  ``1`` in position order: character ``i`` is position ``i``.
* batching: ``{"op": "score_batch", "ids": [...], "masks": [...]}`` with
  parallel-array replies.
* errors: the peer may answer any request with
  ``{"op": "error", "id": k, "message": "..."}``.

Each connection has one request in flight at a time; a pool of ``pool_size``
connections (spawning that many subprocesses, or opening that many sockets)
gives genuine k-way parallelism to threaded callers.
"""
from __future__ import annotations

import json
import os
import queue
import select
import socket
import subprocess
import threading
import time
from typing import Sequence

import numpy as np

from .game import EvaluationError

__all__ = ["PROTOCOL_VERSION", "BridgeError", "ExternalModelClient", "mask_to_bits", "bits_to_mask"]

PROTOCOL_VERSION = 1


class BridgeError(EvaluationError):
    """The external peer failed: protocol violation, timeout, or process death."""


def mask_to_bits(mask: int, n: int) -> str:
    """Render a bitmask as the wire format: character ``i`` = position ``i``."""
    return "".join("1" if mask >> i & 1 else "0" for i in range(n))


def bits_to_mask(bits: str) -> int:
    mask = 0
    for i, ch in enumerate(bits):
        if ch == "1":
            mask |= 1 << i
        elif ch != "0":
            raise ValueError(f"mask strings contain only 0/1, got {ch!r}")
    return mask


class _PipeLines:
    """Line-at-a-time reads with a deadline over a raw file descriptor."""

    def __init__(self, fd: int):
        self._fd = fd
        self._buf = b""

    def readline(self, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError
            ready, _, _ = select.select([self._fd], [], [], remaining)
            if not ready:
                raise TimeoutError
            chunk = os.read(self._fd, 1 << 16)
            if not chunk:
                raise EOFError
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line


class _SocketLines:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""

    def readline(self, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError
            self._sock.settimeout(remaining)
            try:
                chunk = self._sock.recv(1 << 16)
            except socket.timeout:
                raise TimeoutError from None
            if not chunk:
                raise EOFError
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line


class _Connection:
    """One peer connection; exactly one request in flight at a time."""

    def __init__(self, send, reader, close, describe: str):
        self._send = send
        self._reader = reader
        self._close = close
        self._describe = describe
        self._next_id = 0

    def close(self) -> None:
        try:
            self._close()
        except OSError:
            pass

    def _read_frame(self, timeout: float, context: str) -> dict:
        try:
            line = self._reader.readline(timeout)
        except TimeoutError:
            raise BridgeError(f"{self._describe}: timed out after {timeout}s {context}") from None
        except (EOFError, OSError) as exc:
            raise BridgeError(f"{self._describe}: peer went away {context}") from exc
        try:
            frame = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BridgeError(f"{self._describe}: malformed frame {line!r}") from exc
        if not isinstance(frame, dict):
            raise BridgeError(f"{self._describe}: frame is not an object: {line!r}")
        if frame.get("op") == "error":
            raise BridgeError(f"{self._describe}: peer error: {frame.get('message')}")
        return frame

    def _write(self, frame: dict) -> None:
        data = (json.dumps(frame, sort_keys=True) + "\n").encode("utf-8")
        try:
            self._send(data)
        except (OSError, ValueError, BrokenPipeError) as exc:
            raise BridgeError(f"{self._describe}: could not send request") from exc

    def handshake(self, timeout: float, expected_players: int | None) -> tuple[int, float]:
        hello: dict = {"op": "hello", "version": PROTOCOL_VERSION}
        if expected_players is not None:
            hello["n"] = int(expected_players)
        self._write(hello)
        reply = self._read_frame(timeout, "waiting for the handshake")
        if reply.get("op") != "hello":
            raise BridgeError(f"{self._describe}: expected a hello reply, got {reply!r}")
        try:
            n = int(reply["n"])
            baseline = float(reply["baseline_score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BridgeError(f"{self._describe}: malformed hello reply {reply!r}") from exc
        if n < 1:
            raise BridgeError(f"{self._describe}: peer declared {n} players")
        if expected_players is not None and n != expected_players:
            raise BridgeError(
                f"{self._describe}: peer scores {n} players, expected {expected_players}"
            )
        return n, baseline

    def score(self, mask: int, n: int, timeout: float) -> float:
        request_id = self._next_id
        self._next_id += 1
        self._write({"op": "score", "id": request_id, "mask": mask_to_bits(mask, n)})
        reply = self._read_frame(timeout, f"waiting for the score of mask {mask_to_bits(mask, n)}")
        if reply.get("op") != "score" or reply.get("id") != request_id:
            raise BridgeError(f"{self._describe}: unexpected reply {reply!r}")
        try:
            return float(reply["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BridgeError(f"{self._describe}: malformed score reply {reply!r}") from exc

    def score_batch(self, masks: Sequence[int], n: int, timeout: float) -> list[float]:
        ids = list(range(self._next_id, self._next_id + len(masks)))
        self._next_id += len(masks)
        self._write(
            {
                "op": "score_batch",
                "ids": ids,
                "masks": [mask_to_bits(m, n) for m in masks],
            }
        )
        reply = self._read_frame(timeout, f"waiting for a batch of {len(masks)} scores")
        if reply.get("op") != "score_batch" or reply.get("ids") != ids:
            raise BridgeError(f"{self._describe}: unexpected batch reply {reply!r}")
        scores = reply.get("scores")
        if not isinstance(scores, list) or len(scores) != len(masks):
            raise BridgeError(f"{self._describe}: batch reply has {scores!r}, wanted {len(masks)} scores")
        return [float(s) for s in scores]


class ExternalModelClient:
    """A value model whose scores come from an external process.

    Use :meth:`spawn` (stdio subprocess) or :meth:`connect` (TCP).  The
    handshake fixes ``n_players`` and ``baseline_score``; pass
    ``expected_players`` to fail fast — the expectation travels in the hello
    frame so the peer can reject the mismatch on its side too.
    """

    def __init__(self, connections: list[_Connection], n: int, baseline: float, timeout: float):
        self.n_players = n
        self.baseline_score = baseline
        self._timeout = timeout
        self._connections = connections
        self._pool: queue.SimpleQueue[_Connection] = queue.SimpleQueue()
        for conn in connections:
            self._pool.put(conn)
        self._closed = False
        self._lock = threading.Lock()

    @classmethod
    def spawn(
        cls,
        argv: Sequence[str],
        pool_size: int = 1,
        timeout: float = 30.0,
        expected_players: int | None = None,
        cwd: str | None = None,
        env: dict | None = None,
    ) -> "ExternalModelClient":
        """Launch ``pool_size`` copies of the peer command and pool them."""
        connections: list[_Connection] = []
        try:
            for index in range(pool_size):
                proc = subprocess.Popen(
                    list(argv),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    cwd=cwd,
                    env=env,
                )

                def send(data: bytes, proc=proc) -> None:
                    proc.stdin.write(data)
                    proc.stdin.flush()

                def close(proc=proc) -> None:
                    if proc.stdin:
                        proc.stdin.close()
                    try:
                        proc.wait(timeout=2.0)
                    except subprocess.TimeoutExpired:
                        proc.kill()
                        proc.wait()

                connections.append(
                    _Connection(
                        send,
                        _PipeLines(proc.stdout.fileno()),
                        close,
                        f"bridge subprocess #{index} ({argv[0]})",
                    )
                )
            return cls._finish(connections, timeout, expected_players)
        except BaseException:
            for conn in connections:
                conn.close()
            raise

    @classmethod
    def connect(
        cls,
        host: str,
        port: int,
        pool_size: int = 1,
        timeout: float = 30.0,
        expected_players: int | None = None,
    ) -> "ExternalModelClient":
        """Open ``pool_size`` TCP connections to a serving peer."""
        connections: list[_Connection] = []
        try:
            for index in range(pool_size):
                sock = socket.create_connection((host, port), timeout=timeout)
                connections.append(
                    _Connection(
                        sock.sendall,
                        _SocketLines(sock),
                        sock.close,
                        f"bridge tcp #{index} ({host}:{port})",
                    )
                )
            return cls._finish(connections, timeout, expected_players)
        except BaseException:
            for conn in connections:
                conn.close()
            raise

    @classmethod
    def _finish(
        cls,
        connections: list[_Connection],
        timeout: float,
        expected_players: int | None,
    ) -> "ExternalModelClient":
        n = baseline = None
        for conn in connections:
            conn_n, conn_baseline = conn.handshake(timeout, expected_players)
            if n is None:
                n, baseline = conn_n, conn_baseline
            elif conn_n != n:
                raise BridgeError(
                    f"pooled connections disagree on the player count ({conn_n} vs {n})"
                )
        return cls(connections, n, baseline, timeout)

    def _checkout(self) -> _Connection:
        if self._closed:
            raise BridgeError("the bridge client is closed")
        return self._pool.get()

    def score(self, mask: int) -> float:
        conn = self._checkout()
        try:
            return conn.score(int(mask), self.n_players, self._timeout)
        finally:
            self._pool.put(conn)

    def score_batch(self, masks) -> np.ndarray:
        mask_list = [int(m) for m in np.asarray(masks).tolist()]
        conn = self._checkout()
        try:
            scores = conn.score_batch(mask_list, self.n_players, self._timeout)
        finally:
            self._pool.put(conn)
        return np.asarray(scores, dtype=np.float64)

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
        for conn in self._connections:
            conn.close()

    def __enter__(self) -> "ExternalModelClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
