"""Wire-protocol client tests against small scripted peers."""
import json
import socket
import subprocess
import sys
import textwrap
import threading

import numpy as np
import pytest

from shaptree import (
    BridgeError,
    ExternalModelClient,
    GameContext,
    bits_to_mask,
    exact_shapley,
    mask_to_bits,
)

PEER = textwrap.dedent(
    """
    import json, sys

    n = 3

    def score(mask_text):
        return float(sum(2.0 ** i for i, b in enumerate(mask_text) if b == "1"))

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        op = req["op"]
        if op == "hello":
            out = {"op": "hello", "n": n, "baseline_score": 0.0}
        elif op == "score":
            out = {"op": "score", "id": req["id"], "score": score(req["mask"])}
        elif op == "score_batch":
            out = {
                "op": "score_batch",
                "ids": req["ids"],
                "scores": [score(m) for m in req["masks"]],
            }
        else:
            out = {"op": "error", "id": req.get("id", 0), "message": "unknown op"}
        sys.stdout.write(json.dumps(out) + "\\n")
        sys.stdout.flush()
    """
)


def spawn_peer(extra="", pool_size=1, **kwargs):
    return ExternalModelClient.spawn(
        [sys.executable, "-c", extra or PEER], pool_size=pool_size, timeout=10.0, **kwargs
    )


class TestMaskCodec:
    def test_char_i_is_position_i(self):
        assert mask_to_bits(0b001, 3) == "100"
        assert mask_to_bits(0b100, 3) == "001"
        assert bits_to_mask("110") == 0b011

    def test_round_trip(self):
        for mask in range(16):
            assert bits_to_mask(mask_to_bits(mask, 4)) == mask


class TestHandshake:
    def test_reads_player_count_and_baseline(self):
        with spawn_peer() as client:
            assert client.n_players == 3
            assert client.baseline_score == 0.0

    def test_client_rejects_unexpected_player_count(self):
        with pytest.raises(BridgeError, match="expected 5"):
            ExternalModelClient.spawn(
                [sys.executable, "-c", PEER], expected_players=5, timeout=10.0
            )

    def test_dead_peer_reports_cleanly(self):
        with pytest.raises(BridgeError):
            ExternalModelClient.spawn(
                [sys.executable, "-c", "import sys; sys.exit(3)"], timeout=10.0
            )

    def test_garbage_handshake_reports_cleanly(self):
        with pytest.raises(BridgeError):
            ExternalModelClient.spawn(
                [sys.executable, "-c", "print('not json'); import time; time.sleep(5)"],
                timeout=10.0,
            )


class TestScoring:
    def test_scalar_and_batch_agree(self):
        with spawn_peer() as client:
            singles = [client.score(m) for m in range(8)]
            batch = client.score_batch(list(range(8)))
            np.testing.assert_allclose(batch, singles)

    def test_works_as_value_model(self):
        with spawn_peer() as client:
            game = GameContext(client)
            np.testing.assert_allclose(exact_shapley(game).values, [1.0, 2.0, 4.0])

    def test_pool_parallelism_same_answers(self):
        with spawn_peer(pool_size=3) as client:
            batch = client.score_batch(list(range(8)))
            np.testing.assert_allclose(batch, [0, 1, 2, 3, 4, 5, 6, 7])

    def test_error_frame_raises_bridge_error(self):
        peer = PEER.replace('"unknown op"', '"boom"').replace(
            'op == "score":', 'op == "never":'
        )
        with spawn_peer(extra=peer) as client:
            with pytest.raises(BridgeError, match="boom"):
                client.score(0b1)

    def test_peer_exit_midstream_raises(self):
        dying = textwrap.dedent(
            """
            import json, sys
            line = sys.stdin.readline()
            sys.stdout.write(json.dumps({"op": "hello", "n": 2, "baseline_score": 0.0}) + "\\n")
            sys.stdout.flush()
            sys.exit(0)
            """
        )
        with pytest.raises(BridgeError):
            with spawn_peer(extra=dying) as client:
                client.score(0b1)

    def test_timeout_raises(self):
        sleepy = textwrap.dedent(
            """
            import json, sys, time
            line = sys.stdin.readline()
            sys.stdout.write(json.dumps({"op": "hello", "n": 2, "baseline_score": 0.0}) + "\\n")
            sys.stdout.flush()
            time.sleep(60)
            """
        )
        client = ExternalModelClient.spawn([sys.executable, "-c", sleepy], timeout=0.5)
        try:
            with pytest.raises(BridgeError, match="timed out"):
                client.score(0b1)
        finally:
            client.close()


def tcp_peer(n=3):
    """One-shot TCP server speaking the protocol; returns (port, thread)."""
    server = socket.create_server(("127.0.0.1", 0))
    port = server.getsockname()[1]

    def serve():
        conn, _ = server.accept()
        buf = b""
        with conn:
            while True:
                while b"\n" not in buf:
                    chunk = conn.recv(4096)
                    if not chunk:
                        return
                    buf += chunk
                line, buf = buf.split(b"\n", 1)
                req = json.loads(line)
                if req["op"] == "hello":
                    out = {"op": "hello", "n": n, "baseline_score": 0.25}
                elif req["op"] == "score":
                    ones = req["mask"].count("1")
                    out = {"op": "score", "id": req["id"], "score": float(ones)}
                else:
                    out = {"op": "error", "id": req.get("id", 0), "message": "nope"}
                conn.sendall((json.dumps(out) + "\n").encode())

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    return port, server


class TestTcpTransport:
    def test_connect_and_score(self):
        port, server = tcp_peer()
        try:
            with ExternalModelClient.connect("127.0.0.1", port, timeout=10.0) as client:
                assert client.n_players == 3
                assert client.baseline_score == 0.25
                assert client.score(0b111) == 3.0
        finally:
            server.close()
