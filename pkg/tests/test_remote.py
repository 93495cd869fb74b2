"""Wire-contract tests for the remote embedding and summarizer backends."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from lexrag.embedding import EmbeddingError, RemoteEmbedder
from lexrag.enricher import RemoteSummarizer, window_summaries
from lexrag.remote import RemoteConfig, RemoteError, post_json
from tests.conftest import make_chunk


class StubHandler(BaseHTTPRequestHandler):
    """Scriptable JSON endpoint; behavior is configured per server instance."""

    def do_POST(self):
        server = self.server
        server.request_count += 1
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        server.requests.append({"body": body, "auth": self.headers.get("Authorization")})

        if server.fail_first > 0 and server.request_count <= server.fail_first:
            self.send_response(server.fail_status)
            self.end_headers()
            return

        payload = server.respond(body)
        encoded = json.dumps(payload).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(encoded)))
        self.end_headers()
        self.wfile.write(encoded)

    def log_message(self, *args):  # keep test output quiet
        pass


@pytest.fixture
def stub_server():
    servers = []

    def start(respond, fail_first=0, fail_status=500):
        server = HTTPServer(("127.0.0.1", 0), StubHandler)
        server.respond = respond
        server.fail_first = fail_first
        server.fail_status = fail_status
        server.request_count = 0
        server.requests = []
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return server, f"http://127.0.0.1:{server.server_port}/"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()


def embedding_response(dim):
    def respond(body):
        vectors = []
        for text in body["texts"]:
            v = np.zeros(dim)
            v[hash(text) % dim if False else len(text) % dim] = 1.0
            vectors.append(v.tolist())
        return {"vectors": vectors}
    return respond


class TestPostJson:
    def test_round_trip_and_auth_header(self, stub_server):
        server, url = stub_server(lambda body: {"echo": body["x"]})
        cfg = RemoteConfig(endpoint=url, auth_token="sekrit", retries=0)
        assert post_json(cfg, {"x": 5}) == {"echo": 5}
        assert server.requests[0]["auth"] == "Bearer sekrit"

    def test_retries_then_succeeds(self, stub_server):
        server, url = stub_server(lambda body: {"ok": True}, fail_first=2)
        cfg = RemoteConfig(endpoint=url, retries=2, backoff_seconds=0.0)
        assert post_json(cfg, {}) == {"ok": True}
        assert server.request_count == 3

    def test_exhausted_retries_raise(self, stub_server):
        server, url = stub_server(lambda body: {"ok": True}, fail_first=99)
        cfg = RemoteConfig(endpoint=url, retries=1, backoff_seconds=0.0)
        with pytest.raises(RemoteError, match="failed after 2 attempts"):
            post_json(cfg, {})

    def test_client_error_not_retried(self, stub_server):
        server, url = stub_server(lambda body: {"ok": True}, fail_first=99, fail_status=403)
        cfg = RemoteConfig(endpoint=url, retries=3, backoff_seconds=0.0)
        with pytest.raises(RemoteError, match="HTTP 403"):
            post_json(cfg, {})
        assert server.request_count == 1  # 4xx fails immediately, no retries

    def test_connection_refused_raises(self):
        bad = RemoteConfig(endpoint="http://127.0.0.1:9/", retries=0, backoff_seconds=0.0)
        with pytest.raises(RemoteError):
            post_json(bad, {})


class TestRemoteEmbedder:
    def test_contract_and_normalization(self, stub_server):
        server, url = stub_server(embedding_response(dim=8))
        emb = RemoteEmbedder(RemoteConfig(endpoint=url, retries=0), dim=8,
                             batch_size=2, max_workers=1)
        vectors = emb.embed(["ab", "abcd", "x"])
        assert vectors.shape == (3, 8)
        np.testing.assert_allclose(np.linalg.norm(vectors, axis=1), 1.0, atol=1e-9)
        sent = [req["body"]["texts"] for req in server.requests]
        assert sent == [["ab", "abcd"], ["x"]]

    def test_batch_failure_identifies_indices(self, stub_server):
        server, url = stub_server(embedding_response(dim=4), fail_first=99)
        emb = RemoteEmbedder(RemoteConfig(endpoint=url, retries=0, backoff_seconds=0.0),
                             dim=4, batch_size=2, max_workers=1)
        with pytest.raises(EmbeddingError) as exc_info:
            emb.embed(["a", "b", "c"])
        assert exc_info.value.failed_indices == [0, 1, 2]

    def test_shape_mismatch_is_error(self, stub_server):
        server, url = stub_server(lambda body: {"vectors": [[1.0, 0.0]]})
        emb = RemoteEmbedder(RemoteConfig(endpoint=url, retries=0), dim=8, batch_size=4)
        with pytest.raises(EmbeddingError):
            emb.embed(["one", "two"])


class TestRemoteSummarizer:
    def test_contract(self, stub_server):
        def respond(body):
            assert body["max_tokens"] == 200
            return {"summary": "joined: " + " ".join(t[:4] for t in body["texts"])}
        server, url = stub_server(respond)
        summarizer = RemoteSummarizer(RemoteConfig(endpoint=url, retries=0))
        out = summarizer.summarize(["alpha text", "beta text"], 200)
        assert out.startswith("joined: alph")

    def test_window_summaries_fall_back_on_persistent_failure(self, stub_server):
        server, url = stub_server(lambda body: {"summary": "x"}, fail_first=99)
        summarizer = RemoteSummarizer(
            RemoteConfig(endpoint=url, retries=0, backoff_seconds=0.0))
        chunks = [make_chunk(i, f"sentence {i}.") for i in range(5)]
        result = window_summaries(chunks, summarizer)
        assert all(s.fallback for s in result)
        assert all(s.summary_text for s in result)

    def test_missing_summary_field_is_error(self, stub_server):
        server, url = stub_server(lambda body: {"nope": 1})
        summarizer = RemoteSummarizer(RemoteConfig(endpoint=url, retries=0))
        with pytest.raises(ValueError):
            summarizer.summarize(["text"], 100)
