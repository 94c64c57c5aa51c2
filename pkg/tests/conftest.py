from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


class StubChatServer:
    """Loopback chat-completions endpoint with a scripted reply and a request counter."""

    def __init__(self):
        self.reply = "[[0, 1], [1, 0]]"
        self.status = 200
        self.delay = 0.0
        self.raw_body = None      # bytes sent verbatim instead of a chat envelope
        self.reply_fn = None      # optional callable(request_json) -> reply text
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with stub._lock:
                    stub.requests.append({"path": self.path, "body": body})
                if stub.delay:
                    time.sleep(stub.delay)
                if stub.raw_body is not None:
                    payload = stub.raw_body
                else:
                    text = stub.reply_fn(body) if stub.reply_fn else stub.reply
                    payload = json.dumps({"choices": [{"message": {"role": "assistant",
                                                                   "content": text}}]}).encode()
                self.send_response(stub.status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.httpd.daemon_threads = True
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def calls(self) -> int:
        return len(self.requests)

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    server = StubChatServer()
    yield server
    server.close()


@pytest.fixture(scope="session")
def golden_corpus():
    return json.loads((DATA / "golden_corpus.json").read_text())


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
