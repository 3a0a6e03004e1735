from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from chatsumm import synth


class MockService:
    """Tiny JSON service; ``responses`` is a list of (status, body) consumed in
    order, the last one repeating.  Bodies may be callables of the request."""

    def __init__(self):
        self.responses: list = [(200, {})]
        self.requests: list[dict] = []
        self.raw_bodies: list[bytes] = []
        self.paths: list[str] = []
        self._server = None

    def start(self):
        service = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                service.raw_bodies.append(raw)
                service.paths.append(self.path)
                try:
                    payload = json.loads(raw)
                except ValueError:
                    payload = None
                service.requests.append(payload)
                idx = min(len(service.requests) - 1, len(service.responses) - 1)
                status, body = service.responses[idx]
                if callable(body):
                    body = body(payload)
                data = body if isinstance(body, (bytes, str)) else json.dumps(body)
                if isinstance(data, str):
                    data = data.encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self._server.serve_forever, daemon=True).start()
        return self

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def stop(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def mock_service():
    svc = MockService().start()
    yield svc
    svc.stop()


@pytest.fixture(scope="session")
def synth_vectors():
    return synth.make_word_vectors()


@pytest.fixture(scope="session")
def synth_transcripts():
    return synth.make_transcripts(20, seed=3)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
