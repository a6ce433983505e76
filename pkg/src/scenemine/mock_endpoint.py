"""In-process chat-completions endpoint for transport tests.

Serves the same wire shape the gateway expects, from a canned reply list or
a callable over the request body. Failure injection covers the retry paths:
the first N requests can answer an arbitrary status before recovery.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Sequence

logger = logging.getLogger(__name__)

ReplyFn = Callable[[dict], str]


class MockEndpoint:
    """Tiny local HTTP server; start() binds an ephemeral port."""

    def __init__(
        self,
        replies: Sequence[str] | ReplyFn,
        fail_first: int = 0,
        fail_status: int = 500,
        completion_tokens: int | None = None,
    ):
        self._replies = replies
        self._fail_remaining = fail_first
        self._fail_status = fail_status
        self._completion_tokens = completion_tokens
        self._reply_index = 0
        self._lock = threading.Lock()
        self.requests: list[dict] = []
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        assert self._server is not None, "endpoint not started"
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def _next_reply(self, body: dict) -> str:
        if callable(self._replies):
            return self._replies(body)
        with self._lock:
            reply = self._replies[min(self._reply_index, len(self._replies) - 1)]
            self._reply_index += 1
        return reply

    def _take_failure(self) -> int | None:
        with self._lock:
            if self._fail_remaining > 0:
                self._fail_remaining -= 1
                return self._fail_status
        return None

    def start(self) -> "MockEndpoint":
        endpoint = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802  (http.server API name)
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                endpoint.requests.append(body)
                status = endpoint._take_failure()
                if status is not None:
                    payload = json.dumps({"error": "injected failure"}).encode()
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                    return
                text = endpoint._next_reply(body)
                tokens = endpoint._completion_tokens
                if tokens is None:
                    tokens = len(text.split())
                payload = json.dumps({
                    "choices": [{"message": {"role": "assistant", "content": text}}],
                    "usage": {"completion_tokens": tokens},
                }).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, fmt, *args):
                logger.debug("mock endpoint: " + fmt, *args)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "MockEndpoint":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
