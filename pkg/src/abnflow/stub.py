"""Deterministic local stand-in for the generation and judge endpoints.

``/generate`` answers with the request's demonstration text and ``/judge``
with the passing rating for the scale named in the instruction. Every request
body is recorded so tests can inspect the wire format.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class _Handler(BaseHTTPRequestHandler):
    server: _StubServer

    def log_message(self, *args) -> None:  # keep test output quiet
        pass

    def _reply(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self) -> None:
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._reply(400, {"error": "invalid JSON"})
            return
        stub = self.server.stub
        with stub.lock:
            stub.requests.append((self.path, body))
        if stub.mode == "error":
            self._reply(503, {"error": "unavailable"})
        elif self.path.rstrip("/").endswith("/judge"):
            scale01 = "scale of 0 to 1" in body.get("instruction", "")
            self._reply(200, {"rating": 0 if scale01 else 3, "rationale": "stub rating"})
        elif stub.mode == "empty":
            self._reply(200, {"text": "   "})
        else:
            self._reply(200, {"text": body.get("demonstration", "")})


class _StubServer(ThreadingHTTPServer):
    daemon_threads = True
    stub: EchoStub


class EchoStub:
    """Context manager running the stub on an ephemeral localhost port.

    ``mode`` is ``"echo"`` (default), ``"empty"`` (blank generations) or
    ``"error"`` (HTTP 503 on every call).
    """

    def __init__(self, mode: str = "echo", host: str = "127.0.0.1", port: int = 0):
        self.mode = mode
        self.requests: list[tuple[str, dict]] = []
        self.lock = threading.Lock()
        self._server = _StubServer((host, port), _Handler)
        self._server.stub = self
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def generate_url(self) -> str:
        return self.base_url + "/generate"

    @property
    def judge_url(self) -> str:
        return self.base_url + "/judge"

    def start(self) -> EchoStub:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> EchoStub:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def main(argv: list[str] | None = None) -> None:
    import argparse

    ap = argparse.ArgumentParser(description="Run the echo stub endpoint.")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--mode", choices=("echo", "empty", "error"), default="echo")
    args = ap.parse_args(argv)
    stub = EchoStub(args.mode, port=args.port)
    print(f"stub listening on {stub.base_url}", flush=True)
    try:
        stub._server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        stub._server.server_close()


if __name__ == "__main__":
    main()
