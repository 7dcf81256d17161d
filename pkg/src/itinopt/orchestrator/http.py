"""JSON-over-HTTP front for :class:`Gateway`.

Routes: ``POST /v1/itineraries:optimize``, ``GET /v1/health``,
``GET /v1/metrics``. Errors use the body ``{code, message, diagnostics}``.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..exceptions import ItinOptError, ParseError
from .gateway import Gateway, OptimizeRequest

logger = logging.getLogger(__name__)

OPTIMIZE_PATH = "/v1/itineraries:optimize"
MAX_BODY = 16 * 1024 * 1024


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 1024  # default backlog of 5 resets connections under burst load


def _handler_for(gateway: Gateway):
    class Handler(BaseHTTPRequestHandler):
        server_version = "itinopt/0.1"
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            logger.debug("%s - %s", self.address_string(), fmt % args)

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _error(self, status: int, code: str, message: str, diagnostics=()) -> None:
            self._send(status, {"code": code, "message": message, "diagnostics": list(diagnostics)})

        def do_GET(self):
            if self.path == "/v1/health":
                self._send(200, gateway.health())
            elif self.path == "/v1/metrics":
                self._send(200, gateway.metrics_snapshot())
            else:
                self._error(404, "not_found", f"no route for GET {self.path}")

        def do_POST(self):
            if self.path != OPTIMIZE_PATH:
                self._error(404, "not_found", f"no route for POST {self.path}")
                return
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_BODY:
                self._error(413, "payload_too_large", f"body exceeds {MAX_BODY} bytes")
                return
            raw = self.rfile.read(length)
            try:
                try:
                    doc = json.loads(raw.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                    raise ParseError(f"request body is not valid JSON: {exc}") from None
                if not isinstance(doc, dict):
                    raise ParseError("request body must be a JSON object")
                response = gateway.handle_optimize(OptimizeRequest.from_dict(doc))
            except ItinOptError as exc:
                self._error(exc.http_status, exc.code, str(exc), exc.diagnostics)
                return
            except Exception as exc:  # surface as a 500 instead of dropping the connection
                logger.exception("unhandled error")
                self._error(500, "internal_error", f"{type(exc).__name__}: {exc}")
                return
            self._send(200, response.to_dict())

    return Handler


class GatewayServer:
    """Threaded HTTP server bound to ``host:port`` (port 0 picks a free one)."""

    def __init__(self, gateway: Gateway, host: str = "127.0.0.1", port: int = 8080):
        self.gateway = gateway
        self.httpd = _Server((host, port), _handler_for(gateway))
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "GatewayServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, kwargs={"poll_interval": 0.05},
                                        name="gateway-http", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
