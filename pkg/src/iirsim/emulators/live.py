"""Real loopback HTTP carriage for the emulators.

Servers wrap any object with ``serve(HttpRequest) -> HttpResponse``.
Non-loopback binds are refused unless the caller opts in explicitly.
"""

from __future__ import annotations

import http.client
import ipaddress
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .http import HttpRequest, HttpResponse

LAB_FLAG = "--i-know-this-is-a-lab"


class BindRefused(ValueError):
    pass


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bind must be HOST:PORT, got {bind!r}")
    return host.strip("[]"), int(port)


def is_loopback(host: str) -> bool:
    if host == "localhost":
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


def check_bind(host: str, allow_non_loopback: bool = False) -> None:
    if not is_loopback(host) and not allow_non_loopback:
        raise BindRefused(f"refusing to bind {host}: not loopback (pass {LAB_FLAG} to override)")


def _handler_for(app):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _dispatch(self):
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            req = HttpRequest(self.command, self.path, tuple(self.headers.items()), body)
            with self.server.app_lock:
                resp = app.serve(req)
            self.send_response(resp.status)
            for k, v in resp.headers:
                if k.lower() not in ("content-length", "connection"):
                    self.send_header(k, v)
            self.send_header("Content-Length", str(len(resp.body)))
            self.send_header("Connection", "close")
            self.end_headers()
            self.wfile.write(resp.body)

        do_GET = do_POST = _dispatch

        def log_message(self, format, *args):
            pass

    return Handler


class LiveServer:
    """Threaded HTTP server around an emulator C&C; use as a context manager."""

    def __init__(self, app, bind: str = "127.0.0.1:0", allow_non_loopback: bool = False):
        host, port = parse_bind(bind)
        check_bind(host, allow_non_loopback)
        self.httpd = ThreadingHTTPServer((host, port), _handler_for(app))
        self.httpd.app_lock = threading.Lock()
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def start(self) -> "LiveServer":
        self.thread.start()
        return self

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        self.thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def send(req: HttpRequest, address: tuple[str, int], timeout: float = 5.0) -> HttpResponse | None:
    """One request over a fresh connection; ``None`` when nothing answers."""
    conn = http.client.HTTPConnection(*address, timeout=timeout)
    try:
        headers = {k: v for k, v in req.headers if k.lower() != "content-length"}
        conn.request(req.method, req.path, body=req.body or None, headers=headers)
        r = conn.getresponse()
        return HttpResponse(r.status, tuple(r.getheaders()), r.read())
    except OSError:
        return None
    finally:
        conn.close()


def http_transport(address: tuple[str, int], timeout: float = 5.0):
    """Transport that ignores the logical C&C address and talks to ``address``."""
    return lambda req, host, port: send(req, address, timeout)


class TickClock:
    """Maps abstract ticks to wall-clock seconds for paced live runs."""

    def __init__(self, tick_seconds: float = 0.0):
        if tick_seconds < 0:
            raise ValueError("tick_seconds must be >= 0")
        self.tick_seconds = tick_seconds
        self.origin = time.monotonic()

    def wait_for(self, tick: int) -> None:
        if self.tick_seconds:
            delay = self.origin + tick * self.tick_seconds - time.monotonic()
            if delay > 0:
                time.sleep(delay)


def replay_requests(events, address: tuple[str, int], clock: TickClock | None = None):
    """Send scripted request events to a live server in order; returns (event, response) pairs."""
    clock = clock or TickClock()
    out = []
    for ev in events:
        clock.wait_for(ev.ts)
        req = HttpRequest(ev.http_method, ev.uri, ev.headers, ev.payload)
        out.append((ev, send(req, address)))
    return out
