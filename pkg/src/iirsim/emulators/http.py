"""HTTP message values shared by scripted and live emulation."""

from __future__ import annotations

from dataclasses import dataclass

from ..alerts import TrafficEvent

EPHEMERAL_START = 49152


@dataclass(frozen=True)
class HttpRequest:
    method: str
    path: str
    headers: tuple[tuple[str, str], ...] = ()
    body: bytes = b""

    def header(self, name: str) -> str | None:
        lname = name.lower()
        for k, v in self.headers:
            if k.lower() == lname:
                return v
        return None


@dataclass(frozen=True)
class HttpResponse:
    status: int = 200
    headers: tuple[tuple[str, str], ...] = ()
    body: bytes = b""


class PortAllocator:
    """Ephemeral source ports: 49152 upwards, one per connection, wrapping at 65535."""

    def __init__(self, start: int = EPHEMERAL_START):
        self.next_port = start

    def take(self) -> int:
        port = self.next_port
        self.next_port = port + 1 if port < 65535 else EPHEMERAL_START
        return port


def request_event(ts: int, src_ip: str, src_port: int, dst_ip: str, dst_port: int, req: HttpRequest,
                  seq: int = 0) -> TrafficEvent:
    return TrafficEvent(
        ts=ts, src_ip=src_ip, dst_ip=dst_ip, src_port=src_port, dst_port=dst_port, proto="tcp",
        app="http", uri=req.path, http_method=req.method, headers=req.headers, payload=req.body, seq=seq,
    )


def response_event(req_ev: TrafficEvent, resp: HttpResponse, seq: int | None = None) -> TrafficEvent:
    """The server-to-client half of an exchange; it carries the request URI and no method."""
    headers = (("Status", str(resp.status)),) + tuple(resp.headers)
    return TrafficEvent(
        ts=req_ev.ts, src_ip=req_ev.dst_ip, dst_ip=req_ev.src_ip, src_port=req_ev.dst_port,
        dst_port=req_ev.src_port, proto=req_ev.proto, app="http", uri=req_ev.uri, http_method=None,
        headers=headers, payload=resp.body, seq=req_ev.seq if seq is None else seq,
    )


def event_request(ev: TrafficEvent) -> HttpRequest:
    if ev.http_method is None:
        raise ValueError("not a request event")
    return HttpRequest(ev.http_method, ev.uri, ev.headers, ev.payload)
