"""Emotet traffic shape: RSA/AES cookie envelopes on plain HTTP GETs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..alerts import TrafficEvent
from ..codecs import EmotetEnvelopeError, emotet_open_with_key, emotet_seal, load_private_key, load_public_key
from .http import HttpRequest, HttpResponse, PortAllocator, request_event

PROFILES = ("checkin", "module_fetch", "exfil")
USER_AGENT = "Mozilla/4.0 (compatible; MSIE 8.0; Windows NT 6.1; Trident/4.0)"

# Synthetic record templates, printable before sealing.
PAYLOAD_TEMPLATES = {
    "handshake": "hello bot={bot} epoch=1",
    "checkin": "checkin bot={bot} seq={seq} os=6.1.7601 procs=explorer.exe,svchost.exe",
    "module_fetch": "modreq bot={bot} seq={seq} want=none",
    "exfil": "report bot={bot} seq={seq} items=0 note=synthetic",
}
ACK_TEXT = "ok"


@dataclass
class EmotetTrafficConfig:
    bot_ip: str
    cnc_ip: str
    rsa_public: object
    checkin_interval_ticks: int = 10
    payload_profile: str = "checkin"
    cnc_port: int = 8080
    uri: str = "/"
    cookie_name: str = "SID"
    bot_name: str = "WIN7SP1_4F3A9C21"
    start_tick: int = 0

    def __post_init__(self):
        if self.checkin_interval_ticks < 1:
            raise ValueError("checkin_interval_ticks must be >= 1")
        if self.payload_profile not in PROFILES:
            raise ValueError(f"payload_profile must be one of {PROFILES}")


def session_key(seed: int) -> bytes:
    return random.Random(seed).randbytes(16)


def payload_for(cfg: EmotetTrafficConfig, seq: int) -> bytes:
    name = "handshake" if seq == 0 else cfg.payload_profile
    return PAYLOAD_TEMPLATES[name].format(bot=cfg.bot_name, seq=seq).encode("ascii")


def emotet_traffic(cfg: EmotetTrafficConfig, ticks: int, seed: int = 0,
                   ports: PortAllocator | None = None) -> list[TrafficEvent]:
    """Handshake at the first tick, then one cookie check-in per interval.

    The session key depends on ``seed`` only; the timing and ports do not.
    """
    if ticks < 1:
        raise ValueError("ticks must be >= 1")
    ports = ports or PortAllocator()
    public = load_public_key(cfg.rsa_public)
    key = session_key(seed)
    events = []
    for rel in range(0, ticks, cfg.checkin_interval_ticks):
        seq = rel // cfg.checkin_interval_ticks
        cookie = emotet_seal(public, key, payload_for(cfg, seq))
        headers = (
            ("Host", cfg.cnc_ip if cfg.cnc_port == 80 else f"{cfg.cnc_ip}:{cfg.cnc_port}"),
            ("User-Agent", USER_AGENT),
            ("Cookie", f"{cfg.cookie_name}={cookie}"),
            ("Connection", "Keep-Alive"),
        )
        req = HttpRequest("GET", cfg.uri, headers)
        events.append(request_event(cfg.start_tick + rel, cfg.bot_ip, ports.take(), cfg.cnc_ip, cfg.cnc_port, req,
                                    seq=len(events)))
    return events


def cookie_value(req: HttpRequest, name: str = "SID") -> str | None:
    raw = req.header("Cookie")
    if raw is None:
        return None
    for part in raw.split(";"):
        k, eq, v = part.strip().partition("=")
        if eq and k == name:
            # Base64 padding may itself contain '='; partition keeps it in v
            return v
    return None


@dataclass
class EmotetCnc:
    """Opens check-in cookies and remembers each bot's session key; returns a sealed ack."""

    rsa_private: object
    rsa_public: object = None
    cookie_name: str = "SID"
    sessions: dict[str, bytes] = field(default_factory=dict)
    received: list[bytes] = field(default_factory=list)

    def __post_init__(self):
        self.rsa_private = load_private_key(self.rsa_private)
        if self.rsa_public is None:
            self.rsa_public = self.rsa_private.public_key()

    def serve(self, req: HttpRequest) -> HttpResponse:
        cookie = cookie_value(req, self.cookie_name)
        if req.method != "GET" or cookie is None:
            return HttpResponse(404, (("Content-Type", "text/html"),), b"<h1>404 Not Found</h1>")
        try:
            key, payload = emotet_open_with_key(self.rsa_private, cookie)
        except EmotetEnvelopeError:
            return HttpResponse(404, (("Content-Type", "text/html"),), b"<h1>404 Not Found</h1>")
        self.received.append(payload)
        bot = payload.split(b"bot=", 1)[-1].split(b" ", 1)[0].decode("ascii", "replace")
        self.sessions[bot] = key
        body = emotet_seal(self.rsa_public, key, ACK_TEXT.encode("ascii")).encode("ascii")
        return HttpResponse(200, (("Content-Type", "text/html"),), body)
