"""Zeus 2.0.8.9 traffic shape: one configuration download, then periodic gate.php reports."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..alerts import TrafficEvent
from ..codecs import zeus_open, zeus_seal
from .http import HttpRequest, HttpResponse, PortAllocator, request_event

USER_AGENT = "Mozilla/4.0 (compatible; MSIE 7.0; Windows NT 6.1; Trident/4.0)"

# Synthetic configuration: reporting endpoints only, no injects.
CONFIG_TEMPLATE = (
    "entry \"StaticConfig\"\n"
    "  timer_config 60 1\n"
    "  timer_stats 20 1\n"
    "  url_config \"http://{cnc}{cfg_uri}\"\n"
    "  url_compip \"http://{cnc}/ip.php\"\n"
    "end\n"
    "entry \"DynamicConfig\"\n"
    "  url_server \"http://{cnc}{gate_uri}\"\n"
    "end\n"
)
REPORT_TEMPLATE = "bot_id={bot_id}&botnet={botnet}&ver=2.0.8.9&os=6.1.7601&report=status&seq={seq}&uptime={uptime}"
ACK_TEMPLATE = "status=ok&next={interval}"

DROPPER_URI = "/files/bot.exe"
# Inert stand-in for the bot executable: printable, not a PE image.
DROPPER_BODY = (
    b"MZ SYNTHETIC-PLACEHOLDER This program cannot be run in DOS mode. "
    b"It is a text stand-in used for IDS signature emulation only.\n"
)


@dataclass
class ZeusBotConfig:
    bot_ip: str
    cnc_ip: str
    rc4_key: str
    cfg_uri: str = "/cfg.bin"
    gate_uri: str = "/gate.php"
    ping_interval_ticks: int = 25
    cnc_port: int = 80
    bot_id: str = "WIN7SP1-0017"
    botnet: str = "btn1"
    start_tick: int = 0

    def __post_init__(self):
        if self.ping_interval_ticks < 1:
            raise ValueError("ping_interval_ticks must be >= 1")


def _request_headers(cfg: ZeusBotConfig, body: bytes | None) -> tuple[tuple[str, str], ...]:
    headers = [("Host", cfg.cnc_ip), ("User-Agent", USER_AGENT), ("Connection", "close")]
    if body is not None:
        headers += [("Content-Type", "application/octet-stream"), ("Content-Length", str(len(body)))]
    return tuple(headers)


def report_payload(cfg: ZeusBotConfig, seq: int) -> bytes:
    return REPORT_TEMPLATE.format(
        bot_id=cfg.bot_id, botnet=cfg.botnet, seq=seq, uptime=seq * cfg.ping_interval_ticks
    ).encode("ascii")


def zeus_bot_run(cfg: ZeusBotConfig, ticks: int, ports: PortAllocator | None = None) -> list[TrafficEvent]:
    """Bot-side requests over ``ticks`` ticks starting at ``cfg.start_tick``.

    Tick 0 fetches the configuration; every ``ping_interval_ticks`` after
    that a sealed status report is POSTed. Each request uses a fresh
    ephemeral source port.
    """
    if ticks < 1:
        raise ValueError("ticks must be >= 1")
    ports = ports or PortAllocator()
    events = []
    for rel in range(ticks):
        ts = cfg.start_tick + rel
        if rel == 0:
            req = HttpRequest("GET", cfg.cfg_uri, _request_headers(cfg, None))
        elif rel % cfg.ping_interval_ticks == 0:
            body = zeus_seal(cfg.rc4_key, report_payload(cfg, rel // cfg.ping_interval_ticks))
            req = HttpRequest("POST", cfg.gate_uri, _request_headers(cfg, body), body)
        else:
            continue
        events.append(request_event(ts, cfg.bot_ip, ports.take(), cfg.cnc_ip, cfg.cnc_port, req, seq=len(events)))
    return events


def dropper_request(bot_ip: str, host_ip: str, ts: int, ports: PortAllocator, port: int = 80,
                    uri: str = DROPPER_URI) -> TrafficEvent:
    """The victim browser fetching the bot executable (infection-download variation)."""
    headers = (("Host", host_ip), ("User-Agent", USER_AGENT), ("Accept", "*/*"))
    return request_event(ts, bot_ip, ports.take(), host_ip, port, HttpRequest("GET", uri, headers))


@dataclass
class ZeusCnc:
    """Scripted C&C: serves the sealed config, acknowledges reports, logs them."""

    rc4_key: str
    cnc_ip: str = "127.0.0.1"
    cfg_uri: str = "/cfg.bin"
    gate_uri: str = "/gate.php"
    dropper_uri: str = DROPPER_URI
    interval: int = 25
    reports: list[dict] = field(default_factory=list)

    def config_text(self) -> str:
        return CONFIG_TEMPLATE.format(cnc=self.cnc_ip, cfg_uri=self.cfg_uri, gate_uri=self.gate_uri)

    def serve(self, req: HttpRequest) -> HttpResponse:
        octet = (("Content-Type", "application/octet-stream"),)
        if req.method == "GET" and req.path == self.cfg_uri:
            return HttpResponse(200, octet, zeus_seal(self.rc4_key, self.config_text().encode("ascii")))
        if req.method == "POST" and req.path == self.gate_uri:
            report = _parse_report(zeus_open(self.rc4_key, req.body))
            if report is not None:
                self.reports.append(report)
            ack = ACK_TEMPLATE.format(interval=self.interval).encode("ascii")
            return HttpResponse(200, octet, zeus_seal(self.rc4_key, ack))
        if req.method == "GET" and req.path == self.dropper_uri:
            return HttpResponse(200, (("Content-Type", "application/x-msdownload"),), DROPPER_BODY)
        return HttpResponse(404, (("Content-Type", "text/html"),), b"<h1>404 Not Found</h1>")

    def report_log(self) -> list[str]:
        """One line per report, in the shape of the control panel's bot list."""
        return [
            f"{r.get('bot_id', '?')}\t{r.get('botnet', '?')}\tv{r.get('ver', '?')}\tos={r.get('os', '?')}\t"
            f"seq={r.get('seq', '?')}\tuptime={r.get('uptime', '?')}"
            for r in self.reports
        ]


def _parse_report(plain: bytes) -> dict | None:
    try:
        text = plain.decode("ascii")
    except UnicodeDecodeError:
        return None
    if not text.startswith("bot_id=") or not text.isprintable():
        return None
    return dict(part.partition("=")[::2] for part in text.split("&"))
