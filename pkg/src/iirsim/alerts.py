"""Synthetic IDS: signature matching over simulated traffic and alert-to-exploit mapping."""

from __future__ import annotations

import base64
import fnmatch
import ipaddress
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .bag import Bag
from .datalog import AND, ANY_PORT, constant_value

LEVEL_RATIOS = {"L1": 9.0, "L2": 4.0, "L3": 2.0}


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class TrafficEvent:
    ts: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: str = "tcp"
    app: str = "http"
    uri: str | None = None
    http_method: str | None = None
    headers: tuple[tuple[str, str], ...] = ()
    payload: bytes = b""
    seq: int = 0

    def __post_init__(self):
        for port in (self.src_port, self.dst_port):
            if not 1 <= port <= 65535:
                raise ValueError(f"port out of range: {port}")
        if self.proto not in ("tcp", "udp"):
            raise ValueError(f"bad proto {self.proto!r}")
        if self.app not in ("http", "dns", "raw"):
            raise ValueError(f"bad app {self.app!r}")
        if (self.uri is not None) != (self.app == "http"):
            raise ValueError("uri must be present iff app is http")
        for ip in (self.src_ip, self.dst_ip):
            ipaddress.IPv4Address(ip)

    def header(self, name: str) -> str | None:
        lname = name.lower()
        for k, v in self.headers:
            if k.lower() == lname:
                return v
        return None

    @property
    def is_request(self) -> bool:
        return self.http_method is not None

    def to_json(self) -> dict:
        return {
            "ts": self.ts, "seq": self.seq, "src_ip": self.src_ip, "src_port": self.src_port,
            "dst_ip": self.dst_ip, "dst_port": self.dst_port, "proto": self.proto, "app": self.app,
            "uri": self.uri, "http_method": self.http_method, "headers": [list(h) for h in self.headers],
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrafficEvent":
        return cls(
            ts=d["ts"], src_ip=d["src_ip"], dst_ip=d["dst_ip"], src_port=d["src_port"],
            dst_port=d["dst_port"], proto=d.get("proto", "tcp"), app=d.get("app", "http"),
            uri=d.get("uri"), http_method=d.get("http_method"),
            headers=tuple(tuple(h) for h in d.get("headers", [])),
            payload=base64.b64decode(d.get("payload_b64", "")), seq=d.get("seq", 0),
        )


_OPS = ("exact", "prefix", "substring", "glob", "absent")
_FIELDS = ("src_ip", "dst_ip", "src_port", "dst_port", "proto", "app", "uri", "http_method", "payload")


@dataclass(frozen=True)
class Signature:
    sid: int
    msg: str
    kind: str
    match: tuple[tuple[str, str, object], ...]  # (field, op, operand)

    def matches(self, ev: TrafficEvent) -> bool:
        return all(_check(ev, f, op, arg) for f, op, arg in self.match)


def _field(ev: TrafficEvent, name: str):
    if name.startswith("header:"):
        return ev.header(name[7:])
    if name == "payload":
        return ev.payload.decode("latin-1")
    return getattr(ev, name)


def _check(ev, name, op, arg) -> bool:
    value = _field(ev, name)
    if op == "absent":
        return (value is None) == arg
    if value is None:
        return False
    if op == "exact":
        return value == arg if isinstance(arg, int) else str(value) == arg
    text = str(value)
    if op == "prefix":
        return text.startswith(arg)
    if op == "substring":
        return arg in text
    return fnmatch.fnmatchcase(text, arg)


@dataclass(frozen=True)
class SignatureSet:
    signatures: tuple[Signature, ...] = ()

    def __len__(self):
        return len(self.signatures)

    def by_kind(self, kind: str) -> list[Signature]:
        return [s for s in self.signatures if s.kind == kind]

    @property
    def sids(self) -> set[int]:
        return {s.sid for s in self.signatures}


def _parse_predicate(spec, path) -> tuple:
    if not isinstance(spec, dict) or not spec:
        raise SignatureError(f"{path}: match must be a non-empty object")
    out = []
    for fname, ops in sorted(spec.items()):
        if fname not in _FIELDS and not (fname.startswith("header:") and len(fname) > 7):
            raise SignatureError(f"{path}.{fname}: unknown field")
        if not isinstance(ops, dict) or not ops:
            raise SignatureError(f"{path}.{fname}: expected an object of operators")
        for op, arg in sorted(ops.items()):
            if op not in _OPS:
                raise SignatureError(f"{path}.{fname}: unknown operator {op!r}")
            if op == "absent" and not isinstance(arg, bool):
                raise SignatureError(f"{path}.{fname}.absent: expected boolean")
            if op == "exact" and not isinstance(arg, (str, int)):
                raise SignatureError(f"{path}.{fname}.exact: expected string or integer")
            if op in ("prefix", "substring", "glob") and not isinstance(arg, str):
                raise SignatureError(f"{path}.{fname}.{op}: expected string")
            out.append((fname, op, arg))
    return tuple(out)


def load_signatures(source) -> SignatureSet:
    """Signature set from a JSON path, JSON text, list, or ``{"signatures": [...]}`` object."""
    if isinstance(source, (str, Path)):
        text = str(source)
        if isinstance(source, Path) or not text.lstrip().startswith(("{", "[")):
            text = Path(source).read_text(encoding="utf-8")
        try:
            source = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SignatureError(f"invalid JSON: {exc}") from None
    entries = source.get("signatures", []) if isinstance(source, dict) else source
    if not isinstance(entries, list):
        raise SignatureError("signatures must be a list")
    sigs, seen = [], set()
    for i, e in enumerate(entries):
        path = f"signatures[{i}]"
        if not isinstance(e, dict):
            raise SignatureError(f"{path}: expected object")
        sid = e.get("sid")
        if isinstance(sid, bool) or not isinstance(sid, int) or sid <= 0:
            raise SignatureError(f"{path}.sid: expected positive integer")
        if sid in seen:
            raise SignatureError(f"duplicate sid {sid}")
        seen.add(sid)
        kind = e.get("kind", "alert")
        if kind not in ("alert", "informative"):
            raise SignatureError(f"{path}.kind: must be 'alert' or 'informative'")
        msg = e.get("msg")
        if not isinstance(msg, str):
            raise SignatureError(f"{path}.msg: expected string")
        sigs.append(Signature(sid, msg, kind, _parse_predicate(e.get("match"), f"{path}.match")))
    return SignatureSet(tuple(sorted(sigs, key=lambda s: s.sid)))


@dataclass(frozen=True)
class Alert:
    ts: int
    sid: int
    msg: str
    kind: str
    src_ip: str
    dst_ip: str
    dst_port: int
    proto: str
    hostname: str | None = None

    def to_json(self) -> dict:
        d = {
            "ts": self.ts, "sid": self.sid, "msg": self.msg, "kind": self.kind,
            "src_ip": self.src_ip, "dst_ip": self.dst_ip, "dst_port": self.dst_port, "proto": self.proto,
        }
        if self.hostname is not None:
            d["hostname"] = self.hostname
        return d


def match_traffic(sigset: SignatureSet, ev: TrafficEvent) -> list[Alert]:
    """Alerts for every matching signature: ``alert`` kind by ascending sid, then informative."""
    hits = [s for s in sigset.signatures if s.matches(ev)]
    hits.sort(key=lambda s: (s.kind == "informative", s.sid))
    host = ev.header("Host")
    return [
        Alert(ev.ts, s.sid, s.msg, s.kind, ev.src_ip, ev.dst_ip, ev.dst_port, ev.proto, host)
        for s in hits
    ]


@dataclass(frozen=True)
class MatchResult:
    level: str  # L1 | L2 | L3 | none
    and_node_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class Annotation:
    host: str
    proto: str
    port: str  # concrete port text or ANY_PORT

    @property
    def port_modeled(self) -> bool:
        return self.port != ANY_PORT


# (predicate, host arg, proto arg, port arg), in priority order
_ANNOTATION_SOURCES = (
    ("networkServiceInfo", 0, 2, 3),
    ("hacl", 1, 2, 3),
    ("netAccess", 0, 1, 2),
)


def exploit_annotations(bag: Bag) -> dict[int, Annotation]:
    """Target (host, proto, port) for every AND node that names one in its body."""
    out = {}
    for n in bag.lag.nodes:
        if n.kind != AND:
            continue
        body = {b.pred: b for b in n.derivation.body}
        for pred, h, pr, po in _ANNOTATION_SOURCES:
            atom = body.get(pred)
            if atom is not None:
                out[n.id] = Annotation(constant_value(atom.args[h]), atom.args[pr], atom.args[po])
                break
    return out


def map_alert(bag: Bag, hostmap: dict[str, str], alert: Alert, trace: list | None = None,
              annotations: dict[int, Annotation] | None = None) -> MatchResult:
    """Map an alert onto exploit nodes using three cascading specificity levels.

    L1: host, protocol and a modeled port all agree. L2: host and protocol
    agree on a node with a modeled port, but the port does not. L3: host only.
    The destination port is only known for the destination endpoint.
    """
    annotations = exploit_annotations(bag) if annotations is None else annotations
    endpoints = []
    if alert.dst_ip in hostmap:
        endpoints.append((hostmap[alert.dst_ip], str(alert.dst_port)))
    if alert.src_ip in hostmap:
        endpoints.append((hostmap[alert.src_ip], None))
    if not endpoints:
        return MatchResult("none")

    def proto_ok(a: Annotation) -> bool:
        return a.proto in (alert.proto, "any")

    levels = (
        ("L1", lambda a, port: a.port_modeled and port is not None and a.port == port and proto_ok(a)),
        ("L2", lambda a, port: a.port_modeled and proto_ok(a)),
        ("L3", lambda a, port: True),
    )
    for level, pred in levels:
        if trace is not None:
            trace.append(level)
        ids = sorted(
            nid for nid, a in annotations.items()
            if any(a.host == host and pred(a, port) for host, port in endpoints)
        )
        if ids:
            return MatchResult(level, tuple(ids))
    return MatchResult("none")


def write_alert_log(alerts: Iterable[Alert], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in alerts:
            fh.write(json.dumps(a.to_json(), sort_keys=True) + "\n")


def _from_eve(d: dict, index: int, informative_sids: set[int]) -> Alert:
    """Accept this tool's flat alert records or Suricata EVE ``alert`` events."""
    if "alert" in d and isinstance(d["alert"], dict):
        sig = d["alert"]
        sid = int(sig["signature_id"])
        return Alert(
            ts=int(d.get("ts", index)), sid=sid, msg=sig.get("signature", ""),
            kind="informative" if sid in informative_sids else "alert",
            src_ip=d["src_ip"], dst_ip=d.get("dest_ip", d.get("dst_ip")),
            dst_port=int(d.get("dest_port", d.get("dst_port", 0)) or 0),
            proto=str(d.get("proto", "tcp")).lower(), hostname=(d.get("http") or {}).get("hostname"),
        )
    return Alert(
        ts=int(d["ts"]), sid=int(d["sid"]), msg=d.get("msg", ""), kind=d.get("kind", "alert"),
        src_ip=d["src_ip"], dst_ip=d["dst_ip"], dst_port=int(d["dst_port"]),
        proto=str(d["proto"]).lower(), hostname=d.get("hostname"),
    )


def read_alert_log(path, informative_sids: Iterable[int] = ()) -> list[Alert]:
    """Read a line-delimited alert log; non-alert EVE events are skipped.

    EVE records without a ``ts`` field are batched by their ``timestamp``
    string, in order of first appearance.
    """
    informative_sids = set(informative_sids)
    alerts = []
    stamps: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if d.get("event_type", "alert") != "alert":
                continue
            if "ts" not in d and "timestamp" in d:
                d = dict(d, ts=stamps.setdefault(d["timestamp"], len(stamps)))
            alerts.append(_from_eve(d, lineno - 1, informative_sids))
    return alerts
