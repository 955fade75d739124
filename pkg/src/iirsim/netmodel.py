"""Network description: loading, validation and compilation to Datalog input tuples."""

from __future__ import annotations

import ipaddress
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

ANY_PORT = "anyPort"
PROTOS = ("tcp", "udp", "any")
RANGES = ("remote", "local")
CONSEQUENCES = ("privEscalation", "privLoss", "dos")

_IDENT = re.compile(r"^[a-z][A-Za-z0-9_]*$")


class TopologyError(ValueError):
    """Schema or reference error in a topology document. ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class HostSpec:
    name: str
    interfaces: tuple[str, ...]
    zone: str


@dataclass(frozen=True)
class ReachabilityEntry:
    src: str
    dst: str
    proto: str
    port: int | str  # int or ANY_PORT


@dataclass(frozen=True)
class ServiceSpec:
    host: str
    program: str
    proto: str
    port: int | str
    user: str


@dataclass(frozen=True)
class VulnSpec:
    host: str
    vuln_id: str
    program: str
    range: str
    consequence: str
    success_prob: float


@dataclass(frozen=True)
class NetworkModel:
    hosts: tuple[HostSpec, ...]
    hacl: tuple[ReachabilityEntry, ...]
    services: tuple[ServiceSpec, ...]
    vulns: tuple[VulnSpec, ...]
    attacker_zone: str
    goals: tuple[str, ...]
    extra: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    @property
    def zones(self) -> list[str]:
        return sorted({h.zone for h in self.hosts})

    def host(self, name: str) -> HostSpec:
        for h in self.hosts:
            if h.name == name:
                return h
        raise KeyError(name)

    def hostmap(self) -> dict[str, str]:
        """IPv4 address -> host name."""
        return {ip: h.name for h in self.hosts for ip in h.interfaces}

    def address_of(self, name: str) -> str:
        return self.host(name).interfaces[0]

    def is_internal(self, name: str) -> bool:
        return self.host(name).zone != self.attacker_zone

    def vuln_probs(self) -> dict[str, float]:
        """Canonical vulExists atom text -> exploit success probability."""
        return {vuln_fact(v): v.success_prob for v in self.vulns}


def _require(doc: dict, key: str, path: str, kind=None):
    if key not in doc:
        raise TopologyError(f"missing field {key!r}", path)
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise TopologyError(f"expected {getattr(kind, '__name__', kind)}", f"{path}.{key}")
    return value


def _name(value, path: str) -> str:
    if not isinstance(value, str) or not _IDENT.match(value):
        raise TopologyError(f"invalid identifier {value!r}", path)
    return value


def _port(value, path: str) -> int | str:
    if value in (ANY_PORT, "*"):
        return ANY_PORT
    if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 65535:
        raise TopologyError(f"port must be 1..65535 or {ANY_PORT!r}, got {value!r}", path)
    return value


def _choice(value, options, path: str) -> str:
    if value not in options:
        raise TopologyError(f"{value!r} not one of {list(options)}", path)
    return value


def load_topology(source: str | Path | dict, include_inert: bool = False) -> NetworkModel:
    """Load and validate a topology document (a JSON path, JSON text, or parsed dict).

    ``include_inert`` appends the optional ``inert_hosts`` list (machines that
    carry no services or reachability) to ``hosts``.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text(encoding="utf-8") if _looks_like_path(source) else source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise TopologyError("topology must be a JSON object")

    raw_hosts = _require(doc, "hosts", "", list)
    if include_inert:
        raw_hosts = raw_hosts + list(doc.get("inert_hosts", []))
    if not raw_hosts:
        raise TopologyError("no hosts", "hosts")
    hosts = []
    seen_ips: dict[str, str] = {}
    for i, h in enumerate(raw_hosts):
        p = f"hosts[{i}]"
        if not isinstance(h, dict):
            raise TopologyError("expected object", p)
        name = _name(_require(h, "name", p), f"{p}.name")
        zone = _name(_require(h, "zone", p), f"{p}.zone")
        ifaces = _require(h, "interfaces", p, list)
        if not ifaces:
            raise TopologyError("at least one interface required", f"{p}.interfaces")
        for j, ip in enumerate(ifaces):
            try:
                ipaddress.IPv4Address(ip)
            except (ipaddress.AddressValueError, ValueError):
                raise TopologyError(f"not a dotted-quad IPv4 address: {ip!r}", f"{p}.interfaces[{j}]") from None
            if ip in seen_ips:
                raise TopologyError(f"address {ip} already assigned to {seen_ips[ip]}", f"{p}.interfaces[{j}]")
            seen_ips[ip] = name
        hosts.append(HostSpec(name, tuple(ifaces), zone))

    host_names = [h.name for h in hosts]
    if len(set(host_names)) != len(host_names):
        raise TopologyError("duplicate host name", "hosts")
    zones = {h.zone for h in hosts}
    if zones & set(host_names):
        raise TopologyError("zone and host names must be distinct", "hosts")
    known = set(host_names) | zones

    def ref(value, path):
        value = _name(value, path)
        if value not in known:
            raise TopologyError(f"dangling reference {value!r}", path)
        return value

    def host_ref(value, path):
        value = _name(value, path)
        if value not in host_names:
            raise TopologyError(f"dangling reference {value!r}", path)
        return value

    hacl = []
    for i, e in enumerate(doc.get("hacl", [])):
        p = f"hacl[{i}]"
        hacl.append(ReachabilityEntry(
            src=ref(_require(e, "src", p), f"{p}.src"),
            dst=ref(_require(e, "dst", p), f"{p}.dst"),
            proto=_choice(_require(e, "proto", p), PROTOS, f"{p}.proto"),
            port=_port(_require(e, "port", p), f"{p}.port"),
        ))

    services = []
    seen_services = set()
    for i, s in enumerate(doc.get("services", [])):
        p = f"services[{i}]"
        svc = ServiceSpec(
            host=host_ref(_require(s, "host", p), f"{p}.host"),
            program=_name(_require(s, "program", p), f"{p}.program"),
            proto=_choice(_require(s, "proto", p), PROTOS, f"{p}.proto"),
            port=_port(_require(s, "port", p), f"{p}.port"),
            user=_name(_require(s, "user", p), f"{p}.user"),
        )
        key = (svc.host, svc.program, svc.proto, svc.port)
        if key in seen_services:
            raise TopologyError(f"duplicate service {key}", p)
        seen_services.add(key)
        services.append(svc)

    vulns = []
    for i, v in enumerate(doc.get("vulns", [])):
        p = f"vulns[{i}]"
        prob = _require(v, "success_prob", p)
        if isinstance(prob, bool) or not isinstance(prob, (int, float)) or not 0.0 <= prob <= 1.0:
            raise TopologyError(f"success_prob must be in [0,1], got {prob!r}", f"{p}.success_prob")
        vuln_id = _require(v, "vuln_id", p, str)
        if not vuln_id or "'" in vuln_id:
            raise TopologyError("vuln_id must be non-empty and contain no quotes", f"{p}.vuln_id")
        vulns.append(VulnSpec(
            host=host_ref(_require(v, "host", p), f"{p}.host"),
            vuln_id=vuln_id,
            program=_name(_require(v, "program", p), f"{p}.program"),
            range=_choice(_require(v, "range", p), RANGES, f"{p}.range"),
            consequence=_choice(_require(v, "consequence", p), CONSEQUENCES, f"{p}.consequence"),
            success_prob=float(prob),
        ))

    attacker = _require(doc, "attacker", "")
    attacker = _name(attacker, "attacker")
    if attacker not in known:
        raise TopologyError(f"attacker location {attacker!r} is not a declared host or zone", "attacker")

    goals = []
    for i, g in enumerate(doc.get("goals", [])):
        p = f"goals[{i}]"
        goals.append(_check_goal(g, known, p))

    extra = {k: v for k, v in doc.items() if k not in ("hosts", "inert_hosts", "hacl", "services", "vulns", "attacker", "goals")}
    return NetworkModel(tuple(hosts), tuple(hacl), tuple(services), tuple(vulns), attacker, tuple(goals), extra)


def _looks_like_path(source) -> bool:
    return isinstance(source, Path) or not str(source).lstrip().startswith("{")


def _check_goal(goal, known, path) -> str:
    from .datalog import DatalogSyntaxError, parse_atom

    if not isinstance(goal, str):
        raise TopologyError("goal must be a ground fact string", path)
    try:
        atom = parse_atom(goal)
    except DatalogSyntaxError as exc:
        raise TopologyError(str(exc), path) from None
    if not atom.is_ground():
        raise TopologyError("goal must be ground", path)
    # the first argument of every builtin goal predicate names a host
    if atom.args and atom.args[0] not in known:
        raise TopologyError(f"dangling reference {atom.args[0]!r}", path)
    return atom.text


def _term(value) -> str:
    from .datalog import render_constant

    return render_constant(str(value))


def hacl_fact(e: ReachabilityEntry) -> str:
    return f"hacl({_term(e.src)}, {_term(e.dst)}, {e.proto}, {_term(e.port)})"


def service_fact(s: ServiceSpec) -> str:
    return f"networkServiceInfo({_term(s.host)}, {_term(s.program)}, {s.proto}, {_term(s.port)}, {_term(s.user)})"


def vuln_fact(v: VulnSpec) -> str:
    return f"vulExists({_term(v.host)}, {_term(v.vuln_id)}, {_term(v.program)}, {v.range}, {v.consequence})"


def to_datalog(model: NetworkModel) -> list[str]:
    """Ground input tuples, one ``fact.`` per entry, sorted lexicographically."""
    facts = [hacl_fact(e) for e in model.hacl]
    facts += [service_fact(s) for s in model.services]
    facts += [vuln_fact(v) for v in model.vulns]
    facts.append(f"attackerLocated({_term(model.attacker_zone)})")
    facts += [f"attackGoal({g})" for g in model.goals]
    return sorted(f + "." for f in facts)


def to_datalog_text(model: NetworkModel) -> str:
    return "\n".join(to_datalog(model)) + "\n"
