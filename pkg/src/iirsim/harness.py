"""Scenario runner: topology to attack graph to belief, driven by emulated C&C traffic.

Each tick the loop collects emulator requests, filters them through the
firewall, lets the C&C answer the permitted ones, matches signatures on
every permitted event, maps the alert batch onto the attack graph, updates
the defender's belief and applies the chosen action.
"""

from __future__ import annotations

import json
from collections import Counter
from contextlib import ExitStack
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .alerts import TrafficEvent, load_signatures, map_alert, match_traffic
from .bag import lag_to_bag, prior_propagate
from .datalog import build_lag, load_rules, parse_program, solve
from .defender import CostModel, DefenderState, decide, observe
from .emulators.emotet import EmotetCnc, EmotetTrafficConfig, emotet_traffic
from .emulators.http import PortAllocator, event_request, response_event
from .emulators.zeus import ZeusBotConfig, ZeusCnc, dropper_request, zeus_bot_run
from .mitigation import NOOP, FirewallState, apply, permits
from .netmodel import load_topology, to_datalog_text

VARIATIONS = ("infection_download", "pre_infected")


class ScenarioError(ValueError):
    pass


def data_root() -> Path:
    return Path(str(resources.files("iirsim").joinpath("data")))


def resolve_path(ref: str, base_dir: Path | None = None, subdir: str | None = None) -> Path:
    """Find ``ref`` as given, next to the scenario file, or in the shipped data."""
    names = [ref] if ref.endswith((".json", ".dl", ".pem")) else [ref, ref + ".json"]
    roots = [Path(".")]
    if base_dir is not None:
        roots.append(base_dir)
    roots.append(data_root())
    if subdir:
        roots.append(data_root() / subdir)
    for root in roots:
        for name in names:
            for cand in (root / name, root / Path(name).name):
                if cand.is_file():
                    return cand
    raise ScenarioError(f"file not found: {ref}")


@dataclass
class Scenario:
    name: str
    topology_path: Path
    signatures_path: Path
    variation: str
    ticks: int
    zeus: ZeusBotConfig
    seed: int = 0
    costs: CostModel = field(default_factory=CostModel)
    rules_path: Path | None = None
    include_inert: bool = False
    emotet: EmotetTrafficConfig | None = None
    expect: dict | None = None

    def __post_init__(self):
        if self.variation not in VARIATIONS:
            raise ScenarioError(f"variation must be one of {VARIATIONS}")
        if self.ticks < 1:
            raise ScenarioError("ticks must be >= 1")
        for p in (self.topology_path, self.signatures_path, self.rules_path):
            if p is not None and not Path(p).is_file():
                raise ScenarioError(f"file not found: {p}")


def load_scenario(ref: str | Path, overrides: dict | None = None) -> Scenario:
    path = resolve_path(str(ref), subdir="scenarios")
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc.update(overrides or {})
    base = path.parent
    try:
        variation = doc["variation"]
        emu = doc["emulators"]
        zeus_doc = dict(emu["zeus"])
        zeus_doc.setdefault("start_tick", 1 if variation == "infection_download" else 0)
        zeus = ZeusBotConfig(**zeus_doc)
        emotet = None
        if "emotet" in emu:
            e = dict(emu["emotet"])
            e["rsa_public"] = resolve_path(e["rsa_public"], base, "keys").read_bytes()
            emotet = EmotetTrafficConfig(**e)
        costs = CostModel(**doc.get("costs", {}))
        rules = doc.get("rules")
        return Scenario(
            name=doc.get("name", path.stem),
            topology_path=resolve_path(doc["topology"], base, "scenarios"),
            signatures_path=resolve_path(doc["signatures"], base, "signatures"),
            variation=variation,
            ticks=int(doc["ticks"]),
            zeus=zeus,
            seed=int(doc.get("seed", 0)),
            costs=costs,
            rules_path=resolve_path(rules, base, "rules") if rules else None,
            include_inert=bool(doc.get("include_inert", False)),
            emotet=emotet,
            expect=doc.get("expect"),
        )
    except KeyError as exc:
        raise ScenarioError(f"{path}: missing field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def build_defender(s: Scenario) -> DefenderState:
    model = load_topology(s.topology_path, include_inert=s.include_inert)
    program = parse_program(to_datalog_text(model)).extend(load_rules(s.rules_path))
    lag = build_lag(solve(program), model.goals)
    bag = lag_to_bag(lag, model.vuln_probs())
    return DefenderState(model, bag, prior_propagate(bag), costs=s.costs)


def schedule(s: Scenario) -> tuple[dict[int, list[tuple[TrafficEvent, str]]], dict[str, object]]:
    """Requests per tick, each tagged with the name of the server that answers it."""
    servers: dict[str, object] = {"zeus": ZeusCnc(s.zeus.rc4_key, cnc_ip=s.zeus.cnc_ip, cfg_uri=s.zeus.cfg_uri,
                                                  gate_uri=s.zeus.gate_uri, interval=s.zeus.ping_interval_ticks)}
    ports: dict[str, PortAllocator] = {}

    def alloc(ip):
        return ports.setdefault(ip, PortAllocator())

    streams: list[tuple[TrafficEvent, str]] = []
    if s.variation == "infection_download":
        streams.append((dropper_request(s.zeus.bot_ip, s.zeus.cnc_ip, 0, alloc(s.zeus.bot_ip), s.zeus.cnc_port),
                        "zeus"))
    if s.zeus.start_tick < s.ticks:
        for ev in zeus_bot_run(s.zeus, s.ticks - s.zeus.start_tick, alloc(s.zeus.bot_ip)):
            streams.append((ev, "zeus"))
    if s.emotet is not None:
        servers["emotet"] = EmotetCnc(resources.files("iirsim").joinpath("data/keys/emotet-lab-private.pem")
                                      .read_bytes(), rsa_public=s.emotet.rsa_public)
        if s.emotet.start_tick < s.ticks:
            for ev in emotet_traffic(s.emotet, s.ticks - s.emotet.start_tick, s.seed, alloc(s.emotet.bot_ip)):
                streams.append((ev, "emotet"))
    by_tick: dict[int, list[tuple[TrafficEvent, str]]] = {}
    for ev, server in streams:
        by_tick.setdefault(ev.ts, []).append((ev, server))
    return by_tick, servers


def _traffic_record(ev: TrafficEvent, seq: int, permitted: bool) -> dict:
    return {
        "seq": seq, "tick": ev.ts, "src_ip": ev.src_ip, "src_port": ev.src_port, "dst_ip": ev.dst_ip,
        "dst_port": ev.dst_port, "proto": ev.proto, "direction": "request" if ev.is_request else "response",
        "method": ev.http_method, "uri": ev.uri, "permitted": permitted,
    }


@dataclass
class Report:
    data: dict

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @property
    def summary(self) -> dict:
        return self.data["summary"]

    @property
    def rules(self) -> list[str]:
        return self.data["rules"]

    @property
    def verdict(self) -> bool:
        return self.data["verdict"]["goal_traffic_blocked"]


def write_events(events, path) -> None:
    """Line-delimited event list, the input format of ``run --replay``."""
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_json(), sort_keys=True) + "\n")


def read_events(path) -> list[TrafficEvent]:
    with open(path, encoding="utf-8") as fh:
        return [TrafficEvent.from_json(json.loads(line)) for line in fh if line.strip()]


def _flow(ev: TrafficEvent, reverse: bool = False) -> tuple:
    if reverse:
        return (ev.dst_ip, ev.dst_port, ev.src_ip, ev.src_port, ev.ts)
    return (ev.src_ip, ev.src_port, ev.dst_ip, ev.dst_port, ev.ts)


def run_scenario(s: Scenario, live: bool = False, events: list[TrafficEvent] | None = None) -> Report:
    """Run the discrete-event loop.

    ``live`` carries every exchange over loopback HTTP. ``events`` replaces
    the emulators with a recorded event list; a recorded response is skipped
    when the firewall dropped its request.
    """
    state = build_defender(s)
    sigs = load_signatures(s.signatures_path)
    hostmap = state.model.hostmap()
    by_tick, servers = schedule(s)
    if events is not None:
        by_tick, servers = {}, {}
        for ev in events:
            by_tick.setdefault(ev.ts, []).append((ev, None))
    firewall = FirewallState()

    with ExitStack() as stack:
        if live:
            from .emulators.live import LiveServer, send

            addrs = {name: stack.enter_context(LiveServer(app)).address for name, app in servers.items()}

            def deliver(name, req):
                return send(req, addrs[name])
        else:
            def deliver(name, req):
                return servers[name].serve(req)

        traffic, alerts_out, beliefs, decisions, rules = [], [], [], [], []
        first_mitigation = None
        for tick in range(s.ticks):
            permitted_events = []
            dropped_flows = set()
            for req, server in by_tick.get(tick, ()):
                if server is None and not req.is_request and _flow(req, reverse=True) in dropped_flows:
                    continue
                ok = permits(firewall, req)
                traffic.append(_traffic_record(req, len(traffic), ok))
                if not ok:
                    dropped_flows.add(_flow(req))
                    continue
                permitted_events.append(req)
                if server is None:
                    continue
                resp = deliver(server, event_request(req))
                if resp is None:
                    continue
                rev = response_event(req, resp)
                ok = permits(firewall, rev)
                traffic.append(_traffic_record(rev, len(traffic), ok))
                if ok:
                    permitted_events.append(rev)

            batch = [a for ev in permitted_events for a in match_traffic(sigs, ev)]
            matched = [(a, map_alert(state.bag, hostmap, a, annotations=state.annotations)) for a in batch]
            for a, m in matched:
                alerts_out.append(dict(a.to_json(), level=m.level, nodes=list(m.and_node_ids)))
            state = observe(state, matched)
            action, record = decide(state, matched)
            record["tick"] = tick
            decisions.append(record)
            if action != NOOP:
                firewall = apply(firewall, action)
                state = replace(state, firewall=firewall)
                rules = firewall.rendered()
                if first_mitigation is None:
                    first_mitigation = tick
            beliefs.append({
                "tick": tick,
                "goal_belief": state.goal_belief(),
                "table": {n.fact: state.belief[n.id] for n in state.bag.lag.nodes},
            })

    return Report(_assemble(s, traffic, alerts_out, beliefs, decisions, rules, first_mitigation))


def _assemble(s, traffic, alerts, beliefs, decisions, rules, first_mitigation) -> dict:
    bot, cnc = s.zeus.bot_ip, s.zeus.cnc_ip
    post = [t for t in traffic
            if first_mitigation is not None and t["tick"] > first_mitigation
            and t["src_ip"] == bot and t["dst_ip"] == cnc]
    sig_alerts = [a for a in alerts if a["kind"] == "alert"]
    return {
        "scenario": s.name,
        "variation": s.variation,
        "seed": s.seed,
        "ticks": s.ticks,
        "summary": {
            "alerts": len(alerts),
            "signature_alerts": len(sig_alerts),
            "informative_alerts": len(alerts) - len(sig_alerts),
            "sid_counts": {str(k): v for k, v in sorted(Counter(a["sid"] for a in sig_alerts).items())},
            "permitted_events": sum(t["permitted"] for t in traffic),
            "blocked_events": sum(not t["permitted"] for t in traffic),
            "first_mitigation_tick": first_mitigation,
        },
        "alerts": alerts,
        "traffic": traffic,
        "beliefs": beliefs,
        "decisions": decisions,
        "rules": list(rules),
        "verdict": {
            "infected_host": bot,
            "cnc": cnc,
            "post_mitigation_cnc_events": len(post),
            "post_mitigation_permitted": sum(t["permitted"] for t in post),
            "goal_traffic_blocked": first_mitigation is not None and not any(t["permitted"] for t in post),
        },
    }


def check_expectations(report: Report, expect: dict | None) -> list[str]:
    """Differences between the report and a scenario's ``expect`` block, one line each."""
    if not expect:
        return []
    got = {
        "alerts": report.summary["alerts"],
        "signature_alerts": report.summary["signature_alerts"],
        "informative_alerts": report.summary["informative_alerts"],
        "sid_counts": report.summary["sid_counts"],
        "rules": report.rules,
        "verdict": report.verdict,
    }
    diffs = []
    for key in sorted(expect):
        if key not in got:
            diffs.append(f"? {key}: not a checkable report field")
            continue
        want = expect[key]
        have = got[key]
        if key == "sid_counts":
            want = {str(k): v for k, v in want.items()}
            for sid in sorted(set(want) | set(have), key=int):
                if want.get(sid, 0) != have.get(sid, 0):
                    diffs.append(f"- sid {sid}: expected {want.get(sid, 0)}, got {have.get(sid, 0)}")
        elif key == "rules":
            for line in want:
                if line not in have:
                    diffs.append(f"- rule missing: {line}")
            for line in have:
                if line not in want:
                    diffs.append(f"+ rule unexpected: {line}")
            if not diffs and want != have:
                diffs.append("~ rules: same lines, different order")
        elif want != have:
            diffs.append(f"- {key}: expected {want!r}, got {have!r}")
    return diffs


def scripted_exchanges(s: Scenario) -> list[TrafficEvent]:
    """Every scheduled request and its in-process response, with no firewall in the path."""
    by_tick, servers = schedule(s)
    out = []
    for tick in sorted(by_tick):
        for req, server in by_tick[tick]:
            out.append(req)
            out.append(response_event(req, servers[server].serve(event_request(req))))
    return out


def replay_alerts(state: DefenderState, alerts) -> tuple[list[dict], list[str]]:
    """Feed a recorded alert log to the defender, one batch per timestamp."""
    hostmap = state.model.hostmap()
    batches: dict[int, list] = {}
    for a in alerts:
        batches.setdefault(a.ts, []).append(a)
    firewall = state.firewall
    decisions = []
    for ts in sorted(batches):
        matched = [(a, map_alert(state.bag, hostmap, a, annotations=state.annotations)) for a in batches[ts]]
        state = observe(state, matched)
        action, record = decide(state, matched)
        record["tick"] = ts
        decisions.append(record)
        if action != NOOP:
            firewall = apply(firewall, action)
            state = replace(state, firewall=firewall)
    return decisions, firewall.rendered()
