"""Firewall rules: iptables rendering and enforcement against the virtual network."""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .alerts import TrafficEvent


@dataclass(frozen=True, order=True)
class Action:
    """Defender action. ``kind`` is ``noop``, ``block_specific`` or ``block_general``."""

    kind: str = "noop"
    src_ip: str | None = None
    dst_ip: str | None = None

    def __post_init__(self):
        if self.kind == "noop":
            if self.src_ip or self.dst_ip:
                raise ValueError("noop takes no addresses")
        elif self.kind == "block_general":
            if not self.src_ip or self.dst_ip:
                raise ValueError("block_general takes exactly a source address")
        elif self.kind == "block_specific":
            if not (self.src_ip and self.dst_ip):
                raise ValueError("block_specific needs source and destination")
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")

    def __str__(self):
        if self.kind == "noop":
            return "noop"
        if self.kind == "block_general":
            return f"block_general({self.src_ip})"
        return f"block_specific({self.src_ip}, {self.dst_ip})"

    def to_json(self) -> dict:
        return {"kind": self.kind, "src_ip": self.src_ip, "dst_ip": self.dst_ip}


NOOP = Action()


def block_general(ip: str) -> Action:
    return Action("block_general", ip)


def block_specific(src: str, dst: str) -> Action:
    return Action("block_specific", src, dst)


@dataclass(frozen=True)
class FirewallRule:
    chain: str
    src: str
    dst: str | None = None
    target: str = "DROP"

    def __post_init__(self):
        if self.chain not in ("INPUT", "OUTPUT", "FORWARD"):
            raise ValueError(f"bad chain {self.chain!r}")
        if self.target != "DROP":
            raise ValueError("only DROP targets are supported")

    def render(self) -> str:
        dst = f" -d {self.dst}" if self.dst else ""
        return f"iptables -A {self.chain} -s {self.src}{dst} -j {self.target}"

    def matches(self, ev: TrafficEvent) -> bool:
        if self.chain == "FORWARD":
            return ev.src_ip == self.src and (self.dst is None or ev.dst_ip == self.dst)
        # INPUT/OUTPUT pairs isolate the address in both directions
        return self.src in (ev.src_ip, ev.dst_ip) and (self.dst is None or self.dst in (ev.src_ip, ev.dst_ip))


@dataclass(frozen=True)
class FirewallState:
    rules: tuple[FirewallRule, ...] = ()

    def rendered(self) -> list[str]:
        return [r.render() for r in self.rules]

    def isolated_hosts(self) -> set[str]:
        return {r.src for r in self.rules if r.chain in ("INPUT", "OUTPUT") and r.dst is None}

    def blocked_pairs(self) -> set[tuple[str, str]]:
        return {(r.src, r.dst) for r in self.rules if r.chain == "FORWARD" and r.dst}


def action_rules(action: Action) -> list[FirewallRule]:
    if action.kind == "block_general":
        return [FirewallRule("INPUT", action.src_ip), FirewallRule("OUTPUT", action.src_ip)]
    if action.kind == "block_specific":
        return [FirewallRule("FORWARD", action.src_ip, action.dst_ip)]
    return []


def render_iptables(action: Action) -> list[str]:
    return [r.render() for r in action_rules(action)]


def apply(state: FirewallState, action: Action) -> FirewallState:
    """Append the action's rules, skipping any already present. Returns a new state."""
    rules = list(state.rules)
    for r in action_rules(action):
        if r not in rules:
            rules.append(r)
    return FirewallState(tuple(rules))


def enforces(state: FirewallState, action: Action) -> bool:
    return action.kind != "noop" and all(r in state.rules for r in action_rules(action))


def permits(state: FirewallState, ev: TrafficEvent) -> bool:
    return not any(r.matches(ev) for r in state.rules)


def emit_rules(lines: list[str], path) -> None:
    """Write rendered rules as a shell-sourceable script."""
    text = "#!/bin/sh\n# generated by iirsim; review before sourcing\n" + "".join(f"{line}\n" for line in lines)
    Path(path).write_text(text, encoding="utf-8")


def exec_rules(lines: list[str], template: str) -> list[int]:
    """Run ``template`` once per rule, substituting ``{rule}`` (shell-quoted). Lab use only."""
    codes = []
    for line in lines:
        cmd = template.format(rule=shlex.quote(line))
        codes.append(subprocess.run(cmd, shell=True, check=False).returncode)
    return codes
