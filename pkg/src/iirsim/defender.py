"""Belief-driven response policy.

Each tick the defender folds the matched alerts into the BAG belief, then
picks the action minimising expected goal loss plus availability cost
(a one-step greedy stand-in for a full POMDP solution).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from .alerts import LEVEL_RATIOS, Alert, Annotation, MatchResult, exploit_annotations
from .bag import Bag, Belief, belief_table, posterior_update, propagate_with_cuts
from .datalog import AND, constant_value
from .mitigation import NOOP, Action, FirewallState, apply, block_general, block_specific, enforces
from .netmodel import NetworkModel

_KIND_ORDER = {"noop": 0, "block_specific": 1, "block_general": 2}
_REL_TIE = 1e-12


@dataclass(frozen=True)
class CostModel:
    goal_loss: float = 100.0
    block_cost_specific: float = 1.0
    block_cost_general: float = 5.0

    def __post_init__(self):
        if min(self.goal_loss, self.block_cost_specific, self.block_cost_general) <= 0:
            raise ValueError("costs must be positive")
        if self.block_cost_general <= self.block_cost_specific:
            raise ValueError("block_cost_general must exceed block_cost_specific")

    def scaled(self, factor: float) -> "CostModel":
        return CostModel(self.goal_loss * factor, self.block_cost_specific * factor, self.block_cost_general * factor)


@dataclass(frozen=True)
class DefenderState:
    model: NetworkModel
    bag: Bag
    belief: Belief
    firewall: FirewallState = field(default_factory=FirewallState)
    tick: int = 0
    costs: CostModel = field(default_factory=CostModel)
    level_ratios: dict = field(default_factory=lambda: dict(LEVEL_RATIOS))
    annotations: dict[int, Annotation] | None = None

    def __post_init__(self):
        if self.annotations is None:
            object.__setattr__(self, "annotations", exploit_annotations(self.bag))

    @property
    def goal_ids(self) -> list[int]:
        return self.bag.lag.goal_ids

    def goal_belief(self, belief: Belief | None = None) -> float:
        belief = belief or self.belief
        return sum(belief.p[g] for g in self.goal_ids)


def observe(state: DefenderState, matched: list[tuple[Alert, MatchResult]]) -> DefenderState:
    belief = state.belief
    for alert, result in matched:
        if result.level == "none" or alert.kind == "informative":
            continue
        ratio = state.level_ratios[result.level]
        for nid in result.and_node_ids:
            belief = posterior_update(state.bag, belief, nid, ratio)
    return replace(state, belief=belief, tick=state.tick + 1)


def _tie_key(action: Action):
    return (_KIND_ORDER[action.kind], action.src_ip or "", action.dst_ip or "")


def candidate_actions(state: DefenderState, matched: list[tuple[Alert, MatchResult]]) -> list[Action]:
    hostmap = state.model.hostmap()
    out = {NOOP}
    for alert, result in matched:
        if result.level == "none" or alert.kind == "informative":
            continue
        if result.level in ("L1", "L2"):
            out.add(block_specific(alert.src_ip, alert.dst_ip))
        for ip in (alert.src_ip, alert.dst_ip):
            name = hostmap.get(ip)
            if name is not None and state.model.is_internal(name):
                out.add(block_general(ip))
    return sorted((a for a in out if not enforces(state.firewall, a)), key=_tie_key)


def severed_exploits(state: DefenderState, firewall: FirewallState) -> set[int]:
    """AND nodes that depend on a reachability fact the firewall now cuts."""
    hostmap = state.model.hostmap()
    isolated = {hostmap[ip] for ip in firewall.isolated_hosts() if ip in hostmap}
    pairs = {(hostmap.get(s), hostmap.get(d)) for s, d in firewall.blocked_pairs()}
    out = set()
    for n in state.bag.lag.nodes:
        if n.kind != AND:
            continue
        for atom in n.derivation.body:
            if atom.pred != "hacl":
                continue
            src, dst = constant_value(atom.args[0]), constant_value(atom.args[1])
            if src in isolated or dst in isolated or (src, dst) in pairs:
                out.add(n.id)
    return out


def availability_cost(costs: CostModel, action: Action) -> float:
    if action.kind == "block_general":
        return costs.block_cost_general
    if action.kind == "block_specific":
        return costs.block_cost_specific
    return 0.0


def post_action_belief(state: DefenderState, action: Action) -> Belief:
    cut = severed_exploits(state, apply(state.firewall, action))
    return propagate_with_cuts(state.bag, state.belief, cut)


def expected_cost(state: DefenderState, action: Action) -> float:
    goal = state.goal_belief(post_action_belief(state, action))
    return state.costs.goal_loss * goal + availability_cost(state.costs, action)


def _argmin(state: DefenderState, actions: list[Action]) -> tuple[Action, list[tuple[Action, float]]]:
    scored = [(a, expected_cost(state, a)) for a in actions]
    best = min(c for _, c in scored)
    tol = _REL_TIE * max(1.0, abs(best))
    tied = [a for a, c in scored if c - best <= tol]
    return min(tied, key=_tie_key), scored


def select_action(state: DefenderState, matched: list[tuple[Alert, MatchResult]]) -> Action:
    return _argmin(state, candidate_actions(state, matched))[0]


def belief_digest(state: DefenderState) -> str:
    return hashlib.sha256(belief_table(state.bag, state.belief).encode()).hexdigest()[:16]


def decide(state: DefenderState, matched: list[tuple[Alert, MatchResult]]) -> tuple[Action, dict]:
    """Select an action and return it with a decision-log record."""
    candidates = candidate_actions(state, matched)
    action, scored = _argmin(state, candidates)
    record = {
        "tick": state.tick,
        "belief_digest": belief_digest(state),
        "goal_belief": round(state.goal_belief(), 12),
        "candidates": [{"action": str(a), "cost": round(c, 12)} for a, c in scored],
        "chosen": str(action),
    }
    return action, record
