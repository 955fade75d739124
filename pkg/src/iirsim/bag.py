"""Bayesian attack graph over a LAG and the factorized exploitation belief.

AND nodes combine their parents with a product form scaled by the exploit
success probability; OR nodes combine incoming AND contributions with
noisy-OR. IDS evidence enters as a cumulative likelihood ratio per AND node,
applied on the odds scale, so sequential updates compose exactly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .datalog import AND, LEAF, OR, Lag


class BagError(ValueError):
    pass


def and_prob(parent_beliefs, e: float) -> float:
    return e * math.prod(parent_beliefs)


def or_prob(incoming) -> float:
    return 1.0 - math.prod(1.0 - q for q in incoming)


def bayes_reweight(q: float, likelihood_ratio: float) -> float:
    """Posterior of an event with prior ``q`` after evidence with the given likelihood ratio."""
    if likelihood_ratio <= 0 or math.isnan(likelihood_ratio):
        raise BagError(f"likelihood ratio must be positive, got {likelihood_ratio}")
    num = q * likelihood_ratio
    den = num + (1.0 - q)
    if den == 0.0:
        return 0.0
    return min(1.0, max(0.0, num / den))


def _reweight_log(q: float, log_ratio: float) -> float:
    if q <= 0.0 or q >= 1.0 or log_ratio == 0.0:
        return q
    logit = math.log(q) - math.log1p(-q) + log_ratio
    if logit >= 0:
        return 1.0 / (1.0 + math.exp(-logit))
    z = math.exp(logit)
    return z / (1.0 + z)


@dataclass(frozen=True)
class Bag:
    lag: Lag
    exploit_prob: dict[int, float]
    topo_order: tuple[int, ...]
    parents: dict[int, tuple[int, ...]]
    removed_edges: tuple[tuple[int, int], ...] = ()

    def kind(self, node_id: int) -> str:
        return self.lag.node(node_id).kind

    @property
    def children(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {n: [] for n in self.parents}
        for n, ps in self.parents.items():
            for p in ps:
                out[p].append(n)
        return {n: tuple(c) for n, c in out.items()}

    def descendants(self, node_id: int) -> set[int]:
        kids = self.children
        seen, stack = set(), [node_id]
        while stack:
            for c in kids[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen


@dataclass(frozen=True)
class Belief:
    """Marginal exploitation probabilities.

    ``p`` covers every OR and LEAF node, ``exploit`` every AND node (its
    current, evidence-adjusted contribution). ``evidence`` holds the summed
    log likelihood ratio per AND node.
    """

    p: dict[int, float]
    exploit: dict[int, float]
    evidence: dict[int, float] = field(default_factory=dict)

    def __getitem__(self, node_id: int) -> float:
        return self.p[node_id] if node_id in self.p else self.exploit[node_id]


def _break_cycles(lag: Lag) -> tuple[dict[int, list[int]], list[tuple[int, int]]]:
    """Remove DFS back edges, starting from attacker-location leaves, ascending node id."""
    children = {n: sorted(lag.children(n)) for n in lag.ids()}
    roots = [n.id for n in lag.nodes if n.kind == LEAF and n.atom is not None and n.atom.pred == "attackerLocated"]
    order = sorted(roots) + sorted(set(lag.ids()) - set(roots))
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in children}
    removed = []
    for root in order:
        if color[root] != WHITE:
            continue
        color[root] = GRAY
        stack = [(root, iter(children[root]))]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
            elif color[nxt] == GRAY:
                removed.append((node, nxt))
            elif color[nxt] == WHITE:
                color[nxt] = GRAY
                stack.append((nxt, iter(children[nxt])))
    cut = set(removed)
    parents = {n: [] for n in children}
    for a, b in lag.edges:
        if (a, b) not in cut:
            parents[b].append(a)
    return {n: sorted(ps) for n, ps in parents.items()}, sorted(removed)


def _topo_order(parents: dict[int, list[int]]) -> list[int]:
    remaining = {n: len(ps) for n, ps in parents.items()}
    children: dict[int, list[int]] = {n: [] for n in parents}
    for n, ps in parents.items():
        for p in ps:
            children[p].append(n)
    ready = sorted(n for n, k in remaining.items() if k == 0)
    order = []
    heapq.heapify(ready)
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for c in children[n]:
            remaining[c] -= 1
            if remaining[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != len(parents):
        raise BagError("graph still cyclic after cycle breaking")
    return order


def lag_to_bag(lag: Lag, vuln_probs: dict[str, float]) -> Bag:
    """Annotate ``lag`` with exploit success probabilities keyed by vulExists fact text."""
    parents, removed = _break_cycles(lag)
    exploit_prob = {}
    for n in lag.nodes:
        if n.kind != AND:
            continue
        prob = 1.0
        for p in lag.parents(n.id):
            node = lag.node(p)
            if node.kind == LEAF and node.atom.pred == "vulExists":
                if node.fact not in vuln_probs:
                    raise BagError(f"no success probability for {node.fact}")
                prob *= vuln_probs[node.fact]
        if not 0.0 <= prob <= 1.0:
            raise BagError(f"exploit probability out of range for {n.fact}: {prob}")
        exploit_prob[n.id] = prob
    return Bag(
        lag=lag,
        exploit_prob=exploit_prob,
        topo_order=tuple(_topo_order(parents)),
        parents={n: tuple(ps) for n, ps in parents.items()},
        removed_edges=tuple(removed),
    )


def _propagate(bag: Bag, leaf_p: dict[int, float], evidence: dict[int, float], zeroed=frozenset()) -> Belief:
    p: dict[int, float] = {}
    exploit: dict[int, float] = {}
    for n in bag.topo_order:
        kind = bag.kind(n)
        if kind == LEAF:
            p[n] = leaf_p[n]
        elif kind == AND:
            if n in zeroed:
                exploit[n] = 0.0
                continue
            base = and_prob([p[q] for q in bag.parents[n]], bag.exploit_prob[n])
            exploit[n] = _reweight_log(base, evidence.get(n, 0.0))
        else:
            p[n] = or_prob([exploit[q] for q in bag.parents[n]])
    return Belief(p, exploit, dict(evidence))


def prior_propagate(bag: Bag, leaf_priors: dict | None = None) -> Belief:
    """Single forward pass in topological order.

    ``leaf_priors`` may be keyed by node id or fact text; unlisted leaves are
    known facts with prior 1.0.
    """
    leaf_priors = leaf_priors or {}
    leaf_p = {}
    for n in bag.lag.nodes:
        if n.kind == LEAF:
            prior = leaf_priors.get(n.id, leaf_priors.get(n.fact, 1.0))
            if not 0.0 <= prior <= 1.0:
                raise BagError(f"prior for {n.fact} out of range: {prior}")
            leaf_p[n.id] = prior
    return _propagate(bag, leaf_p, {})


def _leaf_values(bag: Bag, belief: Belief) -> dict[int, float]:
    return {n: belief.p[n] for n in bag.topo_order if bag.kind(n) == LEAF}


def posterior_update(bag: Bag, belief: Belief, and_node_id: int, likelihood_ratio: float) -> Belief:
    """Re-weight one exploit's contribution by Bayes' rule and recompute its descendants."""
    if and_node_id not in bag.exploit_prob:
        raise BagError(f"unknown AND node id {and_node_id}")
    if likelihood_ratio <= 0 or math.isnan(likelihood_ratio) or math.isinf(likelihood_ratio):
        raise BagError(f"likelihood ratio must be positive and finite, got {likelihood_ratio}")
    evidence = dict(belief.evidence)
    evidence[and_node_id] = evidence.get(and_node_id, 0.0) + math.log(likelihood_ratio)
    return _propagate(bag, _leaf_values(bag, belief), evidence)


def propagate_with_cuts(bag: Bag, belief: Belief, zeroed) -> Belief:
    """Recompute ``belief`` with the listed AND nodes' contributions forced to zero."""
    return _propagate(bag, _leaf_values(bag, belief), belief.evidence, frozenset(zeroed))


def belief_table(bag: Bag, belief: Belief) -> str:
    """Two-column text table: node fact, probability (OR and LEAF nodes, by id)."""
    lines = []
    for n in sorted(bag.lag.nodes, key=lambda n: n.id):
        if n.kind in (OR, LEAF):
            lines.append(f"{n.fact}\t{belief.p[n.id]:.6f}")
    return "\n".join(lines) + ("\n" if lines else "")
