"""Logical attack graph: the backward slice of a derivation graph from the goals."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .engine import Derivation, DerivationGraph
from .parser import parse_atom
from .terms import Atom

AND, OR, LEAF = "AND", "OR", "LEAF"


@dataclass(frozen=True)
class LagNode:
    id: int
    kind: str
    fact: str
    atom: Atom | None = None  # OR / LEAF
    derivation: Derivation | None = None  # AND


@dataclass
class Lag:
    nodes: list[LagNode] = field(default_factory=list)
    edges: list[tuple[int, int]] = field(default_factory=list)
    goal_ids: list[int] = field(default_factory=list)
    unreachable: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._index()

    def _index(self):
        self._by_id = {n.id: n for n in self.nodes}
        self._parents: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        self._children: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            self._children[a].append(b)
            self._parents[b].append(a)

    @property
    def goal_unreachable(self) -> bool:
        return bool(self.unreachable)

    def node(self, node_id: int) -> LagNode:
        return self._by_id[node_id]

    def parents(self, node_id: int) -> list[int]:
        return self._parents[node_id]

    def children(self, node_id: int) -> list[int]:
        return self._children[node_id]

    def ids(self, kind: str | None = None) -> list[int]:
        return [n.id for n in self.nodes if kind is None or n.kind == kind]

    def find(self, fact: str) -> LagNode | None:
        for n in self.nodes:
            if n.fact == fact:
                return n
        return None

    def check(self) -> None:
        """Raise AssertionError if the AND/OR/LEAF discipline is violated."""
        for n in self.nodes:
            assert n.kind in (AND, OR, LEAF), n
            kinds = {self._by_id[p].kind for p in self._parents[n.id]}
            if n.kind == LEAF:
                assert not kinds, f"LEAF {n.id} has parents"
            elif n.kind == AND:
                assert kinds <= {OR, LEAF} and kinds, f"AND {n.id} parents {kinds}"
            else:
                assert kinds == {AND}, f"OR {n.id} parents {kinds}"
        for g in self.goal_ids:
            assert self._by_id[g].kind == OR


def _and_fact(d: Derivation) -> str:
    bindings = ", ".join(f"{k}={v}" for k, v in d.binding)
    return f"{d.rule.label}({bindings})"


def build_lag(graph: DerivationGraph, goals) -> Lag:
    """Slice ``graph`` backwards from ``goals`` (atoms or atom texts).

    Node ids are assigned breadth-first from the goals in sorted order.
    Goals that were not derived are reported in ``Lag.unreachable``.
    """
    goal_atoms = sorted({g if isinstance(g, Atom) else parse_atom(g) for g in goals})
    reachable, unreachable = [], []
    for g in goal_atoms:
        if g in graph.edb:
            raise ValueError(f"goal {g.text} is a primitive fact, not a derivable condition")
        (reachable if g in graph.atoms else unreachable).append(g)

    nodes: list[LagNode] = []
    edges: list[tuple[int, int]] = []
    ids: dict[object, int] = {}
    and_texts: set[str] = set()
    queue: deque = deque()

    def visit_atom(atom: Atom) -> int:
        if atom in ids:
            return ids[atom]
        nid = len(nodes) + 1
        ids[atom] = nid
        kind = LEAF if atom in graph.edb else OR
        nodes.append(LagNode(nid, kind, atom.text, atom=atom))
        if kind == OR:
            queue.append(atom)
        return nid

    goal_ids = [visit_atom(g) for g in reachable]
    while queue:
        atom = queue.popleft()
        head_id = ids[atom]
        for d in graph.derivations.get(atom, ()):
            nid = len(nodes) + 1
            ids[d.key] = nid
            text = _and_fact(d)
            if text in and_texts:
                text = f"{text} <- {', '.join(b.text for b in d.body)}"
            and_texts.add(text)
            nodes.append(LagNode(nid, AND, text, derivation=d))
            edges.append((nid, head_id))
            for b in d.body:
                edges.append((visit_atom(b), nid))

    return Lag(nodes, sorted(set(edges)), goal_ids, [g.text for g in unreachable])


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


_SHAPES = {AND: "ellipse", OR: "diamond", LEAF: "box"}


def export_dot(lag: Lag) -> str:
    if not lag.nodes:
        return "digraph lag { }\n"
    lines = ["digraph lag {"]
    goals = set(lag.goal_ids)
    for n in sorted(lag.nodes, key=lambda n: n.id):
        extra = ", peripheries=2" if n.id in goals else ""
        lines.append(f'  {n.id} [label="{n.id}: {_dot_escape(n.fact)}", shape={_SHAPES[n.kind]}{extra}];')
    for a, b in lag.edges:
        lines.append(f"  {a} -> {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
