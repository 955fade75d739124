"""Semi-naive bottom-up evaluation with proof recording."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .terms import ANY_PORT, Atom, Program, Rule, Var


@dataclass(frozen=True)
class Derivation:
    """One rule instantiation: ``body`` facts yield ``head`` under ``binding``."""

    rule: Rule
    rule_index: int
    head: Atom
    body: tuple[Atom, ...]
    binding: tuple[tuple[str, str], ...]

    @property
    def key(self):
        return (self.rule_index, self.body)

    def sort_key(self):
        return (self.rule_index, tuple(b.text for b in self.body))


@dataclass(frozen=True)
class DerivationGraph:
    edb: frozenset[Atom]
    atoms: frozenset[Atom]
    derivations: dict[Atom, tuple[Derivation, ...]]

    @property
    def derived(self) -> frozenset[Atom]:
        return self.atoms - self.edb

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atoms


def match_term(pattern, value: str, binding: dict) -> bool:
    """Unify one pattern term against a ground value, updating ``binding`` in place.

    ``anyPort`` unifies with every constant; a variable bound to ``anyPort``
    is refined to the first concrete value it meets.
    """
    if isinstance(pattern, Var):
        bound = binding.get(pattern.name)
        if bound is None:
            binding[pattern.name] = value
            return True
        if bound == value or value == ANY_PORT:
            return True
        if bound == ANY_PORT:
            binding[pattern.name] = value
            return True
        return False
    return pattern == value or pattern == ANY_PORT or value == ANY_PORT


def match_atom(pattern: Atom, fact: Atom, binding: dict) -> dict | None:
    if pattern.signature != fact.signature:
        return None
    new = dict(binding)
    for p, v in zip(pattern.args, fact.args):
        if not match_term(p, v, new):
            return None
    return new


def substitute(atom: Atom, binding: dict) -> Atom:
    return Atom(atom.pred, tuple(binding[a.name] if isinstance(a, Var) else a for a in atom.args))


class _Index:
    def __init__(self):
        self.by_sig: dict[tuple[str, int], list[Atom]] = defaultdict(list)
        self.members: set[Atom] = set()

    def add(self, atom: Atom) -> None:
        if atom not in self.members:
            self.members.add(atom)
            self.by_sig[atom.signature].append(atom)

    def get(self, sig) -> list[Atom]:
        return self.by_sig.get(sig, [])


def _join(rule: Rule, sources: list[_Index]):
    """Yield (binding, body facts) for all matches, body atom i drawn from sources[i]."""

    def rec(i, binding, matched):
        if i == len(rule.body):
            yield binding, tuple(matched)
            return
        pattern = rule.body[i]
        for fact in sources[i].get(pattern.signature):
            b = match_atom(pattern, fact, binding)
            if b is not None:
                matched.append(fact)
                yield from rec(i + 1, b, matched)
                matched.pop()

    yield from rec(0, {}, [])


def solve(program: Program) -> DerivationGraph:
    """Least fixpoint of ``program`` with every deriving instantiation recorded."""
    edb = frozenset(program.facts)
    old, full, delta = _Index(), _Index(), _Index()
    for f in sorted(edb):
        full.add(f)
        delta.add(f)
    derivations: dict[tuple, Derivation] = {}

    while delta.members:
        new = _Index()
        for ri, rule in enumerate(program.rules):
            n = len(rule.body)
            for i in range(n):
                sources = [old] * i + [delta] + [full] * (n - i - 1)
                for binding, body in _join(rule, sources):
                    head = substitute(rule.head, binding)
                    d = Derivation(rule, ri, head, body, tuple(sorted(binding.items())))
                    derivations.setdefault(d.key, d)
                    if head not in full.members:
                        new.add(head)
        for f in delta.members:
            old.add(f)
        for f in new.members:
            full.add(f)
        delta = new

    by_head: dict[Atom, list[Derivation]] = defaultdict(list)
    for d in derivations.values():
        if d.head not in edb:
            by_head[d.head].append(d)
    return DerivationGraph(
        edb=edb,
        atoms=frozenset(full.members),
        derivations={h: tuple(sorted(ds, key=Derivation.sort_key)) for h, ds in by_head.items()},
    )
