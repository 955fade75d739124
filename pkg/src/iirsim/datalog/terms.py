"""Atoms, rules and programs.

Constants are stored as their canonical source text (``win7``, ``80``,
``'ZBOT-DROP'``, ``execCode(win7, user)``) so rendering is the identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

ANY_PORT = "anyPort"

_IDENT = re.compile(r"^[a-z][A-Za-z0-9_]*$")
_NUMBER = re.compile(r"^[0-9]+$")


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self):
        return self.name


Term = str | Var


def render_constant(value: str) -> str:
    """Canonical text for a raw constant value."""
    if _IDENT.match(value) or _NUMBER.match(value):
        return value
    if "'" in value:
        raise ValueError(f"constant may not contain a quote: {value!r}")
    return f"'{value}'"


def constant_value(text: str) -> str:
    """Inverse of :func:`render_constant` for simple constants."""
    if len(text) >= 2 and text[0] == text[-1] == "'":
        return text[1:-1]
    return text


@dataclass(frozen=True, order=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()

    @property
    def text(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(str(a) for a in self.args)})"

    def __str__(self):
        return self.text

    def is_ground(self) -> bool:
        return not any(isinstance(a, Var) for a in self.args)

    def variables(self) -> set[Var]:
        return {a for a in self.args if isinstance(a, Var)}

    @property
    def signature(self) -> tuple[str, int]:
        return self.pred, len(self.args)


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...]
    label: str

    @property
    def text(self) -> str:
        return f"{self.head.text} :- {', '.join(b.text for b in self.body)}."


@dataclass
class Program:
    facts: set[Atom] = field(default_factory=set)
    rules: list[Rule] = field(default_factory=list)

    def extend(self, other: "Program") -> "Program":
        rules = list(self.rules)
        labels = {r.label for r in rules}
        for r in other.rules:
            if r.label in labels:
                raise ValueError(f"duplicate rule label {r.label!r}")
            rules.append(r)
            labels.add(r.label)
        return Program(self.facts | other.facts, rules)
