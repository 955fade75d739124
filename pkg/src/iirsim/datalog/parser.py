"""Datalog text grammar.

    fact  := atom '.'
    rule  := atom ':-' atom (',' atom)* '.'
    atom  := ident [ '(' term (',' term)* ')' ]
    term  := Variable | ident | number | 'quoted' | ident '(' ground terms ')'

``%`` starts a line comment. A comment of the form ``%! Label`` names the
next rule; unnamed rules are labelled ``R1``, ``R2``, ... by position.
``_`` is an anonymous variable, fresh at each occurrence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .terms import Atom, Program, Rule, Var


class DatalogSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"line {line}, column {col}: {message}" if line else message)


class RangeRestrictionError(ValueError):
    pass


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<label>%![^\n]*)
  | (?P<comment>%[^\n]*)
  | (?P<implies>:-)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<number>[0-9]+)
  | (?P<quoted>'[^'\n]*')
  | (?P<punct>[(),.])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise DatalogSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "label":
            toks.append(_Tok("label", m.group()[2:].strip(), line, col))
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(m.group() if kind in ("punct", "implies") else kind, m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.anon = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind: str | None = None) -> _Tok:
        tok = self.toks[self.i]
        if kind is not None and tok.kind != kind:
            shown = tok.text or "end of input"
            raise DatalogSyntaxError(f"expected {kind!r}, found {shown!r}", tok.line, tok.col)
        self.i += 1
        return tok

    def atom(self) -> Atom:
        name = self.take("ident")
        args = []
        if self.peek().kind == "(":
            self.take("(")
            args.append(self.term())
            while self.peek().kind == ",":
                self.take(",")
                args.append(self.term())
            self.take(")")
        return Atom(name.text, tuple(args))

    def term(self):
        tok = self.peek()
        if tok.kind == "var":
            self.take()
            if tok.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}")
            return Var(tok.text)
        if tok.kind in ("number", "quoted"):
            self.take()
            return tok.text
        if tok.kind == "ident":
            if self.toks[self.i + 1].kind == "(":
                inner = self.atom()
                if not inner.is_ground():
                    raise DatalogSyntaxError("compound terms must be ground", tok.line, tok.col)
                return inner.text
            self.take()
            return tok.text
        raise DatalogSyntaxError(f"expected a term, found {tok.text or 'end of input'!r}", tok.line, tok.col)

    def program(self) -> Program:
        prog = Program()
        pending_label = None
        while self.peek().kind != "eof":
            if self.peek().kind == "label":
                pending_label = self.take().text
                continue
            start = self.peek()
            head = self.atom()
            if self.peek().kind == ":-":
                self.take()
                body = [self.atom()]
                while self.peek().kind == ",":
                    self.take(",")
                    body.append(self.atom())
                self.take(".")
                label = pending_label or f"R{len(prog.rules) + 1}"
                rule = Rule(head, tuple(body), label)
                _check_range(rule)
                if any(r.label == label for r in prog.rules):
                    raise DatalogSyntaxError(f"duplicate rule label {label!r}", start.line, start.col)
                prog.rules.append(rule)
            else:
                self.take(".")
                if not head.is_ground():
                    raise DatalogSyntaxError("facts must be ground", start.line, start.col)
                prog.facts.add(head)
            pending_label = None
        return prog


def _check_range(rule: Rule) -> None:
    body_vars = set().union(*(b.variables() for b in rule.body))
    missing = sorted(v.name for v in rule.head.variables() - body_vars)
    if missing:
        raise RangeRestrictionError(
            f"rule {rule.label} ({rule.text}) is not range-restricted: head variable(s) {', '.join(missing)} not in body"
        )


def parse_program(text: str) -> Program:
    return _Parser(text).program()


def parse_atom(text: str) -> Atom:
    p = _Parser(text)
    atom = p.atom()
    if p.peek().kind == ".":
        p.take()
    p.take("eof")
    return atom
