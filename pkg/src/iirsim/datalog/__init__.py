"""Minimal Datalog with proof recording, and the logical attack graph built from it."""

from importlib import resources

from .engine import Derivation, DerivationGraph, match_atom, solve, substitute
from .lag import AND, LEAF, OR, Lag, LagNode, build_lag, export_dot
from .parser import DatalogSyntaxError, RangeRestrictionError, parse_atom, parse_program
from .terms import ANY_PORT, Atom, Program, Rule, Var, constant_value, render_constant


def builtin_rules_text() -> str:
    return resources.files("iirsim").joinpath("data/rules/builtin.dl").read_text(encoding="utf-8")


def load_rules(path=None) -> Program:
    """Interaction rules from ``path``, or the builtin remote-exploitation set."""
    if path is None:
        return parse_program(builtin_rules_text())
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


__all__ = [
    "AND", "ANY_PORT", "Atom", "DatalogSyntaxError", "Derivation", "DerivationGraph", "LEAF",
    "Lag", "LagNode", "OR", "Program", "RangeRestrictionError", "Rule", "Var", "build_lag",
    "builtin_rules_text", "constant_value", "export_dot", "load_rules", "match_atom",
    "parse_atom", "parse_program", "render_constant", "solve", "substitute",
]
