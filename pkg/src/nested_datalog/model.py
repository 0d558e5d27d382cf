"""
Core Model
==========

Terms, atoms, literals, rules, programs and queries shared by every
evaluator, plus the two purely syntactic operations on them: textual
substitution and the ``let`` desugaring.

All values are frozen dataclasses and may be shared freely.
"""

import json
import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

logger = logging.getLogger(__name__)

KEYWORDS = frozenset({"null", "filter", "let", "exists", "box", "diamond"})
_BARE_CONSTANT = re.compile(r"[a-z0-9][A-Za-z0-9_]*")


class Mode(str, Enum):
    """Modal label of a rule: sure (box) or maybe (diamond)."""

    BOX = "box"
    DIAMOND = "diamond"

    def __str__(self) -> str:
        return self.value


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    symbol: str

    def __post_init__(self) -> None:
        if not self.symbol:
            raise ValueError("constant symbols must be non-empty")

    def __str__(self) -> str:
        if _BARE_CONSTANT.fullmatch(self.symbol) and self.symbol not in KEYWORDS:
            return self.symbol
        return json.dumps(self.symbol, ensure_ascii=False)


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variable names must be non-empty")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Null:
    """The null value ⊥. Every instance is equal to every other."""

    def __str__(self) -> str:
        return "⊥"


NULL = Null()

Term = Union[Constant, Variable, Null]
Value = Union[Constant, Null]
Substitution = Mapping[str, Value]


def is_value(term: Term) -> bool:
    return isinstance(term, (Constant, Null))


def value_sort_key(value: Term) -> Tuple[int, str]:
    """Total order used for deterministic output: ⊥ first, then constants."""
    if isinstance(value, Null):
        return (0, "")
    if isinstance(value, Constant):
        return (1, value.symbol)
    return (2, value.name)


# ---------------------------------------------------------------------------
# Atoms and literals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Predicate:
    name: str
    args: Tuple[Term, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    def is_ground(self) -> bool:
        return all(is_value(a) for a in self.args)

    def __str__(self) -> str:
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Filter:
    """``filter(left = right)``; inequality is the negated literal."""

    left: Term
    right: Term


@dataclass(frozen=True)
class Let:
    """``let(variable = value)``, sugar for ``l(variable)`` plus the fact ``l(value)``.

    ``logical`` marks lets introduced by a logical substitution; only those
    are relocated by move-down and realised as merge wrappers in modal programs.
    """

    variable: Term
    value: Term
    logical: bool = field(default=False, compare=True)


@dataclass(frozen=True)
class Nested:
    query: "Query"


Atom = Union[Predicate, Filter, Let, Nested]


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    @property
    def is_builtin(self) -> bool:
        """Filters, negations and nested queries wait for their variables."""
        if isinstance(self.atom, (Filter, Nested)):
            return True
        return not self.positive

    @property
    def is_binder(self) -> bool:
        return self.positive and isinstance(self.atom, (Predicate, Let))

    def __str__(self) -> str:
        atom = self.atom
        if isinstance(atom, Filter):
            op = "=" if self.positive else "!="
            return f"filter({atom.left} {op} {atom.right})"
        if isinstance(atom, Let):
            return f"let({atom.variable} = {atom.value})"
        if isinstance(atom, Nested):
            prefix = "" if self.positive else "!"
            return f"{prefix}exists {{ {format_query_inline(atom.query)} }}"
        prefix = "" if self.positive else "!"
        return f"{prefix}{atom}"


def pos(atom: Atom) -> Literal:
    return Literal(atom, True)


def neg(atom: Atom) -> Literal:
    return Literal(atom, False)


def eq(left: Term, right: Term) -> Literal:
    return Literal(Filter(left, right), True)


def ne(left: Term, right: Term) -> Literal:
    return Literal(Filter(left, right), False)


def let(variable: Term, value: Term, logical: bool = False) -> Literal:
    return Literal(Let(variable, value, logical), True)


# ---------------------------------------------------------------------------
# Rules, programs, queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    head: Predicate
    body: Tuple[Literal, ...] = ()
    mode: Optional[Mode] = None

    def __str__(self) -> str:
        prefix = f"{self.mode}: " if self.mode else ""
        if not self.body:
            return f"{prefix}{self.head}."
        return f"{prefix}{self.head} <- {', '.join(str(lit) for lit in self.body)}."


@dataclass(frozen=True)
class Program:
    rules: Tuple[Rule, ...] = ()
    facts: FrozenSet[Predicate] = frozenset()

    @property
    def is_modal(self) -> bool:
        return any(r.mode is not None for r in self.rules)

    @property
    def intensional(self) -> FrozenSet[str]:
        return frozenset(r.head.name for r in self.rules)

    def rules_for(self, name: str) -> List[int]:
        return [i for i, r in enumerate(self.rules) if r.head.name == name]

    def replace_rule(self, index: int, rule: Rule) -> "Program":
        rules = list(self.rules)
        rules[index] = rule
        return replace(self, rules=tuple(rules))

    def with_rules(self, rules: Iterable[Rule]) -> "Program":
        return replace(self, rules=tuple(rules))

    def add_rules(self, rules: Iterable[Rule]) -> "Program":
        return replace(self, rules=self.rules + tuple(rules))

    def add_facts(self, facts: Iterable[Predicate]) -> "Program":
        return replace(self, facts=self.facts | frozenset(facts))

    def erase_modes(self) -> "Program":
        return self.with_rules(replace(r, mode=None) for r in self.rules)

    def __str__(self) -> str:
        lines = [f"{f}." for f in sorted(self.facts, key=str)]
        lines.extend(str(r) for r in self.rules)
        return "\n".join(lines)


Database = FrozenSet[Predicate]


@dataclass(frozen=True)
class Query:
    goal: Predicate
    program: Program = Program()

    def __str__(self) -> str:
        body = str(self.program)
        return f"?- {self.goal}.\n{body}" if body else f"?- {self.goal}."


def format_query_inline(query: Query) -> str:
    parts = [f"?- {query.goal}."]
    parts.extend(f"{f}." for f in sorted(query.program.facts, key=str))
    parts.extend(str(r) for r in query.program.rules)
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Variable bookkeeping
# ---------------------------------------------------------------------------


def term_variables(terms: Iterable[Term]) -> Iterator[str]:
    for t in terms:
        if isinstance(t, Variable):
            yield t.name


def literal_variables(lit: Literal) -> List[str]:
    """Variables of a literal at rule level; nested-query internals are excluded."""
    atom = lit.atom
    if isinstance(atom, Predicate):
        return list(term_variables(atom.args))
    if isinstance(atom, Filter):
        return list(term_variables((atom.left, atom.right)))
    if isinstance(atom, Let):
        return list(term_variables((atom.variable, atom.value)))
    return []


def _unique(names: Iterable[str]) -> List[str]:
    seen: Dict[str, None] = {}
    for n in names:
        seen.setdefault(n, None)
    return list(seen)


def rule_variables(rule: Rule) -> List[str]:
    names = list(term_variables(rule.head.args))
    for lit in rule.body:
        names.extend(literal_variables(lit))
    return _unique(names)


def positive_variables(rule: Rule) -> List[str]:
    """Variables occurring in a positive predicate literal (lets included)."""
    names: List[str] = []
    for lit in rule.body:
        if lit.is_binder:
            names.extend(literal_variables(lit))
    return _unique(names)


def program_names(program: Program) -> Tuple[set, set]:
    """All predicate names and variable names used anywhere, nested queries included."""
    preds: set = set()
    variables: set = set()
    for fact in program.facts:
        preds.add(fact.name)
    for rule in program.rules:
        preds.add(rule.head.name)
        variables.update(term_variables(rule.head.args))
        for lit in rule.body:
            variables.update(literal_variables(lit))
            if isinstance(lit.atom, Predicate):
                preds.add(lit.atom.name)
            elif isinstance(lit.atom, Nested):
                inner = lit.atom.query
                preds.add(inner.goal.name)
                variables.update(term_variables(inner.goal.args))
                p, v = program_names(inner.program)
                preds |= p
                variables |= v
    return preds, variables


class FreshNames:
    """Monotone generator of names that cannot clash with user names.

    User names never start with ``_``; generated ones always do, and are
    additionally checked against every name already in use.
    """

    def __init__(self, used: Iterable[str] = ()):
        self._used = set(used)
        self._counter = 0

    @classmethod
    def for_query(cls, query: Query, extra: Iterable[str] = ()) -> "FreshNames":
        preds, variables = program_names(query.program)
        preds.add(query.goal.name)
        variables.update(term_variables(query.goal.args))
        return cls(preds | variables | set(extra))

    @classmethod
    def for_program(cls, program: Program) -> "FreshNames":
        preds, variables = program_names(program)
        return cls(preds | variables)

    def _next(self, hint: str) -> str:
        while True:
            name = f"_{hint}{self._counter}"
            self._counter += 1
            if name not in self._used:
                self._used.add(name)
                return name

    def predicate(self, hint: str = "g") -> str:
        return self._next(hint.lstrip("_").lower() or "g")

    def variable(self, hint: str = "V") -> str:
        return self._next(hint.lstrip("_").upper() or "V")


# ---------------------------------------------------------------------------
# Textual substitution
# ---------------------------------------------------------------------------

Substitutable = Union[Term, Atom, Literal, Rule, Program, Query]


def _subst_term(theta: Substitution, term: Term) -> Term:
    if isinstance(term, Variable) and term.name in theta:
        return theta[term.name]
    return term


def apply_substitution(theta: Substitution, target: Substitutable):
    """Replace every occurrence of each mapped variable by its value.

    For queries this is plain textual replacement, not the semantic θ(Q)
    of nested evaluation (see :mod:`nested_datalog.nesting`).
    """
    if not theta:
        return target
    if isinstance(target, (Constant, Variable, Null)):
        return _subst_term(theta, target)
    if isinstance(target, Predicate):
        return Predicate(target.name, tuple(_subst_term(theta, a) for a in target.args))
    if isinstance(target, Filter):
        return Filter(_subst_term(theta, target.left), _subst_term(theta, target.right))
    if isinstance(target, Let):
        return Let(
            _subst_term(theta, target.variable),
            _subst_term(theta, target.value),
            target.logical,
        )
    if isinstance(target, Nested):
        return Nested(apply_substitution(theta, target.query))
    if isinstance(target, Literal):
        return Literal(apply_substitution(theta, target.atom), target.positive)
    if isinstance(target, Rule):
        return Rule(
            apply_substitution(theta, target.head),
            tuple(apply_substitution(theta, lit) for lit in target.body),
            target.mode,
        )
    if isinstance(target, Program):
        return Program(
            tuple(apply_substitution(theta, r) for r in target.rules),
            target.facts,
        )
    if isinstance(target, Query):
        return Query(
            apply_substitution(theta, target.goal),
            apply_substitution(theta, target.program),
        )
    raise TypeError(f"cannot substitute into {type(target).__name__}")


def rename_variables(mapping: Mapping[str, str], target: Substitutable):
    """Variable-to-variable renaming, built on :func:`apply_substitution`."""
    theta = {old: Variable(new) for old, new in mapping.items()}
    return apply_substitution(theta, target)  # type: ignore[arg-type]


def rename_predicates(mapping: Mapping[str, str], rule: Rule) -> Rule:
    """Rename predicate names in the head and in body predicate literals."""

    def ren(p: Predicate) -> Predicate:
        return Predicate(mapping.get(p.name, p.name), p.args)

    body = tuple(
        Literal(ren(lit.atom), lit.positive) if isinstance(lit.atom, Predicate) else lit
        for lit in rule.body
    )
    return Rule(ren(rule.head), body, rule.mode)


# ---------------------------------------------------------------------------
# let desugaring
# ---------------------------------------------------------------------------


def desugar_let(
    rule: Rule, program: Program, fresh: Optional[FreshNames] = None
) -> Tuple[Rule, Program]:
    """Replace every ``let(Y=t)`` by ``l(Y)`` with a fresh ``l`` and add the fact ``l(t)``.

    The returned program has ``rule`` replaced (when it belongs to the
    program) and carries the new facts.
    """
    if not any(isinstance(lit.atom, Let) for lit in rule.body):
        return rule, program

    fresh = fresh or FreshNames.for_program(program)
    body: List[Literal] = []
    facts: List[Predicate] = []
    for lit in rule.body:
        if isinstance(lit.atom, Let):
            name = fresh.predicate("l")
            body.append(Literal(Predicate(name, (lit.atom.variable,)), True))
            facts.append(Predicate(name, (lit.atom.value,)))
        else:
            body.append(lit)
    new_rule = Rule(rule.head, tuple(body), rule.mode)

    rules = tuple(new_rule if r == rule else r for r in program.rules)
    return new_rule, Program(rules, program.facts | frozenset(facts))


def desugar_program(program: Program) -> Program:
    """Desugar the lets of every rule of a program."""
    fresh = FreshNames.for_program(program)
    for rule in list(program.rules):
        _, program = desugar_let(rule, program, fresh)
    return program


def variables_of(items: Sequence[Term]) -> List[str]:
    return _unique(term_variables(items))
