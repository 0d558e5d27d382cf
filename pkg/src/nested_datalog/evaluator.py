"""
Datalog Evaluator
=================

Stratified bottom-up evaluation of safe, non-recursive (Nested) Datalog
programs with set semantics. Built-ins (filters, negations and nested
queries) are deferred until the positive literals of the rule have bound
every variable they mention.

Example::

    store = fixpoint(program, database)
    facts = answer(Query(goal, program), database)
"""

import logging
from collections import defaultdict
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Set, Tuple

from nested_datalog.analysis import check_arity, check_program_safety, stratify
from nested_datalog.errors import UnboundBuiltin
from nested_datalog.model import (
    Database,
    Filter,
    Let,
    Literal,
    Nested,
    Predicate,
    Program,
    Query,
    Rule,
    Substitution,
    Value,
    Variable,
    apply_substitution,
    is_value,
    literal_variables,
)

logger = logging.getLogger(__name__)


class FactStore:
    """Ground facts indexed by predicate name.

    ``base`` is the extensional database the store was seeded from; nested
    queries are evaluated against it, never against derived facts.
    """

    def __init__(self, facts: Iterable[Predicate] = (), base: Iterable[Predicate] = ()):
        self._index: Dict[str, Set[Tuple[Value, ...]]] = defaultdict(set)
        self.base: Database = frozenset(base)
        for fact in facts:
            self.add(fact)

    def add(self, fact: Predicate) -> bool:
        """Insert a fact; return True when it was not known yet."""
        if not fact.is_ground():
            raise ValueError(f"only ground facts may be stored, got {fact}")
        rows = self._index[fact.name]
        if fact.args in rows:
            return False
        rows.add(fact.args)  # type: ignore[arg-type]
        return True

    def __contains__(self, fact: object) -> bool:
        if not isinstance(fact, Predicate):
            return False
        return fact.args in self._index.get(fact.name, ())

    def scan(self, name: str) -> List[Tuple[Value, ...]]:
        return list(self._index.get(name, ()))

    def facts(self, name: Optional[str] = None) -> FrozenSet[Predicate]:
        names = [name] if name is not None else list(self._index)
        return frozenset(
            Predicate(n, row) for n in names for row in self._index.get(n, ())
        )

    def __len__(self) -> int:
        return sum(len(rows) for rows in self._index.values())


def unbound_variables(theta: Substitution, lit: Literal) -> List[str]:
    return [v for v in literal_variables(lit) if v not in theta]


def _ground(theta: Substitution, lit: Literal) -> Literal:
    return apply_substitution(theta, lit)


def _default_strategy():
    from nested_datalog.nesting import LogicalTopDown

    return LogicalTopDown()


def eval_literal(
    store: FactStore,
    theta: Substitution,
    lit: Literal,
    strategy=None,
) -> bool:
    """
    Decide ``store, theta |= lit``.

    Parameters
    ----------
    store : FactStore
    theta : Substitution
        Must bind every variable of filters and negative literals.
    lit : Literal
    strategy : SubstitutionStrategy, optional
        How nested queries are instantiated; logical top-down by default.

    Raises
    ------
    UnboundBuiltin
        A filter or negative literal still has free variables.
    """
    if lit.is_builtin and not isinstance(lit.atom, Nested):
        missing = unbound_variables(theta, lit)
        if missing:
            raise UnboundBuiltin(lit, missing)

    atom = _ground(theta, lit).atom
    if isinstance(atom, Predicate):
        if atom.is_ground():
            holds = atom in store
        else:
            holds = any(True for _ in _match_predicate(store, atom, {}))
    elif isinstance(atom, Filter):
        holds = atom.left == atom.right
    elif isinstance(atom, Let):
        if isinstance(atom.variable, Variable):
            holds = True
        else:
            holds = atom.variable == atom.value
    elif isinstance(atom, Nested):
        from nested_datalog.nesting import eval_nested_atom

        holds = eval_nested_atom(store, theta, lit.atom.query, strategy or _default_strategy())
    else:  # pragma: no cover
        raise TypeError(f"unknown atom {atom!r}")
    return holds if lit.positive else not holds


def _match_predicate(
    store: FactStore, atom: Predicate, theta: Dict[str, Value]
) -> Iterator[Dict[str, Value]]:
    for row in store.scan(atom.name):
        if len(row) != atom.arity:
            continue
        extended = dict(theta)
        for term, value in zip(atom.args, row):
            if isinstance(term, Variable):
                bound = extended.get(term.name)
                if bound is None:
                    extended[term.name] = value
                elif bound != value:
                    break
            elif term != value:
                break
        else:
            yield extended


def _match_let(atom: Let, theta: Dict[str, Value]) -> Iterator[Dict[str, Value]]:
    value = atom.value
    if isinstance(value, Variable):
        if value.name not in theta:
            raise UnboundBuiltin(Literal(atom), [value.name])
        value = theta[value.name]
    target = atom.variable
    if isinstance(target, Variable):
        bound = theta.get(target.name)
        if bound is None:
            yield {**theta, target.name: value}
        elif bound == value:
            yield theta
    elif target == value:
        yield theta


def rule_substitutions(
    store: FactStore, rule: Rule, strategy=None
) -> Iterator[Dict[str, Value]]:
    """Enumerate the substitutions under which the whole body of ``rule`` holds."""
    binders = [lit for lit in rule.body if lit.is_binder]
    builtins = [lit for lit in rule.body if not lit.is_binder]

    def walk(i: int, theta: Dict[str, Value]) -> Iterator[Dict[str, Value]]:
        if i == len(binders):
            yield theta
            return
        atom = binders[i].atom
        if isinstance(atom, Let):
            matches = _match_let(atom, theta)
        else:
            matches = _match_predicate(store, atom, theta)  # type: ignore[arg-type]
        for extended in matches:
            yield from walk(i + 1, extended)

    for theta in walk(0, {}):
        if all(eval_literal(store, theta, lit, strategy) for lit in builtins):
            yield theta


def fixpoint(program: Program, db: Iterable[Predicate], strategy=None) -> FactStore:
    """
    Saturate ``fact(P, E)`` stratum by stratum.

    Parameters
    ----------
    program : Program
        Safe and non-recursive.
    db : iterable of Predicate
        The extensional database ``E``.
    strategy : SubstitutionStrategy, optional

    Returns
    -------
    FactStore
    """
    check_program_safety(program)
    strata = stratify(program)
    base = frozenset(db)
    store = FactStore(base | program.facts, base=base)

    for level, rules in enumerate(strata):
        derived = 0
        changed = True
        while changed:
            changed = False
            for rule in rules:
                for theta in list(rule_substitutions(store, rule, strategy)):
                    fact = apply_substitution(theta, rule.head)
                    if store.add(fact):
                        changed = True
                        derived += 1
                        logger.debug("derived %s", fact)
        logger.debug("stratum %d: %d rules, %d new facts", level, len(rules), derived)
    return store


def select_goal(store: FactStore, goal: Predicate) -> FrozenSet[Predicate]:
    """Facts of the goal predicate that unify with the goal pattern."""
    out = set()
    for theta in _match_predicate(store, goal, {}):
        fact = apply_substitution(theta, goal)
        if all(is_value(a) for a in fact.args):
            out.add(fact)
    return frozenset(out)


def answer(query: Query, db: Iterable[Predicate], strategy=None) -> FrozenSet[Predicate]:
    """
    The facts of ``fact*(P, E)`` having the goal's predicate.

    Raises
    ------
    SchemaMismatch
        A predicate name is used with two arities in the query or the database.
    """
    db = frozenset(db)
    check_arity(query, db)
    store = fixpoint(query.program, db, strategy)
    return select_goal(store, query.goal)
