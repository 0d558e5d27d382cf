"""
Modal Datalog
=============

Datalog over databases containing the null value ⊥. Every rule carries a
mode: ``box`` rules derive facts that are sure in all completions of the
nulls, ``diamond`` rules facts that are possible in some completion.

Matching a fact against a literal:

* box: the fact must equal the instantiated literal; ⊥ matches only ⊥.
* diamond: the fact may be less informative than the literal, i.e. a ⊥
  in the fact is compatible with anything. A variable seen twice takes
  the most informative of its two values; two distinct constants clash.

Logical lets sitting in box rules are realised as diamond wrappers by
:func:`realize_logical_lets` before evaluation.

Example::

    facts = modal_answer(Query(goal, program), database)
"""

import logging
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Union

from nested_datalog.analysis import check_arity, check_program_safety, stratify
from nested_datalog.errors import UnboundBuiltin, VariableAbsent
from nested_datalog.evaluator import FactStore, select_goal, unbound_variables
from nested_datalog.model import (
    Filter,
    FreshNames,
    Let,
    Literal,
    Mode,
    Nested,
    Null,
    Predicate,
    Program,
    Query,
    Rule,
    Substitution,
    Term,
    Value,
    Variable,
    apply_substitution,
    let,
    pos,
    positive_variables,
    variables_of,
)

logger = logging.getLogger(__name__)

_CLASH = object()


def _mode(rule: Rule) -> Mode:
    return rule.mode or Mode.BOX


# ---------------------------------------------------------------------------
# Term level
# ---------------------------------------------------------------------------


def modal_term_eq(mode: Mode, left: Term, right: Term) -> bool:
    """Box: equal constants. Diamond: equal, or either side ⊥."""
    if mode is Mode.BOX:
        return not isinstance(left, Null) and left == right
    return left == right or isinstance(left, Null) or isinstance(right, Null)


def modal_term_ne(mode: Mode, left: Term, right: Term) -> bool:
    """Box: two distinct constants. Diamond: distinct, or either side ⊥."""
    if mode is Mode.BOX:
        return not isinstance(left, Null) and not isinstance(right, Null) and left != right
    return left != right or isinstance(left, Null)


def _merge(mode: Mode, bound: Value, value: Value):
    if bound == value:
        return bound
    if mode is Mode.DIAMOND:
        if isinstance(bound, Null):
            return value
        if isinstance(value, Null):
            return bound
    return _CLASH


def _fits(mode: Mode, fact_value: Value, literal_value: Value) -> bool:
    """Whether a fact component can stand for a ground literal component."""
    if mode is Mode.BOX:
        return fact_value == literal_value
    return fact_value == literal_value or isinstance(fact_value, Null)


def _compatible(left: Value, right: Value) -> bool:
    return modal_term_eq(Mode.DIAMOND, left, right)


def _surely_equal(left: Value, right: Value) -> bool:
    return modal_term_eq(Mode.BOX, left, right)


# ---------------------------------------------------------------------------
# Literal level
# ---------------------------------------------------------------------------


def _match_predicate(
    store: FactStore, atom: Predicate, theta: Dict[str, Value], mode: Mode
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
                    continue
                merged = _merge(mode, bound, value)
                if merged is _CLASH:
                    break
                extended[term.name] = merged
            elif not _fits(mode, value, term):
                break
        else:
            yield extended


def _match_let(atom: Let, theta: Dict[str, Value], mode: Mode) -> Iterator[Dict[str, Value]]:
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
            return
        merged = _merge(mode, bound, value)
        if merged is not _CLASH:
            yield {**theta, target.name: merged}
    elif _merge(mode, target, value) is not _CLASH:
        yield theta


def modal_holds(
    store: FactStore, theta: Substitution, lit: Literal, mode: Mode, strategy=None
) -> bool:
    """
    Decide a built-in or ground literal under ``mode``.

    Negation flips the mode: ``box`` negation demands that no fact could
    match in any completion, ``diamond`` negation only that no fact is
    exactly the literal.
    """
    if not isinstance(lit.atom, Nested):
        missing = unbound_variables(theta, lit)
        if missing and not (lit.positive and isinstance(lit.atom, Predicate)):
            raise UnboundBuiltin(lit, missing)
    atom = apply_substitution(theta, lit.atom)

    if isinstance(atom, Filter):
        if lit.positive:
            return modal_term_eq(mode, atom.left, atom.right)
        return modal_term_ne(mode, atom.left, atom.right)
    if isinstance(atom, Nested):
        from nested_datalog.nesting import eval_nested_atom

        holds = eval_nested_atom(store, theta, lit.atom.query, strategy or _default_strategy())
        return holds if lit.positive else not holds
    if isinstance(atom, Let):
        return any(True for _ in _match_let(atom, {}, mode))
    if lit.positive:
        return any(True for _ in _match_predicate(store, atom, {}, mode))
    # box negation: no fact compatible everywhere; diamond: no fact surely equal everywhere
    test = _compatible if mode is Mode.BOX else _surely_equal
    return not any(
        len(row) == atom.arity and all(test(v, a) for v, a in zip(row, atom.args))
        for row in store.scan(atom.name)
    )


def modal_rule_substitutions(
    store: FactStore, rule: Rule, strategy=None
) -> Iterator[Dict[str, Value]]:
    """Every substitution satisfying the body of ``rule`` under its mode.

    All merge choices are enumerated, so a rule may yield several
    substitutions from the same combination of facts.
    """
    mode = _mode(rule)
    binders = [lit for lit in rule.body if lit.is_binder]
    builtins = [lit for lit in rule.body if not lit.is_binder]

    def walk(i: int, theta: Dict[str, Value]) -> Iterator[Dict[str, Value]]:
        if i == len(binders):
            yield theta
            return
        atom = binders[i].atom
        if isinstance(atom, Let):
            matches = _match_let(atom, theta, mode)
        else:
            matches = _match_predicate(store, atom, theta, mode)  # type: ignore[arg-type]
        for extended in matches:
            yield from walk(i + 1, extended)

    for theta in walk(0, {}):
        if all(modal_holds(store, theta, lit, mode, strategy) for lit in builtins):
            yield theta


def modal_infer_rule(store: FactStore, rule: Rule, strategy=None) -> FrozenSet[Predicate]:
    """Head facts derivable by one application of ``rule`` to ``store``."""
    return frozenset(
        apply_substitution(theta, rule.head)
        for theta in modal_rule_substitutions(store, rule, strategy)
    )


# ---------------------------------------------------------------------------
# Logical lets in box rules
# ---------------------------------------------------------------------------


def _split_logical(rule: Rule, fresh: FreshNames) -> List[Rule]:
    """
    Split ``◦(p(H) <- B, lets)`` into ``◇(p(H) <- u(H), lets)`` and ``◦(u(H) <- B)``.

    The let variables must all occur in ``H``.
    """
    lets = [lit for lit in rule.body if isinstance(lit.atom, Let) and lit.atom.logical]
    rest = tuple(lit for lit in rule.body if lit not in lets)
    u = Predicate(fresh.predicate("u"), rule.head.args)
    upper = Rule(rule.head, (pos(u),) + tuple(lets), Mode.DIAMOND)
    lower = Rule(u, rest, rule.mode)
    return [upper, lower]


def substitute_logical_modal(
    theta: Substitution,
    rule: Rule,
    variable: Union[str, Sequence[str]],
    fresh: Optional[FreshNames] = None,
) -> List[Rule]:
    """
    Substitute head variables of a modal rule logically.

    Returns ``◇(p(H) <- u(H), let(X=θ(X))...)`` and ``◦(u(H) <- B)`` where
    ``◦`` is the mode of ``rule``. The diamond wrapper merges a null in the
    body value with ``θ(X)`` instead of rejecting it.

    Raises
    ------
    VariableAbsent
        A variable is not in the head of ``rule`` or has no value in ``theta``.
    """
    names = [variable] if isinstance(variable, str) else list(variable)
    head_vars = set(variables_of(rule.head.args))
    for name in names:
        if name not in head_vars:
            raise VariableAbsent(f"{name} does not occur in the head {rule.head}")
        if name not in theta:
            raise VariableAbsent(f"{name} has no value in the substitution")
    fresh = fresh or FreshNames.for_program(Program((rule,)))
    lets = tuple(let(Variable(name), theta[name], logical=True) for name in names)
    return _split_logical(Rule(rule.head, rule.body + lets, rule.mode), fresh)


def realize_logical_lets(program: Program, fresh: Optional[FreshNames] = None) -> Program:
    """
    Turn logical lets of non-diamond rules into diamond merge wrappers.

    When a let variable does not occur in the head the rule is first split
    as an improper substitution, ``p(H) <- u(W)`` and ``u(W) <- B, lets``,
    with ``W`` the positive variables of ``B``.
    """
    if not any(
        isinstance(lit.atom, Let) and lit.atom.logical and r.mode is not Mode.DIAMOND
        for r in program.rules
        for lit in r.body
    ):
        return program
    fresh = fresh or FreshNames.for_program(program)
    rules: List[Rule] = []
    for rule in program.rules:
        lets = [lit for lit in rule.body if isinstance(lit.atom, Let) and lit.atom.logical]
        if not lets or rule.mode is Mode.DIAMOND:
            rules.append(rule)
            continue
        head_vars = set(variables_of(rule.head.args))
        outside = [
            lit.atom.variable.name
            for lit in lets
            if isinstance(lit.atom.variable, Variable) and lit.atom.variable.name not in head_vars
        ]
        if outside:
            rest = Rule(rule.head, tuple(l for l in rule.body if l not in lets), rule.mode)
            wide = positive_variables(rest)
            wide += [v for v in outside if v not in wide]
            w = Predicate(fresh.predicate("u"), tuple(Variable(v) for v in wide))
            rules.append(Rule(rule.head, (pos(w),), rule.mode))
            rule = Rule(w, rest.body + tuple(lets), rule.mode)
        rules.extend(_split_logical(rule, fresh))
        logger.debug("realised %d logical lets of %s", len(lets), rule.head)
    return program.with_rules(rules)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _default_strategy():
    from nested_datalog.profiles import ProfileStrategy, get_profile

    return ProfileStrategy(get_profile("spec-top-down"))


def modal_fixpoint(program: Program, db: Iterable[Predicate], strategy=None) -> FactStore:
    """Stratified saturation with modal matching; unlabelled rules count as box."""
    program = realize_logical_lets(program)
    check_program_safety(program)
    base = frozenset(db)
    store = FactStore(base | program.facts, base=base)
    for level, rules in enumerate(stratify(program)):
        derived = 0
        changed = True
        while changed:
            changed = False
            for rule in rules:
                for fact in modal_infer_rule(store, rule, strategy):
                    if store.add(fact):
                        changed = True
                        derived += 1
                        logger.debug("derived %s by %s rule", fact, _mode(rule))
        logger.debug("modal stratum %d: %d rules, %d new facts", level, len(rules), derived)
    return store


def modal_answer(query: Query, db: Iterable[Predicate], strategy=None) -> FrozenSet[Predicate]:
    """Goal facts of the modal fixpoint; arities are checked as in :func:`answer`."""
    db = frozenset(db)
    check_arity(query, db)
    store = modal_fixpoint(query.program, db, strategy)
    return select_goal(store, query.goal)

