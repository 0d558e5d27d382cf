"""
Nested Datalog
==============

Nested queries used as built-in atoms, free-variable analysis, and the
ways a substitution θ coming from the outer rule can be "applied" to a
nested query:

* syntactic: ``let(X=θ(X))`` appended to every rule where ``X`` is free;
* logical top-down: a fresh wrapper rule above the goal carries the lets;
* logical bottom-up: the wrapper's lets are moved down the dependency
  tree until they reach rules touching only extensional predicates;
* logical at explicit points: lets attached to chosen edges of the tree;
* improper: a let attached to a rule variable that is not connected to
  the goal at all.

Example::

    strategy = LogicalBottomUp()
    inner = strategy.instantiate({"X": Constant("j")}, nested_query)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from nested_datalog.analysis import check_safety, stratify
from nested_datalog.errors import (
    InvalidPoint,
    InvariantViolation,
    LetNotFound,
    NothingBelow,
    ProgramTooLarge,
    RecursiveProgram,
    VariableAbsent,
)
from nested_datalog.model import (
    Filter,
    FreshNames,
    Let,
    Literal,
    Mode,
    Nested,
    Predicate,
    Program,
    Query,
    Rule,
    Substitution,
    Value,
    Variable,
    apply_substitution,
    let,
    pos,
    positive_variables,
    rename_predicates,
    rename_variables,
    rule_variables,
    term_variables,
    variables_of,
)

logger = logging.getLogger(__name__)

MAX_RULES = 10_000


# ---------------------------------------------------------------------------
# Free variables
# ---------------------------------------------------------------------------


def rule_free_variables(rule: Rule) -> Set[str]:
    """Variables not occurring positively that occur in a filter or free in a nested query."""
    positive = set(positive_variables(rule))
    candidates: Set[str] = set()
    for lit in rule.body:
        atom = lit.atom
        if isinstance(atom, Filter):
            candidates.update(term_variables((atom.left, atom.right)))
        elif isinstance(atom, Nested):
            for free in free_variables(atom.query).values():
                candidates |= free
    return candidates - positive


def free_variables(query: Query) -> Dict[int, Set[str]]:
    """Free variables of each rule of the query's program, keyed by rule index."""
    return {i: rule_free_variables(r) for i, r in enumerate(query.program.rules)}


def all_free_variables(query: Query) -> Set[str]:
    out: Set[str] = set()
    for free in free_variables(query).values():
        out |= free
    return out


def goal_substitution(theta: Substitution, query: Query) -> Dict[str, Value]:
    """θ restricted to the goal variables, in goal order."""
    return {v: theta[v] for v in variables_of(query.goal.args) if v in theta}


# ---------------------------------------------------------------------------
# Syntactic and top-down substitution
# ---------------------------------------------------------------------------


def substitute_syntactic(theta: Substitution, program: Program) -> Program:
    """Append ``let(X=θ(X))`` to the body of each rule where ``X`` is free."""
    rules = []
    for rule in program.rules:
        free = rule_free_variables(rule)
        visible = rule_variables(rule)
        ordered = [v for v in visible if v in free] + sorted(free - set(visible))
        extra = [let(Variable(v), theta[v]) for v in ordered if v in theta]
        if extra:
            logger.debug("syntactic lets %s on %s", [str(e) for e in extra], rule.head)
            rule = Rule(rule.head, rule.body + tuple(extra), rule.mode)
        rules.append(rule)
    return program.with_rules(rules)


def substitute_logical_topdown(
    theta: Substitution,
    query: Query,
    fresh: Optional[FreshNames] = None,
    mode: Optional[Mode] = None,
) -> Query:
    """
    Replace the goal ``p(X1..Xn)`` by a fresh ``q(X1..Xn)`` defined by
    ``q(X1..Xn) <- p(X1..Xn), let(X=θ(X))`` for each substituted goal variable.

    In modal programs the wrapper is a diamond rule, so that the let and
    the body value are merged rather than compared exactly.
    """
    subst = goal_substitution(theta, query)
    if not subst:
        return query
    fresh = fresh or FreshNames.for_query(query)
    if mode is None and query.program.is_modal:
        mode = Mode.DIAMOND
    goal = Predicate(fresh.predicate("q"), query.goal.args)
    body = (pos(query.goal),) + tuple(
        let(Variable(v), value, logical=True) for v, value in subst.items()
    )
    logger.debug("top-down wrapper %s for %s", goal, dict((k, str(v)) for k, v in subst.items()))
    return Query(goal, query.program.add_rules([Rule(goal, body, mode)]))


# ---------------------------------------------------------------------------
# Moving lets down the dependency tree
# ---------------------------------------------------------------------------


def _below(program: Program, rule: Rule) -> List[str]:
    """Intensional predicates reachable from the body of ``rule`` (negations included)."""
    intensional = program.intensional
    seen: List[str] = []
    stack = [rule]
    while stack:
        current = stack.pop()
        for lit in current.body:
            if isinstance(lit.atom, Predicate) and lit.atom.name in intensional:
                name = lit.atom.name
                if name not in seen:
                    seen.append(name)
                    stack.extend(program.rules[i] for i in program.rules_for(name))
    return seen


def _copy_with_lets(
    program: Program,
    predicate: str,
    lets_at: Mapping[int, Value],
    fresh: FreshNames,
    logical: bool = True,
) -> Tuple[str, List[Rule]]:
    """Copy every defining rule of ``predicate`` (with its subtree) under a fresh name.

    The root of each copy receives ``let(Zj=value)`` for each position ``j``
    in ``lets_at``, ``Zj`` being the head variable at that position.
    """
    new_name = fresh.predicate(predicate.lstrip("_").rstrip("0123456789") or "p")
    copies: List[Rule] = []
    for index in program.rules_for(predicate):
        root = program.rules[index]
        renaming = {predicate: new_name}
        below = _below(program, root)
        for name in below:
            renaming[name] = fresh.predicate(name.lstrip("_").rstrip("0123456789") or "p")
        new_root = rename_predicates(renaming, root)
        extra: List[Literal] = []
        for j, value in sorted(lets_at.items()):
            head_term = root.head.args[j]
            lit = let(head_term, value, logical=logical)
            if lit not in extra and lit not in new_root.body:
                extra.append(lit)
        copies.append(Rule(new_root.head, new_root.body + tuple(extra), new_root.mode))
        for name in below:
            copies.extend(
                rename_predicates(renaming, program.rules[i]) for i in program.rules_for(name)
            )
    return new_name, copies


def prune(program: Program, candidates: Iterable[str], keep: Iterable[str] = ()) -> Program:
    """Drop rules of candidate predicates that nothing references any more."""
    candidates = set(candidates) - set(keep)
    while True:
        referenced = {
            lit.atom.name
            for r in program.rules
            for lit in r.body
            if isinstance(lit.atom, Predicate)
        }
        dead = [r for r in program.rules if r.head.name in candidates and r.head.name not in referenced]
        if not dead:
            return program
        program = program.with_rules(r for r in program.rules if r not in dead)


def _guard(program: Program) -> Program:
    if len(program.rules) > MAX_RULES:
        raise ProgramTooLarge(f"program grew to {len(program.rules)} rules")
    return program


def _defects(program: Program) -> List[str]:
    defects = [f"unsafe rule for {rule.head}" for rule in program.rules if check_safety(rule)]
    try:
        stratify(program)
    except RecursiveProgram as exc:
        defects.append(str(exc))
    return defects


def _check_move(before: Program, after: Program) -> Program:
    """A move keeps a safe, non-recursive program safe and non-recursive."""
    defects = _defects(after)
    if defects and not _defects(before):
        raise InvariantViolation("move-down broke the program: " + "; ".join(defects))
    return after


def move_down(
    program: Program,
    rule_index: int,
    let_literal: Literal,
    keep: Iterable[str] = (),
    fresh: Optional[FreshNames] = None,
) -> Program:
    """
    Move ``let_literal`` one level below the rule at ``rule_index``.

    For every positive intensional body literal containing the let variable
    ``Y``, the literal's predicate is renamed to a fresh one whose defining
    rules are copies (subtrees included, intensional predicates renamed) of
    the originals, each with ``let(Zj=value)`` appended for every position
    ``j`` where ``Y`` occurs. The let is then removed from the rule.

    Raises
    ------
    LetNotFound
        The literal is not in the rule's body.
    NothingBelow
        ``Y`` touches only extensional predicates.
    """
    original = program
    rule = program.rules[rule_index]
    if let_literal not in rule.body or not isinstance(let_literal.atom, Let):
        raise LetNotFound(f"{let_literal} does not occur in {rule}")
    variable = let_literal.atom.variable
    value = let_literal.atom.value
    intensional = program.intensional
    targets = [
        k
        for k, lit in enumerate(rule.body)
        if lit.positive
        and isinstance(lit.atom, Predicate)
        and lit.atom.name in intensional
        and variable in lit.atom.args
    ]
    if not targets:
        raise NothingBelow(f"{let_literal} in {rule.head} touches only extensional predicates")

    fresh = fresh or FreshNames.for_program(program)
    body = list(rule.body)
    added: List[Rule] = []
    candidates: Set[str] = set()
    for k in targets:
        atom = rule.body[k].atom
        lets_at = {j: value for j, a in enumerate(atom.args) if a == variable}
        new_name, copies = _copy_with_lets(program, atom.name, lets_at, fresh, let_literal.atom.logical)
        body[k] = Literal(Predicate(new_name, atom.args), True)
        added.extend(copies)
        candidates.add(atom.name)
        for i in program.rules_for(atom.name):
            candidates.update(_below(program, program.rules[i]))
        logger.debug("moved %s from %s into %s", let_literal, rule.head, new_name)
    body.remove(let_literal)

    program = program.replace_rule(rule_index, Rule(rule.head, tuple(body), rule.mode))
    program = program.add_rules(added)
    return _check_move(original, _guard(prune(program, candidates, keep)))


def _logical_lets(rule: Rule) -> List[Literal]:
    return [lit for lit in rule.body if isinstance(lit.atom, Let) and lit.atom.logical]


def push_down(query: Query, rounds: Optional[int] = None, fresh: Optional[FreshNames] = None) -> Query:
    """
    Move every logical let down, one level per round.

    ``rounds=None`` continues until no let can move (bottom-up placement).
    Lets created during a round are only moved in the next one.
    """
    fresh = fresh or FreshNames.for_query(query)
    program = query.program
    keep = {query.goal.name}
    done = 0
    while rounds is None or done < rounds:
        pending = [(r.head, lit) for r in program.rules for lit in _logical_lets(r)]
        created: Set[str] = set()
        moved = False
        for head, lit in pending:
            index = next(
                (
                    i
                    for i, r in enumerate(program.rules)
                    if r.head == head and r.head.name not in created and lit in r.body
                ),
                None,
            )
            if index is None:
                continue
            before = {r.head.name for r in program.rules}
            try:
                program = move_down(program, index, lit, keep=keep, fresh=fresh)
            except NothingBelow:
                continue
            created |= {r.head.name for r in program.rules} - before
            moved = True
        done += 1
        if not moved:
            break
    return Query(query.goal, program)


def substitute_logical_bottomup(
    theta: Substitution, query: Query, mode: Optional[Mode] = None
) -> Query:
    """Top-down substitution followed by exhaustive :func:`move_down`."""
    fresh = FreshNames.for_query(query)
    return push_down(substitute_logical_topdown(theta, query, fresh, mode), None, fresh)


# ---------------------------------------------------------------------------
# Explicit substitution points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubstitutionPoint:
    """An edge of the dependency tree: body literal ``position`` of rule ``rule``.

    ``rule=None`` denotes the edge above the goal (top-down placement).
    """

    rule: Optional[int] = None
    position: Optional[int] = None

    def __str__(self) -> str:
        return "goal" if self.rule is None else f"{self.rule}.{self.position}"

    @classmethod
    def parse(cls, text: str) -> "SubstitutionPoint":
        text = text.strip()
        if text == "goal":
            return cls()
        try:
            rule, position = text.split(".")
            return cls(int(rule), int(position))
        except ValueError:
            raise InvalidPoint(f"substitution point must be 'goal' or RULE.POSITION, got {text!r}")


def goal_connections(query: Query) -> Tuple[Dict[int, List[Dict[str, str]]], Dict[int, int]]:
    """
    Follow the logical chain from the goal through positive intensional literals.

    Returns, per rule index, the maps ``rule variable -> goal variable`` along
    every chain reaching the rule, and the rule's depth below the goal.
    """
    program = query.program
    intensional = program.intensional
    chains: Dict[int, List[Dict[str, str]]] = {}
    depths: Dict[int, int] = {}

    def visit(index: int, conn: Dict[str, str], depth: int) -> None:
        chains.setdefault(index, []).append(conn)
        depths[index] = max(depths.get(index, 0), depth)
        for lit in program.rules[index].body:
            if not (lit.positive and isinstance(lit.atom, Predicate)):
                continue
            if lit.atom.name not in intensional:
                continue
            for child in program.rules_for(lit.atom.name):
                head = program.rules[child].head
                child_conn = {
                    h.name: conn[a.name]
                    for h, a in zip(head.args, lit.atom.args)
                    if isinstance(h, Variable) and isinstance(a, Variable) and a.name in conn
                }
                visit(child, child_conn, depth + 1)

    for index in program.rules_for(query.goal.name):
        head = program.rules[index].head
        conn = {
            h.name: g.name
            for h, g in zip(head.args, query.goal.args)
            if isinstance(h, Variable) and isinstance(g, Variable)
        }
        visit(index, conn, 0)
    return chains, depths


def substitute_at_points(
    theta: Substitution,
    query: Query,
    points: Iterable[SubstitutionPoint],
    mode: Optional[Mode] = None,
) -> Query:
    """
    Attach the goal-variable lets at explicit edges of the dependency tree.

    Points are applied deepest first on the original tree, so a shallower
    point copies subtrees that already carry the deeper lets.

    Raises
    ------
    InvalidPoint
        A point does not name a positive intensional literal on a unique
        logical chain from the goal.
    """
    subst = goal_substitution(theta, query)
    points = list(points)
    if not subst:
        return query
    fresh = FreshNames.for_query(query)
    chains, depths = goal_connections(query)
    program = query.program
    intensional = program.intensional
    top = any(p.rule is None for p in points)

    edges = [p for p in points if p.rule is not None]
    for point in edges:
        if point.rule not in chains:
            raise InvalidPoint(f"point {point} is not on the dependency tree of the goal")
    edges.sort(key=lambda p: (-depths[p.rule], p.rule, p.position or 0))

    candidates: Set[str] = set()
    for point in edges:
        rule = program.rules[point.rule]
        if point.position is None or not 0 <= point.position < len(rule.body):
            raise InvalidPoint(f"point {point} has no such body position")
        lit = rule.body[point.position]
        if not (lit.positive and isinstance(lit.atom, Predicate) and lit.atom.name in intensional):
            raise InvalidPoint(f"point {point} does not name a positive intensional literal")
        distinct = {tuple(sorted(c.items())) for c in chains[point.rule]}
        if len(distinct) > 1:
            raise InvalidPoint(f"rule {point.rule} is reached along several logical chains")
        conn = chains[point.rule][0]
        lets_at = {
            j: subst[conn[a.name]]
            for j, a in enumerate(lit.atom.args)
            if isinstance(a, Variable) and a.name in conn and conn[a.name] in subst
        }
        if not lets_at:
            logger.debug("point %s carries no substituted variable", point)
            continue
        new_name, copies = _copy_with_lets(program, lit.atom.name, lets_at, fresh)
        body = list(rule.body)
        body[point.position] = Literal(Predicate(new_name, lit.atom.args), True)
        candidates.add(lit.atom.name)
        program = program.replace_rule(point.rule, Rule(rule.head, tuple(body), rule.mode))
        program = _guard(program.add_rules(copies))
        logger.debug("point %s: lets %s into %s", point, sorted(lets_at), new_name)

    program = prune(program, candidates, {query.goal.name})
    result = Query(query.goal, program)
    if top:
        result = substitute_logical_topdown(theta, result, fresh, mode)
    return result


# ---------------------------------------------------------------------------
# Improper substitution
# ---------------------------------------------------------------------------


def substitute_improper(
    theta: Substitution,
    query: Query,
    anchor: int,
    variable: str,
    fresh: Optional[FreshNames] = None,
) -> Query:
    """
    Start a logical chain for ``variable`` at the rule ``anchor``.

    The anchor ``p(H) <- B`` becomes ``p(H) <- u(W)`` and
    ``u(W) <- B, let(variable=θ(variable))`` where ``W`` lists the positively
    occurring variables of ``B`` and ``u`` is fresh.

    Raises
    ------
    VariableAbsent
        ``variable`` does not occur positively in the anchor, or θ does not bind it.
    """
    program = query.program
    if not 0 <= anchor < len(program.rules):
        raise VariableAbsent(f"no rule {anchor}")
    rule = program.rules[anchor]
    wide = positive_variables(rule)
    if variable not in wide:
        raise VariableAbsent(f"{variable} does not occur positively in {rule}")
    if variable not in theta:
        raise VariableAbsent(f"{variable} is not bound by the substitution")
    fresh = fresh or FreshNames.for_query(query)
    u = Predicate(fresh.predicate("u"), tuple(Variable(v) for v in wide))
    upper = Rule(rule.head, (pos(u),), rule.mode)
    lower = Rule(u, rule.body + (let(Variable(variable), theta[variable], logical=True),), rule.mode)
    logger.debug("improper let(%s=%s) anchored at %s", variable, theta[variable], rule.head)
    program = program.replace_rule(anchor, upper).add_rules([lower])
    return Query(query.goal, program)


def reachable_rules(query: Query) -> List[int]:
    """Indices of the rules the goal depends on, through any body literal."""
    program = query.program
    intensional = program.intensional
    seen: List[int] = []
    stack = list(program.rules_for(query.goal.name))
    while stack:
        index = stack.pop()
        if index in seen:
            continue
        seen.append(index)
        for lit in program.rules[index].body:
            if isinstance(lit.atom, Predicate) and lit.atom.name in intensional:
                stack.extend(program.rules_for(lit.atom.name))
    return sorted(seen)


def improper_anchors(query: Query, variable: str) -> List[int]:
    """
    Deepest rules where ``variable`` is instantiated from an extensional predicate.

    A rule qualifies when ``variable`` occurs in one of its positive
    extensional literals, in none of its positive intensional ones, and
    the rule does not already carry a logical let for it.
    """
    program = query.program
    intensional = program.intensional
    out = []
    var = Variable(variable)
    for index in reachable_rules(query):
        rule = program.rules[index]
        edb = idb = False
        for lit in rule.body:
            if lit.positive and isinstance(lit.atom, Predicate) and var in lit.atom.args:
                if lit.atom.name in intensional:
                    idb = True
                else:
                    edb = True
        covered = any(l.atom.variable == var for l in _logical_lets(rule))
        if edb and not idb and not covered:
            out.append(index)
    return out


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


class SubstitutionStrategy:
    """Builds θ(Q): syntactic substitution of free variables, then the goal part."""

    name = "abstract"

    def instantiate(self, theta: Substitution, query: Query) -> Query:
        program = substitute_syntactic(theta, query.program)
        return self.substitute_goal(theta, Query(query.goal, program))

    def substitute_goal(self, theta: Substitution, query: Query) -> Query:
        return query

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SyntacticOnly(SubstitutionStrategy):
    name = "syntactic"


@dataclass(frozen=True)
class LogicalTopDown(SubstitutionStrategy):
    name = "top-down"

    def substitute_goal(self, theta: Substitution, query: Query) -> Query:
        return substitute_logical_topdown(theta, query)


@dataclass(frozen=True)
class LogicalBottomUp(SubstitutionStrategy):
    name = "bottom-up"

    def substitute_goal(self, theta: Substitution, query: Query) -> Query:
        return substitute_logical_bottomup(theta, query)


@dataclass(frozen=True)
class LogicalAtPoints(SubstitutionStrategy):
    points: FrozenSet[SubstitutionPoint] = field(default_factory=frozenset)
    name = "points"

    def substitute_goal(self, theta: Substitution, query: Query) -> Query:
        return substitute_at_points(theta, query, self.points)

    def __str__(self) -> str:
        return "points=" + ",".join(sorted(str(p) for p in self.points))


@dataclass(frozen=True)
class Improper(SubstitutionStrategy):
    """Top-down for goal variables plus improper lets at ``anchor`` for the rest."""

    anchor: int = 0
    name = "improper"

    def substitute_goal(self, theta: Substitution, query: Query) -> Query:
        goal_vars = set(variables_of(query.goal.args))
        free = all_free_variables(query)
        if 0 <= self.anchor < len(query.program.rules):
            anchored = positive_variables(query.program.rules[self.anchor])
            for variable in anchored:
                if variable in theta and variable not in goal_vars and variable not in free:
                    query = substitute_improper(theta, query, self.anchor, variable)
        return substitute_logical_topdown(theta, query)

    def __str__(self) -> str:
        return f"improper={self.anchor}"


def parse_strategy(text: str) -> SubstitutionStrategy:
    """Strategy from its command-line spelling."""
    text = text.strip()
    if text == "top-down":
        return LogicalTopDown()
    if text == "bottom-up":
        return LogicalBottomUp()
    if text == "syntactic":
        return SyntacticOnly()
    if text.startswith("points="):
        items = [t for t in text[len("points="):].split(",") if t.strip()]
        return LogicalAtPoints(frozenset(SubstitutionPoint.parse(t) for t in items))
    if text.startswith("improper="):
        try:
            return Improper(int(text[len("improper="):]))
        except ValueError:
            pass
    raise InvalidPoint(f"unknown strategy {text!r}")


# ---------------------------------------------------------------------------
# Evaluation of nested atoms
# ---------------------------------------------------------------------------


def eval_nested_atom(store, theta: Substitution, nested: Query, strategy: SubstitutionStrategy) -> bool:
    """
    True iff θ(Q) has at least one answer over the store's extensional database.
    """
    instantiated = strategy.instantiate(theta, nested)
    if instantiated.program.is_modal:
        from nested_datalog.modal import modal_answer

        answers = modal_answer(instantiated, store.base, strategy)
    else:
        from nested_datalog.evaluator import answer

        answers = answer(instantiated, store.base, strategy)
    logger.debug("nested %s under %s: %d answers", nested.goal, strategy, len(answers))
    return bool(answers)


def rename_bound_variables(query: Query, fresh: Optional[FreshNames] = None) -> Query:
    """α-rename, rule by rule, every variable that is not free in that rule."""
    fresh = fresh or FreshNames.for_query(query)
    rules = []
    for rule in query.program.rules:
        free = rule_free_variables(rule)
        mapping = {v: fresh.variable(v[0] if v[0].isalpha() else "V") for v in rule_variables(rule) if v not in free}
        rules.append(rename_variables(mapping, rule))
    return Query(query.goal, query.program.with_rules(rules))


def inline_nested(rule: Rule, theta: Substitution, strategy: SubstitutionStrategy) -> Program:
    """
    Eliminate the nested atoms of ``θ(rule)`` by inlining θ(Q).

    Each nested atom becomes a nullary predicate defined by the renamed
    rules of θ(Q); the result is a plain Datalog program whose evaluation
    derives ``θ(head)`` exactly when the nested evaluation would.
    """
    program = Program()
    fresh = FreshNames.for_query(Query(rule.head, Program((rule,))))
    body: List[Literal] = []
    for lit in rule.body:
        if not isinstance(lit.atom, Nested):
            body.append(apply_substitution(theta, lit))
            continue
        inner = strategy.instantiate(theta, lit.atom.query)
        names = inner.program.intensional | {f.name for f in inner.program.facts}
        renaming = {n: fresh.predicate("n") for n in sorted(names)}
        flag = Predicate(fresh.predicate("e"))
        goal = Predicate(renaming.get(inner.goal.name, inner.goal.name), inner.goal.args)
        program = program.add_rules(rename_predicates(renaming, r) for r in inner.program.rules)
        program = program.add_facts(
            Predicate(renaming.get(f.name, f.name), f.args) for f in inner.program.facts
        )
        program = program.add_rules([Rule(flag, (pos(goal),))])
        body.append(Literal(flag, lit.positive))
    head = apply_substitution(theta, rule.head)
    return program.add_rules([Rule(head, tuple(body), rule.mode)])
