"""
Static Analysis
===============

Safety, arity consistency, the predicate dependency graph and the
stratification derived from it. Every evaluator runs these checks before
touching data.
"""

import logging
from typing import Dict, Iterable, List, Tuple

import networkx as nx

from nested_datalog.errors import RecursiveProgram, SchemaMismatch, UnsafeRule
from nested_datalog.model import (
    Nested,
    Predicate,
    Program,
    Query,
    Rule,
    positive_variables,
    rule_variables,
)

logger = logging.getLogger(__name__)


def check_safety(rule: Rule) -> List[str]:
    """
    Return the variables of ``rule`` that do not occur positively.

    An empty list means the rule is safe. Let literals count as positive
    predicate occurrences; variables that only appear inside a nested
    query atom are that query's own business and are not reported.
    """
    positive = set(positive_variables(rule))
    return [v for v in rule_variables(rule) if v not in positive]


def check_program_safety(program: Program) -> None:
    for rule in program.rules:
        unsafe = check_safety(rule)
        if unsafe:
            raise UnsafeRule(rule, unsafe)


def check_arity(query: Query, db: Iterable[Predicate] = ()) -> None:
    """
    All predicate formulas sharing a name must have the same arity.

    The goal, the program facts and rules, the nested queries and the
    database ``db`` are checked against one table.

    Raises
    ------
    SchemaMismatch
        On the first name used with two arities.
    """
    arities: Dict[str, int] = {}

    def visit(p: Predicate) -> None:
        known = arities.setdefault(p.name, p.arity)
        if known != p.arity:
            raise SchemaMismatch(
                f"predicate {p.name} used with arities {known} and {p.arity}"
            )

    def walk(q: Query) -> None:
        visit(q.goal)
        for fact in q.program.facts:
            visit(fact)
        for rule in q.program.rules:
            visit(rule.head)
            for lit in rule.body:
                if isinstance(lit.atom, Predicate):
                    visit(lit.atom)
                elif isinstance(lit.atom, Nested):
                    walk(lit.atom.query)

    walk(query)
    for fact in db:
        visit(fact)


def dependency_graph(program: Program) -> nx.DiGraph:
    """
    Build the dependency graph of a program.

    Nodes are the predicates occurring in literals (and rule heads); an
    arc ``p1 -> p2`` exists when some rule with head ``p2`` mentions ``p1``
    in its body. Arcs carry ``negative=True`` when at least one such
    occurrence is negated. Nested queries contribute no arcs.
    """
    graph = nx.DiGraph()
    for rule in program.rules:
        head = rule.head.name
        graph.add_node(head)
        for lit in rule.body:
            if not isinstance(lit.atom, Predicate):
                continue
            body = lit.atom.name
            graph.add_node(body)
            if graph.has_edge(body, head):
                if not lit.positive:
                    graph[body][head]["negative"] = True
            else:
                graph.add_edge(body, head, negative=not lit.positive)
    for fact in program.facts:
        graph.add_node(fact.name)
    return graph


def stratify(program: Program) -> List[Tuple[Rule, ...]]:
    """
    Order the rules of a non-recursive program into strata.

    Stratum ``k`` holds the rules whose head predicate sits in topological
    generation ``k`` of the dependency graph, so for every arc ``(a, b)``
    the stratum of ``a`` is strictly lower than that of ``b``.

    Raises
    ------
    RecursiveProgram
        If the dependency graph has a cycle.
    """
    graph = dependency_graph(program)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = [u for u, _ in nx.find_cycle(graph)]
        raise RecursiveProgram(cycle + cycle[:1])

    strata: List[Tuple[Rule, ...]] = []
    for generation in nx.topological_generations(graph):
        members = set(generation)
        rules = tuple(r for r in program.rules if r.head.name in members)
        if rules:
            strata.append(rules)
    return strata
