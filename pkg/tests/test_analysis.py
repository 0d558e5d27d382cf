"""Tests for safety, the dependency graph and stratification."""

import pytest

from nested_datalog.analysis import (
    check_arity,
    check_program_safety,
    check_safety,
    dependency_graph,
    stratify,
)
from nested_datalog.errors import RecursiveProgram, SchemaMismatch, UnsafeRule
from nested_datalog.model import Constant, Nested, Predicate, Program, Query, Rule, Variable, eq, let, ne, neg, pos

X, Y, Z = Variable("X"), Variable("Y"), Variable("Z")


def p(name, *args):
    return Predicate(name, tuple(args))


class TestSafety:
    def test_safe_rule(self):
        assert check_safety(Rule(p("p", X), (pos(p("q", X, Y)), ne(X, Y)))) == []

    def test_head_variable_only_in_filter(self):
        rule = Rule(p("p", X), (pos(p("q", Y)), eq(X, Y)))
        assert check_safety(rule) == ["X"]

    def test_negation_does_not_bind(self):
        rule = Rule(p("p", X), (neg(p("q", X)),))
        assert check_safety(rule) == ["X"]

    def test_let_binds(self):
        assert check_safety(Rule(p("p", X), (let(X, Constant("a")),))) == []

    def test_nested_variables_not_reported(self):
        inner = Query(p("q", X), Program((Rule(p("q", X), (pos(p("m", X, Z)), ne(Z, Y))),)))
        rule = Rule(p("p", X), (pos(p("m", X, X)), pos(Nested(inner))))
        assert check_safety(rule) == []

    def test_program_safety_raises(self):
        rule = Rule(p("p", X), (neg(p("q", X)),))
        with pytest.raises(UnsafeRule) as exc:
            check_program_safety(Program((rule,)))
        assert exc.value.variables == ["X"]


class TestArity:
    def test_consistent(self):
        check_arity(Query(p("p", X), Program((Rule(p("p", X), (pos(p("q", X, Y)),)),))))

    def test_mismatch(self):
        program = Program((Rule(p("p", X), (pos(p("q", X)), pos(p("q", X, Y)))),))
        with pytest.raises(SchemaMismatch):
            check_arity(Query(p("p", X), program))

    def test_nested_query_shares_the_table(self):
        inner = Query(p("q", X), Program((Rule(p("q", X), (pos(p("m", X, X, Z)),)),)))
        outer = Program((Rule(p("p", X), (pos(p("m", X, Y)), pos(Nested(inner)))),))
        with pytest.raises(SchemaMismatch):
            check_arity(Query(p("p", X), outer))

    def test_database_is_checked(self):
        query = Query(p("p", X), Program((Rule(p("p", X), (pos(p("q", X)),)),)))
        check_arity(query, [p("q", Constant("a"))])
        with pytest.raises(SchemaMismatch):
            check_arity(query, [p("q", Constant("a"), Constant("b"))])


class TestStratification:
    def test_graph_marks_negative_arcs(self):
        program = Program((Rule(p("p", X), (pos(p("s", X)), neg(p("q", X)))),))
        graph = dependency_graph(program)
        assert graph["q"]["p"]["negative"] is True
        assert graph["s"]["p"]["negative"] is False

    def test_strata_follow_dependencies(self):
        r_p = Rule(p("p", X), (pos(p("q", X)), neg(p("r", X))))
        r_q = Rule(p("q", X), (pos(p("s", X)),))
        r_r = Rule(p("r", X), (pos(p("q", X)),))
        strata = stratify(Program((r_p, r_q, r_r)))
        order = [r.head.name for stratum in strata for r in stratum]
        assert order.index("q") < order.index("r") < order.index("p")

    def test_recursive_program_rejected(self):
        with pytest.raises(RecursiveProgram):
            stratify(Program((Rule(p("p", X), (pos(p("p", X)),)),)))

    def test_mutual_recursion_rejected(self):
        program = Program((
            Rule(p("p", X), (pos(p("q", X)),)),
            Rule(p("q", X), (pos(p("p", X)),)),
        ))
        with pytest.raises(RecursiveProgram):
            stratify(program)

