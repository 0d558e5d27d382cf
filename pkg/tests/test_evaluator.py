"""Tests for stratified evaluation of (Nested) Datalog."""

import pytest

from nested_datalog.errors import RecursiveProgram, SchemaMismatch, UnboundBuiltin, UnsafeRule
from nested_datalog.evaluator import FactStore, answer, eval_literal, fixpoint, select_goal
from nested_datalog.model import (
    Constant,
    Predicate,
    Program,
    Query,
    Rule,
    Variable,
    eq,
    let,
    ne,
    neg,
    pos,
)
from nested_datalog.nesting import LogicalBottomUp, LogicalTopDown, SyntacticOnly
from nested_datalog.syntax import parse_facts, parse_query

X, Y, Z = Variable("X"), Variable("Y"), Variable("Z")
a, b, c = Constant("a"), Constant("b"), Constant("c")


def p(name, *args):
    return Predicate(name, tuple(args))


@pytest.fixture
def mail_db():
    return parse_facts("mail(j, m1). mail(j, m2). mail(k, m3).")


@pytest.fixture
def email_query():
    return parse_query(
        """
        ?- p(X, Y).
        p(X, Y) <- mail(X, Y), exists {
            ?- q(X).
            q(X) <- mail(X, Z), filter(Z != Y).
        }.
        """
    )


class TestFactStore:
    def test_add_and_contains(self):
        store = FactStore([p("q", a)])
        assert p("q", a) in store
        assert not store.add(p("q", a))
        assert store.add(p("q", b))
        assert len(store) == 2
        assert store.facts("q") == {p("q", a), p("q", b)}

    def test_rejects_non_ground(self):
        with pytest.raises(ValueError):
            FactStore([p("q", X)])


class TestEvalLiteral:
    def test_filters(self):
        store = FactStore()
        assert eval_literal(store, {"X": a}, eq(X, a))
        assert eval_literal(store, {"X": a}, ne(X, b))
        assert not eval_literal(store, {"X": a, "Y": a}, ne(X, Y))

    def test_negation(self):
        store = FactStore([p("q", a)])
        assert not eval_literal(store, {"X": a}, neg(p("q", X)))
        assert eval_literal(store, {"X": b}, neg(p("q", X)))

    def test_unbound_builtin(self):
        with pytest.raises(UnboundBuiltin) as exc:
            eval_literal(FactStore(), {}, ne(X, a))
        assert exc.value.variables == ["X"]


class TestFixpoint:
    def test_join_and_negation(self):
        program = Program((
            Rule(p("both", X), (pos(p("r", X)), pos(p("s", X)))),
            Rule(p("only_r", X), (pos(p("r", X)), neg(p("both", X)))),
        ))
        db = {p("r", a), p("r", b), p("s", a)}
        assert answer(Query(p("both", X), program), db) == {p("both", a)}
        assert answer(Query(p("only_r", X), program), db) == {p("only_r", b)}

    def test_let_binds_constant(self):
        program = Program((Rule(p("tag", X, Y), (pos(p("r", X)), let(Y, c))),))
        assert answer(Query(p("tag", X, Y), program), {p("r", a)}) == {p("tag", a, c)}

    def test_program_facts_are_seeded(self):
        program = Program((Rule(p("p", X), (pos(p("f", X)),)),), frozenset({p("f", a)}))
        assert answer(Query(p("p", X), program), set()) == {p("p", a)}

    def test_repeated_variable_joins(self):
        program = Program((Rule(p("loop", X), (pos(p("e", X, X)),)),))
        db = {p("e", a, a), p("e", a, b)}
        assert answer(Query(p("loop", X), program), db) == {p("loop", a)}

    def test_goal_with_constant(self):
        store = fixpoint(Program(), {p("e", a, b), p("e", b, b)})
        assert select_goal(store, p("e", X, b)) == {p("e", a, b), p("e", b, b)}
        assert select_goal(store, p("e", a, X)) == {p("e", a, b)}

    def test_unsafe_program_rejected(self):
        program = Program((Rule(p("p", X), (neg(p("q", X)),)),))
        with pytest.raises(UnsafeRule):
            fixpoint(program, set())

    def test_recursive_program_rejected(self):
        program = Program((Rule(p("p", X), (pos(p("p", X)),)),))
        with pytest.raises(RecursiveProgram):
            fixpoint(program, set())

    def test_predicate_used_with_two_arities(self):
        query = parse_query("?- p(X). p(X) <- q(X), q(X, Y).")
        with pytest.raises(SchemaMismatch):
            answer(query, {p("q", a), p("q", a, b)})

    def test_database_arity_must_match_the_program(self):
        query = parse_query("?- p(X). p(X) <- q(X).")
        with pytest.raises(SchemaMismatch):
            answer(query, {p("q", a, b)})

    def test_rule_order_irrelevant(self):
        r1 = Rule(p("p", X), (pos(p("q", X)), neg(p("r", X))))
        r2 = Rule(p("q", X), (pos(p("s", X)),))
        r3 = Rule(p("r", X), (pos(p("t", X)),))
        db = {p("s", a), p("s", b), p("t", b)}
        first = answer(Query(p("p", X), Program((r1, r2, r3))), db)
        second = answer(Query(p("p", X), Program((r3, r1, r2))), db)
        assert first == second == {p("p", a)}


class TestNestedEvaluation:
    def test_multiple_mail_addresses(self, email_query, mail_db):
        expected = {p("p", Constant("j"), Constant("m1")), p("p", Constant("j"), Constant("m2"))}
        assert answer(email_query, mail_db) == expected

    def test_bottom_up_agrees_with_top_down(self, email_query, mail_db):
        assert answer(email_query, mail_db, LogicalBottomUp()) == answer(
            email_query, mail_db, LogicalTopDown()
        )

    def test_syntactic_only_loses_correlation(self, email_query, mail_db):
        # without the goal lets the nested query no longer looks at X's addresses
        found = answer(email_query, mail_db, SyntacticOnly())
        assert p("p", Constant("k"), Constant("m3")) in found
        assert len(found) == 3

    def test_negated_nested_atom(self, mail_db):
        query = parse_query(
            """
            ?- single(X, Y).
            single(X, Y) <- mail(X, Y), !exists {
                ?- q(X).
                q(X) <- mail(X, Z), filter(Z != Y).
            }.
            """
        )
        assert answer(query, mail_db) == {p("single", Constant("k"), Constant("m3"))}

    def test_nested_sees_only_extensional_facts(self):
        query = parse_query(
            """
            ?- p(X).
            p(X) <- r(X), exists { ?- d(X). d(X) <- s(X). }.
            s(X) <- r(X).
            """
        )
        # s is derived in the outer program but the inner query reads the base facts only
        assert answer(query, {p("r", a)}) == set()
        assert answer(query, {p("r", a), p("s", a)}) == {p("p", a)}
