"""Tests for Modal Datalog evaluation over ⊥."""

import pytest

from nested_datalog.errors import SchemaMismatch, UnboundBuiltin, VariableAbsent
from nested_datalog.evaluator import FactStore, answer
from nested_datalog.modal import (
    modal_answer,
    modal_holds,
    modal_infer_rule,
    modal_term_eq,
    modal_term_ne,
    realize_logical_lets,
    substitute_logical_modal,
)
from nested_datalog.model import (
    NULL,
    Constant,
    FreshNames,
    Let,
    Mode,
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
from nested_datalog.nesting import push_down
from nested_datalog.syntax import parse_facts, parse_query

X, Y, Z = Variable("X"), Variable("Y"), Variable("Z")
a, b = Constant("a"), Constant("b")
BOX, DIAMOND = Mode.BOX, Mode.DIAMOND


def p(name, *args):
    return Predicate(name, tuple(args))


@pytest.fixture
def null_r_db():
    return {p("r", NULL), p("s", a)}


@pytest.fixture
def program_a():
    """The sure rule with the diamond merge wrapper above it."""
    return Program((
        Rule(p("p", X, Y), (pos(p("u", X, Y)), let(X, a, logical=True)), DIAMOND),
        Rule(p("u", X, Y), (pos(p("r", X)), pos(p("s", Y)), eq(X, Y)), BOX),
    ))


@pytest.fixture
def program_b():
    """The same let moved down onto the r-rule."""
    return Program((
        Rule(p("p", X, Y), (pos(p("u", X)), pos(p("s", Y)), eq(X, Y)), BOX),
        Rule(p("u", X), (pos(p("r", X)), let(X, a, logical=True)), DIAMOND),
    ))


class TestTermComparison:
    @pytest.mark.parametrize(
        "mode, left, right, equal, different",
        [
            (BOX, a, a, True, False),
            (BOX, a, b, False, True),
            (BOX, a, NULL, False, False),
            (BOX, NULL, NULL, False, False),
            (DIAMOND, a, a, True, False),
            (DIAMOND, a, b, False, True),
            (DIAMOND, a, NULL, True, True),
            (DIAMOND, NULL, NULL, True, True),
        ],
    )
    def test_equality_and_inequality(self, mode, left, right, equal, different):
        assert modal_term_eq(mode, left, right) is equal
        assert modal_term_ne(mode, left, right) is different


class TestModalHolds:
    def test_box_predicate_is_exact(self):
        store = FactStore([p("r", NULL)])
        assert modal_holds(store, {"X": NULL}, pos(p("r", X)), BOX)
        assert not modal_holds(store, {"X": a}, pos(p("r", X)), BOX)

    def test_diamond_predicate_accepts_less_informative_fact(self):
        assert modal_holds(FactStore([p("r", NULL)]), {"X": a}, pos(p("r", X)), DIAMOND)
        assert not modal_holds(FactStore([p("r", a)]), {"X": NULL}, pos(p("r", X)), DIAMOND)

    def test_box_negation_rejects_compatible_fact(self):
        store = FactStore([p("q", a)])
        assert not modal_holds(store, {"X": NULL}, neg(p("q", X)), BOX)
        assert modal_holds(store, {"X": b}, neg(p("q", X)), BOX)

    def test_diamond_negation_needs_a_surely_equal_fact(self):
        store = FactStore([p("q", a)])
        assert modal_holds(store, {"X": NULL}, neg(p("q", X)), DIAMOND)
        assert not modal_holds(store, {"X": a}, neg(p("q", X)), DIAMOND)
        assert modal_holds(FactStore([p("q", NULL)]), {"X": NULL}, neg(p("q", X)), DIAMOND)

    def test_filters_follow_term_comparison(self):
        store = FactStore()
        theta = {"X": a, "Y": NULL}
        assert not modal_holds(store, theta, eq(X, Y), BOX)
        assert modal_holds(store, theta, eq(X, Y), DIAMOND)
        assert not modal_holds(store, theta, ne(X, Y), BOX)
        assert modal_holds(store, theta, ne(X, Y), DIAMOND)

    def test_unbound_filter(self):
        with pytest.raises(UnboundBuiltin):
            modal_holds(FactStore(), {}, eq(X, a), BOX)


class TestInference:
    def test_diamond_rule_derives_less_informative_fact(self):
        rule = Rule(p("p", X), (pos(p("s", X)),), DIAMOND)
        assert modal_infer_rule(FactStore([p("s", NULL)]), rule) == {p("p", NULL)}

    def test_diamond_rule_keeps_null_fact_beside_informative_one(self):
        rule = Rule(p("p", X), (pos(p("s", X)),), DIAMOND)
        store = FactStore([p("s", a), p("s", NULL)])
        assert modal_infer_rule(store, rule) == {p("p", a), p("p", NULL)}

    def test_box_rule_copies_facts(self):
        rule = Rule(p("p", X), (pos(p("r", X)),), BOX)
        assert modal_infer_rule(FactStore([p("r", a)]), rule) == {p("p", a)}

    def test_diamond_join_merges_to_most_informative(self):
        rule = Rule(p("p", X), (pos(p("s", X)), pos(p("t", X))), DIAMOND)
        store = FactStore([p("s", NULL), p("t", a), p("t", b)])
        assert modal_infer_rule(store, rule) == {p("p", a), p("p", b)}

    def test_diamond_join_clashes_on_distinct_constants(self):
        rule = Rule(p("p", X), (pos(p("s", X)), pos(p("t", X))), DIAMOND)
        assert modal_infer_rule(FactStore([p("s", a), p("t", b)]), rule) == set()

    def test_box_join_does_not_merge(self):
        rule = Rule(p("p", X), (pos(p("s", X)), pos(p("t", X))), BOX)
        assert modal_infer_rule(FactStore([p("s", NULL), p("t", a)]), rule) == set()


class TestModalAnswer:
    def test_less_informative_fact_blocks_sure_answer(self):
        query = parse_query(
            """
            ?- p(X).
            box: p(X) <- q(X), r(X).
            diamond: q(X) <- s(X), t(X).
            """
        )
        db = parse_facts("r(a). s(null). t(null).")
        assert modal_answer(query, db) == set()

    def test_without_nulls_modes_do_not_matter(self):
        query = parse_query(
            """
            ?- p(X).
            box: p(X) <- q(X), !r(X).
            diamond: q(X) <- s(X, Y), t(Y).
            """
        )
        db = parse_facts("s(a, 1). s(b, 2). t(1). t(2). r(b).")
        plain = Query(query.goal, query.program.erase_modes())
        assert modal_answer(query, db) == answer(plain, db) == {p("p", a)}

    def test_arity_mismatch(self):
        query = parse_query("?- p(X). box: p(X) <- q(X), q(X, Y).")
        with pytest.raises(SchemaMismatch):
            modal_answer(query, {p("q", a), p("q", a, b)})

    def test_moving_a_let_down_changes_the_answers(self, program_a, program_b, null_r_db):
        """
        Above the sure filter, r(⊥) never surely equals s(a), so nothing is
        derived. Moved down, the diamond merge first turns r(⊥) into u(a);
        the sure filter then compares a with a and binds Y to a as well,
        which is why the answer is p(a, a) and not p(a, ⊥).
        """
        assert modal_answer(Query(p("p", X, Y), program_a), null_r_db) == set()
        assert modal_answer(Query(p("p", X, Y), program_b), null_r_db) == {p("p", a, a)}


class TestLogicalLets:
    def test_split_rule(self):
        rule = Rule(p("p", X, Y), (pos(p("r", X)), pos(p("s", Y)), eq(X, Y)), BOX)
        upper, lower = substitute_logical_modal({"X": a}, rule, "X", FreshNames(["p", "r", "s"]))
        assert upper.mode is DIAMOND
        assert upper.body == (pos(p("_u0", X, Y)), let(X, a, logical=True))
        assert lower == Rule(p("_u0", X, Y), (pos(p("r", X)), pos(p("s", Y)), eq(X, Y)), BOX)

    def test_split_rule_on_several_variables(self):
        rule = Rule(p("p", X, Y), (pos(p("r", X)), pos(p("s", Y))), BOX)
        upper, lower = substitute_logical_modal({"X": a, "Y": b}, rule, ["X", "Y"])
        assert upper.body[1:] == (let(X, a, logical=True), let(Y, b, logical=True))
        assert lower.body == rule.body
        db = {p("r", NULL), p("s", b)}
        assert modal_answer(Query(p("p", X, Y), Program((upper, lower))), db) == {p("p", a, b)}

    @pytest.mark.parametrize("theta, variable", [({"Z": a}, "Z"), ({}, "X")])
    def test_variable_must_be_in_head_and_substitution(self, theta, variable):
        rule = Rule(p("p", X), (pos(p("r", X)), pos(p("s", Z))), BOX)
        with pytest.raises(VariableAbsent):
            substitute_logical_modal(theta, rule, variable)

    def test_realize_is_idempotent(self):
        rule = Rule(p("p", X), (pos(p("r", X)), let(X, a, logical=True)), BOX)
        once = realize_logical_lets(Program((rule,)))
        assert len(once.rules) == 2
        assert realize_logical_lets(once) is once

    def test_realize_splits_improperly_when_variable_not_in_head(self):
        rule = Rule(p("p", Y), (pos(p("m", X, Y)), let(X, a, logical=True)), BOX)
        out = realize_logical_lets(Program((rule,)))
        lets = [r for r in out.rules if any(isinstance(l.atom, Let) for l in r.body)]
        assert len(lets) == 1 and lets[0].mode is DIAMOND
        assert "X" in {v.name for v in lets[0].head.args}
        db = {p("m", NULL, b), p("m", Constant("c"), Constant("d"))}
        assert modal_answer(Query(p("p", Y), out), db) == {p("p", b)}

    def test_pushing_the_wrapper_let_down_changes_the_answers(self, null_r_db):
        program = Program((
            Rule(p("p", X, Y), (pos(p("u", X)), pos(p("s", Y)), eq(X, Y)), BOX),
            Rule(p("u", X), (pos(p("r", X)),), BOX),
            Rule(p("w", X, Y), (pos(p("p", X, Y)), let(X, a, logical=True)), DIAMOND),
        ))
        top = Query(p("w", X, Y), program)
        bottom = push_down(top)
        holders = [r for r in bottom.program.rules if any(isinstance(l.atom, Let) for l in r.body)]
        assert len(holders) == 1
        assert [l.atom.name for l in holders[0].body if isinstance(l.atom, Predicate)] == ["r"]
        assert modal_answer(top, null_r_db) == set()
        assert modal_answer(bottom, null_r_db) == {p("w", a, a)}
