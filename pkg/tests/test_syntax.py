"""Tests for the facts, program and algebra text formats."""

import pytest

from nested_datalog.algebra import Attribute, Base, Comparison, Conjunction, Exists, LeftOuterJoin, SelectBox
from nested_datalog.errors import MixedModes, ParseError, UnknownRelation
from nested_datalog.model import (
    NULL,
    Constant,
    Filter,
    Let,
    Mode,
    Nested,
    Predicate,
    Rule,
    Variable,
    pos,
)
from nested_datalog.syntax import (
    format_algebra,
    format_facts,
    format_query,
    format_rule,
    format_term,
    parse_algebra,
    parse_facts,
    parse_facts_with_schemas,
    parse_goal,
    parse_literal,
    parse_program,
    parse_program_with_goal,
    parse_query,
)

X, Y = Variable("X"), Variable("Y")
a = Constant("a")

EMAIL = """
?- p(X, Y).
p(X, Y) <- mail(X, Y), exists { ?- q(X). q(X) <- mail(X, Z), filter(Z != Y). }.
"""

INTRO = (
    '(exists (select-box (= Y "*.com") (left-outer-join persons privMail)) '
    "(left-outer-join persons corpMail))"
)


class TestFacts:
    def test_values(self):
        db = parse_facts('# mailboxes\nmail(j, "*.com"). mail(3, null).')
        assert db == {
            Predicate("mail", (Constant("j"), Constant("*.com"))),
            Predicate("mail", (Constant("3"), NULL)),
        }

    def test_schemas(self):
        db, schemas = parse_facts_with_schemas("@schema mail(P, M).\nmail(j, m).")
        assert schemas == {"mail": ("P", "M")}
        assert len(db) == 1

    def test_print_and_read_back(self):
        text = '@schema mail(P, M).\nmail(j, "*.com"). mail(k, null). flag().'
        db, schemas = parse_facts_with_schemas(text)
        assert parse_facts_with_schemas(format_facts(db, schemas)) == (db, schemas)


class TestPrograms:
    def test_literals(self):
        program = parse_program("diamond: p(X) <- q(X, Y), !r(Y), filter(X = Y), filter(X != a), let(Y = null).")
        body = program.rules[0].body
        assert program.rules[0].mode is Mode.DIAMOND
        assert body[1].atom == Predicate("r", (Y,)) and not body[1].positive
        assert body[2].atom == Filter(X, Y) and body[2].positive
        assert body[3].atom == Filter(X, a) and not body[3].positive
        assert body[4].atom == Let(Y, NULL)

    def test_ground_bodiless_rules_are_facts(self):
        program = parse_program("f(a). p(X) <- f(X).")
        assert program.facts == {Predicate("f", (a,))}
        assert len(program.rules) == 1

    def test_mixed_modes(self):
        with pytest.raises(MixedModes):
            parse_program("box: p(X) <- q(X). r(X) <- q(X).")

    def test_mixed_modes_inside_nested_query(self):
        with pytest.raises(MixedModes):
            parse_program("p(X) <- r(X), exists { ?- q(X). box: q(X) <- s(X). t(X) <- s(X). }.")

    def test_nested_query(self):
        goal, program = parse_program_with_goal(EMAIL)
        assert goal == Predicate("p", (X, Y))
        nested = program.rules[0].body[1].atom
        assert isinstance(nested, Nested)
        assert nested.query.goal.name == "q"

    def test_nested_goal_defaults_to_first_rule(self):
        program = parse_program("p(X) <- r(X), !exists { q(X) <- s(X). }.")
        lit = program.rules[0].body[1]
        assert not lit.positive
        assert lit.atom.query.goal == Predicate("q", (X,))

    def test_print_and_read_back(self):
        query = parse_query(EMAIL)
        assert parse_query(format_query(query)) == query
        rule = parse_program("box: p(X) <- q(X), !r(X).").rules[0]
        assert format_rule(rule) == "box: p(X) <- q(X), !r(X)."

    def test_upper_case_constants_are_quoted(self):
        p1 = Constant("P1")
        assert format_term(p1) == '"P1"'
        rule = Rule(Predicate("p", (X,)), (pos(Predicate("q", (X, p1))),))
        assert parse_program(format_rule(rule)).rules[0] == rule
        db = {Predicate("owner", (p1,))}
        assert parse_facts(format_facts(db)) == db

    def test_goal_override(self):
        query = parse_query("p(X) <- q(X). r(X) <- q(X).", goal="r(X)")
        assert query.goal == Predicate("r", (X,))
        assert parse_query("p(X) <- q(X).").goal == Predicate("p", (X,))

    def test_goal_and_literal(self):
        assert parse_goal("?- p(X, a).") == Predicate("p", (X, a))
        lit = parse_literal("!q(a, null)")
        assert lit.atom == Predicate("q", (a, NULL)) and not lit.positive
        assert parse_literal("filter(a != null)").atom == Filter(a, NULL)
        with pytest.raises(ParseError):
            parse_literal("q(a), r(a)")


class TestParseErrors:
    def test_position(self):
        with pytest.raises(ParseError) as exc:
            parse_program("p(X) <- q(X).\nq(X) <- $.")
        assert (exc.value.line, exc.value.column) == (2, 9)
        assert str(exc.value).startswith("2:9: ")

    def test_missing_period(self):
        with pytest.raises(ParseError):
            parse_program("p(X) <- q(X)")

    def test_no_goal(self):
        with pytest.raises(ParseError):
            parse_query("f(a).")

    def test_bad_fact(self):
        with pytest.raises(ParseError):
            parse_facts("mail(j m1).")

    @pytest.mark.parametrize("text", ["p(X) <- _q(X).", "p(_X) <- q(_X).", "p(X) <- q(X), let(X = _a)."])
    def test_underscore_names_are_reserved(self, text):
        with pytest.raises(ParseError):
            parse_program(text)

    def test_message_lists_expected_tokens(self):
        err = ParseError("unexpected 'x'", 3, 4, ["RPAR", "COMMA"])
        assert str(err) == "3:4: unexpected 'x' (expected one of: COMMA, RPAR)"


class TestAlgebra:
    def test_intro_expression(self):
        expr = parse_algebra(INTRO)
        assert isinstance(expr, Exists) and not expr.negated
        assert isinstance(expr.outer, LeftOuterJoin)
        assert isinstance(expr.inner, SelectBox)
        assert expr.inner.condition == Comparison(Attribute("Y"), Constant("*.com"))

    def test_print_and_read_back(self):
        for text in (
            INTRO,
            "(not-exists (privMail X Z) (project (X) corpMail))",
            '(select-box (and (= X Y) (!= Y null)) (union (rename A X r) (minus s t)))',
        ):
            assert format_algebra(parse_algebra(text)) == text

    def test_conjunction_flattens(self):
        expr = parse_algebra("(select-box (and (= X Y) (and (!= X a) (= Y b))) r)")
        assert isinstance(expr.condition, Conjunction)
        assert len(expr.condition.parts) == 3

    def test_base_with_attributes(self):
        assert parse_algebra("(mail P M)") == Base("mail", ("P", "M"))

    def test_schema_check(self):
        with pytest.raises(UnknownRelation):
            parse_algebra("persons", schemas={})
        assert parse_algebra("persons", schemas={"persons": ("X",)}) == Base("persons")

    def test_syntax_error(self):
        with pytest.raises(ParseError):
            parse_algebra("(project X persons)")
