"""Randomised agreement checks between evaluators, with fixed seeds."""

import random

import pytest

from nested_datalog.algebra import (
    Attribute,
    Base,
    Comparison,
    JoinDiamond,
    LeftOuterJoin,
    MinusBox,
    Project,
    Relation,
    Rename,
    SelectBox,
    Union_,
    check_translation_equivalence,
    eval_algebra,
    relations_to_database,
    schema_of,
    translate_algebra,
)
from nested_datalog.evaluator import answer
from nested_datalog.modal import modal_answer
from nested_datalog.model import (
    NULL,
    Constant,
    Nested,
    Predicate,
    Program,
    Query,
    Rule,
    Variable,
    ne,
    neg,
    pos,
)
from nested_datalog.nesting import (
    LogicalAtPoints,
    LogicalBottomUp,
    LogicalTopDown,
    SubstitutionPoint,
    push_down,
    substitute_logical_topdown,
)
from nested_datalog.syntax import parse_query

CONSTANTS = [Constant("a"), Constant("b"), Constant("c")]
SCHEMAS = {"r": ("X", "Y"), "s": ("Y", "Z"), "t": ("X",)}


def random_relations(rng, nulls=True):
    values = CONSTANTS + ([NULL] if nulls else [])
    return {
        name: Relation(schema, {tuple(rng.choice(values) for _ in schema) for _ in range(rng.randint(0, 4))})
        for name, schema in SCHEMAS.items()
    }


def random_expression(rng, depth, operators):
    if depth == 0 or rng.random() < 0.25:
        return Base(rng.choice(sorted(SCHEMAS)))
    op = rng.choice(operators)
    if op in ("select", "project", "rename"):
        child = random_expression(rng, depth - 1, operators)
        schema = schema_of(child, SCHEMAS)
        if op == "select":
            attr = Attribute(rng.choice(schema))
            if len(schema) > 1 and rng.random() < 0.5:
                other = Attribute(rng.choice([a for a in schema if a != attr.name]))
                return SelectBox(Comparison(attr, other, rng.random() < 0.5), child)
            return SelectBox(Comparison(attr, rng.choice(CONSTANTS), rng.random() < 0.5), child)
        if op == "project":
            kept = tuple(a for a in schema if rng.random() < 0.6) or schema[:1]
            return Project(kept, child)
        if "W" in schema:
            return child
        return Rename(schema[0], "W", child)
    left = random_expression(rng, depth - 1, operators)
    right = random_expression(rng, depth - 1, operators)
    kind = {"union": Union_, "join": JoinDiamond, "minus": MinusBox, "outer": LeftOuterJoin}[op]
    return kind(left, right)


ALL_OPERATORS = ("select", "project", "rename", "union", "join", "minus", "outer")
NULL_FREE_OPERATORS = ("select", "project", "join", "minus")


def classical(expr, relations):
    """Textbook relational algebra over complete relations, as sets of dicts."""
    if isinstance(expr, Base):
        rel = relations[expr.name]
        return rel.schema, [dict(zip(rel.schema, row)) for row in rel.rows]
    if isinstance(expr, SelectBox):
        schema, rows = classical(expr.child, relations)
        comp = expr.condition

        def value(operand, row):
            return row[operand.name] if isinstance(operand, Attribute) else operand

        keep = [r for r in rows if (value(comp.left, r) == value(comp.right, r)) == comp.equal]
        return schema, keep
    if isinstance(expr, Project):
        _, rows = classical(expr.child, relations)
        return expr.attributes, [{a: r[a] for a in expr.attributes} for r in rows]
    lschema, lrows = classical(expr.left, relations)
    rschema, rrows = classical(expr.right, relations)
    shared = [a for a in lschema if a in rschema]
    if isinstance(expr, JoinDiamond):
        schema = tuple(lschema) + tuple(a for a in rschema if a not in lschema)
        rows = [{**l, **r} for l in lrows for r in rrows if all(l[a] == r[a] for a in shared)]
        return schema, rows
    rows = [l for l in lrows if not any(all(l[a] == r[a] for a in shared) for r in rrows)]
    return lschema, rows


def as_rows(schema, rows):
    return {tuple(r[a] for a in schema) for r in rows}


class TestTranslationAgreement:
    @pytest.mark.parametrize("seed", range(200))
    def test_direct_and_translated_answers_match(self, seed):
        rng = random.Random(seed)
        relations = random_relations(rng)
        expr = random_expression(rng, 3, ALL_OPERATORS)
        report = check_translation_equivalence(expr, relations)
        assert report.equivalent, (expr, report.missing, report.extra)


class TestWithoutNulls:
    @pytest.mark.parametrize("seed", range(100))
    def test_modes_do_not_matter(self, seed):
        rng = random.Random(1000 + seed)
        relations = random_relations(rng, nulls=False)
        expr = random_expression(rng, 3, NULL_FREE_OPERATORS)
        query = translate_algebra(expr, SCHEMAS)
        db = relations_to_database(relations)
        plain = Query(query.goal, query.program.erase_modes())
        assert modal_answer(query, db) == answer(plain, db)

    @pytest.mark.parametrize("seed", range(100))
    def test_classical_algebra(self, seed):
        rng = random.Random(2000 + seed)
        relations = random_relations(rng, nulls=False)
        expr = random_expression(rng, 3, NULL_FREE_OPERATORS)
        schema, rows = classical(expr, relations)
        assert eval_algebra(expr, relations).rows == as_rows(schema, rows)


NESTED = """
?- p(X, Y).
p(X, Y) <- mail(X, Y), exists {
    ?- q(X).
    q(X) <- u(X, Z), filter(Z != Y).
    u(X, Z) <- mail(X, Z), !blocked(Z).
}.
"""


class TestPlacement:
    @pytest.mark.parametrize("seed", range(200))
    def test_let_placement_does_not_change_answers(self, seed):
        rng = random.Random(3000 + seed)
        people = [Constant("j"), Constant("k"), Constant("l")]
        boxes = [Constant(f"m{i}") for i in range(4)]
        db = {Predicate("mail", (rng.choice(people), rng.choice(boxes))) for _ in range(rng.randint(1, 6))}
        db |= {Predicate("blocked", (b,)) for b in boxes if rng.random() < 0.3}
        query = parse_query(NESTED)
        top = answer(query, db, LogicalTopDown())
        assert answer(query, db, LogicalBottomUp()) == top
        assert answer(query, db, LogicalAtPoints(frozenset({SubstitutionPoint(0, 0)}))) == top


CHAIN = """
?- q(X).
q(X) <- r(X, Y), !blocked(Y).
r(X, Y) <- s(X, Y), t(Y).
"""


class TestMoveDownPrefixes:
    @pytest.mark.parametrize("seed", range(200))
    def test_every_round_gives_the_same_answers(self, seed):
        rng = random.Random(4000 + seed)
        db = {Predicate("s", (rng.choice(CONSTANTS), rng.choice(CONSTANTS))) for _ in range(rng.randint(1, 5))}
        db |= {Predicate("t", (c,)) for c in CONSTANTS if rng.random() < 0.6}
        db |= {Predicate("blocked", (c,)) for c in CONSTANTS if rng.random() < 0.3}
        top = substitute_logical_topdown({"X": rng.choice(CONSTANTS)}, parse_query(CHAIN))
        expected = {f.args for f in answer(top, db)}
        for rounds in (1, 2, None):
            moved = push_down(top, rounds)
            assert {f.args for f in answer(moved, db)} == expected


EXTENSIONAL = {"e": 2, "f": 1, "g": 2}
X, Y, Z = Variable("X"), Variable("Y"), Variable("Z")


def random_rule(rng, head, arity, available):
    """A safe rule for ``head`` over extensional predicates and ``available`` ones."""
    body, bound = [], []
    for _ in range(rng.randint(1, 2)):
        name = rng.choice(sorted(available))
        args = tuple(rng.choice((X, Y, Z)) for _ in range(available[name]))
        body.append(pos(Predicate(name, args)))
        bound += [v for v in args if v not in bound]
    extra = rng.random()
    if extra < 0.3:
        name = rng.choice(sorted(available))
        body.append(neg(Predicate(name, tuple(rng.choice(bound) for _ in range(available[name])))))
    elif extra < 0.5:
        body.append(ne(rng.choice(bound), rng.choice(bound + CONSTANTS)))
    return Rule(Predicate(head, tuple(rng.choice(bound) for _ in range(arity))), tuple(body))


def random_program(rng):
    """Up to four layers p0..p3; p_i only uses extensional predicates and p_j with j > i."""
    count = rng.randint(1, 4)
    arities = {f"p{i}": 1 if i == 0 else rng.randint(1, 2) for i in range(count)}
    rules = []
    for i in range(count):
        available = {**EXTENSIONAL, **{f"p{j}": arities[f"p{j}"] for j in range(i + 1, count)}}
        rules += [random_rule(rng, f"p{i}", arities[f"p{i}"], available) for _ in range(rng.randint(1, 2))]
    return Program(tuple(rules))


def random_database(rng):
    return {
        Predicate(name, tuple(rng.choice(CONSTANTS) for _ in range(arity)))
        for name, arity in (rng.choice(sorted(EXTENSIONAL.items())) for _ in range(rng.randint(1, 8)))
    }


class TestRandomPrograms:
    @pytest.mark.parametrize("seed", range(200))
    def test_every_push_down_prefix_keeps_the_answers(self, seed):
        rng = random.Random(5000 + seed)
        program = random_program(rng)
        db = random_database(rng)
        top = substitute_logical_topdown({"X": rng.choice(CONSTANTS)}, Query(Predicate("p0", (X,)), program))
        expected = {f.args for f in answer(top, db)}
        full = push_down(top, None)
        for rounds in range(10):
            moved = push_down(top, rounds)
            assert {f.args for f in answer(moved, db)} == expected, (program, rounds)
            if moved.program == full.program:
                break
        else:
            pytest.fail(f"push-down did not settle within 10 rounds: {program}")

    @pytest.mark.parametrize("seed", range(200))
    def test_nested_placements_agree(self, seed):
        rng = random.Random(6000 + seed)
        inner = Query(Predicate("p0", (X,)), random_program(rng))
        outer = Query(
            Predicate("ans", (X,)),
            Program((Rule(Predicate("ans", (X,)), (pos(Predicate("f", (X,))), pos(Nested(inner)))),)),
        )
        db = random_database(rng) | {Predicate("f", (c,)) for c in CONSTANTS if rng.random() < 0.7}
        assert answer(outer, db, LogicalBottomUp()) == answer(outer, db, LogicalTopDown())
