"""
SPARQL Algebra with Nulls
=========================

Relations whose tuples may carry ⊥ (an unbound attribute), the algebra
operators over them, and their translation into Modal Datalog:

=================  ==============================================
``select_box``     keep tuples satisfying the condition in every completion
``project``        truncate to the listed attributes
``rename``         rename one attribute
``union``          pad both sides with ⊥ to the union schema
``join_diamond``   concatenate compatible tuples, most informative value wins
``minus_box``      drop tuples having any compatible counterpart
``left_outer_join`` ``join_diamond`` plus ``minus_box``, padded
``exists``         per-tuple FILTER (NOT) EXISTS through a semantics profile
=================  ==============================================

Example::

    relations = {"r": Relation(("X",), {(Constant("a"),)})}
    eval_algebra(parse_algebra("(join (r X) (s X Y))"), relations)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from nested_datalog.errors import SchemaMismatch, UnknownProfile, UnknownRelation
from nested_datalog.modal import modal_term_eq, modal_term_ne
from nested_datalog.model import (
    NULL,
    Constant,
    Database,
    FreshNames,
    Literal,
    Mode,
    Nested,
    Null,
    Predicate,
    Program,
    Query,
    Rule,
    Value,
    Variable,
    eq,
    let,
    ne,
    neg,
    pos,
    value_sort_key,
)

logger = logging.getLogger(__name__)

Row = Tuple[Value, ...]


@dataclass(frozen=True)
class Relation:
    """A set of tuples over an ordered schema; ⊥ stands for an unbound attribute."""

    schema: Tuple[str, ...]
    rows: FrozenSet[Row] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "rows", frozenset(tuple(r) for r in self.rows))
        if len(set(self.schema)) != len(self.schema):
            raise SchemaMismatch(f"duplicate attribute in schema {self.schema}")
        for row in self.rows:
            if len(row) != len(self.schema):
                raise SchemaMismatch(f"tuple {row} does not fit schema {self.schema}")

    @staticmethod
    def row_key(row: Row) -> Tuple:
        return tuple(value_sort_key(v) for v in row)

    def sorted_rows(self) -> List[Row]:
        return sorted(self.rows, key=self.row_key)

    def __len__(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Attribute:
    name: str

    def __str__(self) -> str:
        return self.name


Operand = Union[Attribute, Constant, Null]


@dataclass(frozen=True)
class Comparison:
    left: Operand
    right: Operand
    equal: bool = True


@dataclass(frozen=True)
class Conjunction:
    parts: Tuple[Comparison, ...]


Condition = Union[Comparison, Conjunction]


def comparisons(condition: Condition) -> Tuple[Comparison, ...]:
    return condition.parts if isinstance(condition, Conjunction) else (condition,)


def condition_attributes(condition: Condition) -> List[str]:
    names: List[str] = []
    for comp in comparisons(condition):
        for operand in (comp.left, comp.right):
            if isinstance(operand, Attribute) and operand.name not in names:
                names.append(operand.name)
    return names


@dataclass(frozen=True)
class Base:
    """A stored relation; ``attributes`` renames its columns positionally."""

    name: str
    attributes: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class SelectBox:
    condition: Condition
    child: "AlgebraExpr"


@dataclass(frozen=True)
class Project:
    attributes: Tuple[str, ...]
    child: "AlgebraExpr"


@dataclass(frozen=True)
class Rename:
    source: str
    target: str
    child: "AlgebraExpr"


@dataclass(frozen=True)
class Union_:
    left: "AlgebraExpr"
    right: "AlgebraExpr"


@dataclass(frozen=True)
class JoinDiamond:
    left: "AlgebraExpr"
    right: "AlgebraExpr"


@dataclass(frozen=True)
class MinusBox:
    left: "AlgebraExpr"
    right: "AlgebraExpr"


@dataclass(frozen=True)
class LeftOuterJoin:
    left: "AlgebraExpr"
    right: "AlgebraExpr"


@dataclass(frozen=True)
class Exists:
    inner: "AlgebraExpr"
    outer: "AlgebraExpr"
    negated: bool = False


AlgebraExpr = Union[Base, SelectBox, Project, Rename, Union_, JoinDiamond, MinusBox, LeftOuterJoin, Exists]

BINARY = (Union_, JoinDiamond, MinusBox, LeftOuterJoin)


def contains_exists(expr: AlgebraExpr) -> bool:
    if isinstance(expr, Exists):
        return True
    if isinstance(expr, BINARY):
        return contains_exists(expr.left) or contains_exists(expr.right)
    if isinstance(expr, (SelectBox, Project, Rename)):
        return contains_exists(expr.child)
    return False


def _merge_schema(left: Sequence[str], right: Sequence[str]) -> Tuple[str, ...]:
    return tuple(left) + tuple(a for a in right if a not in left)


def schema_of(
    expr: AlgebraExpr, schemas: Mapping[str, Sequence[str]], free: Sequence[str] = ()
) -> Tuple[str, ...]:
    """
    Output schema of ``expr``.

    ``free`` lists outer attributes a selection condition may mention
    (inside the inner query of an exists).

    Raises
    ------
    UnknownRelation
        A bare relation name without a declared schema.
    SchemaMismatch
        An attribute reference does not resolve, or arities disagree.
    """
    if isinstance(expr, Base):
        declared = schemas.get(expr.name)
        if expr.attributes is None:
            if declared is None:
                raise UnknownRelation(f"relation {expr.name} has no declared schema")
            return tuple(declared)
        if declared is not None and len(declared) != len(expr.attributes):
            raise SchemaMismatch(
                f"relation {expr.name} has {len(declared)} attributes, used with {len(expr.attributes)}"
            )
        if len(set(expr.attributes)) != len(expr.attributes):
            raise SchemaMismatch(f"duplicate attribute in ({expr.name} {' '.join(expr.attributes)})")
        return tuple(expr.attributes)
    if isinstance(expr, SelectBox):
        child = schema_of(expr.child, schemas, free)
        for name in condition_attributes(expr.condition):
            if name not in child and name not in free:
                raise SchemaMismatch(f"condition attribute {name} is not in {child}")
        return child
    if isinstance(expr, Project):
        child = schema_of(expr.child, schemas, free)
        missing = [a for a in expr.attributes if a not in child]
        if missing:
            raise SchemaMismatch(f"cannot project {missing} out of {child}")
        if len(set(expr.attributes)) != len(expr.attributes):
            raise SchemaMismatch(f"duplicate attribute in projection {expr.attributes}")
        return tuple(expr.attributes)
    if isinstance(expr, Rename):
        child = schema_of(expr.child, schemas, free)
        if expr.source not in child:
            raise SchemaMismatch(f"cannot rename {expr.source}: not in {child}")
        if expr.target in child and expr.target != expr.source:
            raise SchemaMismatch(f"cannot rename to {expr.target}: already in {child}")
        return tuple(expr.target if a == expr.source else a for a in child)
    if isinstance(expr, MinusBox):
        left = schema_of(expr.left, schemas, free)
        schema_of(expr.right, schemas, free)
        return left
    if isinstance(expr, BINARY):
        return _merge_schema(schema_of(expr.left, schemas, free), schema_of(expr.right, schemas, free))
    if isinstance(expr, Exists):
        outer = schema_of(expr.outer, schemas, free)
        schema_of(expr.inner, schemas, tuple(free) + outer)
        return outer
    raise TypeError(f"unknown algebra node {expr!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# Direct evaluation
# ---------------------------------------------------------------------------


def _operand_value(operand: Operand, mapping: Mapping[str, Value]) -> Value:
    if isinstance(operand, Attribute):
        return mapping[operand.name]
    return operand


def satisfies_box(condition: Condition, mapping: Mapping[str, Value]) -> bool:
    """``μ ⊨ □φ`` for a conjunction of (in)equalities."""
    for comp in comparisons(condition):
        left = _operand_value(comp.left, mapping)
        right = _operand_value(comp.right, mapping)
        test = modal_term_eq if comp.equal else modal_term_ne
        if not test(Mode.BOX, left, right):
            return False
    return True


def compatible(left: Mapping[str, Value], right: Mapping[str, Value]) -> bool:
    """``◇(left[X] = right[X])`` for every shared attribute ``X``."""
    return all(
        modal_term_eq(Mode.DIAMOND, left[a], right[a]) for a in left if a in right
    )


def most_informative(left: Value, right: Value) -> Value:
    return right if isinstance(left, Null) else left


def select_box(rel: Relation, condition: Condition) -> Relation:
    return Relation(rel.schema, {row for row in rel.rows if satisfies_box(condition, dict(zip(rel.schema, row)))})


def project(rel: Relation, attributes: Sequence[str]) -> Relation:
    positions = [rel.schema.index(a) for a in attributes]
    return Relation(tuple(attributes), {tuple(row[i] for i in positions) for row in rel.rows})


def rename(rel: Relation, source: str, target: str) -> Relation:
    return Relation(tuple(target if a == source else a for a in rel.schema), rel.rows)


def _pad(rel: Relation, schema: Sequence[str]) -> FrozenSet[Row]:
    out = set()
    for row in rel.rows:
        mapping = dict(zip(rel.schema, row))
        out.add(tuple(mapping.get(a, NULL) for a in schema))
    return frozenset(out)


def union(left: Relation, right: Relation) -> Relation:
    schema = _merge_schema(left.schema, right.schema)
    return Relation(schema, _pad(left, schema) | _pad(right, schema))


def join_diamond(left: Relation, right: Relation) -> Relation:
    schema = _merge_schema(left.schema, right.schema)
    out = set()
    for lrow in left.rows:
        lmap = dict(zip(left.schema, lrow))
        for rrow in right.rows:
            rmap = dict(zip(right.schema, rrow))
            if not compatible(lmap, rmap):
                continue
            merged = dict(rmap)
            for a, v in lmap.items():
                merged[a] = most_informative(v, rmap[a]) if a in rmap else v
            out.add(tuple(merged[a] for a in schema))
    return Relation(schema, out)


def minus_box(left: Relation, right: Relation) -> Relation:
    kept = set()
    rmaps = [dict(zip(right.schema, r)) for r in right.rows]
    for lrow in left.rows:
        lmap = dict(zip(left.schema, lrow))
        if not any(compatible(lmap, rmap) for rmap in rmaps):
            kept.add(lrow)
    return Relation(left.schema, kept)


def left_outer_join(left: Relation, right: Relation) -> Relation:
    return union(join_diamond(left, right), minus_box(left, right))


def eval_algebra(
    expr: AlgebraExpr,
    relations: Mapping[str, Relation],
    profile=None,
) -> Relation:
    """
    Evaluate ``expr`` directly over named relations.

    Parameters
    ----------
    expr : AlgebraExpr
    relations : mapping of str to Relation
    profile : SemanticsProfile, optional
        Required as soon as ``expr`` contains an exists node.

    Raises
    ------
    UnknownRelation, SchemaMismatch
    UnknownProfile
        An exists node is evaluated without a profile.
    """
    schemas = {name: rel.schema for name, rel in relations.items()}
    schema_of(expr, schemas)
    return _eval(expr, relations, profile)


def _eval(expr: AlgebraExpr, relations: Mapping[str, Relation], profile) -> Relation:
    if isinstance(expr, Base):
        if expr.name not in relations:
            raise UnknownRelation(f"no relation named {expr.name}")
        rel = relations[expr.name]
        if expr.attributes is None:
            return rel
        return Relation(expr.attributes, rel.rows)
    if isinstance(expr, SelectBox):
        return select_box(_eval(expr.child, relations, profile), expr.condition)
    if isinstance(expr, Project):
        return project(_eval(expr.child, relations, profile), expr.attributes)
    if isinstance(expr, Rename):
        return rename(_eval(expr.child, relations, profile), expr.source, expr.target)
    if isinstance(expr, Exists):
        if profile is None:
            raise UnknownProfile("an exists filter needs a semantics profile")
        from nested_datalog.profiles import eval_exists_filter

        outer = _eval(expr.outer, relations, profile)
        return eval_exists_filter(outer, expr.inner, expr.negated, profile, relations)
    left = _eval(expr.left, relations, profile)
    right = _eval(expr.right, relations, profile)
    if isinstance(expr, Union_):
        return union(left, right)
    if isinstance(expr, JoinDiamond):
        return join_diamond(left, right)
    if isinstance(expr, MinusBox):
        return minus_box(left, right)
    return left_outer_join(left, right)


# ---------------------------------------------------------------------------
# Translation to Modal Datalog
# ---------------------------------------------------------------------------


def _atom(name: str, schema: Sequence[str]) -> Predicate:
    return Predicate(name, tuple(Variable(a) for a in schema))


def _term(operand: Operand):
    return Variable(operand.name) if isinstance(operand, Attribute) else operand


class _Translator:
    def __init__(self, schemas, free, let_rename, fresh):
        self.schemas = schemas
        self.free = tuple(free)
        self.let_rename = let_rename
        self.fresh = fresh
        self.rules: List[Rule] = []

    def head(self, schema: Sequence[str]) -> Predicate:
        return _atom(self.fresh.predicate("p"), schema)

    def emit(self, expr: AlgebraExpr) -> Tuple[Predicate, Tuple[str, ...]]:
        if isinstance(expr, Base):
            schema = schema_of(expr, self.schemas, self.free)
            return _atom(expr.name, schema), schema

        if isinstance(expr, SelectBox):
            child, schema = self.emit(expr.child)
            head = self.head(schema)
            filters = tuple(
                (eq if comp.equal else ne)(_term(comp.left), _term(comp.right))
                for comp in comparisons(expr.condition)
            )
            self.rules.append(Rule(head, (pos(child),) + filters, Mode.BOX))
            return head, schema

        if isinstance(expr, Project):
            child, _ = self.emit(expr.child)
            head = self.head(expr.attributes)
            self.rules.append(Rule(head, (pos(child),), Mode.DIAMOND))
            return head, tuple(expr.attributes)

        if isinstance(expr, Rename):
            child, schema = self.emit(expr.child)
            renamed = tuple(expr.target if a == expr.source else a for a in schema)
            head = self.head(renamed)
            if self.let_rename:
                body = (
                    pos(child),
                    eq(Variable(expr.source), Variable(expr.target)),
                    let(Variable(expr.target), NULL),
                )
            else:
                body = (pos(_atom(child.name, renamed)),)
            self.rules.append(Rule(head, body, Mode.DIAMOND))
            return head, renamed

        if isinstance(expr, Exists):
            outer, schema = self.emit(expr.outer)
            inner = _Translator(self.schemas, self.free + schema, self.let_rename, self.fresh)
            goal, _ = inner.emit(expr.inner)
            nested = Literal(Nested(Query(goal, Program(tuple(inner.rules)))), not expr.negated)
            head = self.head(schema)
            self.rules.append(Rule(head, (pos(outer), nested), Mode.BOX))
            return head, schema

        left, lschema = self.emit(expr.left)
        right, rschema = self.emit(expr.right)
        if isinstance(expr, Union_):
            schema = _merge_schema(lschema, rschema)
            head = self.head(schema)
            for child, own in ((left, lschema), (right, rschema)):
                pads = tuple(let(Variable(a), NULL) for a in schema if a not in own)
                self.rules.append(Rule(head, (pos(child),) + pads, Mode.DIAMOND))
            return head, schema
        if isinstance(expr, JoinDiamond):
            schema = _merge_schema(lschema, rschema)
            head = self.head(schema)
            self.rules.append(Rule(head, (pos(left), pos(right)), Mode.DIAMOND))
            return head, schema
        if isinstance(expr, MinusBox):
            return self.minus(left, lschema, right, rschema), lschema
        # left outer join: union of the join and the difference
        joined = _merge_schema(lschema, rschema)
        join_head = self.head(joined)
        self.rules.append(Rule(join_head, (pos(left), pos(right)), Mode.DIAMOND))
        minus_head = self.minus(left, lschema, right, rschema)
        head = self.head(joined)
        pads = tuple(let(Variable(a), NULL) for a in joined if a not in lschema)
        self.rules.append(Rule(head, (pos(join_head),), Mode.DIAMOND))
        self.rules.append(Rule(head, (pos(minus_head),) + pads, Mode.DIAMOND))
        return head, joined

    def minus(self, left, lschema, right, rschema) -> Predicate:
        shared = [a for a in lschema if a in rschema]
        helper = _atom(self.fresh.predicate("q"), shared)
        head = self.head(lschema)
        self.rules.append(Rule(head, (pos(left), neg(helper)), Mode.BOX))
        self.rules.append(Rule(helper, (pos(right),), Mode.BOX))
        return head


def translate_algebra(
    expr: AlgebraExpr,
    schemas: Mapping[str, Sequence[str]],
    free: Sequence[str] = (),
    let_rename: bool = False,
) -> Query:
    """
    Translate an algebra expression into an equivalent Modal Datalog query.

    Every operator node gets a fresh head predicate whose arguments are the
    node's attributes, used as variables. Base relations are extensional
    predicates. An exists node becomes ``□(p(T) <- r(T), (L,P))`` with the
    translated inner query as the nested atom.

    Parameters
    ----------
    let_rename : bool
        Translate ``rename`` as ``◇(p(..Y..) <- r(..X..), filter(X=Y), let(Y=⊥))``
        instead of the value-preserving default.
    """
    schema_of(expr, schemas, free)
    used = set(schemas) | set(_relation_names(expr))
    translator = _Translator(schemas, free, let_rename, FreshNames(used))
    goal, _ = translator.emit(expr)
    logger.debug("translated %d algebra rules", len(translator.rules))
    return Query(goal, Program(tuple(translator.rules)))


def _relation_names(expr: AlgebraExpr) -> Iterable[str]:
    if isinstance(expr, Base):
        yield expr.name
    elif isinstance(expr, Exists):
        yield from _relation_names(expr.inner)
        yield from _relation_names(expr.outer)
    elif isinstance(expr, BINARY):
        yield from _relation_names(expr.left)
        yield from _relation_names(expr.right)
    else:
        yield from _relation_names(expr.child)


# ---------------------------------------------------------------------------
# Relations and fact databases
# ---------------------------------------------------------------------------


def relations_to_database(relations: Mapping[str, Relation]) -> Database:
    return frozenset(
        Predicate(name, row) for name, rel in relations.items() for row in rel.rows
    )


def database_to_relations(
    db: Iterable[Predicate], schemas: Mapping[str, Sequence[str]]
) -> Dict[str, Relation]:
    """
    Group facts by predicate into relations.

    Predicates without a declared schema get positional attributes ``A1..An``.
    """
    grouped: Dict[str, set] = {name: set() for name in schemas}
    arities: Dict[str, int] = {name: len(s) for name, s in schemas.items()}
    for fact in db:
        known = arities.setdefault(fact.name, fact.arity)
        if known != fact.arity:
            raise SchemaMismatch(f"facts of {fact.name} have arities {known} and {fact.arity}")
        grouped.setdefault(fact.name, set()).add(fact.args)
    return {
        name: Relation(
            tuple(schemas.get(name, [f"A{i + 1}" for i in range(arities[name])])), rows
        )
        for name, rows in grouped.items()
    }


def answers_to_relation(facts: Iterable[Predicate], schema: Sequence[str]) -> Relation:
    return Relation(tuple(schema), {f.args for f in facts})


@dataclass
class EquivalenceReport:
    """Direct versus translated evaluation of one expression."""

    expr: AlgebraExpr
    direct: Relation
    translated: Relation
    missing: List[Row] = field(default_factory=list)
    extra: List[Row] = field(default_factory=list)

    @property
    def equivalent(self) -> bool:
        return not self.missing and not self.extra


def check_translation_equivalence(
    expr: AlgebraExpr,
    relations: Mapping[str, Relation],
    profile=None,
    let_rename: bool = False,
) -> EquivalenceReport:
    """
    Evaluate ``expr`` directly and through its Modal Datalog translation.

    ``missing`` lists direct tuples the translation lost; ``extra`` the
    tuples only the translation produced.
    """
    from nested_datalog.modal import modal_answer
    from nested_datalog.profiles import ProfileStrategy, get_profile

    schemas = {name: rel.schema for name, rel in relations.items()}
    direct = eval_algebra(expr, relations, profile)
    query = translate_algebra(expr, schemas, let_rename=let_rename)
    strategy = ProfileStrategy(get_profile(profile or "spec-top-down"))
    facts = modal_answer(query, relations_to_database(relations), strategy)
    translated = answers_to_relation(facts, schema_of(expr, schemas))
    report = EquivalenceReport(
        expr,
        direct,
        translated,
        missing=sorted(direct.rows - translated.rows, key=Relation.row_key),
        extra=sorted(translated.rows - direct.rows, key=Relation.row_key),
    )
    if not report.equivalent:
        logger.warning(
            "translation differs: %d missing, %d extra", len(report.missing), len(report.extra)
        )
    return report
