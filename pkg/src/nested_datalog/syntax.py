"""
Text Formats
============

Parsers and printers for the three input languages:

* facts: ``corpMail(1, "*.com").`` one fact per statement, ``null`` is ⊥,
  ``@schema corpMail(X, Y).`` names a relation's attributes, ``#`` comments;
* programs: ``box: p(X) <- q(X), !r(X), filter(X != Y), let(Y = a).`` with
  nested queries written ``exists { ?- goal(X). rules... }``;
* algebra: prefix s-expressions such as
  ``(select-box (= Y "*.com") (left-outer-join persons privMail))``.

Variables start with an upper-case letter, constants are lower-case
identifiers, numbers or quoted strings. Names starting with ``_`` are
reserved for generated predicates and variables and are rejected.
Printers emit text the parsers read back, generated names aside.
"""

import json
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from lark import Lark, Transformer
from lark.exceptions import LarkError, UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from nested_datalog.algebra import (
    AlgebraExpr,
    Attribute,
    Base,
    Comparison,
    Conjunction,
    Exists,
    JoinDiamond,
    LeftOuterJoin,
    MinusBox,
    Project,
    Rename,
    SelectBox,
    Union_,
    comparisons,
)
from nested_datalog.errors import MixedModes, ParseError
from nested_datalog.model import (
    NULL,
    Constant,
    Database,
    Filter,
    Let,
    Literal,
    Mode,
    Nested,
    Null,
    Predicate,
    Program,
    Query,
    Rule,
    Term,
    Variable,
)

logger = logging.getLogger(__name__)

_TERMINALS = r"""
    VAR: /[A-Z][A-Za-z0-9_]*/
    IDENT: /[a-z0-9][A-Za-z0-9_]*/
    COMMENT: /#[^\n]*/

    %import common.ESCAPED_STRING -> STRING
    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

FACTS_GRAMMAR = r"""
    start: statement*
    ?statement: fact | schema
    fact: IDENT "(" [value ("," value)*] ")" "."
    schema: "@schema" IDENT "(" [VAR ("," VAR)*] ")" "."
    value: IDENT   -> constant
         | VAR     -> constant
         | STRING  -> string
         | "null"  -> null
""" + _TERMINALS

PROGRAM_GRAMMAR = r"""
    start: item*
    ?item: rule | goal
    goal: "?-" atom "."
    rule: [mode ":"] atom ["<-" literal ("," literal)*] "."
    mode: "box"     -> box
        | "diamond" -> diamond
    ?literal: atom                            -> positive
            | "!" atom                        -> negative
            | "filter" "(" term "=" term ")"  -> filter_eq
            | "filter" "(" term NE term ")"   -> filter_ne
            | "let" "(" term "=" term ")"     -> let_
            | "exists" "{" item* "}"          -> exists
            | "!" "exists" "{" item* "}"      -> not_exists
    atom: IDENT "(" [term ("," term)*] ")"
    term: VAR     -> variable
        | IDENT   -> constant
        | STRING  -> string
        | "null"  -> null
    NE: "!=" | "≠"
""" + _TERMINALS

ALGEBRA_GRAMMAR = r"""
    start: expr
    ?expr: IDENT                                 -> named
         | "(" IDENT VAR* ")"                    -> base
         | "(" _SELECT_BOX cond expr ")"         -> select
         | "(" "project" "(" VAR* ")" expr ")"   -> project
         | "(" "rename" VAR VAR expr ")"         -> rename
         | "(" "union" expr expr ")"             -> union
         | "(" "join" expr expr ")"              -> join
         | "(" "minus" expr expr ")"             -> minus
         | "(" _LEFT_OUTER_JOIN expr expr ")"    -> left_outer_join
         | "(" "exists" expr expr ")"            -> exists
         | "(" _NOT_EXISTS expr expr ")"         -> not_exists
    ?cond: "(" "=" operand operand ")"           -> cond_eq
         | "(" NE operand operand ")"            -> cond_ne
         | "(" "and" cond+ ")"                   -> cond_and
    operand: VAR     -> attribute
           | IDENT   -> constant
           | STRING  -> string
           | "null"  -> null
    NE: "!=" | "≠"
    _SELECT_BOX.2: "select-box"
    _LEFT_OUTER_JOIN.2: "left-outer-join"
    _NOT_EXISTS.2: "not-exists"
""" + _TERMINALS


def _parser(grammar: str) -> Lark:
    return Lark(grammar, parser="lalr", propagate_positions=True, maybe_placeholders=True)


_facts_parser = _parser(FACTS_GRAMMAR)
_program_parser = _parser(PROGRAM_GRAMMAR)
_algebra_parser = _parser(ALGEBRA_GRAMMAR)


def _run(parser: Lark, text: str):
    try:
        return parser.parse(text)
    except UnexpectedEOF as e:
        lines = text.splitlines() or [""]
        raise ParseError("unexpected end of input", len(lines), len(lines[-1]) + 1, e.expected)
    except UnexpectedToken as e:
        raise ParseError(f"unexpected {e.token!r}", e.line, e.column, e.expected)
    except UnexpectedCharacters as e:
        raise ParseError(f"unexpected character {text[e.pos_in_stream]!r}", e.line, e.column, e.allowed)
    except UnexpectedInput as e:  # pragma: no cover
        raise ParseError(str(e), getattr(e, "line", 0), getattr(e, "column", 0))
    except LarkError as e:  # pragma: no cover
        raise ParseError(str(e))


class _Terms(Transformer):
    def variable(self, items):
        return Variable(str(items[0]))

    def constant(self, items):
        return Constant(str(items[0]))

    def string(self, items):
        return Constant(json.loads(items[0]))

    def null(self, _):
        return NULL


# ---------------------------------------------------------------------------
# Facts
# ---------------------------------------------------------------------------


class _FactsTransformer(_Terms):
    def fact(self, items):
        name, *args = items
        return Predicate(str(name), tuple(a for a in args if a is not None))

    def schema(self, items):
        name, *attrs = items
        return (str(name), tuple(str(a) for a in attrs if a is not None))

    def start(self, items):
        facts = [i for i in items if isinstance(i, Predicate)]
        schemas = dict(i for i in items if isinstance(i, tuple))
        return facts, schemas


def parse_facts_with_schemas(text: str) -> Tuple[Database, Dict[str, Tuple[str, ...]]]:
    """Facts and ``@schema`` declarations of a facts file.

    Raises
    ------
    ParseError
    """
    facts, schemas = _FactsTransformer().transform(_run(_facts_parser, text))
    logger.debug("parsed %d facts, %d schemas", len(facts), len(schemas))
    return frozenset(facts), schemas


def parse_facts(text: str) -> Database:
    return parse_facts_with_schemas(text)[0]


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


class _Goal:
    def __init__(self, atom: Predicate):
        self.atom = atom


def _assemble(items: Sequence, where: str) -> Tuple[Optional[Predicate], Program]:
    goal: Optional[Predicate] = None
    rules: List[Rule] = []
    facts: List[Predicate] = []
    for item in items:
        if isinstance(item, _Goal):
            goal = item.atom
        elif not item.body and item.mode is None and item.head.is_ground():
            facts.append(item.head)
        else:
            rules.append(item)
    modes = {r.mode is not None for r in rules}
    if len(modes) > 1:
        raise MixedModes(f"{where} mixes modal and plain rules")
    return goal, Program(tuple(rules), frozenset(facts))


class _ProgramTransformer(_Terms):
    def atom(self, items):
        name, *args = items
        return Predicate(str(name), tuple(a for a in args if a is not None))

    def box(self, _):
        return Mode.BOX

    def diamond(self, _):
        return Mode.DIAMOND

    def goal(self, items):
        return _Goal(items[0])

    def rule(self, items):
        mode, head, *body = items
        return Rule(head, tuple(lit for lit in body if lit is not None), mode)

    def positive(self, items):
        return Literal(items[0], True)

    def negative(self, items):
        return Literal(items[0], False)

    def filter_eq(self, items):
        return Literal(Filter(items[0], items[1]), True)

    def filter_ne(self, items):
        return Literal(Filter(items[0], items[2]), False)

    def let_(self, items):
        return Literal(Let(items[0], items[1]), True)

    def _nested(self, items, positive):
        goal, program = _assemble(items, "nested query")
        if goal is None:
            if not program.rules:
                raise ParseError("a nested query needs a goal or at least one rule")
            goal = program.rules[0].head
        return Literal(Nested(Query(goal, program)), positive)

    def exists(self, items):
        return self._nested(items, True)

    def not_exists(self, items):
        return self._nested(items, False)

    def start(self, items):
        return list(items)


def _transform_program(text: str):
    from lark.exceptions import VisitError

    tree = _run(_program_parser, text)
    try:
        return _ProgramTransformer().transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, (ParseError, MixedModes)):
            raise e.orig_exc
        raise


def parse_program_with_goal(text: str) -> Tuple[Optional[Predicate], Program]:
    """The program and the goal of its top-level ``?-`` line, if any."""
    return _assemble(_transform_program(text), "program")


def parse_program(text: str) -> Program:
    """
    Parse a (Nested, possibly modal) Datalog program.

    Raises
    ------
    ParseError
    MixedModes
        Some rules carry a mode and others do not.
    """
    return parse_program_with_goal(text)[1]


def parse_goal(text: str) -> Predicate:
    """A goal atom such as ``p(X, a)``; a leading ``?-`` and trailing ``.`` are optional."""
    body = text.strip()
    if body.startswith("?-"):
        body = body[2:]
    body = body.strip().rstrip(".")
    goal, _ = _assemble(_transform_program(f"?- {body}."), "goal")
    return goal  # type: ignore[return-value]


def parse_literal(text: str) -> Literal:
    """A single body literal, e.g. ``!q(a, null)`` or ``filter(a = null)``."""
    _, program = _assemble(_transform_program(f"lit() <- {text.strip().rstrip('.')}."), "literal")
    body = program.rules[0].body
    if len(body) != 1:
        raise ParseError(f"expected exactly one literal, got {len(body)}", 1, 1)
    return body[0]


def parse_query(text: str, goal: Optional[str] = None) -> Query:
    """A query from program text; the goal comes from ``goal``, the ``?-`` line, or the first rule."""
    found, program = parse_program_with_goal(text)
    if goal is not None:
        found = parse_goal(goal)
    if found is None:
        if not program.rules:
            raise ParseError("no goal given and no rule to take it from", 1, 1)
        found = program.rules[0].head
    return Query(found, program)


# ---------------------------------------------------------------------------
# Algebra
# ---------------------------------------------------------------------------


class _AlgebraTransformer(Transformer):
    def attribute(self, items):
        return Attribute(str(items[0]))

    def constant(self, items):
        return Constant(str(items[0]))

    def string(self, items):
        return Constant(json.loads(items[0]))

    def null(self, _):
        return NULL

    def named(self, items):
        return Base(str(items[0]))

    def base(self, items):
        name, *attrs = items
        return Base(str(name), tuple(str(a) for a in attrs))

    def select(self, items):
        return SelectBox(items[0], items[1])

    def project(self, items):
        *attrs, child = items
        return Project(tuple(str(a) for a in attrs), child)

    def rename(self, items):
        return Rename(str(items[0]), str(items[1]), items[2])

    def union(self, items):
        return Union_(items[0], items[1])

    def join(self, items):
        return JoinDiamond(items[0], items[1])

    def minus(self, items):
        return MinusBox(items[0], items[1])

    def left_outer_join(self, items):
        return LeftOuterJoin(items[0], items[1])

    def exists(self, items):
        return Exists(items[0], items[1], False)

    def not_exists(self, items):
        return Exists(items[0], items[1], True)

    def cond_eq(self, items):
        return Comparison(items[0], items[1], True)

    def cond_ne(self, items):
        return Comparison(items[1], items[2], False)

    def cond_and(self, items):
        parts: List[Comparison] = []
        for item in items:
            parts.extend(comparisons(item))
        return Conjunction(tuple(parts))

    def start(self, items):
        return items[0]


def parse_algebra(text: str, schemas: Optional[Dict[str, Sequence[str]]] = None) -> AlgebraExpr:
    """
    Parse an algebra s-expression; with ``schemas`` the result is also schema-checked.

    Raises
    ------
    ParseError
    SchemaMismatch, UnknownRelation
    """
    expr = _AlgebraTransformer().transform(_run(_algebra_parser, text))
    if schemas is not None:
        from nested_datalog.algebra import schema_of

        schema_of(expr, schemas)
    return expr


# ---------------------------------------------------------------------------
# Printers
# ---------------------------------------------------------------------------


def format_term(term: Term) -> str:
    if isinstance(term, Null):
        return "null"
    return str(term)


def format_atom(atom: Predicate) -> str:
    return f"{atom.name}({', '.join(format_term(a) for a in atom.args)})"


def format_literal(lit: Literal) -> str:
    atom = lit.atom
    if isinstance(atom, Filter):
        op = "=" if lit.positive else "!="
        return f"filter({format_term(atom.left)} {op} {format_term(atom.right)})"
    if isinstance(atom, Let):
        return f"let({format_term(atom.variable)} = {format_term(atom.value)})"
    prefix = "" if lit.positive else "!"
    if isinstance(atom, Nested):
        return f"{prefix}exists {{ {format_query(atom.query, inline=True)} }}"
    return prefix + format_atom(atom)


def format_rule(rule: Rule) -> str:
    prefix = f"{rule.mode.value}: " if rule.mode else ""
    if not rule.body:
        return f"{prefix}{format_atom(rule.head)}."
    return f"{prefix}{format_atom(rule.head)} <- {', '.join(format_literal(l) for l in rule.body)}."


def format_program(program: Program, separator: str = "\n") -> str:
    lines = [f"{format_atom(f)}." for f in sorted(program.facts, key=format_atom)]
    lines.extend(format_rule(r) for r in program.rules)
    return separator.join(lines)


def format_query(query: Query, inline: bool = False) -> str:
    separator = " " if inline else "\n"
    body = format_program(query.program, separator)
    head = f"?- {format_atom(query.goal)}."
    return f"{head}{separator}{body}" if body else head


def format_facts(db: Database, schemas: Optional[Dict[str, Sequence[str]]] = None) -> str:
    lines = [
        f"@schema {name}({', '.join(attrs)})." for name, attrs in sorted((schemas or {}).items())
    ]
    lines.extend(f"{format_atom(f)}." for f in sorted(db, key=format_atom))
    return "\n".join(lines)


def _format_operand(operand) -> str:
    if isinstance(operand, Attribute):
        return operand.name
    if isinstance(operand, Null):
        return "null"
    return json.dumps(operand.symbol, ensure_ascii=False)


def _format_condition(condition) -> str:
    parts = [
        f"({'=' if c.equal else '!='} {_format_operand(c.left)} {_format_operand(c.right)})"
        for c in comparisons(condition)
    ]
    return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"


_BINARY_NAMES = {
    Union_: "union",
    JoinDiamond: "join",
    MinusBox: "minus",
    LeftOuterJoin: "left-outer-join",
}


def format_algebra(expr: AlgebraExpr) -> str:
    if isinstance(expr, Base):
        if expr.attributes is None:
            return expr.name
        return f"({' '.join((expr.name,) + expr.attributes)})"
    if isinstance(expr, SelectBox):
        return f"(select-box {_format_condition(expr.condition)} {format_algebra(expr.child)})"
    if isinstance(expr, Project):
        return f"(project ({' '.join(expr.attributes)}) {format_algebra(expr.child)})"
    if isinstance(expr, Rename):
        return f"(rename {expr.source} {expr.target} {format_algebra(expr.child)})"
    if isinstance(expr, Exists):
        keyword = "not-exists" if expr.negated else "exists"
        return f"({keyword} {format_algebra(expr.inner)} {format_algebra(expr.outer)})"
    name = _BINARY_NAMES[type(expr)]
    return f"({name} {format_algebra(expr.left)} {format_algebra(expr.right)})"
