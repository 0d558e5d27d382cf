"""
Possible-Worlds Oracle
======================

Brute-force reading of ⊥: a database with nulls stands for every
complete database obtained by replacing each null occurrence with a
constant of a finite domain. A condition is *sure* when it holds in all
those worlds and *maybe* when it holds in at least one.

The oracle is only meant for small inputs and guards against blow-up.
It checks the modal evaluator at the level of single literals and single
algebra operator decisions.

Example::

    space = WorldSpace.build({Predicate("q", (NULL,))}, constants=[a])
    oracle_sure(neg(Predicate("q", (a,))), space)   # False
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, FrozenSet, Iterable, Iterator, List, Sequence, Tuple, Union

from nested_datalog.algebra import (
    Attribute,
    Condition,
    Relation,
    comparisons,
    compatible,
    satisfies_box,
)
from nested_datalog.errors import LabError, TooManyNulls, UnboundBuiltin
from nested_datalog.evaluator import FactStore, answer
from nested_datalog.modal import modal_holds
from nested_datalog.model import (
    Constant,
    Database,
    Filter,
    Literal,
    Mode,
    Null,
    Predicate,
    Query,
    Value,
    literal_variables,
    value_sort_key,
)

logger = logging.getLogger(__name__)

MAX_NULLS = 8


@dataclass(frozen=True)
class WorldSpace:
    """A database with nulls and the constants its nulls may become."""

    base: Database
    domain: FrozenSet[Constant]

    @classmethod
    def build(
        cls,
        base: Iterable[Predicate],
        fresh_constants: int = 1,
        constants: Iterable[Constant] = (),
    ) -> "WorldSpace":
        """Domain = active constants of ``base`` and ``constants``, plus fresh ones ``_w0``, ``_w1``..."""
        if fresh_constants < 1:
            raise ValueError("at least one fresh constant is required")
        base = frozenset(base)
        active = {a for f in base for a in f.args if isinstance(a, Constant)}
        active.update(constants)
        fresh: List[Constant] = []
        counter = 0
        while len(fresh) < fresh_constants:
            candidate = Constant(f"_w{counter}")
            counter += 1
            if candidate not in active:
                fresh.append(candidate)
        return cls(base, frozenset(active) | frozenset(fresh))

    def ordered_domain(self) -> List[Constant]:
        return sorted(self.domain, key=value_sort_key)


def _fill(values: Sequence[Value], choice: Iterator[Constant]) -> Tuple[Value, ...]:
    return tuple(next(choice) if isinstance(v, Null) else v for v in values)


def _guard(count: int) -> None:
    if count > MAX_NULLS:
        raise TooManyNulls(f"{count} null occurrences; the oracle enumerates at most {MAX_NULLS}")


def _completions(values: Sequence[Value], domain: Sequence[Constant]) -> Iterator[Tuple[Value, ...]]:
    """Every per-occurrence replacement of the nulls of ``values``."""
    count = sum(1 for v in values if isinstance(v, Null))
    _guard(count)
    for combo in itertools.product(domain, repeat=count):
        yield _fill(values, iter(combo))


def enumerate_worlds(space: WorldSpace) -> Iterator[Database]:
    """
    Yield each complete database of the space.

    Raises
    ------
    TooManyNulls
        More than ``MAX_NULLS`` null occurrences.
    """
    facts = sorted(space.base, key=str)
    flat = [a for f in facts for a in f.args]
    for completed in _completions(flat, space.ordered_domain()):
        values = iter(completed)
        yield frozenset(Predicate(f.name, tuple(next(values) for _ in f.args)) for f in facts)


# ---------------------------------------------------------------------------
# Sure and maybe
# ---------------------------------------------------------------------------


def _literal_terms(lit: Literal) -> Tuple[Value, ...]:
    atom = lit.atom
    if isinstance(atom, Predicate):
        return atom.args  # type: ignore[return-value]
    if isinstance(atom, Filter):
        return (atom.left, atom.right)  # type: ignore[return-value]
    raise LabError(f"the oracle decides predicates and filters only, not {lit}")


def _rebuild(lit: Literal, terms: Sequence[Value]) -> Literal:
    atom = lit.atom
    if isinstance(atom, Predicate):
        return Literal(Predicate(atom.name, tuple(terms)), lit.positive)
    return Literal(Filter(terms[0], terms[1]), lit.positive)


def _holds_plain(world: Database, lit: Literal) -> bool:
    atom = lit.atom
    if isinstance(atom, Predicate):
        holds = atom in world
    else:
        holds = atom.left == atom.right
    return holds == lit.positive


def _literal_outcomes(lit: Literal, space: WorldSpace) -> Iterator[bool]:
    missing = literal_variables(lit)
    if missing:
        raise UnboundBuiltin(lit, missing)
    terms = _literal_terms(lit)
    facts = sorted(space.base, key=str)
    flat = [a for f in facts for a in f.args] + list(terms)
    for completed in _completions(flat, space.ordered_domain()):
        values = iter(completed)
        world = frozenset(Predicate(f.name, tuple(next(values) for _ in f.args)) for f in facts)
        yield _holds_plain(world, _rebuild(lit, [next(values) for _ in terms]))


def _query_outcomes(query: Query, space: WorldSpace) -> Iterator[bool]:
    plain = Query(query.goal, query.program.erase_modes())
    for world in enumerate_worlds(space):
        yield bool(answer(plain, world))


Target = Union[Literal, Query]


def _outcomes(target: Target, space: WorldSpace) -> Iterator[bool]:
    if isinstance(target, Query):
        return _query_outcomes(target, space)
    return _literal_outcomes(target, space)


def oracle_sure(target: Target, space: WorldSpace) -> bool:
    """True iff the ground literal (or the query's non-emptiness) holds in every world."""
    return all(_outcomes(target, space))


def oracle_maybe(target: Target, space: WorldSpace) -> bool:
    """True iff the ground literal (or the query's non-emptiness) holds in some world."""
    return any(_outcomes(target, space))


# ---------------------------------------------------------------------------
# Agreement checks
# ---------------------------------------------------------------------------


@dataclass
class LiteralCheck:
    literal: Literal
    box: bool
    diamond: bool
    sure: bool
    maybe: bool

    @property
    def agrees(self) -> bool:
        return self.box == self.sure and self.diamond == self.maybe


def check_literal_against_oracle(lit: Literal, space: WorldSpace) -> LiteralCheck:
    """
    Compare the box/diamond decision on ``lit`` with sure/maybe over the worlds.

    Agreement is expected for filters and negative predicates.
    """
    store = FactStore(space.base, base=space.base)
    check = LiteralCheck(
        lit,
        box=modal_holds(store, {}, lit, Mode.BOX),
        diamond=modal_holds(store, {}, lit, Mode.DIAMOND),
        sure=oracle_sure(lit, space),
        maybe=oracle_maybe(lit, space),
    )
    if not check.agrees:
        logger.warning("oracle disagrees on %s: %s", lit, check)
    return check


@dataclass
class TupleDecision:
    """One decision of an operator: the tuples involved, its verdict and the oracle's."""

    rows: Tuple[Tuple[Value, ...], ...]
    decision: bool
    oracle: bool

    @property
    def agrees(self) -> bool:
        return self.decision == self.oracle


@dataclass
class OperatorCheck:
    operator: str
    decisions: List[TupleDecision] = field(default_factory=list)

    @property
    def disagreements(self) -> List[TupleDecision]:
        return [d for d in self.decisions if not d.agrees]

    @property
    def agrees(self) -> bool:
        return not self.disagreements


def _domain_for(values: Iterable[Value], fresh_constants: int) -> List[Constant]:
    space = WorldSpace.build((), fresh_constants, [v for v in values if isinstance(v, Constant)])
    return space.ordered_domain()


def _maybe_equal(
    left: dict, right: dict, shared: Sequence[str], domain: Sequence[Constant]
) -> bool:
    values = [left[a] for a in shared] + [right[a] for a in shared]
    n = len(shared)
    return any(c[:n] == c[n:] for c in _completions(values, domain))


def _sure(values: Sequence[Value], domain: Sequence[Constant], test: Callable[[Tuple[Value, ...]], bool]) -> bool:
    return all(test(c) for c in _completions(values, domain))


OPERATORS = ("join_diamond", "minus_box", "select_box")


def check_operator_against_oracle(
    operator: str,
    left: Relation,
    right: Union[Relation, Condition],
    fresh_constants: int = 1,
) -> OperatorCheck:
    """
    Check each tuple-level decision of an algebra operator against the worlds.

    ``join_diamond``: a pair joins iff some completion makes the shared
    attributes equal. ``minus_box``: a left tuple survives iff no right
    tuple could equal it on the shared attributes. ``select_box``: a tuple
    is kept iff the condition holds in every completion of the tuple.
    """
    if operator not in OPERATORS:
        raise LabError(f"unknown operator {operator!r}; use one of {', '.join(OPERATORS)}")
    report = OperatorCheck(operator)

    if operator == "select_box":
        for row in left.sorted_rows():
            values: List[Value] = list(row)
            refs = []
            for comp in comparisons(right):
                slots = []
                for operand in (comp.left, comp.right):
                    if isinstance(operand, Attribute):
                        slots.append(left.schema.index(operand.name))
                    else:
                        values.append(operand)
                        slots.append(len(values) - 1)
                refs.append((slots[0], slots[1], comp.equal))

            def test(completed, refs=refs):
                return all((completed[i] == completed[j]) == equal for i, j, equal in refs)

            decision = satisfies_box(right, dict(zip(left.schema, row)))
            domain = _domain_for(values, fresh_constants)
            report.decisions.append(TupleDecision((row,), decision, _sure(values, domain, test)))
        return report

    shared = [a for a in left.schema if a in right.schema]
    for lrow in left.sorted_rows():
        lmap = dict(zip(left.schema, lrow))
        pairs = []
        for rrow in right.sorted_rows():
            rmap = dict(zip(right.schema, rrow))
            domain = _domain_for(list(lrow) + list(rrow), fresh_constants)
            pairs.append((rrow, compatible(lmap, rmap), _maybe_equal(lmap, rmap, shared, domain)))
        if operator == "join_diamond":
            for rrow, decision, oracle in pairs:
                report.decisions.append(TupleDecision((lrow, rrow), decision, oracle))
        else:
            decision = not any(d for _, d, _ in pairs)
            oracle = not any(o for _, _, o in pairs)
            report.decisions.append(TupleDecision((lrow,), decision, oracle))
    return report

