"""
EXISTS Semantics Profiles
=========================

A semantics profile fixes how the current outer tuple is pushed into the
query of a ``FILTER EXISTS`` / ``NOT EXISTS``. Three knobs cover the
behaviours observed across engines:

* ``free_var_policy``: ``correlate`` pins free inner variables to the
  outer value; ``decorrelate`` renames them apart and pins them to ⊥;
* ``improper_substitution``: also pin outer variables that the inner query
  mentions but neither returns nor uses freely;
* ``substitution_points``: where the goal-variable lets are attached
  (``top``, ``mid``, ``bottom``, ``leaves``, ``leaves-plus-top``) or an
  explicit set of :class:`~nested_datalog.nesting.SubstitutionPoint`.

Example::

    profile = get_profile("rdf4j")
    relation = eval_exists_filter(outer, inner, False, profile, relations)
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Mapping, Sequence, Tuple, Union

from nested_datalog.algebra import (
    AlgebraExpr,
    Relation,
    eval_algebra,
    relations_to_database,
    translate_algebra,
)
from nested_datalog.errors import InvalidPoint, UnknownProfile
from nested_datalog.modal import modal_answer, realize_logical_lets
from nested_datalog.model import (
    NULL,
    FreshNames,
    Mode,
    Query,
    Rule,
    Substitution,
    Value,
    Variable,
    let,
    rename_variables,
    rule_variables,
    variables_of,
)
from nested_datalog.nesting import (
    SubstitutionPoint,
    SubstitutionStrategy,
    all_free_variables,
    goal_substitution,
    improper_anchors,
    push_down,
    rule_free_variables,
    substitute_at_points,
    substitute_improper,
    substitute_logical_topdown,
    substitute_syntactic,
)

logger = logging.getLogger(__name__)

CORRELATE = "correlate"
DECORRELATE = "decorrelate"
PLACEMENTS = ("top", "mid", "bottom", "leaves", "leaves-plus-top")
MID_ROUNDS = 2

Points = Union[str, FrozenSet[SubstitutionPoint]]


@dataclass(frozen=True)
class SemanticsProfile:
    """One EXISTS semantics, as a triple of knobs."""

    name: str
    free_var_policy: str = CORRELATE
    improper_substitution: bool = False
    substitution_points: Points = "top"

    def __post_init__(self) -> None:
        if self.free_var_policy not in (CORRELATE, DECORRELATE):
            raise UnknownProfile(f"unknown free-variable policy {self.free_var_policy!r}")
        if isinstance(self.substitution_points, str) and self.substitution_points not in PLACEMENTS:
            raise InvalidPoint(
                f"unknown placement {self.substitution_points!r}; use one of {', '.join(PLACEMENTS)}"
            )

    def with_knob(self, knob: str, value) -> "SemanticsProfile":
        label = value if not isinstance(value, bool) else ("on" if value else "off")
        return replace(self, name=f"{self.name}[{knob}={label}]", **{knob: value})

    def describe(self) -> str:
        points = self.substitution_points
        if not isinstance(points, str):
            points = "points=" + ",".join(sorted(str(p) for p in points))
        improper = "on" if self.improper_substitution else "off"
        return f"{self.name}: {self.free_var_policy}, improper {improper}, {points}"


PRESETS: Dict[str, SemanticsProfile] = {
    "fuseki": SemanticsProfile("fuseki", DECORRELATE, True, "leaves"),
    "blazegraph": SemanticsProfile("blazegraph", CORRELATE, True, "leaves"),
    "rdf4j": SemanticsProfile("rdf4j", CORRELATE, False, "mid"),
    "virtuoso": SemanticsProfile("virtuoso", CORRELATE, False, "leaves-plus-top"),
    "spec-top-down": SemanticsProfile("spec-top-down", CORRELATE, False, "top"),
    "spec-bottom-up": SemanticsProfile("spec-bottom-up", CORRELATE, False, "bottom"),
}

ENGINE_PRESETS = ("fuseki", "blazegraph", "virtuoso", "rdf4j")


def get_profile(name: Union[str, SemanticsProfile]) -> SemanticsProfile:
    """Look up a preset by name (profiles pass through unchanged)."""
    if isinstance(name, SemanticsProfile):
        return name
    try:
        return PRESETS[name.strip()]
    except KeyError:
        raise UnknownProfile(f"unknown profile {name!r}; known: {', '.join(PRESETS)}")


# ---------------------------------------------------------------------------
# Substitution under a profile
# ---------------------------------------------------------------------------


def decorrelate(query: Query, fresh: FreshNames) -> Query:
    """Rename every free variable apart, rule by rule, and pin the copy to ⊥."""
    rules = []
    for rule in query.program.rules:
        free = sorted(rule_free_variables(rule))
        if not free:
            rules.append(rule)
            continue
        mapping = {v: fresh.variable(v) for v in free}
        renamed = rename_variables(mapping, rule)
        pins = tuple(let(Variable(new), NULL) for new in mapping.values())
        rules.append(Rule(renamed.head, renamed.body + pins, renamed.mode))
        logger.debug("decorrelated %s in %s", ", ".join(free), rule.head)
    return Query(query.goal, query.program.with_rules(rules))


def _pin_goal_rules(theta: Mapping[str, Value], query: Query) -> Query:
    """Append plain lets for the goal variables to every rule defining the goal."""
    program = query.program
    for index in program.rules_for(query.goal.name):
        rule = program.rules[index]
        pins = []
        for head_term, goal_term in zip(rule.head.args, query.goal.args):
            if isinstance(goal_term, Variable) and goal_term.name in theta:
                pins.append(let(head_term, theta[goal_term.name]))
        if pins:
            program = program.replace_rule(index, Rule(rule.head, rule.body + tuple(pins), rule.mode))
    return Query(query.goal, program)


def _attach_improper(theta: Mapping[str, Value], query: Query, names, fresh: FreshNames) -> Query:
    for name in names:
        if name not in theta:
            continue
        for anchor in improper_anchors(query, name):
            query = substitute_improper(theta, query, anchor, name, fresh)
    return query


def _place_goal_lets(theta: Substitution, query: Query, points: Points, fresh: FreshNames) -> Query:
    if not isinstance(points, str):
        return substitute_at_points(theta, query, points, Mode.DIAMOND)
    subst = goal_substitution(theta, query)
    if points == "leaves-plus-top":
        query = _pin_goal_rules(subst, query)
    query = substitute_logical_topdown(theta, query, fresh, Mode.DIAMOND)
    if points == "top":
        return query
    if points == "mid":
        return push_down(query, MID_ROUNDS, fresh)
    query = push_down(query, None, fresh)
    if points in ("leaves", "leaves-plus-top"):
        query = _attach_improper(theta, query, subst, fresh)
    return query


def correlation_roles(theta: Substitution, query: Query) -> Dict[str, str]:
    """How each outer variable relates to the inner query: goal, free, other or unused."""
    goal = set(variables_of(query.goal.args))
    free = all_free_variables(query)
    mentioned = {v for rule in query.program.rules for v in rule_variables(rule)}
    roles = {}
    for name in theta:
        if name in goal:
            roles[name] = "goal"
        elif name in free:
            roles[name] = "free"
        elif name in mentioned:
            roles[name] = "other"
        else:
            roles[name] = "unused"
    return roles


def apply_profile_substitution(
    theta: Substitution, inner: Query, profile: SemanticsProfile
) -> Query:
    """
    Build θ(Q) for a nested query under ``profile``.

    Parameters
    ----------
    theta : Substitution
        The current outer tuple; unbound attributes are ⊥.
    inner : Query
        The nested (modal) query.
    profile : SemanticsProfile

    Returns
    -------
    Query
        A modal query with every logical let realised.
    """
    fresh = FreshNames.for_query(inner, theta.keys())
    roles = correlation_roles(theta, inner)
    logger.debug("profile %s, roles %s", profile.name, roles)

    if profile.free_var_policy == DECORRELATE:
        query = decorrelate(inner, fresh)
    else:
        query = Query(inner.goal, substitute_syntactic(theta, inner.program))

    query = _place_goal_lets(theta, query, profile.substitution_points, fresh)

    if profile.improper_substitution:
        others = [name for name, role in roles.items() if role == "other"]
        query = _attach_improper(theta, query, others, fresh)

    return Query(query.goal, realize_logical_lets(query.program, fresh))


@dataclass(frozen=True)
class ProfileStrategy(SubstitutionStrategy):
    """Nested-atom strategy that instantiates through a semantics profile."""

    profile: SemanticsProfile = field(default_factory=lambda: PRESETS["spec-top-down"])

    @property
    def name(self) -> str:  # type: ignore[override]
        return self.profile.name

    def instantiate(self, theta: Substitution, query: Query) -> Query:
        return apply_profile_substitution(theta, query, self.profile)

    def __str__(self) -> str:
        return self.profile.name


# ---------------------------------------------------------------------------
# FILTER EXISTS over relations
# ---------------------------------------------------------------------------


def tuple_substitution(schema: Sequence[str], row: Sequence[Value]) -> Dict[str, Value]:
    return dict(zip(schema, row))


def eval_exists_filter(
    outer: Relation,
    inner: AlgebraExpr,
    negated: bool,
    profile: SemanticsProfile,
    relations: Mapping[str, Relation],
) -> Relation:
    """
    Keep the outer tuples ``μ`` for which ``μ(inner)`` has a solution (none when negated).
    """
    schemas = {name: rel.schema for name, rel in relations.items()}
    query = translate_algebra(inner, schemas, free=outer.schema)
    db = relations_to_database(relations)
    strategy = ProfileStrategy(profile)
    kept = set()
    for row in outer.sorted_rows():
        theta = tuple_substitution(outer.schema, row)
        instantiated = strategy.instantiate(theta, query)
        found = bool(modal_answer(instantiated, db, strategy))
        logger.debug("exists %s for %s: %s", profile.name, row, found)
        if found != negated:
            kept.add(row)
    return Relation(outer.schema, frozenset(kept))


# ---------------------------------------------------------------------------
# Comparing profiles
# ---------------------------------------------------------------------------


@dataclass
class ComparisonReport:
    """Answers of one expression under several profiles.

    ``matrix[row][profile]`` tells whether ``row`` is an answer under the
    profile; ``flipped_by[row]`` lists the knobs of the first profile whose
    toggling changes the row's membership.
    """

    schema: Tuple[str, ...]
    profiles: List[str]
    answers: Dict[str, Relation]
    matrix: Dict[Tuple[Value, ...], Dict[str, bool]] = field(default_factory=dict)
    flipped_by: Dict[Tuple[Value, ...], List[str]] = field(default_factory=dict)

    @property
    def disagreements(self) -> List[Tuple[Value, ...]]:
        return [row for row, cells in self.matrix.items() if len(set(cells.values())) > 1]

    @property
    def agree(self) -> bool:
        return not self.disagreements


def knob_variants(profile: SemanticsProfile) -> List[Tuple[str, SemanticsProfile]]:
    """Profiles differing from ``profile`` in exactly one knob."""
    variants = [
        (
            "free_var_policy",
            profile.with_knob(
                "free_var_policy",
                DECORRELATE if profile.free_var_policy == CORRELATE else CORRELATE,
            ),
        ),
        (
            "improper_substitution",
            profile.with_knob("improper_substitution", not profile.improper_substitution),
        ),
    ]
    for placement in PLACEMENTS:
        if placement != profile.substitution_points:
            variants.append(
                ("substitution_points", profile.with_knob("substitution_points", placement))
            )
    return variants


def compare_profiles(
    expr: AlgebraExpr,
    relations: Mapping[str, Relation],
    profiles: Sequence[Union[str, SemanticsProfile]],
) -> ComparisonReport:
    """
    Evaluate ``expr`` under every profile and attribute each disagreement.

    Raises
    ------
    UnknownProfile
        A profile name is not a preset.
    """
    resolved = [get_profile(p) for p in profiles]
    if not resolved:
        raise UnknownProfile("no profiles to compare")
    answers = {p.name: eval_algebra(expr, relations, p) for p in resolved}
    schema = next(iter(answers.values())).schema
    report = ComparisonReport(schema, [p.name for p in resolved], answers)

    rows = sorted(
        {row for rel in answers.values() for row in rel.rows}, key=Relation.row_key
    )
    for row in rows:
        report.matrix[row] = {name: row in rel.rows for name, rel in answers.items()}

    reference = resolved[0]
    cache: Dict[SemanticsProfile, Relation] = {}
    for row in report.disagreements:
        knobs: List[str] = []
        for knob, variant in knob_variants(reference):
            if variant not in cache:
                cache[variant] = eval_algebra(expr, relations, variant)
            flipped = (row in cache[variant].rows) != report.matrix[row][reference.name]
            if flipped and knob not in knobs:
                knobs.append(knob)
        report.flipped_by[row] = knobs
        logger.debug("row %s flipped by %s", row, knobs)
    return report
