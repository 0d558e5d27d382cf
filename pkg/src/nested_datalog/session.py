"""
Lab Session Orchestrator
========================

Coordinates one workbench run end to end:

  1. Load the facts file (and its ``@schema`` declarations)
  2. Parse the program or algebra expression
  3. Evaluate, translate, compare profiles or consult the oracle
  4. Assemble a :class:`~nested_datalog.output.ResultTable`
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from nested_datalog.algebra import (
    AlgebraExpr,
    JoinDiamond,
    MinusBox,
    Relation,
    SelectBox,
    database_to_relations,
    eval_algebra,
    schema_of,
    translate_algebra,
)
from nested_datalog.errors import LabError
from nested_datalog.evaluator import answer
from nested_datalog.modal import modal_answer
from nested_datalog.model import Constant, Database, Filter, Variable
from nested_datalog.nesting import parse_strategy
from nested_datalog.oracle import WorldSpace, check_literal_against_oracle, check_operator_against_oracle
from nested_datalog.output import ResultTable
from nested_datalog.profiles import ENGINE_PRESETS, compare_profiles, get_profile
from nested_datalog.syntax import (
    format_query,
    parse_algebra,
    parse_facts_with_schemas,
    parse_literal,
    parse_query,
)

logger = logging.getLogger(__name__)

COMMANDS = ("eval", "algebra", "translate", "compare", "oracle")


@dataclass
class LabConfig:
    """Every knob of one workbench run."""

    command: str = "eval"
    program_file: str = ""
    facts_file: str = ""
    expr: str = ""
    goal: Optional[str] = None
    modal: bool = False
    strategy: str = "top-down"
    profile: str = "spec-top-down"
    profiles: List[str] = field(default_factory=lambda: list(ENGINE_PRESETS))
    let_rename: bool = False
    check: str = "literal"
    literal: Optional[str] = None
    fresh_constants: int = 1
    output_format: str = "table"
    trace: bool = False


def read_text(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"No such file: {path}")
    return p.read_text(encoding="utf-8")


def expression_text(expr: str) -> str:
    """An algebra expression given inline (starting with ``(``) or as a file path."""
    stripped = expr.strip()
    if stripped.startswith("("):
        return stripped
    return read_text(expr)


class Lab:
    """
    Runs the workbench commands.

    Example::

        config = LabConfig(
            command="compare",
            expr="data/intro.algebra",
            facts_file="data/intro.facts",
            profiles=["fuseki", "virtuoso", "rdf4j"],
        )
        table = Lab().run(config)
    """

    def run(self, config: LabConfig) -> ResultTable:
        """
        Execute the configured command.

        Parameters
        ----------
        config : LabConfig

        Returns
        -------
        ResultTable
        """
        if config.command not in COMMANDS:
            raise LabError(f"unknown command {config.command!r}")
        logger.info("Running %s", config.command)
        handler = getattr(self, f"run_{config.command}")
        result = handler(config)
        logger.info("%s produced %d rows", config.command, result.row_count)
        return result

    # -- inputs -------------------------------------------------------------

    @staticmethod
    def load_facts(path: str) -> Tuple[Database, Dict[str, Tuple[str, ...]]]:
        if not path:
            return frozenset(), {}
        db, schemas = parse_facts_with_schemas(read_text(path))
        logger.info("Loaded %d facts from %s", len(db), path)
        return db, schemas

    def load_relations(self, path: str) -> Dict[str, Relation]:
        db, schemas = self.load_facts(path)
        return database_to_relations(db, schemas)

    # -- commands -----------------------------------------------------------

    def run_eval(self, config: LabConfig) -> ResultTable:
        if not config.program_file:
            raise LabError("eval needs a program file")
        query = parse_query(read_text(config.program_file), config.goal)
        db, _ = self.load_facts(config.facts_file)
        strategy = parse_strategy(config.strategy)
        if config.modal or query.program.is_modal:
            facts = modal_answer(query, db, strategy)
        else:
            facts = answer(query, db, strategy)
        columns = [
            str(a) if isinstance(a, Variable) else f"#{i + 1}" for i, a in enumerate(query.goal.args)
        ]
        return ResultTable(columns, [list(f.args) for f in facts])

    def run_algebra(self, config: LabConfig) -> ResultTable:
        relations = self.load_relations(config.facts_file)
        expr = self._expression(config, relations)
        relation = eval_algebra(expr, relations, get_profile(config.profile))
        return ResultTable(list(relation.schema), [list(r) for r in relation.rows])

    def run_translate(self, config: LabConfig) -> ResultTable:
        relations = self.load_relations(config.facts_file) if config.facts_file else {}
        expr = self._expression(config, relations)
        schemas = {name: rel.schema for name, rel in relations.items()}
        query = translate_algebra(expr, schemas, let_rename=config.let_rename)
        lines = format_query(query).splitlines()
        return ResultTable(["rule"], [[line] for line in lines], ordered=True)

    def run_compare(self, config: LabConfig) -> ResultTable:
        relations = self.load_relations(config.facts_file)
        expr = self._expression(config, relations)
        report = compare_profiles(expr, relations, config.profiles)
        rows = []
        for row, cells in report.matrix.items():
            rows.append(
                list(row)
                + [cells[name] for name in report.profiles]
                + [report.flipped_by.get(row, [])]
            )
        notes = [get_profile(name).describe() for name in config.profiles]
        return ResultTable(list(report.schema) + report.profiles + ["flipped_by"], rows, notes)

    def run_oracle(self, config: LabConfig) -> ResultTable:
        if config.check == "literal":
            if not config.literal:
                raise LabError("oracle --check literal needs --literal")
            db, _ = self.load_facts(config.facts_file)
            lit = parse_literal(config.literal)
            atom = lit.atom
            terms = (atom.left, atom.right) if isinstance(atom, Filter) else getattr(atom, "args", ())
            constants = [a for a in terms if isinstance(a, Constant)]
            space = WorldSpace.build(db, config.fresh_constants, constants)
            check = check_literal_against_oracle(lit, space)
            return ResultTable(
                ["literal", "box", "diamond", "sure", "maybe", "agrees"],
                [[str(lit), check.box, check.diamond, check.sure, check.maybe, check.agrees]],
            )
        if config.check == "operator":
            relations = self.load_relations(config.facts_file)
            expr = self._expression(config, relations)
            operator, left, right = self._operator_inputs(expr, relations)
            report = check_operator_against_oracle(operator, left, right, config.fresh_constants)
            rows = [
                [" | ".join(_format_row(r) for r in d.rows), d.decision, d.oracle, d.agrees]
                for d in report.decisions
            ]
            return ResultTable(["tuples", "decision", "oracle", "agrees"], rows, [operator])
        raise LabError(f"unknown oracle check {config.check!r}; use literal or operator")

    # -- helpers ------------------------------------------------------------

    @staticmethod
    def _expression(config: LabConfig, relations: Dict[str, Relation]) -> AlgebraExpr:
        if not config.expr:
            raise LabError(f"{config.command} needs an algebra expression")
        expr = parse_algebra(expression_text(config.expr))
        schema_of(expr, {name: rel.schema for name, rel in relations.items()})
        return expr

    @staticmethod
    def _operator_inputs(expr: AlgebraExpr, relations: Dict[str, Relation]):
        if isinstance(expr, SelectBox):
            return "select_box", eval_algebra(expr.child, relations), expr.condition
        if isinstance(expr, (JoinDiamond, MinusBox)):
            name = "join_diamond" if isinstance(expr, JoinDiamond) else "minus_box"
            return name, eval_algebra(expr.left, relations), eval_algebra(expr.right, relations)
        kind = type(expr).__name__
        raise LabError(f"the operator oracle checks select-box, join and minus, not {kind}")


def _format_row(row: Sequence) -> str:
    return "(" + ", ".join("⊥" if not isinstance(v, Constant) else v.symbol for v in row) + ")"
