"""
Nested Datalog Workbench
========================

Stratified Datalog, Nested Datalog with configurable substitution
strategies, Modal Datalog over databases with the null value ⊥, and a
null-aware relational algebra whose EXISTS filters can be evaluated
under several engine-like semantics profiles.
"""

__version__ = "1.0.0"

from nested_datalog.algebra import Relation, eval_algebra, translate_algebra
from nested_datalog.evaluator import answer, fixpoint
from nested_datalog.modal import modal_answer
from nested_datalog.model import NULL, Constant, Mode, Predicate, Program, Query, Rule, Variable
from nested_datalog.profiles import PRESETS, SemanticsProfile, compare_profiles, get_profile
from nested_datalog.session import Lab, LabConfig

__all__ = [
    "NULL",
    "Constant",
    "Lab",
    "LabConfig",
    "Mode",
    "PRESETS",
    "Predicate",
    "Program",
    "Query",
    "Relation",
    "Rule",
    "SemanticsProfile",
    "Variable",
    "answer",
    "compare_profiles",
    "eval_algebra",
    "fixpoint",
    "get_profile",
    "modal_answer",
    "translate_algebra",
]
