"""GeoGebra-subset kernel: parsing, execution, and geometric predicates."""

from .engine import ExecutionError, execute_program, intersect_objects
from .objects import (
    AngleMark,
    Circle,
    ConstructionState,
    Ellipse,
    FunctionGraph,
    GeomObject,
    Line,
    Point,
    Polygon,
    Ray,
    Scalar,
    Segment,
    kind_of,
)
from .parser import (
    ForwardReference,
    GgbCommand,
    GgbParseError,
    GgbProgram,
    GgbSyntaxError,
    UnknownCommand,
    parse_program,
)
from .predicates import (
    Assertion,
    AssertionVerdict,
    FormScore,
    InvalidPredicate,
    NoAssertions,
    PredicateError,
    UnknownName,
    check_hard_constraints,
    eval_assertions,
    eval_predicate,
    parse_assertion,
    parse_assertion_file,
)

__all__ = [
    "AngleMark", "Assertion", "AssertionVerdict", "Circle", "ConstructionState",
    "Ellipse", "ExecutionError", "FormScore", "ForwardReference", "FunctionGraph",
    "GeomObject", "GgbCommand", "GgbParseError", "GgbProgram", "GgbSyntaxError",
    "InvalidPredicate", "Line", "NoAssertions", "Point", "Polygon", "PredicateError",
    "Ray", "Scalar", "Segment", "UnknownCommand", "UnknownName",
    "check_hard_constraints", "eval_assertions", "eval_predicate",
    "execute_program", "intersect_objects", "kind_of", "parse_assertion",
    "parse_assertion_file", "parse_program",
]
