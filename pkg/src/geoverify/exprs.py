"""Safe numeric expression evaluation shared by the kernel, traces, and assertions.

Supports the arithmetic subset that appears in GeoGebra-style scripts and in
final answers: literals, + - * / ^ (power), unary minus, parentheses, a small
function table (sqrt, trig, log, exp, abs, min, max, floor, ceil), and the
constants pi / e.  Implicit multiplication between a number and an identifier
or parenthesis ("2pi", "3(x+1)") is accepted.
"""

from __future__ import annotations

import ast
import math
import re
from typing import Callable, Mapping


class ExpressionError(ValueError):
    """Raised when an expression cannot be parsed or evaluated safely."""


_FUNCTIONS: dict[str, Callable[..., float]] = {
    "sqrt": math.sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "asin": math.asin,
    "acos": math.acos,
    "atan": math.atan,
    "atan2": math.atan2,
    "log": math.log,
    "ln": math.log,
    "log10": math.log10,
    "exp": math.exp,
    "abs": abs,
    "min": min,
    "max": max,
    "floor": math.floor,
    "ceil": math.ceil,
}

_CONSTANTS: dict[str, float] = {
    "pi": math.pi,
    "e": math.e,
    "tau": math.tau,
}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)

# number or closing paren followed by an identifier char or opening paren;
# scientific-notation exponents (1e-6, 2E+3) are not products
_IMPLICIT_MUL = re.compile(r"(?<=[0-9.\)])\s*(?=[A-Za-z_\(])(?![eE][-+]?\d)")


def normalize(text: str) -> str:
    """Rewrite surface syntax (^, unicode constants, implicit products) to Python form."""
    s = text.strip()
    s = s.replace("π", "pi").replace("·", "*").replace("×", "*")
    s = s.replace("−", "-").replace("–", "-")
    s = s.replace("^", "**")
    s = _IMPLICIT_MUL.sub("*", s)
    return s


def _check(node: ast.AST, variables: tuple[str, ...]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, variables)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ExpressionError(f"operator not allowed: {ast.dump(node.op)}")
        _check(node.left, variables)
        _check(node.right, variables)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_UNARY):
            raise ExpressionError("unary operator not allowed")
        _check(node.operand, variables)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("unknown function call")
        if node.keywords:
            raise ExpressionError("keyword arguments not allowed")
        for arg in node.args:
            _check(arg, variables)
    elif isinstance(node, ast.Name):
        if node.id not in _CONSTANTS and node.id not in variables:
            raise ExpressionError(f"unknown name: {node.id}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError("only numeric literals allowed")
    else:
        raise ExpressionError(f"syntax not allowed: {type(node).__name__}")


def compile_expression(text: str, variables: tuple[str, ...] = ("x",)) -> Callable[..., float]:
    """Compile an expression into a callable of the given positional variables."""
    normalized = normalize(text)
    if not normalized:
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(normalized, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    _check(tree, variables)
    code = compile(tree, "<expr>", "eval")
    names = dict(_FUNCTIONS)
    names.update(_CONSTANTS)

    def fn(*values: float) -> float:
        if len(values) != len(variables):
            raise ExpressionError(f"expected {len(variables)} argument(s)")
        scope = dict(names)
        scope.update(zip(variables, values))
        try:
            result = eval(code, {"__builtins__": {}}, scope)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ExpressionError(f"evaluation failed for {text!r}: {exc}") from None
        return float(result)

    return fn


def evaluate(text: str, bindings: Mapping[str, float] | None = None) -> float:
    """Evaluate a closed expression (optionally with named bindings) to a float."""
    names = tuple(bindings) if bindings else ()
    fn = compile_expression(text, variables=names)
    return fn(*(bindings[n] for n in names)) if bindings else fn()


def try_evaluate(text: str) -> float | None:
    """Evaluate a closed expression, returning None instead of raising."""
    try:
        return evaluate(text)
    except ExpressionError:
        return None
