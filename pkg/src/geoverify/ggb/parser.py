"""Parser for the GeoGebra command subset.

Script format: one command per line or several separated by ``;``.  A command
is ``name=Head(args)``, a bare ``Head(args)``, or a point literal
``name=(x, y)``.  ``#`` starts a comment.  Identifier arguments must refer to
commands defined on earlier lines (the construction is a DAG).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .. import exprs

HEAD_ARITY: dict[str, tuple[int, int]] = {
    "Point": (1, 2),
    "Line": (2, 2),
    "Segment": (2, 2),
    "Ray": (2, 2),
    "Circle": (2, 2),
    "Ellipse": (3, 4),
    "Polygon": (3, 64),
    "Midpoint": (1, 2),
    "Intersect": (2, 3),
    "PerpendicularLine": (2, 2),
    "ParallelLine": (2, 2),
    "Tangent": (2, 3),
    "FunctionGraph": (1, 3),
    "Angle": (3, 3),
    "Distance": (2, 2),
    "SetVisible": (2, 2),
    "SetLabel": (2, 2),
}

SIDE_EFFECT_HEADS = ("SetVisible", "SetLabel")


class GgbParseError(Exception):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class GgbSyntaxError(GgbParseError):
    pass


class UnknownCommand(GgbParseError):
    def __init__(self, line: int, head: str):
        super().__init__(line, f"unknown command head {head!r}")
        self.head = head


class ForwardReference(GgbParseError):
    def __init__(self, line: int, name: str):
        super().__init__(line, f"reference to undefined name {name!r}")
        self.name = name


@dataclass(frozen=True)
class RefArg:
    name: str


@dataclass(frozen=True)
class NumArg:
    value: float


@dataclass(frozen=True)
class PairArg:
    x: float
    y: float


@dataclass(frozen=True)
class StrArg:
    text: str


@dataclass(frozen=True)
class BoolArg:
    value: bool


@dataclass(frozen=True)
class ExprArg:
    text: str


Arg = Union[RefArg, NumArg, PairArg, StrArg, BoolArg, ExprArg]


@dataclass(frozen=True)
class GgbCommand:
    name: str
    head: str
    args: tuple[Arg, ...]
    line: int
    raw: str
    anonymous: bool = False


@dataclass(frozen=True)
class GgbProgram:
    commands: tuple[GgbCommand, ...]
    source: str

    def names(self) -> list[str]:
        return [c.name for c in self.commands]


_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_']*$")


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out)


def _split_top(text: str, sep: str) -> list[str]:
    """Split on sep at paren depth 0, outside quoted strings."""
    parts: list[str] = []
    depth = 0
    in_str = False
    cur: list[str] = []
    for ch in text:
        if ch == '"':
            in_str = not in_str
        elif not in_str:
            if ch in "([":
                depth += 1
            elif ch in ")]":
                depth -= 1
            elif ch == sep and depth == 0:
                parts.append("".join(cur))
                cur = []
                continue
        cur.append(ch)
    parts.append("".join(cur))
    return parts


def _parse_arg(text: str, line_no: int, defined: set[str]) -> Arg:
    s = text.strip()
    if not s:
        raise GgbSyntaxError(line_no, "empty argument")
    if s.startswith('"') and s.endswith('"') and len(s) >= 2:
        return StrArg(s[1:-1])
    if s.lower() in ("true", "false"):
        return BoolArg(s.lower() == "true")
    if _IDENT.match(s):
        if s in HEAD_ARITY:
            raise GgbSyntaxError(line_no, f"nested command call {s!r} not supported")
        if s in defined:
            return RefArg(s)
        closed = exprs.try_evaluate(s)
        if closed is not None:  # constants like pi
            return NumArg(closed)
        if s == "x":  # the function variable
            return ExprArg(s)
        raise ForwardReference(line_no, s)
    if s.startswith("(") and s.endswith(")"):
        inner = _split_top(s[1:-1], ",")
        if len(inner) == 2:
            try:
                return PairArg(exprs.evaluate(inner[0]), exprs.evaluate(inner[1]))
            except exprs.ExpressionError as exc:
                raise GgbSyntaxError(line_no, f"bad coordinate pair {s!r}: {exc}") from None
    value = exprs.try_evaluate(s)
    if value is not None:
        return NumArg(value)
    # identifier-bearing expression (function body in x)
    try:
        exprs.compile_expression(s, variables=("x",))
    except exprs.ExpressionError as exc:
        raise GgbSyntaxError(line_no, f"cannot parse argument {s!r}: {exc}") from None
    return ExprArg(s)


def parse_program(source: str) -> GgbProgram:
    """Parse a full script; raises on unknown heads, arity, or forward references."""
    commands: list[GgbCommand] = []
    defined: set[str] = set()
    anon_counters: dict[str, int] = {}
    for line_no, raw_line in enumerate(source.split("\n"), start=1):
        stripped = _strip_comment(raw_line)
        for stmt in _split_top(stripped, ";"):
            stmt = stmt.strip()
            if not stmt:
                continue
            name, rhs, anonymous = _split_assignment(stmt, line_no)
            head, args = _parse_rhs(rhs, line_no, defined)
            lo, hi = HEAD_ARITY[head]
            if not (lo <= len(args) <= hi):
                raise GgbSyntaxError(
                    line_no, f"{head} expects {lo}..{hi} arguments, got {len(args)}"
                )
            if anonymous:
                k = anon_counters.get(head, 0) + 1
                anon_counters[head] = k
                name = f"{head.lower()}_{k}"
                while name in defined:
                    k += 1
                    anon_counters[head] = k
                    name = f"{head.lower()}_{k}"
            if name in defined:
                raise GgbSyntaxError(line_no, f"duplicate name {name!r}")
            defined.add(name)
            commands.append(
                GgbCommand(name=name, head=head, args=tuple(args),
                           line=line_no, raw=stmt, anonymous=anonymous)
            )
    return GgbProgram(commands=tuple(commands), source=source)


def _split_assignment(stmt: str, line_no: int) -> tuple[str, str, bool]:
    eq = -1
    depth = 0
    in_str = False
    for i, ch in enumerate(stmt):
        if ch == '"':
            in_str = not in_str
        elif not in_str:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "=" and depth == 0:
                eq = i
                break
    if eq < 0:
        return "", stmt.strip(), True
    name = stmt[:eq].strip()
    if not _IDENT.match(name):
        raise GgbSyntaxError(line_no, f"bad name {name!r}")
    return name, stmt[eq + 1 :].strip(), False


def _parse_rhs(rhs: str, line_no: int, defined: set[str]) -> tuple[str, list[Arg]]:
    if rhs.startswith("("):
        arg = _parse_arg(rhs, line_no, defined)
        if not isinstance(arg, PairArg):
            raise GgbSyntaxError(line_no, f"expected coordinate pair, got {rhs!r}")
        return "Point", [arg]
    call = re.match(r"^([A-Za-z][A-Za-z0-9_]*)\s*\((.*)\)\s*$", rhs, re.DOTALL)
    if not call:
        raise GgbSyntaxError(line_no, f"cannot parse command {rhs!r}")
    head = call.group(1)
    if head not in HEAD_ARITY:
        raise UnknownCommand(line_no, head)
    body = call.group(2).strip()
    if not body:
        raise GgbSyntaxError(line_no, f"{head} requires arguments")
    args = [_parse_arg(a, line_no, defined) for a in _split_top(body, ",")]
    return head, args
