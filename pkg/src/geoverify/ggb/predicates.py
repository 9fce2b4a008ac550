"""Boolean geometric predicates and weighted assertion scoring.

All predicates are evaluated numerically with a tolerance ``eps`` applied to
unit-normalized residuals, so verdicts are invariant under rigid motions and
uniform scaling of the configuration.

Assertion text format (one per line): ``Predicate(arg, ...)`` with optional
``@weight=<float>`` and ``@key`` annotations; ``#`` starts a comment.
Arguments may be object names, numeric literals, coordinate pairs ``(x, y)``,
or ``dist(A, B)`` measurements.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .. import exprs
from .engine import _segment_distance, intersect_objects
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
)
from .parser import GgbProgram, _split_top

DEFAULT_EPS = 1e-7

PREDICATE_ARITY: dict[str, tuple[int, int]] = {
    "AreCollinear": (3, 3),
    "AreConcurrent": (3, 3),
    "AreConcyclic": (4, 4),
    "AreParallel": (2, 2),
    "ArePerpendicular": (2, 2),
    "IsTangent": (2, 2),
    "IsInRegion": (2, 2),
    "IsOnObject": (2, 2),
    "EqualsWithin": (2, 3),
}


class PredicateError(Exception):
    pass


class UnknownName(PredicateError):
    pass


class ArityMismatch(PredicateError):
    pass


class InvalidPredicate(PredicateError):
    pass


class NoAssertions(PredicateError):
    """Empty assertion list: the score is undefined, never vacuously 1."""


@dataclass(frozen=True)
class Assertion:
    predicate: str
    args: tuple[str, ...]
    weight: float = 1.0
    is_key: bool = False

    def __post_init__(self) -> None:
        if self.predicate not in PREDICATE_ARITY:
            raise InvalidPredicate(self.predicate)
        lo, hi = PREDICATE_ARITY[self.predicate]
        if not (lo <= len(self.args) <= hi):
            raise ArityMismatch(f"{self.predicate} expects {lo}..{hi} args, got {len(self.args)}")
        if not self.weight > 0:
            raise ValueError("assertion weight must be positive")

    def text(self) -> str:
        parts = [f"{self.predicate}({', '.join(self.args)})"]
        if self.weight != 1.0:
            parts.append(f"@weight={self.weight:g}")
        if self.is_key:
            parts.append("@key")
        return " ".join(parts)


@dataclass(frozen=True)
class AssertionVerdict:
    assertion: Assertion
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class FormScore:
    score: float
    verdicts: tuple[AssertionVerdict, ...]
    key_failed: bool = False


_PAIR = re.compile(r"^\(\s*(.+)\s*,\s*(.+)\s*\)$")
_DIST = re.compile(r"^dist(?:ance)?\(\s*([^,]+)\s*,\s*([^,()]+)\s*\)$", re.IGNORECASE)


def _resolve_value(text: str, state: ConstructionState):
    """Resolve an assertion argument to an object, point, or float."""
    s = text.strip()
    m = _DIST.match(s)
    if m:
        a = _resolve_value(m.group(1), state)
        b = _resolve_value(m.group(2), state)
        return _distance_between(a, b)
    if re.match(r"^[A-Za-z_][A-Za-z0-9_']*$", s) and s.lower() not in ("pi", "e", "tau"):
        if s not in state:
            raise UnknownName(s)
        return state[s]
    m = _PAIR.match(s)
    if m:
        try:
            return Point(exprs.evaluate(m.group(1)), exprs.evaluate(m.group(2)))
        except exprs.ExpressionError as exc:
            raise InvalidPredicate(f"bad coordinate pair {s!r}: {exc}") from None
    value = exprs.try_evaluate(s)
    if value is None:
        raise InvalidPredicate(f"cannot resolve argument {s!r}")
    return value


def _distance_between(a, b) -> float:
    pa = a if isinstance(a, Point) else None
    if pa is not None and isinstance(b, Point):
        return pa.dist(b)
    if pa is not None and isinstance(b, (Line, Segment, Ray, Circle)):
        if isinstance(b, Segment):
            return _segment_distance(pa, b)
        if isinstance(b, Circle):
            return abs(pa.dist(b.center) - b.radius)
        return b.carrier().distance_to(pa) if isinstance(b, Ray) else b.distance_to(pa)
    if isinstance(b, Point):
        return _distance_between(b, a)
    raise InvalidPredicate(f"dist() expects points or point/object, got {type(a).__name__}")


def _as_point(v, pred: str) -> Point:
    if isinstance(v, Point):
        return v
    raise ArityMismatch(f"{pred} expects a point, got {type(v).__name__}")


def _as_lineish(v, pred: str) -> Line:
    if isinstance(v, Line):
        return v
    if isinstance(v, (Segment, Ray)):
        return v.carrier()
    raise ArityMismatch(f"{pred} expects a line, got {type(v).__name__}")


def _as_scalar(v, pred: str) -> float:
    if isinstance(v, float):
        return v
    if isinstance(v, Scalar):
        return v.value
    if isinstance(v, AngleMark):
        return v.value
    raise ArityMismatch(f"{pred} expects a numeric value, got {type(v).__name__}")


def _collinear_measure(p: Point, q: Point, r: Point) -> float:
    ux, uy = q.x - p.x, q.y - p.y
    vx, vy = r.x - p.x, r.y - p.y
    norm = math.hypot(ux, uy) * math.hypot(vx, vy)
    if norm == 0.0:
        return 0.0
    return abs(ux * vy - uy * vx) / norm


def eval_predicate(state: ConstructionState, assertion: Assertion, eps: float = DEFAULT_EPS) -> bool:
    """Evaluate one predicate against the state with tolerance eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    pred = assertion.predicate
    vals = [_resolve_value(a, state) for a in assertion.args]

    if pred == "AreCollinear":
        p, q, r = (_as_point(v, pred) for v in vals)
        return _collinear_measure(p, q, r) < eps

    if pred == "AreParallel":
        l1, l2 = (_as_lineish(v, pred) for v in vals)
        (d1x, d1y), (d2x, d2y) = l1.direction(), l2.direction()
        norm = math.hypot(d1x, d1y) * math.hypot(d2x, d2y)
        return abs(d1x * d2y - d1y * d2x) / norm < eps

    if pred == "ArePerpendicular":
        l1, l2 = (_as_lineish(v, pred) for v in vals)
        (d1x, d1y), (d2x, d2y) = l1.direction(), l2.direction()
        norm = math.hypot(d1x, d1y) * math.hypot(d2x, d2y)
        return abs(d1x * d2x + d1y * d2y) / norm < eps

    if pred == "AreConcurrent":
        lines = [_as_lineish(v, pred) for v in vals]
        points = []
        for i in range(3):
            for j in range(i + 1, 3):
                pts = intersect_objects(lines[i], lines[j])
                if not pts:
                    return False
                points.append(pts[0])
        scale = max(1.0, max(math.hypot(p.x, p.y) for p in points))
        spread = max(points[i].dist(points[j]) for i in range(3) for j in range(i + 1, 3))
        return spread / scale < eps

    if pred == "AreConcyclic":
        pts = [_as_point(v, pred) for v in vals]
        if _collinear_measure(pts[0], pts[1], pts[2]) < eps:
            # degenerate "circle": the common line; all four must lie on it
            return _collinear_measure(pts[0], pts[1], pts[3]) < eps
        center, radius = _circumcircle(pts[0], pts[1], pts[2])
        return abs(center.dist(pts[3]) - radius) / max(radius, 1.0) < eps

    if pred == "IsTangent":
        line = _as_lineish(vals[0], pred)
        conic = vals[1]
        if isinstance(conic, Circle):
            d = line.distance_to(conic.center)
            return abs(d - conic.radius) / max(conic.radius, 1.0) < eps
        if isinstance(conic, Ellipse):
            a2, b2, c2 = _ellipse_frame_coeffs(line, conic)
            lhs = conic.semi_major**2 * a2 + conic.semi_minor**2 * b2
            return abs(lhs - c2) / max(lhs + c2, 1.0) < eps
        raise ArityMismatch(f"IsTangent expects a circle or ellipse, got {type(conic).__name__}")

    if pred == "IsInRegion":
        p = _as_point(vals[0], pred)
        region = vals[1]
        if isinstance(region, Circle):
            return p.dist(region.center) <= region.radius * (1.0 + eps)
        if isinstance(region, Ellipse):
            return _ellipse_form(p, region) <= 1.0 + eps
        if isinstance(region, Polygon):
            return _point_in_polygon(p, region, eps)
        raise ArityMismatch(f"IsInRegion expects a region, got {type(region).__name__}")

    if pred == "IsOnObject":
        p = _as_point(vals[0], pred)
        return _on_object_measure(p, vals[1]) < eps

    if pred == "EqualsWithin":
        u = _as_scalar(vals[0], pred)
        v = _as_scalar(vals[1], pred)
        if len(vals) == 3:
            tol = _as_scalar(vals[2], pred)
        else:
            tol = eps * max(1.0, abs(u), abs(v))
        return abs(u - v) <= tol

    raise InvalidPredicate(pred)


def _circumcircle(p: Point, q: Point, r: Point) -> tuple[Point, float]:
    ax, ay, bx, by, cx, cy = p.x, p.y, q.x, q.y, r.x, r.y
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    center = Point(ux, uy)
    return center, center.dist(p)


def _ellipse_frame_coeffs(line: Line, e: Ellipse) -> tuple[float, float, float]:
    """Line coefficients squared, rewritten in the ellipse's axis frame."""
    cos_t, sin_t = math.cos(e.rotation), math.sin(e.rotation)
    # frame point (u, v) maps to world (cx + u cos - v sin, cy + u sin + v cos)
    a = line.a * cos_t + line.b * sin_t
    b = -line.a * sin_t + line.b * cos_t
    c = line.a * e.center.x + line.b * e.center.y + line.c
    return a * a, b * b, c * c


def _ellipse_form(p: Point, e: Ellipse) -> float:
    cos_t, sin_t = math.cos(e.rotation), math.sin(e.rotation)
    dx, dy = p.x - e.center.x, p.y - e.center.y
    u = dx * cos_t + dy * sin_t
    v = -dx * sin_t + dy * cos_t
    return (u / e.semi_major) ** 2 + (v / e.semi_minor) ** 2


def _point_in_polygon(p: Point, poly: Polygon, eps: float) -> bool:
    verts = poly.vertices
    scale = max(1.0, max(math.hypot(v.x, v.y) for v in verts))
    for i in range(len(verts)):
        seg = Segment(verts[i], verts[(i + 1) % len(verts)])
        if _segment_distance(p, seg) < eps * scale:
            return True  # boundary counts as inside
    inside = False
    x, y = p.x, p.y
    for i in range(len(verts)):
        v1, v2 = verts[i], verts[(i + 1) % len(verts)]
        if (v1.y > y) != (v2.y > y):
            t = (y - v1.y) / (v2.y - v1.y)
            if x < v1.x + t * (v2.x - v1.x):
                inside = not inside
    return inside


def _on_object_measure(p: Point, obj) -> float:
    scale = max(1.0, math.hypot(p.x, p.y))
    if isinstance(obj, Line):
        return obj.distance_to(p) / scale
    if isinstance(obj, Segment):
        return _segment_distance(p, obj) / max(1.0, obj.length())
    if isinstance(obj, Ray):
        dx, dy = obj.direction
        t = (p.x - obj.origin.x) * dx + (p.y - obj.origin.y) * dy
        t = max(t, 0.0)
        foot = Point(obj.origin.x + t * dx, obj.origin.y + t * dy)
        return p.dist(foot) / scale
    if isinstance(obj, Circle):
        return abs(p.dist(obj.center) - obj.radius) / max(1.0, obj.radius)
    if isinstance(obj, Ellipse):
        return abs(_ellipse_form(p, obj) - 1.0) / 4.0
    if isinstance(obj, Polygon):
        edges = [
            Segment(obj.vertices[i], obj.vertices[(i + 1) % len(obj.vertices)])
            for i in range(len(obj.vertices))
        ]
        return min(_segment_distance(p, s) for s in edges) / scale
    if isinstance(obj, FunctionGraph):
        if not (obj.xmin - 1e-9 <= p.x <= obj.xmax + 1e-9):
            return math.inf
        try:
            return abs(obj.fn(p.x) - p.y) / max(1.0, abs(p.y))
        except exprs.ExpressionError:
            return math.inf
    if isinstance(obj, Point):
        return p.dist(obj) / scale
    raise ArityMismatch(f"IsOnObject cannot test membership on {type(obj).__name__}")


def eval_assertions(
    state: ConstructionState,
    assertions: list[Assertion],
    eps: float = DEFAULT_EPS,
    key_gate: bool = False,
) -> FormScore:
    """Weighted pass rate over assertions; key-gate zeroes the score on key failure."""
    if not assertions:
        raise NoAssertions("assertion list is empty; score undefined")
    verdicts = []
    passed_weight = 0.0
    total_weight = 0.0
    key_failed = False
    for a in assertions:
        try:
            ok = eval_predicate(state, a, eps)
            detail = ""
        except PredicateError as exc:
            ok = False
            detail = f"{type(exc).__name__}: {exc}"
        verdicts.append(AssertionVerdict(assertion=a, passed=ok, detail=detail))
        total_weight += a.weight
        if ok:
            passed_weight += a.weight
        elif a.is_key:
            key_failed = True
    score = passed_weight / total_weight
    if key_gate and key_failed:
        score = 0.0
    return FormScore(score=score, verdicts=tuple(verdicts), key_failed=key_failed)


def check_hard_constraints(
    state: ConstructionState | None,
    program: GgbProgram,
    constraints: list[Assertion],
    eps: float = DEFAULT_EPS,
) -> bool:
    """The objective-verifier bit: execution succeeded and every constraint holds."""
    if state is None:
        return False
    for a in constraints:
        try:
            if not eval_predicate(state, a, eps):
                return False
        except PredicateError:
            return False
    return True


_ANNOTATION = re.compile(r"@(weight=([0-9.eE+-]+)|key)\b")


def parse_assertion(line: str) -> Assertion:
    """Parse one ``Predicate(args) [@weight=w] [@key]`` line."""
    body = line
    weight = 1.0
    is_key = False
    for m in _ANNOTATION.finditer(line):
        if m.group(1) == "key":
            is_key = True
        else:
            weight = float(m.group(2))
    body = _ANNOTATION.sub("", body).strip()
    call = re.match(r"^([A-Za-z][A-Za-z0-9_]*)\s*\((.*)\)\s*$", body, re.DOTALL)
    if not call:
        raise InvalidPredicate(f"cannot parse assertion {line!r}")
    pred = call.group(1)
    if pred not in PREDICATE_ARITY:
        raise InvalidPredicate(pred)
    args = tuple(a.strip() for a in _split_top(call.group(2), ","))
    return Assertion(predicate=pred, args=args, weight=weight, is_key=is_key)


def parse_assertion_file(text: str) -> list[Assertion]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_assertion(line))
    return out
