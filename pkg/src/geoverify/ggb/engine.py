"""Evaluator turning a parsed program into a ConstructionState.

Intersections are computed analytically (line-line, line-circle,
circle-circle) or by bracketed bisection (line-function).  Multi-solution
commands order results ascending by x then y and take a 1-based index
argument.  Strict mode raises ExecutionError on degenerate results; lenient
mode flags them and continues.
"""

from __future__ import annotations

import math

from .. import exprs
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
from .parser import (
    Arg,
    BoolArg,
    ExprArg,
    GgbCommand,
    GgbProgram,
    NumArg,
    PairArg,
    RefArg,
    StrArg,
)

_COINCIDENT_EPS = 1e-12
_PARAM_SLACK = 1e-9


class ExecutionError(Exception):
    """A command could not produce a well-defined object (the C_exe = 0 signal)."""

    def __init__(self, name: str, reason: str):
        super().__init__(f"{name}: {reason}")
        self.name = name
        self.reason = reason


def execute_program(program: GgbProgram, mode: str = "strict") -> ConstructionState:
    """Run every command in order; returns the resulting construction state."""
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown mode {mode!r}")
    state = ConstructionState()
    for cmd in program.commands:
        try:
            _execute_command(cmd, state)
        except ExecutionError:
            if mode == "strict":
                raise
            if cmd.name not in state:
                state.add(cmd.name, Point(math.nan, math.nan))
            state.flag_degenerate(cmd.name)
    return state


def _resolve(arg: Arg, state: ConstructionState, name: str) -> GeomObject | float | str | bool:
    if isinstance(arg, RefArg):
        return state[arg.name]
    if isinstance(arg, PairArg):
        return Point(arg.x, arg.y)
    if isinstance(arg, NumArg):
        return arg.value
    if isinstance(arg, StrArg):
        return arg.text
    if isinstance(arg, BoolArg):
        return arg.value
    raise ExecutionError(name, f"unexpected expression argument {arg.text!r}")


def _as_point(value, name: str) -> Point:
    if isinstance(value, Point):
        return value
    raise ExecutionError(name, f"expected a point, got {type(value).__name__}")


def _as_lineish(value, name: str) -> Line:
    if isinstance(value, Line):
        return value
    if isinstance(value, (Segment, Ray)):
        return value.carrier()
    raise ExecutionError(name, f"expected a line-like object, got {type(value).__name__}")


def _degenerate_inputs(cmd: GgbCommand, state: ConstructionState) -> bool:
    return any(isinstance(a, RefArg) and a.name in state.degenerate for a in cmd.args)


def _execute_command(cmd: GgbCommand, state: ConstructionState) -> None:
    if _degenerate_inputs(cmd, state):
        raise ExecutionError(cmd.name, "depends on a degenerate object")
    head = cmd.head
    vals = None
    if head == "FunctionGraph":
        obj = _make_function(cmd, state)
    else:
        vals = [_resolve(a, state, cmd.name) for a in cmd.args]
        obj = _BUILDERS[head](cmd, vals, state)
    if head in ("SetVisible", "SetLabel"):
        return
    state.add(cmd.name, obj)


def _make_point(cmd: GgbCommand, vals, state) -> Point:
    if len(vals) == 1:
        return _as_point(vals[0], cmd.name)
    if not all(isinstance(v, float) for v in vals):
        raise ExecutionError(cmd.name, "Point expects two numbers")
    return Point(vals[0], vals[1])


def _make_line(cmd: GgbCommand, vals, state) -> Line:
    p, q = (_as_point(v, cmd.name) for v in vals)
    if p.dist(q) <= _COINCIDENT_EPS:
        raise ExecutionError(cmd.name, "line through coincident points")
    return Line.through(p, q)


def _make_segment(cmd: GgbCommand, vals, state) -> Segment:
    p, q = (_as_point(v, cmd.name) for v in vals)
    if p.dist(q) <= _COINCIDENT_EPS:
        raise ExecutionError(cmd.name, "zero-length segment")
    return Segment(p, q)


def _make_ray(cmd: GgbCommand, vals, state) -> Ray:
    p, q = (_as_point(v, cmd.name) for v in vals)
    d = p.dist(q)
    if d <= _COINCIDENT_EPS:
        raise ExecutionError(cmd.name, "ray through coincident points")
    return Ray(p, ((q.x - p.x) / d, (q.y - p.y) / d))


def _make_circle(cmd: GgbCommand, vals, state) -> Circle:
    center = _as_point(vals[0], cmd.name)
    if isinstance(vals[1], Point):
        radius = center.dist(vals[1])
    elif isinstance(vals[1], Scalar):
        radius = vals[1].value
    elif isinstance(vals[1], float):
        radius = vals[1]
    else:
        raise ExecutionError(cmd.name, "circle radius must be a number or point")
    if radius <= 0.0:
        raise ExecutionError(cmd.name, f"non-positive radius {radius}")
    return Circle(center, radius)


def _make_ellipse(cmd: GgbCommand, vals, state) -> Ellipse:
    center = _as_point(vals[0], cmd.name)
    rest = vals[1:]
    if not all(isinstance(v, float) for v in rest):
        raise ExecutionError(cmd.name, "ellipse semi-axes must be numbers")
    a, b = rest[0], rest[1]
    rot = rest[2] if len(rest) > 2 else 0.0
    if a <= 0.0 or b <= 0.0:
        raise ExecutionError(cmd.name, "non-positive semi-axis")
    if a < b:  # keep semi_major >= semi_minor
        a, b, rot = b, a, rot + math.pi / 2.0
    return Ellipse(center, a, b, rot)


def _make_polygon(cmd: GgbCommand, vals, state) -> Polygon:
    pts = tuple(_as_point(v, cmd.name) for v in vals)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if pts[i].dist(pts[j]) <= _COINCIDENT_EPS:
                raise ExecutionError(cmd.name, f"coincident vertices {i} and {j}")
    return Polygon(pts)


def _make_midpoint(cmd: GgbCommand, vals, state) -> Point:
    if len(vals) == 1:
        seg = vals[0]
        if not isinstance(seg, Segment):
            raise ExecutionError(cmd.name, "Midpoint of a single argument needs a segment")
        return seg.midpoint()
    p, q = (_as_point(v, cmd.name) for v in vals)
    return Point((p.x + q.x) / 2.0, (p.y + q.y) / 2.0)


def _make_perpendicular(cmd: GgbCommand, vals, state) -> Line:
    p = _as_point(vals[0], cmd.name)
    carrier = _as_lineish(vals[1], cmd.name)
    # normal of the new line is the carrier's direction
    dx, dy = carrier.direction()
    return Line(dx, dy, -(dx * p.x + dy * p.y))


def _make_parallel(cmd: GgbCommand, vals, state) -> Line:
    p = _as_point(vals[0], cmd.name)
    carrier = _as_lineish(vals[1], cmd.name)
    return Line(carrier.a, carrier.b, -(carrier.a * p.x + carrier.b * p.y))


def _make_angle(cmd: GgbCommand, vals, state) -> AngleMark:
    a, b, c = (_as_point(v, cmd.name) for v in vals)
    ux, uy = a.x - b.x, a.y - b.y
    vx, vy = c.x - b.x, c.y - b.y
    nu, nv = math.hypot(ux, uy), math.hypot(vx, vy)
    if nu <= _COINCIDENT_EPS or nv <= _COINCIDENT_EPS:
        raise ExecutionError(cmd.name, "angle with coincident arm")
    cosv = max(-1.0, min(1.0, (ux * vx + uy * vy) / (nu * nv)))
    return AngleMark(vertex=b, arm1=a, arm2=c, value=math.acos(cosv))


def _make_distance(cmd: GgbCommand, vals, state) -> Scalar:
    p = _as_point(vals[0], cmd.name)
    other = vals[1]
    if isinstance(other, Point):
        return Scalar(p.dist(other))
    if isinstance(other, Segment):
        return Scalar(_segment_distance(p, other))
    if isinstance(other, (Line, Ray)):
        return Scalar(_as_lineish(other, cmd.name).distance_to(p))
    if isinstance(other, Circle):
        return Scalar(abs(p.dist(other.center) - other.radius))
    raise ExecutionError(cmd.name, f"cannot measure distance to {type(other).__name__}")


def _set_visible(cmd: GgbCommand, vals, state) -> None:
    target = cmd.args[0]
    if not isinstance(target, RefArg):
        raise ExecutionError(cmd.name, "SetVisible expects an object name")
    if not isinstance(vals[1], bool):
        raise ExecutionError(cmd.name, "SetVisible expects true/false")
    if target.name not in state.degenerate:
        state.visibility[target.name] = vals[1]
    return None


def _set_label(cmd: GgbCommand, vals, state) -> None:
    target = cmd.args[0]
    if not isinstance(target, RefArg) or not isinstance(vals[1], str):
        raise ExecutionError(cmd.name, "SetLabel expects an object name and a string")
    state.labels[target.name] = vals[1]
    return None


def _make_function(cmd: GgbCommand, state: ConstructionState) -> FunctionGraph:
    args = cmd.args
    if isinstance(args[0], ExprArg):
        text = args[0].text
    elif isinstance(args[0], NumArg):  # constant function
        text = repr(args[0].value)
    else:
        raise ExecutionError(cmd.name, "FunctionGraph expects an expression in x")
    bounds = []
    for extra in args[1:]:
        if not isinstance(extra, NumArg):
            raise ExecutionError(cmd.name, "domain bounds must be numbers")
        bounds.append(extra.value)
    xmin = bounds[0] if len(bounds) > 0 else -10.0
    xmax = bounds[1] if len(bounds) > 1 else 10.0
    if not xmax > xmin:
        raise ExecutionError(cmd.name, "empty function domain")
    try:
        fn = exprs.compile_expression(text, variables=("x",))
    except exprs.ExpressionError as exc:
        raise ExecutionError(cmd.name, f"bad function expression: {exc}") from None
    # the function must be evaluable somewhere on its domain
    for i in range(5):
        try:
            fn(xmin + (xmax - xmin) * (i + 0.5) / 5.0)
            break
        except exprs.ExpressionError:
            continue
    else:
        raise ExecutionError(cmd.name, "function not evaluable on its domain")
    return FunctionGraph(expression=text, xmin=xmin, xmax=xmax, fn=fn)


def _make_intersect(cmd: GgbCommand, vals, state) -> Point:
    a, b = vals[0], vals[1]
    index = 1
    if len(vals) > 2:
        if not isinstance(vals[2], float) or vals[2] != int(vals[2]) or vals[2] < 1:
            raise ExecutionError(cmd.name, "intersection index must be a positive integer")
        index = int(vals[2])
    points = intersect_objects(a, b, cmd.name)
    if not points:
        raise ExecutionError(cmd.name, "empty intersection")
    if index > len(points):
        raise ExecutionError(cmd.name, f"intersection index {index} out of range")
    return points[index - 1]


def intersect_objects(a, b, name: str = "intersect") -> list[Point]:
    """All intersection points of two objects, ascending by (x, y)."""
    pts = _raw_intersections(a, b, name)
    pts = _filter_extent(pts, a)
    pts = _filter_extent(pts, b)
    unique: list[Point] = []
    for p in sorted(pts, key=lambda q: (q.x, q.y)):
        if not unique or Point(unique[-1].x, unique[-1].y).dist(p) > 1e-9:
            unique.append(p)
    return unique


def _raw_intersections(a, b, name: str) -> list[Point]:
    for first, second, swap in ((a, b, False), (b, a, True)):
        if isinstance(first, (Line, Segment, Ray)):
            line = first.carrier() if isinstance(first, (Segment, Ray)) else first
            if isinstance(second, (Line, Segment, Ray)):
                other = second.carrier() if isinstance(second, (Segment, Ray)) else second
                return _line_line(line, other)
            if isinstance(second, Circle):
                return _line_circle(line, second)
            if isinstance(second, FunctionGraph):
                return _line_function(line, second)
        if isinstance(first, Circle) and isinstance(second, Circle):
            return _circle_circle(first, second)
    raise ExecutionError(
        name,
        f"unsupported intersection {type(a).__name__}/{type(b).__name__}",
    )


def _filter_extent(points: list[Point], obj) -> list[Point]:
    if isinstance(obj, Segment):
        return [p for p in points if _segment_param(obj, p) is not None]
    if isinstance(obj, Ray):
        out = []
        for p in points:
            t = (p.x - obj.origin.x) * obj.direction[0] + (p.y - obj.origin.y) * obj.direction[1]
            if t >= -_PARAM_SLACK:
                out.append(p)
        return out
    if isinstance(obj, FunctionGraph):
        return [p for p in points if obj.xmin - _PARAM_SLACK <= p.x <= obj.xmax + _PARAM_SLACK]
    return points


def _segment_param(seg: Segment, p: Point) -> float | None:
    dx, dy = seg.p2.x - seg.p1.x, seg.p2.y - seg.p1.y
    L2 = dx * dx + dy * dy
    t = ((p.x - seg.p1.x) * dx + (p.y - seg.p1.y) * dy) / L2
    if -_PARAM_SLACK <= t <= 1.0 + _PARAM_SLACK:
        return t
    return None


def _segment_distance(p: Point, seg: Segment) -> float:
    dx, dy = seg.p2.x - seg.p1.x, seg.p2.y - seg.p1.y
    L2 = dx * dx + dy * dy
    t = max(0.0, min(1.0, ((p.x - seg.p1.x) * dx + (p.y - seg.p1.y) * dy) / L2))
    return p.dist(Point(seg.p1.x + t * dx, seg.p1.y + t * dy))


def _line_line(l1: Line, l2: Line) -> list[Point]:
    det = l1.a * l2.b - l2.a * l1.b
    scale = math.hypot(l1.a, l1.b) * math.hypot(l2.a, l2.b)
    if abs(det) <= 1e-14 * max(scale, 1.0):
        return []
    x = (l1.b * l2.c - l2.b * l1.c) / det
    y = (l2.a * l1.c - l1.a * l2.c) / det
    return [Point(x, y)]


def _line_circle(line: Line, circle: Circle) -> list[Point]:
    norm2 = line.a * line.a + line.b * line.b
    d = line.eval_at(circle.center)
    # foot of the perpendicular from the center
    fx = circle.center.x - line.a * d / norm2
    fy = circle.center.y - line.b * d / norm2
    h2 = circle.radius * circle.radius - d * d / norm2
    if h2 < -1e-12 * max(circle.radius, 1.0) ** 2:
        return []
    h = math.sqrt(max(h2, 0.0))
    ux, uy = line.b / math.sqrt(norm2), -line.a / math.sqrt(norm2)
    if h <= 1e-12 * max(circle.radius, 1.0):
        return [Point(fx, fy)]
    return [Point(fx - h * ux, fy - h * uy), Point(fx + h * ux, fy + h * uy)]


def _circle_circle(c1: Circle, c2: Circle) -> list[Point]:
    d = c1.center.dist(c2.center)
    if d <= _COINCIDENT_EPS:
        return []
    if d > c1.radius + c2.radius + 1e-12 or d < abs(c1.radius - c2.radius) - 1e-12:
        return []
    a = (c1.radius**2 - c2.radius**2 + d * d) / (2.0 * d)
    h2 = c1.radius**2 - a * a
    h = math.sqrt(max(h2, 0.0))
    ux, uy = (c2.center.x - c1.center.x) / d, (c2.center.y - c1.center.y) / d
    mx, my = c1.center.x + a * ux, c1.center.y + a * uy
    if h <= 1e-12 * max(c1.radius, c2.radius, 1.0):
        return [Point(mx, my)]
    return [Point(mx - h * uy, my + h * ux), Point(mx + h * uy, my - h * ux)]


def _line_function(line: Line, graph: FunctionGraph, samples: int = 512) -> list[Point]:
    if abs(line.b) <= 1e-14 * max(abs(line.a), 1.0):  # vertical line x = -c/a
        x = -line.c / line.a
        if graph.xmin <= x <= graph.xmax:
            return [Point(x, graph.fn(x))]
        return []

    def g(x: float) -> float:
        return graph.fn(x) - (-(line.a * x + line.c) / line.b)

    roots: list[float] = []
    xs = [graph.xmin + (graph.xmax - graph.xmin) * i / samples for i in range(samples + 1)]
    values = []
    for x in xs:
        try:
            values.append(g(x))
        except exprs.ExpressionError:
            values.append(math.nan)
    for i in range(samples):
        v0, v1 = values[i], values[i + 1]
        if math.isnan(v0) or math.isnan(v1):
            continue
        if v0 == 0.0:
            roots.append(xs[i])
        elif v0 * v1 < 0.0:
            lo, hi = xs[i], xs[i + 1]
            flo = v0
            for _ in range(80):
                mid = (lo + hi) / 2.0
                fmid = g(mid)
                if fmid == 0.0:
                    lo = hi = mid
                    break
                if flo * fmid < 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
            roots.append((lo + hi) / 2.0)
    if values and values[-1] == 0.0:
        roots.append(xs[-1])
    return [Point(x, graph.fn(x)) for x in roots]


def _make_tangent(cmd: GgbCommand, vals, state) -> Line:
    p = _as_point(vals[0], cmd.name)
    conic = vals[1]
    index = 1
    if len(vals) > 2:
        if not isinstance(vals[2], float) or vals[2] < 1:
            raise ExecutionError(cmd.name, "tangent index must be a positive integer")
        index = int(vals[2])
    if not isinstance(conic, Circle):
        raise ExecutionError(cmd.name, "Tangent currently supports circles only")
    c, r = conic.center, conic.radius
    d = p.dist(c)
    band = 1e-9 * max(r, 1.0)
    if d < r - band:
        raise ExecutionError(cmd.name, "no tangent from a point inside the circle")
    if abs(d - r) <= band:
        # tangent at a point on the circle: normal is the radius direction
        a, b = p.x - c.x, p.y - c.y
        return Line(a, b, -(a * p.x + b * p.y))
    alpha = math.acos(r / d)
    theta = math.atan2(p.y - c.y, p.x - c.x)
    touches = sorted(
        (Point(c.x + r * math.cos(theta + s * alpha), c.y + r * math.sin(theta + s * alpha))
         for s in (-1.0, 1.0)),
        key=lambda q: (q.x, q.y),
    )
    if index > len(touches):
        raise ExecutionError(cmd.name, f"tangent index {index} out of range")
    return Line.through(p, touches[index - 1])


_BUILDERS = {
    "Point": _make_point,
    "Line": _make_line,
    "Segment": _make_segment,
    "Ray": _make_ray,
    "Circle": _make_circle,
    "Ellipse": _make_ellipse,
    "Polygon": _make_polygon,
    "Midpoint": _make_midpoint,
    "Intersect": _make_intersect,
    "PerpendicularLine": _make_perpendicular,
    "ParallelLine": _make_parallel,
    "Tangent": _make_tangent,
    "Angle": _make_angle,
    "Distance": _make_distance,
    "SetVisible": _set_visible,
    "SetLabel": _set_label,
}
