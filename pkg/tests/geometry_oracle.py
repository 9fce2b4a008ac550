"""Independent brute-force oracle for geometric predicates.

Deliberately different formulations from the kernel (shoelace areas, direction
angles, quadratic discriminants, 4x4 determinants, linear solves) so agreement
is meaningful.  Each oracle returns (verdict, margin): the margin is the raw
normalized residual, used to skip cases inside the eps-ambiguity band.
"""

import math

import numpy as np

EPS = 1e-7


def collinear(p, q, r, eps=EPS):
    area2 = abs(p[0] * (q[1] - r[1]) + q[0] * (r[1] - p[1]) + r[0] * (p[1] - q[1]))
    scale = max(_dist(p, q) * _dist(p, r), 1e-300)
    margin = area2 / scale
    return margin < eps, margin


def _dist(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _angle(direction):
    return math.atan2(direction[1], direction[0]) % math.pi


def parallel(d1, d2, eps=EPS):
    diff = abs(_angle(d1) - _angle(d2))
    diff = min(diff, math.pi - diff)
    return math.sin(diff) < eps, math.sin(diff)


def perpendicular(d1, d2, eps=EPS):
    diff = abs(_angle(d1) - _angle(d2))
    diff = min(diff, math.pi - diff)
    margin = abs(math.cos(diff))
    return margin < eps, margin


def tangent_line_circle(a, b, c, cx, cy, r, eps=EPS):
    """Line ax+by+c=0 vs circle: discriminant of the substituted quadratic."""
    # param point on line closest to origin plus direction
    n2 = a * a + b * b
    px, py = -a * c / n2, -b * c / n2
    dx, dy = b / math.sqrt(n2), -a / math.sqrt(n2)
    # |P + t D - C|^2 = r^2 -> t^2 + 2 t D.(P-C) + |P-C|^2 - r^2 = 0
    ex, ey = px - cx, py - cy
    B = 2 * (dx * ex + dy * ey)
    C = ex * ex + ey * ey - r * r
    disc = B * B - 4 * C
    margin = abs(disc) / max(r * r, 1.0) / 4.0
    return margin < eps, margin


def concyclic(p1, p2, p3, p4, eps=EPS):
    m = np.array([[x * x + y * y, x, y, 1.0] for (x, y) in (p1, p2, p3, p4)])
    det = float(np.linalg.det(m))
    pts = (p1, p2, p3, p4)
    scale = max(max(_dist(a, b) for a in pts for b in pts) ** 4, 1e-300)
    margin = abs(det) / scale
    return margin < eps, margin


def concurrent(l1, l2, l3, eps=EPS):
    """Solve l1^l2, plug into l3; lines are (a, b, c) triples."""
    a = np.array([[l1[0], l1[1]], [l2[0], l2[1]]])
    rhs = np.array([-l1[2], -l2[2]])
    if abs(np.linalg.det(a)) < 1e-12:
        return False, math.inf
    x, y = np.linalg.solve(a, rhs)
    margin = abs(l3[0] * x + l3[1] * y + l3[2]) / math.hypot(l3[0], l3[1])
    margin /= max(1.0, math.hypot(x, y))
    return margin < eps, margin


def on_line(p, a, b, c, eps=EPS):
    margin = abs(a * p[0] + b * p[1] + c) / math.hypot(a, b)
    margin /= max(1.0, math.hypot(p[0], p[1]))
    return margin < eps, margin


def on_circle(p, cx, cy, r, eps=EPS):
    margin = abs(_dist(p, (cx, cy)) - r) / max(1.0, r)
    return margin < eps, margin


def rigid_motion(rng):
    """Random rotation + translation as a callable on (x, y) pairs."""
    theta = rng.uniform(0.0, 2.0 * math.pi)
    tx, ty = rng.uniform(-5.0, 5.0, size=2)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    def apply(p):
        x, y = p
        return (cos_t * x - sin_t * y + tx, sin_t * x + cos_t * y + ty)

    return apply


# -- randomized configuration generators -----------------------------------

from geoverify.ggb import Assertion, Circle, ConstructionState, Line, Point  # noqa: E402


def _pt(rng, span=10.0):
    return tuple(rng.uniform(-span, span, size=2))


def _add_points(state, **named):
    for name, (x, y) in named.items():
        state.add(name, Point(x, y))


def gen_collinear(rng, n):
    cases = []
    for i in range(n):
        p, q = _pt(rng), _pt(rng)
        while _dist(p, q) < 1e-3:
            q = _pt(rng)
        if i % 2 == 0:
            t = rng.uniform(-2.0, 2.0)
            r = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
        else:
            r = _pt(rng)
        state = ConstructionState()
        _add_points(state, A=p, B=q, C=r)
        verdict, margin = collinear(p, q, r)
        cases.append((state, Assertion("AreCollinear", ("A", "B", "C")),
                      verdict, margin, (p, q, r)))
    return cases


def _line_points(rng):
    p, q = _pt(rng), _pt(rng)
    while _dist(p, q) < 1e-3:
        q = _pt(rng)
    return p, q


def gen_parallel(rng, n):
    cases = []
    for i in range(n):
        p1, p2 = _line_points(rng)
        if i % 2 == 0:
            off = _pt(rng, 5.0)
            q1 = (p1[0] + off[0], p1[1] + off[1])
            q2 = (p2[0] + off[0], p2[1] + off[1])
        else:
            q1, q2 = _line_points(rng)
        state = ConstructionState()
        state.add("l1", Line.through(Point(*p1), Point(*p2)))
        state.add("l2", Line.through(Point(*q1), Point(*q2)))
        d1 = (p2[0] - p1[0], p2[1] - p1[1])
        d2 = (q2[0] - q1[0], q2[1] - q1[1])
        verdict, margin = parallel(d1, d2)
        cases.append((state, Assertion("AreParallel", ("l1", "l2")),
                      verdict, margin, (p1, p2, q1, q2)))
    return cases


def gen_perpendicular(rng, n):
    cases = []
    for i in range(n):
        p1, p2 = _line_points(rng)
        d = (p2[0] - p1[0], p2[1] - p1[1])
        c = _pt(rng)
        if i % 2 == 0:
            q = (c[0] - d[1], c[1] + d[0])  # rotate by 90 degrees
        else:
            q = _pt(rng)
            while _dist(c, q) < 1e-3:
                q = _pt(rng)
        state = ConstructionState()
        state.add("l1", Line.through(Point(*p1), Point(*p2)))
        state.add("l2", Line.through(Point(*c), Point(*q)))
        verdict, margin = perpendicular(d, (q[0] - c[0], q[1] - c[1]))
        cases.append((state, Assertion("ArePerpendicular", ("l1", "l2")),
                      verdict, margin, (p1, p2, c, q)))
    return cases


def gen_tangent(rng, n):
    cases = []
    for i in range(n):
        cx, cy = _pt(rng, 5.0)
        r = rng.uniform(0.5, 5.0)
        if i % 2 == 0:
            theta = rng.uniform(0.0, 2.0 * math.pi)
            tx, ty = cx + r * math.cos(theta), cy + r * math.sin(theta)
            dx, dy = -math.sin(theta), math.cos(theta)
            p1, p2 = (tx, ty), (tx + dx, ty + dy)
        else:
            p1, p2 = _line_points(rng)
        state = ConstructionState()
        line = Line.through(Point(*p1), Point(*p2))
        state.add("l", line)
        state.add("c", Circle(Point(cx, cy), r))
        verdict, margin = tangent_line_circle(line.a, line.b, line.c, cx, cy, r)
        cases.append((state, Assertion("IsTangent", ("l", "c")),
                      verdict, margin, (p1, p2, (cx, cy), r)))
    return cases


def gen_concyclic(rng, n):
    cases = []
    i = 0
    while len(cases) < n:
        cx, cy = _pt(rng, 5.0)
        r = rng.uniform(1.0, 5.0)
        thetas = sorted(rng.uniform(0.0, 2.0 * math.pi, size=4))
        pts = [(cx + r * math.cos(t), cy + r * math.sin(t)) for t in thetas]
        if min(abs(a - b) for a, b in zip(thetas, thetas[1:])) < 0.15:
            continue  # nearly coincident points make the determinant scale badly
        i += 1
        if i % 2 == 1:
            bump = rng.uniform(0.2, 1.0) * rng.choice([-1.0, 1.0])
            t = thetas[3]
            pts[3] = (cx + (r + bump) * math.cos(t), cy + (r + bump) * math.sin(t))
        state = ConstructionState()
        _add_points(state, P1=pts[0], P2=pts[1], P3=pts[2], P4=pts[3])
        verdict, margin = concyclic(*pts)
        cases.append((state, Assertion("AreConcyclic", ("P1", "P2", "P3", "P4")),
                      verdict, margin, tuple(pts)))
    return cases


def gen_concurrent(rng, n):
    cases = []
    for i in range(n):
        o = _pt(rng, 5.0)
        dirs = []
        while len(dirs) < 3:
            theta = rng.uniform(0.0, math.pi)
            if all(min(abs(theta - t), math.pi - abs(theta - t)) > 0.1 for t in dirs):
                dirs.append(theta)
        endpoints = []
        for k, theta in enumerate(dirs):
            d = (math.cos(theta), math.sin(theta))
            p1 = (o[0] - 3.0 * d[0], o[1] - 3.0 * d[1])
            p2 = (o[0] + 3.0 * d[0], o[1] + 3.0 * d[1])
            if i % 2 == 1 and k == 2:
                shift = rng.uniform(0.2, 2.0)
                p1 = (p1[0] - shift * d[1], p1[1] + shift * d[0])
                p2 = (p2[0] - shift * d[1], p2[1] + shift * d[0])
            endpoints.append((p1, p2))
        state = ConstructionState()
        triples = []
        for k, (p1, p2) in enumerate(endpoints, start=1):
            line = Line.through(Point(*p1), Point(*p2))
            state.add(f"l{k}", line)
            triples.append((line.a, line.b, line.c))
        verdict, margin = concurrent(*triples)
        cases.append((state, Assertion("AreConcurrent", ("l1", "l2", "l3")),
                      verdict, margin, tuple(endpoints)))
    return cases


def gen_in_region(rng, n):
    cases = []
    for i in range(n):
        cx, cy = _pt(rng, 5.0)
        r = rng.uniform(1.0, 5.0)
        scale = rng.uniform(0.1, 0.9) if i % 2 == 0 else rng.uniform(1.1, 2.0)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        p = (cx + scale * r * math.cos(theta), cy + scale * r * math.sin(theta))
        state = ConstructionState()
        state.add("P", Point(*p))
        state.add("c", Circle(Point(cx, cy), r))
        inside = _dist(p, (cx, cy)) <= r
        margin = abs(_dist(p, (cx, cy)) - r) / max(1.0, r)
        cases.append((state, Assertion("IsInRegion", ("P", "c")),
                      inside, margin, (p, (cx, cy), r)))
    return cases


GENERATORS = {
    "AreCollinear": gen_collinear,
    "AreParallel": gen_parallel,
    "ArePerpendicular": gen_perpendicular,
    "IsTangent": gen_tangent,
    "AreConcyclic": gen_concyclic,
    "AreConcurrent": gen_concurrent,
    "IsInRegion": gen_in_region,
}


def transform_state(state: ConstructionState, apply) -> ConstructionState:
    """Rebuild a generator state under a rigid motion of the plane."""
    out = ConstructionState()
    for name in state.order:
        obj = state.objects[name]
        if isinstance(obj, Point):
            out.add(name, Point(*apply((obj.x, obj.y))))
        elif isinstance(obj, Line):
            n2 = obj.a**2 + obj.b**2
            p0 = (-obj.a * obj.c / n2, -obj.b * obj.c / n2)
            p1 = (p0[0] + obj.b, p0[1] - obj.a)
            out.add(name, Line.through(Point(*apply(p0)), Point(*apply(p1))))
        elif isinstance(obj, Circle):
            out.add(name, Circle(Point(*apply((obj.center.x, obj.center.y))),
                                 obj.radius))
        else:
            raise TypeError(f"no transform rule for {type(obj).__name__}")
    return out
