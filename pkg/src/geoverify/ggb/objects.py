"""Geometric value types and the construction state produced by execution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def dist(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Line:
    """Implicit form a*x + b*y + c = 0; (a, b) never both zero."""

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if self.a == 0.0 and self.b == 0.0:
            raise ValueError("line coefficients a and b cannot both be zero")

    @staticmethod
    def through(p: Point, q: Point) -> "Line":
        return Line(p.y - q.y, q.x - p.x, p.x * q.y - q.x * p.y)

    def direction(self) -> tuple[float, float]:
        return (self.b, -self.a)

    def eval_at(self, p: Point) -> float:
        return self.a * p.x + self.b * p.y + self.c

    def distance_to(self, p: Point) -> float:
        return abs(self.eval_at(p)) / math.hypot(self.a, self.b)


@dataclass(frozen=True)
class Segment:
    p1: Point
    p2: Point

    def length(self) -> float:
        return self.p1.dist(self.p2)

    def midpoint(self) -> Point:
        return Point((self.p1.x + self.p2.x) / 2.0, (self.p1.y + self.p2.y) / 2.0)

    def carrier(self) -> Line:
        return Line.through(self.p1, self.p2)


@dataclass(frozen=True)
class Ray:
    origin: Point
    direction: tuple[float, float]

    def carrier(self) -> Line:
        dx, dy = self.direction
        return Line.through(self.origin, Point(self.origin.x + dx, self.origin.y + dy))


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float


@dataclass(frozen=True)
class Ellipse:
    center: Point
    semi_major: float
    semi_minor: float
    rotation: float = 0.0


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[Point, ...]


@dataclass(frozen=True)
class FunctionGraph:
    expression: str
    xmin: float
    xmax: float
    fn: Callable[[float], float] = field(compare=False, repr=False, default=None)  # type: ignore[assignment]


@dataclass(frozen=True)
class AngleMark:
    vertex: Point
    arm1: Point
    arm2: Point
    value: float  # radians in [0, pi]


@dataclass(frozen=True)
class Scalar:
    value: float


GeomObject = Union[
    Point, Line, Segment, Ray, Circle, Ellipse, Polygon, FunctionGraph, AngleMark, Scalar
]

DRAWABLE_KINDS = (Point, Line, Segment, Ray, Circle, Ellipse, Polygon, FunctionGraph, AngleMark)


def kind_of(obj: GeomObject) -> str:
    return type(obj).__name__.lower()


@dataclass
class ConstructionState:
    """Executed geometric state: named objects in construction order."""

    objects: dict[str, GeomObject] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)
    visibility: dict[str, bool] = field(default_factory=dict)
    degenerate: set[str] = field(default_factory=set)
    labels: dict[str, str] = field(default_factory=dict)

    def add(self, name: str, obj: GeomObject, visible: bool = True) -> None:
        self.objects[name] = obj
        self.order.append(name)
        self.visibility[name] = visible and isinstance(obj, DRAWABLE_KINDS)

    def flag_degenerate(self, name: str) -> None:
        self.degenerate.add(name)
        # an object is never both visible and degenerate
        self.visibility[name] = False

    def visible_objects(self) -> list[tuple[str, GeomObject]]:
        return [
            (n, self.objects[n])
            for n in self.order
            if self.visibility.get(n) and n not in self.degenerate
        ]

    def __getitem__(self, name: str) -> GeomObject:
        return self.objects[name]

    def __contains__(self, name: str) -> bool:
        return name in self.objects
