import math

import pytest

from geoverify.ggb import (
    Circle,
    ExecutionError,
    ForwardReference,
    GgbSyntaxError,
    Point,
    Scalar,
    Segment,
    UnknownCommand,
    execute_program,
    parse_program,
)


class TestParser:
    def test_three_command_dag(self):
        program = parse_program("A=(0,0)\nB=(4,0)\ns=Segment(A,B)")
        assert program.names() == ["A", "B", "s"]
        assert [c.head for c in program.commands] == ["Point", "Point", "Segment"]

    def test_forward_reference(self):
        with pytest.raises(ForwardReference):
            parse_program("s=Segment(A,B)")

    def test_unknown_command(self):
        with pytest.raises(UnknownCommand):
            parse_program("q=Frobnicate(A)")

    def test_arity_error(self):
        with pytest.raises(GgbSyntaxError):
            parse_program("A=(0,0)\ns=Segment(A)")

    def test_duplicate_name(self):
        with pytest.raises(GgbSyntaxError):
            parse_program("A=(0,0)\nA=(1,1)")

    def test_comments_and_semicolons(self):
        program = parse_program("A=(0,0); B=(1,0)  # two points\n# full comment line\ns=Segment(A,B)")
        assert program.names() == ["A", "B", "s"]

    def test_anonymous_command_gets_name(self):
        program = parse_program("A=(0,0)\nB=(1,0)\nSegment(A,B)")
        assert program.names()[-1] == "segment_1"

    def test_error_carries_line_number(self):
        with pytest.raises(UnknownCommand) as err:
            parse_program("A=(0,0)\nq=Nope(A)")
        assert err.value.line == 2


class TestEngine:
    def test_line_line_intersection(self):
        # y=x meets y=-x+2 at (1,1)
        program = parse_program(
            "l1=Line((0,0),(1,1))\nl2=Line((0,2),(1,1))\nP=Intersect(l1,l2)")
        state = execute_program(program)
        p = state["P"]
        assert p == Point(1.0, 1.0)

    def test_negative_radius_strict(self):
        program = parse_program("c=Circle((0,0), -1)")
        with pytest.raises(ExecutionError):
            execute_program(program, mode="strict")

    def test_negative_radius_lenient(self):
        program = parse_program("c=Circle((0,0), -1)")
        state = execute_program(program, mode="lenient")
        assert "c" in state.degenerate
        assert not state.visibility["c"]

    def test_midpoint(self):
        state = execute_program(parse_program("M=Midpoint((0,0),(4,6))"))
        assert state["M"] == Point(2.0, 3.0)

    def test_midpoint_of_segment(self):
        state = execute_program(parse_program("s=Segment((0,0),(4,6))\nM=Midpoint(s)"))
        assert state["M"] == Point(2.0, 3.0)

    def test_determinism_bit_identical(self):
        src = ("A=(0.1,0.7)\nB=(3.3,1.9)\nc=Circle(A, 2.5)\nl=Line(A,B)\n"
               "P=Intersect(l,c,1)\nQ=Intersect(l,c,2)")
        s1 = execute_program(parse_program(src))
        s2 = execute_program(parse_program(src))
        assert s1.objects == s2.objects
        assert s1.order == s2.order

    def test_intersection_ordering_and_index(self):
        # horizontal line through a circle: solutions ascend by x
        src = "c=Circle((0,0), 5)\nl=Line((-10,3),(10,3))\nP=Intersect(l,c,1)\nQ=Intersect(l,c,2)"
        state = execute_program(parse_program(src))
        assert state["P"].x < state["Q"].x
        assert state["P"].x == pytest.approx(-4.0)
        assert state["Q"].x == pytest.approx(4.0)

    def test_empty_intersection_is_error(self):
        src = "c=Circle((0,0), 1)\nl=Line((0,5),(1,5))\nP=Intersect(l,c)"
        with pytest.raises(ExecutionError):
            execute_program(parse_program(src))

    def test_segment_extent_filters_intersections(self):
        # the carrier line crosses the circle, the segment itself does not
        src = "c=Circle((0,0), 1)\ns=Segment((2,0),(3,0))\nP=Intersect(s,c)"
        with pytest.raises(ExecutionError):
            execute_program(parse_program(src))

    def test_circle_circle(self):
        src = "a=Circle((0,0), 5)\nb=Circle((6,0), 5)\nP=Intersect(a,b,1)\nQ=Intersect(a,b,2)"
        state = execute_program(parse_program(src))
        assert state["P"].x == pytest.approx(3.0)
        assert abs(state["P"].y) == pytest.approx(4.0)
        assert state["P"].y < state["Q"].y

    def test_line_function_intersection(self):
        src = "f=FunctionGraph(x^2, -3, 3)\nl=Line((-5,4),(5,4))\nP=Intersect(l,f,1)\nQ=Intersect(l,f,2)"
        state = execute_program(parse_program(src))
        assert state["P"].x == pytest.approx(-2.0, abs=1e-6)
        assert state["Q"].x == pytest.approx(2.0, abs=1e-6)

    def test_perpendicular_and_parallel(self):
        src = ("A=(0,0)\nB=(2,2)\nl=Line(A,B)\nC=(1,0)\n"
               "p=PerpendicularLine(C,l)\nq=ParallelLine(C,l)")
        state = execute_program(parse_program(src))
        l, p, q = state["l"], state["p"], state["q"]
        (dx1, dy1), (dx2, dy2) = l.direction(), p.direction()
        assert dx1 * dx2 + dy1 * dy2 == pytest.approx(0.0)
        (dx3, dy3) = q.direction()
        assert dx1 * dy3 - dy1 * dx3 == pytest.approx(0.0)

    def test_tangent_from_external_point(self):
        src = "c=Circle((0,0), 1)\nP=(2,0)\nt1=Tangent(P,c,1)\nt2=Tangent(P,c,2)"
        state = execute_program(parse_program(src))
        for name in ("t1", "t2"):
            line = state[name]
            d = line.distance_to(Point(0.0, 0.0))
            assert d == pytest.approx(1.0, abs=1e-9)

    def test_tangent_at_point_on_circle(self):
        src = "c=Circle((0,0), 1)\nP=(1,0)\nt=Tangent(P,c)"
        state = execute_program(parse_program(src))
        assert state["t"].distance_to(Point(0.0, 0.0)) == pytest.approx(1.0)

    def test_tangent_from_inside_fails(self):
        src = "c=Circle((0,0), 2)\nP=(1,0)\nt=Tangent(P,c)"
        with pytest.raises(ExecutionError):
            execute_program(parse_program(src))

    def test_angle_value(self):
        state = execute_program(parse_program("a=Angle((1,0),(0,0),(0,1))"))
        assert state["a"].value == pytest.approx(math.pi / 2)

    def test_distance_scalar(self):
        state = execute_program(parse_program("d=Distance((0,0),(3,4))"))
        assert isinstance(state["d"], Scalar)
        assert state["d"].value == pytest.approx(5.0)

    def test_set_visible_and_label(self):
        src = 'A=(0,0)\nSetVisible(A, false)\nSetLabel(A, "origin")'
        state = execute_program(parse_program(src))
        assert state.visibility["A"] is False
        assert state.labels["A"] == "origin"

    def test_zero_length_segment_degenerate(self):
        with pytest.raises(ExecutionError):
            execute_program(parse_program("s=Segment((1,1),(1,1))"))

    def test_polygon_coincident_vertices(self):
        with pytest.raises(ExecutionError):
            execute_program(parse_program("p=Polygon((0,0),(0,0),(1,1))"))

    def test_degenerate_dependency_propagates_leniently(self):
        src = "c=Circle((0,0), -1)\nA=(5,5)\nB=(6,6)\ns=Segment(A,B)"
        state = execute_program(parse_program(src), mode="lenient")
        assert "c" in state.degenerate
        assert isinstance(state["s"], Segment)

    def test_circle_through_point(self):
        state = execute_program(parse_program("A=(0,0)\nB=(3,4)\nc=Circle(A,B)"))
        assert isinstance(state["c"], Circle)
        assert state["c"].radius == pytest.approx(5.0)

    def test_function_constant_and_domain(self):
        state = execute_program(parse_program("f=FunctionGraph(2, -1, 1)"))
        f = state["f"]
        assert f.fn(0.5) == pytest.approx(2.0)
        assert (f.xmin, f.xmax) == (-1.0, 1.0)
