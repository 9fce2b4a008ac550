import json

import pytest

from geoverify import judges


RIGHT_TRIANGLE_TRACE = """We draw triangle ABC with the right angle at A.
```geogebra
A=(0,0)
B=({bx},0)
C=(0,{cy})
t=Polygon(A,B,C)
u=Segment(A,B)
v=Segment(A,C)
h=Segment(B,C)
```
Therefore the answer is \\boxed{{{answer}}}."""

MIDPOINT_TRACE = """We draw segment AB and mark its midpoint M.
```geogebra
A=(0,0)
B=({bx},0)
s=Segment(A,B)
M=Midpoint(A,B)
```
The answer is \\boxed{{{answer}}}."""


def triangle_row(idx: int, bx: float = 4.0, cy: float = 3.0) -> dict:
    answer = (bx**2 + cy**2) ** 0.5
    trace = RIGHT_TRIANGLE_TRACE.format(bx=f"{bx:g}", cy=f"{cy:g}", answer=f"{answer:g}")
    code = trace.split("```geogebra\n")[1].split("\n```")[0]
    return {
        "id": f"tri{idx}",
        "statement": "Triangle ABC has a right angle at A. Find the hypotenuse.",
        "problem_images": [],
        "trace": trace,
        "ggb_source": code,
        "answer": f"{answer:g}",
        "category": "plane_geometry",
        "difficulty": "easy",
        "stage": "K6_8",
        "hard_constraints": ["ArePerpendicular(u,v) @key",
                             f"EqualsWithin(dist(A,B), {bx:g}, 1e-6)"],
    }


def midpoint_row(idx: int, bx: float = 4.0) -> dict:
    trace = MIDPOINT_TRACE.format(bx=f"{bx:g}", answer=f"{bx / 2:g}")
    code = trace.split("```geogebra\n")[1].split("\n```")[0]
    return {
        "id": f"mid{idx}",
        "statement": "Mark the midpoint M of segment AB.",
        "problem_images": [],
        "trace": trace,
        "ggb_source": code,
        "answer": f"{bx / 2:g}",
        "category": "plane_geometry",
        "difficulty": "easy",
        "stage": "K6_8",
        "hard_constraints": ["AreCollinear(A,M,B) @key"],
    }


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


@pytest.fixture
def heuristic_backends():
    return judges.JudgeBackendConfig(mode="heuristic")
