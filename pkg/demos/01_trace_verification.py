"""Verify one interleaved reasoning trace end to end.

A trace alternates prose with fenced ``geogebra`` code blocks.  The verifier
executes the code, checks hard constraints, renders the figure, judges it,
checks that the prose's geometric intents are realized by the code, and
finally compares the extracted answer with the reference.
"""

from geoverify.funnel import problem_from_json
from geoverify.reward import RewardConfig, verify_trace
from geoverify.traces import parse_trace

TRACE = """We are asked for the midpoint of AB.
We draw segment AB and mark its midpoint M.
```geogebra
A=(0,0)
B=(4,0)
s=Segment(A,B)
M=Midpoint(A,B)
```
M sits halfway along AB, so the answer is \\boxed{2}.
"""

PROBLEM = {
    "id": "demo-midpoint",
    "statement": "A=(0,0) and B=(4,0). Find the x coordinate of the midpoint of AB.",
    "answer": "2",
    "hard_constraints": ["AreCollinear(A,M,B) @key"],
}


def main() -> None:
    trace = parse_trace(TRACE)
    print(f"parsed {len(trace.text_blocks())} text blocks, "
          f"{len(trace.code_blocks())} code blocks")

    problem = problem_from_json(PROBLEM)
    breakdown = verify_trace(trace, problem, RewardConfig(beta=0.1))

    print("\ngate bits:")
    print(f"  answer correct (c_ans) : {breakdown.c_ans}")
    print(f"  code executes  (c_exe) : {breakdown.c_exe}")
    print(f"  constraints    (c_geo) : {breakdown.c_geo}")
    print(f"  perceptual     (c_perc): {breakdown.c_perc}")
    print(f"  semantic       (c_sem) : {breakdown.c_sem}")
    print("\njudge scores:")
    print(f"  visual s_vis = {breakdown.s_vis:.3f}, semantic s_sem = "
          f"{breakdown.s_sem:.3f}, formal s_form = {breakdown.s_form:.3f}")
    print(f"  draw score = {breakdown.s_draw:.4f} "
          f"({breakdown.s_draw * 100:.2f} in x100 presentation)")
    print(f"\ntotal reward = {breakdown.total}")

    # break the gate: a wrong answer zeroes everything under hard gating
    wrong = parse_trace(TRACE.replace("\\boxed{2}", "\\boxed{3}"))
    print(f"wrong answer total = {verify_trace(wrong, problem).total}")


if __name__ == "__main__":
    main()
