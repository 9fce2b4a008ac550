"""Run the dataset verification funnel on a tiny corpus with injected faults.

Filters run in a fixed order (hard -> alignment -> semantic -> geo_assert)
and every rejection is attributed to exactly one filter.  The three mutation
operators each target a specific filter, which is how the funnel's coverage
is validated.
"""

import json
import tempfile
from pathlib import Path

from geoverify.funnel import (
    mutate_delete_intent,
    mutate_hide_object,
    mutate_perturb_coordinate,
    run_funnel,
    sample_from_json,
    sample_to_json,
)

CLEAN_ROW = {
    "id": "tri-0",
    "statement": "Triangle ABC has a right angle at A. Find the hypotenuse.",
    "problem_images": [],
    "trace": ("We draw triangle ABC with the right angle at A.\n"
              "```geogebra\nA=(0,0)\nB=(4,0)\nC=(0,3)\nt=Polygon(A,B,C)\n"
              "u=Segment(A,B)\nv=Segment(A,C)\nh=Segment(B,C)\n```\n"
              "Therefore the answer is \\boxed{5}."),
    "ggb_source": ("A=(0,0)\nB=(4,0)\nC=(0,3)\nt=Polygon(A,B,C)\n"
                   "u=Segment(A,B)\nv=Segment(A,C)\nh=Segment(B,C)"),
    "answer": "5",
    "category": "plane_geometry",
    "difficulty": "easy",
    "stage": "K6_8",
    "hard_constraints": ["ArePerpendicular(u,v) @key"],
}

MIDPOINT_ROW = {
    "id": "mid-0",
    "statement": "Mark the midpoint M of segment AB.",
    "problem_images": [],
    "trace": ("We draw segment AB and mark its midpoint M.\n"
              "```geogebra\nA=(0,0)\nB=(4,0)\ns=Segment(A,B)\nM=Midpoint(A,B)\n```\n"
              "The answer is \\boxed{2}."),
    "ggb_source": "A=(0,0)\nB=(4,0)\ns=Segment(A,B)\nM=Midpoint(A,B)",
    "answer": "2",
    "category": "plane_geometry",
    "difficulty": "easy",
    "stage": "K6_8",
    "hard_constraints": ["AreCollinear(A,M,B) @key"],
}


def main() -> None:
    clean_tri = sample_from_json(CLEAN_ROW)
    clean_mid = sample_from_json(MIDPOINT_ROW)
    mutants = {
        "delete-intent": mutate_delete_intent(clean_mid),
        "perturb-coordinate": mutate_perturb_coordinate(clean_tri),
        "hide-required": mutate_hide_object(clean_tri),
    }
    rows = [CLEAN_ROW, MIDPOINT_ROW]
    for name, mutant in mutants.items():
        row = sample_to_json(mutant)
        row["id"] = name
        rows.append(row)

    workdir = Path(tempfile.mkdtemp(prefix="funnel_demo_"))
    corpus = workdir / "corpus.jsonl"
    with open(corpus, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")

    report = run_funnel(str(corpus), str(workdir / "out"))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))

    print("\nrejections by sample:")
    with open(workdir / "out" / "rejected.jsonl", "r", encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            print(f"  {row['id']:>20} rejected at {row['rejected_at']}: "
                  f"{row['reason'][:60]}")
    print(f"\nartifacts under {workdir / 'out'}")


if __name__ == "__main__":
    main()
