"""Drive the construction kernel directly: parse, execute, assert.

The kernel evaluates one command per line into named geometric objects;
boolean predicates then check relations numerically, and a weighted assertion
set turns into the formal score used by the Formal Judge.
"""

from geoverify.ggb import (
    eval_assertions,
    eval_predicate,
    execute_program,
    parse_assertion_file,
    parse_program,
)

SCRIPT = """# an inscribed right angle
c=Circle((0,0), 5)
A=(-5,0)
B=(5,0)
l=Line((1,-8),(1,8))        # vertical line x=1
P=Intersect(l,c,2)          # upper intersection
u=Segment(A,P)
v=Segment(B,P)
m=Midpoint(A,B)
"""

ASSERTS = """# Thales: the angle at P subtending the diameter is right
ArePerpendicular(u, v) @weight=2 @key
IsOnObject(P, c)
AreCollinear(A, m, B)
EqualsWithin(dist(m,A), dist(m,B))
IsInRegion((0,1), c)
"""


def main() -> None:
    program = parse_program(SCRIPT)
    state = execute_program(program)
    print("constructed objects:")
    for name in state.order:
        print(f"  {name:>2} = {state.objects[name]}")

    assertions = parse_assertion_file(ASSERTS)
    print("\nassertion verdicts:")
    for a in assertions:
        print(f"  {eval_predicate(state, a)!s:>5}  {a.text()}")

    form = eval_assertions(state, assertions, key_gate=True)
    print(f"\nweighted formal score: {form.score:g}")

    # move P off the circle and the key assertion collapses the score
    broken = SCRIPT.replace("P=Intersect(l,c,2)", "P=(1,3)")
    broken_state = execute_program(parse_program(broken))
    broken_form = eval_assertions(broken_state, assertions, key_gate=True)
    print(f"after breaking the construction: {broken_form.score:g} "
          f"(key failed: {broken_form.key_failed})")


if __name__ == "__main__":
    main()
