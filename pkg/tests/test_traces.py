import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from geoverify.traces import (
    AnswerSpec,
    CodeBlock,
    IncomparableKinds,
    InterleavedTrace,
    MalformedFence,
    NoAnswerFound,
    TextBlock,
    check_answer_equivalence,
    classify_answer,
    extract_final_answer,
    parse_trace,
    serialize_trace,
)


class TestParseTrace:
    def test_basic_interleaving(self):
        trace = parse_trace("step1\n```geogebra\nA=(0,0)\n```\nstep2")
        assert [type(b).__name__ for b in trace.blocks] == [
            "TextBlock", "CodeBlock", "TextBlock"]
        assert trace.blocks[0].content == "step1"
        assert trace.blocks[1].source == "A=(0,0)"
        assert trace.blocks[2].content == "step2"

    def test_text_only(self):
        trace = parse_trace("only prose, no code")
        assert len(trace.blocks) == 1
        assert trace.code_blocks() == []

    def test_unterminated_fence(self):
        with pytest.raises(MalformedFence):
            parse_trace("x\n```geogebra\nA=(0,0)")

    def test_case_insensitive_info_string(self):
        trace = parse_trace("```GeoGebra\nA=(1,2)\n```")
        assert len(trace.code_blocks()) == 1
        assert trace.blocks[0].language_tag == "GeoGebra"

    def test_other_fences_stay_text(self):
        source = "```python\nprint(1)\n```"
        trace = parse_trace(source)
        assert trace.code_blocks() == []
        assert serialize_trace(trace) == source

    def test_adjacent_code_blocks(self):
        source = "```geogebra\nA=(0,0)\n```\n```geogebra\nB=(1,1)\n```"
        trace = parse_trace(source)
        assert len(trace.code_blocks()) == 2
        assert serialize_trace(trace) == source


_ROUNDTRIP_SOURCES = [
    "step1\n```geogebra\nA=(0,0)\n```\nstep2",
    "```geogebra\nA=(0,0)\n```",
    "lead\n```geogebra\nA=(0,0)\nB=(1,1)\n```",
    "```geogebra\nA=(0,0)\n```\ntrail",
    "```geogebra\nA=(0,0)\n```\n",
    "\n```geogebra\nX=(2,3)\n```",
    "a\n\n```geogebra\nA=(0,0)\n```\n\nb",
    "```geogebra\n```",
    "plain text only\nwith lines",
    "",
]


@pytest.mark.parametrize("source", _ROUNDTRIP_SOURCES)
def test_roundtrip_fixed(source):
    assert serialize_trace(parse_trace(source)) == source


_text_chars = st.text(
    alphabet=st.characters(blacklist_characters="`", blacklist_categories=("Cs",)),
    max_size=40,
)
_code_lines = st.lists(
    st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126,
                                   blacklist_characters="`"), min_size=1, max_size=20),
    min_size=0, max_size=4,
).map("\n".join)


@st.composite
def _traces(draw):
    n = draw(st.integers(min_value=1, max_value=5))
    blocks = []
    for i in range(n):
        if i % 2 == 0:
            content = draw(_text_chars.filter(lambda s: s.strip() != ""))
            blocks.append(TextBlock(content))
        else:
            blocks.append(CodeBlock(source=draw(_code_lines), language_tag="geogebra"))
    return InterleavedTrace(blocks=tuple(blocks))


@given(_traces())
def test_roundtrip_property(trace):
    source = serialize_trace(trace)
    again = parse_trace(source)
    assert serialize_trace(again) == source


@given(_traces())
def test_no_character_loss(trace):
    """Total block content plus fence syntax accounts for every input byte."""
    source = serialize_trace(trace)
    parsed = parse_trace(source)
    content = sum(len(b.content) for b in parsed.text_blocks())
    code = sum(len(b.source) for b in parsed.code_blocks())
    fence_overhead = len(source) - content - code
    assert fence_overhead >= 0
    assert content + code <= len(source)


class TestExtractFinalAnswer:
    def test_boxed_fraction(self):
        trace = parse_trace("...the answer is \\boxed{3/4}")
        answer = extract_final_answer(trace)
        assert answer.kind == "numeric"
        assert answer.numeric_value == Fraction(3, 4)

    def test_trailing_choice(self):
        trace = parse_trace("Therefore choose B.")
        answer = extract_final_answer(trace)
        assert answer.kind == "choice"
        assert answer.choice_label == "B"

    def test_no_marker(self):
        with pytest.raises(NoAnswerFound):
            extract_final_answer(parse_trace("no conclusion here"))

    def test_boxed_beats_answer_marker(self):
        trace = parse_trace("answer: 7\nso we get \\boxed{9}")
        assert extract_final_answer(trace).numeric_value == 9

    def test_last_boxed_wins(self):
        trace = parse_trace("\\boxed{1} then corrected to \\boxed{2}")
        assert extract_final_answer(trace).numeric_value == 2

    def test_answer_colon_marker(self):
        trace = parse_trace("Final answer: 42")
        answer = extract_final_answer(trace)
        assert answer.kind == "numeric"
        assert answer.numeric_value == 42

    def test_no_text_blocks(self):
        trace = parse_trace("```geogebra\nA=(0,0)\n```")
        with pytest.raises(NoAnswerFound):
            extract_final_answer(trace)


class TestAnswerEquivalence:
    def test_rational_decimal(self):
        assert check_answer_equivalence(classify_answer("1/2"),
                                        classify_answer("0.5"), tol=1e-9)

    def test_choice_mismatch(self):
        assert not check_answer_equivalence(classify_answer("B"), classify_answer("C"))

    def test_pi_numeric(self):
        # oracle: an independent high-precision constant
        assert abs(3.1416 - math.pi) <= 1e-3
        assert check_answer_equivalence(classify_answer("3.1416"),
                                        classify_answer("π"), tol=1e-3)
        assert not check_answer_equivalence(classify_answer("3.15"),
                                            classify_answer("π"), tol=1e-3)

    def test_incomparable(self):
        with pytest.raises(IncomparableKinds):
            check_answer_equivalence(classify_answer("B"), classify_answer("12.5"))

    def test_symbolic_evaluation(self):
        assert check_answer_equivalence(classify_answer("2*pi"),
                                        classify_answer("6.2832"), tol=1e-4)
        assert check_answer_equivalence(classify_answer("sqrt(2)"),
                                        classify_answer("1.41421356"), tol=1e-6)

    def test_percent(self):
        assert check_answer_equivalence(classify_answer("50%"),
                                        classify_answer("0.5"), tol=1e-9)

    @given(st.sampled_from(["1/2", "0.5", "3", "B", "π", "2*pi", "x+y"]))
    def test_reflexive(self, raw):
        a = classify_answer(raw)
        assert check_answer_equivalence(a, a, tol=1e-9)

    @given(st.sampled_from(["1/2", "0.5", "3", "π", "3.1416"]),
           st.sampled_from(["1/2", "0.5", "3", "π", "3.1416"]))
    def test_symmetric(self, x, y):
        a, b = classify_answer(x), classify_answer(y)
        assert check_answer_equivalence(a, b, 1e-3) == check_answer_equivalence(b, a, 1e-3)

    @given(st.floats(min_value=-100, max_value=100, allow_nan=False),
           st.floats(-1e-7, 1e-7), st.floats(-1e-7, 1e-7))
    def test_numeric_transitive_up_to_2tol(self, base, d1, d2):
        tol = 1e-7
        a = classify_answer(repr(base))
        b = classify_answer(repr(base + d1))
        c = classify_answer(repr(base + d1 + d2))
        if check_answer_equivalence(a, b, tol) and check_answer_equivalence(b, c, tol):
            assert check_answer_equivalence(a, c, 2 * tol)


def test_answer_spec_invariants():
    with pytest.raises(ValueError):
        AnswerSpec(raw="3", kind="numeric")  # numeric requires a value
    with pytest.raises(ValueError):
        AnswerSpec(raw="BB", kind="choice", choice_label="BB")
