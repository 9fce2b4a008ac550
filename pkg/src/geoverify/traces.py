"""Interleaved solution traces: text blocks alternating with fenced GeoGebra code.

A trace is parsed from markdown-style source where triple-backtick fences with
the info string ``geogebra`` (case-insensitive) delimit code blocks.  Fences
with any other info string are ordinary text.  Parsing is lossless: the
newline directly before an opening fence and directly after a closing fence
belong to the fence syntax, and ``serialize_trace`` reinserts them, so
``serialize_trace(parse_trace(s)) == s`` for well-fenced input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from . import exprs


class TraceError(Exception):
    pass


class MalformedFence(TraceError):
    """An opening fence has no closing fence before end of input."""


class NoAnswerFound(TraceError):
    """No answer marker matched in the trace text."""


class IncomparableKinds(TraceError):
    """Two answers cannot be compared and no coercion applies."""


@dataclass(frozen=True)
class TextBlock:
    content: str


@dataclass(frozen=True)
class CodeBlock:
    source: str
    language_tag: str = "geogebra"


Block = Union[TextBlock, CodeBlock]

ANSWER_KINDS = ("numeric", "symbolic", "choice", "text")
CATEGORIES = ("plane_geometry", "function", "analytic_geometry")
DIFFICULTIES = ("easy", "hard")
STAGES = ("K0_5", "K6_8", "K9_12")


@dataclass(frozen=True)
class AnswerSpec:
    raw: str
    kind: str
    numeric_value: Union[Fraction, float, None] = None
    choice_label: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ANSWER_KINDS:
            raise ValueError(f"unknown answer kind: {self.kind}")
        if self.kind == "numeric" and self.numeric_value is None:
            raise ValueError("numeric answer requires numeric_value")
        if self.kind == "choice":
            if not (self.choice_label and re.fullmatch(r"[A-Z]", self.choice_label)):
                raise ValueError("choice answer requires a single A-Z label")


@dataclass(frozen=True)
class InterleavedTrace:
    blocks: tuple[Block, ...]
    final_answer: AnswerSpec | None = None

    def text_blocks(self) -> list[TextBlock]:
        return [b for b in self.blocks if isinstance(b, TextBlock)]

    def code_blocks(self) -> list[CodeBlock]:
        return [b for b in self.blocks if isinstance(b, CodeBlock)]

    def combined_text(self) -> str:
        return "\n".join(b.content for b in self.text_blocks())

    def combined_code(self) -> str:
        return "\n".join(b.source for b in self.code_blocks())


@dataclass
class ProblemInstance:
    """One dataset problem: statement, images, reference answer, and hard constraints."""

    id: str
    statement: str
    problem_images: list[str] = field(default_factory=list)
    reference_answer: AnswerSpec | None = None
    category: str = "plane_geometry"
    difficulty: str = "easy"
    stage: str = "K6_8"
    hard_constraints: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be nonempty")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category: {self.category}")
        if self.difficulty not in DIFFICULTIES:
            raise ValueError(f"unknown difficulty: {self.difficulty}")
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage: {self.stage}")


_FENCE_LINE = re.compile(r"(?m)^```([^\n]*)$")


def parse_trace(source: str) -> InterleavedTrace:
    """Split source into text and ``geogebra``-fenced code blocks, losslessly."""
    blocks: list[Block] = []
    pos = 0
    while True:
        match = None
        for m in _FENCE_LINE.finditer(source, pos):
            if m.group(1).strip().lower() == "geogebra":
                match = m
                break
        if match is None:
            break
        pre_raw = source[pos : match.start()]
        if pre_raw:
            pre = pre_raw[:-1] if pre_raw.endswith("\n") else pre_raw
            blocks.append(TextBlock(pre))
        body_start = match.end() + 1  # skip the newline terminating the opener
        if match.end() >= len(source):
            raise MalformedFence(f"unterminated fence opened at offset {match.start()}")
        closer = re.compile(r"(?m)^```[ \t]*$").search(source, body_start)
        if closer is None:
            raise MalformedFence(f"unterminated fence opened at offset {match.start()}")
        inner = source[body_start : closer.start()]
        code = inner[:-1] if inner.endswith("\n") else inner
        blocks.append(CodeBlock(source=code, language_tag=match.group(1)))
        pos = closer.end()
        if pos < len(source) and source[pos] == "\n":
            pos += 1
            if pos == len(source):
                blocks.append(TextBlock(""))
    tail = source[pos:]
    if tail:
        blocks.append(TextBlock(tail))
    return InterleavedTrace(blocks=tuple(blocks))


def serialize_trace(trace: InterleavedTrace) -> str:
    """Inverse of parse_trace: reinsert fences and their boundary newlines."""
    parts: list[str] = []
    last = len(trace.blocks) - 1
    for i, block in enumerate(trace.blocks):
        if isinstance(block, TextBlock):
            parts.append(block.content)
            nxt = trace.blocks[i + 1] if i < last else None
            if isinstance(nxt, CodeBlock):
                parts.append("\n")
        else:
            parts.append(f"```{block.language_tag}\n")
            if block.source:
                parts.append(block.source + "\n")
            parts.append("```")
            if i < last:
                parts.append("\n")
    return "".join(parts)


_BOXED = re.compile(r"\\boxed\{([^{}]*(?:\{[^{}]*\}[^{}]*)*)\}")
_ANSWER_MARKER = re.compile(
    r"(?i)\b(?:final\s+answer|answer)\s*(?:is|:|=)\s*([^\n.;,]+)"
)
_CHOICE = re.compile(r"(?<![A-Za-z0-9])([A-E])(?![A-Za-z0-9])")
_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?%?$")


def classify_answer(raw: str) -> AnswerSpec:
    """Build an AnswerSpec from marker payload text, classifying its kind by shape."""
    payload = raw.strip().strip("$").strip()
    if re.fullmatch(r"\(?[A-E]\)?", payload):
        return AnswerSpec(raw=raw, kind="choice", choice_label=payload.strip("()"))
    compact = payload.replace(" ", "")
    if _NUMBER.match(compact):
        text = compact.rstrip("%")
        scale = Fraction(1, 100) if compact.endswith("%") else 1
        try:
            value: Union[Fraction, float] = Fraction(text) * scale
        except ValueError:
            value = float(text) * float(scale)
        return AnswerSpec(raw=raw, kind="numeric", numeric_value=value)
    frac = re.fullmatch(r"([+-]?\d+)\s*/\s*(\d+)", payload)
    if frac and int(frac.group(2)) != 0:
        return AnswerSpec(
            raw=raw, kind="numeric",
            numeric_value=Fraction(int(frac.group(1)), int(frac.group(2))),
        )
    value = exprs.try_evaluate(payload)
    if value is not None:
        return AnswerSpec(raw=raw, kind="symbolic", numeric_value=value)
    if re.search(r"[0-9^*/+\-=π√]", payload):
        return AnswerSpec(raw=raw, kind="symbolic")
    return AnswerSpec(raw=raw, kind="text")


def extract_final_answer(trace: InterleavedTrace) -> AnswerSpec:
    """Return the last answer-marker match: boxed, then "answer:", then a choice letter."""
    texts = trace.text_blocks()
    if not texts:
        raise NoAnswerFound("trace has no text blocks")
    joined = "\n".join(b.content for b in texts)
    boxed = list(_BOXED.finditer(joined))
    if boxed:
        return classify_answer(boxed[-1].group(1))
    marked = list(_ANSWER_MARKER.finditer(joined))
    if marked:
        return classify_answer(marked[-1].group(1))
    last_text = texts[-1].content
    choices = list(_CHOICE.finditer(last_text))
    if choices:
        return classify_answer(choices[-1].group(1))
    raise NoAnswerFound("no answer marker found")


def _numeric_of(answer: AnswerSpec) -> Union[Fraction, float, None]:
    if answer.numeric_value is not None:
        return answer.numeric_value
    if answer.kind in ("symbolic", "text"):
        return exprs.try_evaluate(answer.raw)
    return None


def _normalize_symbolic(raw: str) -> str:
    s = exprs.normalize(raw)
    return re.sub(r"\s+", "", s)


def check_answer_equivalence(
    candidate: AnswerSpec, reference: AnswerSpec, tol: float = 1e-6
) -> bool:
    """Decide answer equivalence; this is the answer-correctness gate bit."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if candidate.kind == "choice" or reference.kind == "choice":
        a = candidate.choice_label or candidate.raw.strip()
        b = reference.choice_label or reference.raw.strip()
        if re.fullmatch(r"[A-Za-z]", a) and re.fullmatch(r"[A-Za-z]", b):
            return a.upper() == b.upper()
        raise IncomparableKinds(f"{candidate.kind} vs {reference.kind}")
    a_num = _numeric_of(candidate)
    b_num = _numeric_of(reference)
    if a_num is not None and b_num is not None:
        if isinstance(a_num, Fraction) and isinstance(b_num, Fraction):
            return abs(a_num - b_num) <= Fraction(tol) if tol else a_num == b_num
        return abs(float(a_num) - float(b_num)) <= tol
    if candidate.kind == "numeric" or reference.kind == "numeric":
        raise IncomparableKinds(f"{candidate.kind} vs {reference.kind}")
    return _normalize_symbolic(candidate.raw) == _normalize_symbolic(reference.raw)
