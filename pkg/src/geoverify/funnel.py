"""Dataset verification funnel: hard filtering plus three semantic filters.

Samples stream through hard -> alignment -> semantic -> geo_assert in that
order with first-failure attribution.  Curation is stricter than the reward:
the assertion filter demands a perfect weighted score, and judge timeouts
park a sample in the abstention queue instead of rejecting it, so backend
flakiness can never silently shrink the corpus.

Also includes the fault-injection mutation operators used to validate that
each filter catches its designated failure mode.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import judges as judges_mod
from . import ir as ir_mod
from .ggb import engine, parser, predicates
from .render import EmptyScene, encode_png, fit_viewport, render_state
from .traces import (
    CATEGORIES,
    DIFFICULTIES,
    STAGES,
    InterleavedTrace,
    ProblemInstance,
    classify_answer,
    parse_trace,
)

FILTER_IDS = ("hard", "alignment", "semantic", "geo_assert")


class SchemaError(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class IoError(OSError):
    pass


@dataclass
class CandidateSample:
    problem: ProblemInstance
    trace: InterleavedTrace
    ggb_source: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        combined = self.trace.combined_code()
        if combined != self.ggb_source:
            raise ValueError("ggb_source must equal the concatenated code blocks")


@dataclass(frozen=True)
class FilterVerdict:
    filter_id: str
    passed: bool
    reason: str = ""
    abstained: bool = False
    artifacts: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.filter_id not in FILTER_IDS:
            raise ValueError(f"unknown filter id {self.filter_id!r}")
        if not self.passed and not self.reason:
            raise ValueError("failing verdicts need a reason")


@dataclass
class FunnelReport:
    total_in: int = 0
    passed_all: int = 0
    abstained: int = 0
    per_filter_rejections: dict = field(default_factory=lambda: {f: 0 for f in FILTER_IDS})
    split_stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total_in": self.total_in,
            "passed_all": self.passed_all,
            "abstained": self.abstained,
            "per_filter_rejections": dict(self.per_filter_rejections),
            "split_stats": self.split_stats,
        }


_REQUIRED_KEYS = ("id", "statement", "trace", "ggb_source", "answer",
                  "category", "difficulty", "stage")


def problem_from_json(row: dict, line_no: int = 0) -> ProblemInstance:
    """Problem fields shared by the dataset schema and the reward service."""
    for key in ("id", "statement", "answer"):
        if key not in row:
            raise SchemaError(line_no, f"missing key {key!r}")
    category = row.get("category", "plane_geometry")
    difficulty = row.get("difficulty", "easy")
    stage = row.get("stage", "K6_8")
    if category not in CATEGORIES:
        raise SchemaError(line_no, f"bad category {category!r}")
    if difficulty not in DIFFICULTIES:
        raise SchemaError(line_no, f"bad difficulty {difficulty!r}")
    if stage not in STAGES:
        raise SchemaError(line_no, f"bad stage {stage!r}")
    try:
        constraints = [predicates.parse_assertion(t)
                       for t in row.get("hard_constraints", [])]
    except predicates.PredicateError as exc:
        raise SchemaError(line_no, f"bad hard constraint: {exc}") from None
    return ProblemInstance(
        id=str(row["id"]),
        statement=row["statement"],
        problem_images=list(row.get("problem_images", [])),
        reference_answer=classify_answer(str(row["answer"])),
        category=category,
        difficulty=difficulty,
        stage=stage,
        hard_constraints=constraints,
    )


def sample_from_json(row: dict, line_no: int = 0) -> CandidateSample:
    for key in _REQUIRED_KEYS:
        if key not in row:
            raise SchemaError(line_no, f"missing key {key!r}")
    problem = problem_from_json(row, line_no)
    trace = parse_trace(row["trace"])
    try:
        return CandidateSample(problem=problem, trace=trace,
                               ggb_source=row["ggb_source"],
                               provenance=dict(row.get("provenance", {})))
    except ValueError as exc:
        raise SchemaError(line_no, str(exc)) from None


def sample_to_json(sample: CandidateSample) -> dict:
    from .traces import serialize_trace

    return {
        "id": sample.problem.id,
        "statement": sample.problem.statement,
        "problem_images": list(sample.problem.problem_images),
        "trace": serialize_trace(sample.trace),
        "ggb_source": sample.ggb_source,
        "answer": sample.problem.reference_answer.raw
        if sample.problem.reference_answer else "",
        "category": sample.problem.category,
        "difficulty": sample.problem.difficulty,
        "stage": sample.problem.stage,
        "hard_constraints": [a.text() for a in sample.problem.hard_constraints],
        "provenance": dict(sample.provenance),
    }


@dataclass
class _HardArtifacts:
    program: parser.GgbProgram | None = None
    state: object = None
    viewport: object = None
    render_png: bytes | None = None


def hard_filter(sample: CandidateSample) -> tuple[FilterVerdict, _HardArtifacts]:
    """Strict parse + execute + non-degenerate render."""
    art = _HardArtifacts()
    try:
        art.program = parser.parse_program(sample.ggb_source)
        art.state = engine.execute_program(art.program, mode="strict")
    except (parser.GgbParseError, engine.ExecutionError) as exc:
        return (FilterVerdict("hard", False,
                              reason=f"{type(exc).__name__}: {exc}"), art)
    try:
        art.viewport = fit_viewport(art.state)
        image = render_state(art.state, art.viewport)
    except EmptyScene as exc:
        return (FilterVerdict("hard", False, reason=f"degenerate render: {exc}"), art)
    buf = image.buffer
    if bool((buf == buf.flat[0]).all()):
        return (FilterVerdict("hard", False, reason="degenerate render: empty canvas"), art)
    art.render_png = encode_png(image)
    return (FilterVerdict("hard", True), art)


def alignment_filter(
    sample: CandidateSample,
    render_png: bytes | None,
    backends: judges_mod.JudgeBackendConfig,
) -> FilterVerdict:
    """Visual-judge wrapper; backend timeouts abstain instead of rejecting."""
    request = judges_mod.JudgeRequest(
        kind="visual",
        trace_text=sample.problem.statement + "\n" + sample.trace.combined_text(),
        program_source=sample.ggb_source,
        render_image=render_png,
        prompt_template_id="visual_judge",
    )
    try:
        verdict = judges_mod.judge_visual(request, backends)
    except judges_mod.BackendTimeout as exc:
        return FilterVerdict("alignment", False, reason=f"backend timeout: {exc}",
                             abstained=True)
    except judges_mod.JudgeError as exc:
        return FilterVerdict("alignment", False,
                             reason=f"{type(exc).__name__}: {exc}", abstained=True)
    if verdict.binary:
        return FilterVerdict("alignment", True)
    return FilterVerdict("alignment", False,
                         reason=verdict.error_tag or verdict.rationale)


def semantic_filter(sample: CandidateSample, strict: bool = False) -> FilterVerdict:
    """Intent entailment between the trace text and the lowered IR."""
    try:
        program = parser.parse_program(sample.ggb_source)
        state = engine.execute_program(program, mode="lenient")
    except parser.GgbParseError as exc:
        return FilterVerdict("semantic", False, reason=f"parse failed: {exc}")
    doc = ir_mod.lower_to_ir(program, state, strict=strict)
    intents = ir_mod.extract_text_intents(
        [sample.problem.statement] + [b.content for b in sample.trace.text_blocks()]
    )
    result = ir_mod.check_entailment(intents, doc)
    if not result.ok:
        kind, args = result.first_unmatched
        return FilterVerdict("semantic", False,
                             reason=f"unmatched intent {kind}({', '.join(args)})")
    if strict:
        for rel, args in doc.relations:
            if rel == "polygon_cycle" and args[1] == "mismatch":
                return FilterVerdict("semantic", False,
                                     reason=f"polygon naming mismatch: {args[0]}")
    return FilterVerdict("semantic", True)


def geo_assert_filter(
    sample: CandidateSample,
    backends: judges_mod.JudgeBackendConfig,
    artifacts: _HardArtifacts | None = None,
) -> FilterVerdict:
    """Synthesized assertions must pass perfectly (curation > reward strictness)."""
    try:
        if artifacts is None or artifacts.state is None:
            program = parser.parse_program(sample.ggb_source)
            state = engine.execute_program(program, mode="strict")
            render_png = None
        else:
            state = artifacts.state
            render_png = artifacts.render_png
        assertions = judges_mod.synthesize_assertions(
            sample.problem, sample.ggb_source, render_png, backends)
    except judges_mod.EmptyAssertionSet:
        return FilterVerdict("geo_assert", False, reason="no assertions synthesized",
                             abstained=True)
    except judges_mod.BackendTimeout as exc:
        return FilterVerdict("geo_assert", False, reason=f"backend timeout: {exc}",
                             abstained=True)
    except (parser.GgbParseError, engine.ExecutionError) as exc:
        return FilterVerdict("geo_assert", False, reason=f"{type(exc).__name__}: {exc}")
    form = predicates.eval_assertions(state, assertions, key_gate=True)
    if form.score == 1.0:
        return FilterVerdict("geo_assert", True)
    failing = [v.assertion.text() for v in form.verdicts if not v.passed]
    return FilterVerdict("geo_assert", False,
                         reason=f"assertions failed: {'; '.join(failing[:3])}")


def run_sample(
    sample: CandidateSample, backends: judges_mod.JudgeBackendConfig,
    strict_semantic: bool = False,
    enabled: tuple[str, ...] = FILTER_IDS,
) -> list[FilterVerdict]:
    """All verdicts for one sample, stopping at the first failure/abstention."""
    verdicts: list[FilterVerdict] = []
    hard_verdict, artifacts = hard_filter(sample)
    if "hard" in enabled:
        verdicts.append(hard_verdict)
        if not hard_verdict.passed:
            return verdicts
    if "alignment" in enabled:
        v = alignment_filter(sample, artifacts.render_png, backends)
        verdicts.append(v)
        if not v.passed:
            return verdicts
    if "semantic" in enabled:
        v = semantic_filter(sample, strict=strict_semantic)
        verdicts.append(v)
        if not v.passed:
            return verdicts
    if "geo_assert" in enabled:
        v = geo_assert_filter(sample, backends, artifacts)
        verdicts.append(v)
    return verdicts


def run_funnel(
    input_path: str,
    output_dir: str,
    backends: judges_mod.JudgeBackendConfig | None = None,
    workers: int = 4,
    strict_semantic: bool = False,
    enabled: tuple[str, ...] = FILTER_IDS,
) -> FunnelReport:
    """Stream a JSONL corpus through the funnel; writes all_pass / rejected /
    abstained JSONL plus report.json.  Deterministic given a fixed judge cache."""
    backends = backends or judges_mod.JudgeBackendConfig(mode="heuristic")
    if not os.path.exists(input_path):
        raise IoError(f"input not found: {input_path}")
    rows: list[tuple[int, dict]] = []
    with open(input_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append((line_no, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise SchemaError(line_no, f"bad JSON: {exc}") from None
    samples = [(line_no, sample_from_json(row, line_no)) for line_no, row in rows]

    def work(item):
        line_no, sample = item
        return line_no, sample, run_sample(sample, backends,
                                           strict_semantic=strict_semantic,
                                           enabled=enabled)

    if workers > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, samples))
    else:
        outcomes = [work(item) for item in samples]

    report = FunnelReport(total_in=len(samples))
    os.makedirs(output_dir, exist_ok=True)
    all_pass_path = os.path.join(output_dir, "all_pass.jsonl")
    rejected_path = os.path.join(output_dir, "rejected.jsonl")
    abstained_path = os.path.join(output_dir, "abstained.jsonl")
    with open(all_pass_path, "w", encoding="utf-8") as ap, \
            open(rejected_path, "w", encoding="utf-8") as rj, \
            open(abstained_path, "w", encoding="utf-8") as ab:
        for _, sample, verdicts in outcomes:
            row = sample_to_json(sample)
            last = verdicts[-1] if verdicts else None
            if last is not None and last.passed is False and last.abstained:
                report.abstained += 1
                row["abstained_at"] = last.filter_id
                row["reason"] = last.reason
                ab.write(json.dumps(row, sort_keys=True) + "\n")
            elif all(v.passed for v in verdicts):
                report.passed_all += 1
                ap.write(json.dumps(row, sort_keys=True) + "\n")
            else:
                report.per_filter_rejections[last.filter_id] += 1
                row["rejected_at"] = last.filter_id
                row["reason"] = last.reason
                rj.write(json.dumps(row, sort_keys=True) + "\n")
    report.split_stats = _histograms(s for _, s, _ in outcomes)
    with open(os.path.join(output_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
    return report


def _histograms(samples) -> dict:
    cat: dict[str, int] = {}
    diff: dict[str, int] = {}
    stage: dict[str, int] = {}
    multi = 0
    n = 0
    for s in samples:
        n += 1
        cat[s.problem.category] = cat.get(s.problem.category, 0) + 1
        diff[s.problem.difficulty] = diff.get(s.problem.difficulty, 0) + 1
        stage[s.problem.stage] = stage.get(s.problem.stage, 0) + 1
        if len(s.problem.problem_images) >= 2:
            multi += 1
    return {"n": n, "category": cat, "difficulty": diff, "stage": stage,
            "multi_image": multi}


def split_stats(dataset_path: str) -> dict:
    """Per-split percentages: category mix, hard share, and >= 2 image share.

    Rows may carry a ``split`` key (or ``provenance.split``); rows without one
    are grouped under ``all``.  Percentages are rounded to one decimal, the
    precision used in published split tables.
    """
    if not os.path.exists(dataset_path):
        raise IoError(f"dataset not found: {dataset_path}")
    groups: dict[str, dict] = {}
    with open(dataset_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(line_no, f"bad JSON: {exc}") from None
            for key in ("category", "difficulty"):
                if key not in row:
                    raise SchemaError(line_no, f"missing key {key!r}")
            if row["category"] not in CATEGORIES:
                raise SchemaError(line_no, f"bad category {row['category']!r}")
            split = row.get("split") or row.get("provenance", {}).get("split") or "all"
            g = groups.setdefault(split, {"n": 0, "cat": {}, "hard": 0, "multi": 0,
                                          "stage": {}})
            g["n"] += 1
            g["cat"][row["category"]] = g["cat"].get(row["category"], 0) + 1
            if row["difficulty"] == "hard":
                g["hard"] += 1
            if len(row.get("problem_images", [])) >= 2:
                g["multi"] += 1
            if "stage" in row:
                g["stage"][row["stage"]] = g["stage"].get(row["stage"], 0) + 1
    out: dict[str, dict] = {}
    for split, g in groups.items():
        n = g["n"]
        pct = lambda c: round(100.0 * c / n, 1) if n else 0.0  # noqa: E731
        out[split] = {
            "n_instances": n,
            "category_pct": {c: pct(g["cat"].get(c, 0)) for c in CATEGORIES},
            "hard_pct": pct(g["hard"]),
            "multi_image_pct": pct(g["multi"]),
            "stage_pct": {s: pct(g["stage"].get(s, 0)) for s in sorted(g["stage"])},
        }
    return out


# --- fault-injection mutation operators -----------------------------------

_INTENT_HEADS = ("Midpoint", "PerpendicularLine", "ParallelLine", "Tangent", "Intersect")


def mutate_delete_intent(sample: CandidateSample) -> CandidateSample | None:
    """Drop a code command that realizes a textual intent, replacing it with an
    unconstrained point at the same location (caught by the semantic filter)."""
    lines = sample.ggb_source.split("\n")
    target_idx = None
    target_cmd = None
    program = parser.parse_program(sample.ggb_source)
    state = engine.execute_program(program, mode="lenient")
    for cmd in program.commands:
        if cmd.head in _INTENT_HEADS and cmd.head in ("Midpoint",):
            target_cmd = cmd
            target_idx = cmd.line - 1
            break
    if target_cmd is None:
        for cmd in program.commands:
            if cmd.head in _INTENT_HEADS:
                target_cmd = cmd
                target_idx = cmd.line - 1
                break
    if target_cmd is None or target_cmd.name not in state:
        return None
    obj = state.objects[target_cmd.name]
    if hasattr(obj, "x") and hasattr(obj, "y"):
        # keep geometry identical so only the *definition* is lost
        lines[target_idx] = f"{target_cmd.name}=({obj.x}, {obj.y})"
    else:
        return None
    return _rebuild(sample, "\n".join(lines), "delete_intent")


_COORD_LINE = re.compile(r"^(\s*[A-Za-z_][A-Za-z0-9_']*\s*=\s*)\(\s*([-0-9.eE+]+)\s*,\s*([-0-9.eE+]+)\s*\)\s*$")


def mutate_perturb_coordinate(sample: CandidateSample, delta: float = 0.5) -> CandidateSample | None:
    """Shift one defining coordinate by delta, breaking metric assertions
    (caught by the geo-assert filter)."""
    lines = sample.ggb_source.split("\n")
    for i, line in enumerate(lines):
        m = _COORD_LINE.match(line)
        if m:
            x = float(m.group(2)) + delta
            lines[i] = f"{m.group(1)}({x}, {m.group(3)})"
            return _rebuild(sample, "\n".join(lines), "perturb_coordinate")
    return None


def mutate_hide_object(sample: CandidateSample) -> CandidateSample | None:
    """Hide an object the text relies on (caught by the alignment filter)."""
    program = parser.parse_program(sample.ggb_source)
    state = engine.execute_program(program, mode="lenient")
    intents = ir_mod.extract_text_intents(
        [sample.problem.statement] + [b.content for b in sample.trace.text_blocks()]
    )
    required = []
    for _, args in intents.intents:
        for a in args:
            if a in state and state.visibility.get(a):
                required.append(a)
    if not required:
        return None
    target = required[0]
    return _rebuild(sample, sample.ggb_source + f"\nSetVisible({target}, false)",
                    "hide_object")


def _rebuild(sample: CandidateSample, new_source: str, op: str) -> CandidateSample:
    """Swap the (single) code block for the mutated source."""
    from .traces import CodeBlock, serialize_trace

    blocks = []
    replaced = False
    remaining = new_source
    for b in sample.trace.blocks:
        if isinstance(b, CodeBlock) and not replaced:
            blocks.append(CodeBlock(source=remaining, language_tag=b.language_tag))
            replaced = True
        elif isinstance(b, CodeBlock):
            blocks.append(CodeBlock(source="", language_tag=b.language_tag))
        else:
            blocks.append(b)
    trace = InterleavedTrace(blocks=tuple(blocks))
    provenance = dict(sample.provenance)
    provenance["mutation"] = op
    return CandidateSample(
        problem=sample.problem, trace=trace,
        ggb_source=trace.combined_code(), provenance=provenance,
    )
