"""Gated dense reward composition and the tri-perspective draw score.

The total reward is ``c_ans + beta * (c_geo + c_perc + c_sem)``.  In the
default hard-gate mode the bonus term is zeroed whenever the answer is wrong
or the code failed to execute, so no amount of pretty drawing can outrank a
correct answer.  The draw score is the plain mean of the visual, semantic,
and formal sub-scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from . import judges as judges_mod
from . import ir as ir_mod
from .ggb import engine, parser, predicates
from .render import EmptyScene, RenderOptions, encode_png, fit_viewport, render_state
from .traces import (
    IncomparableKinds,
    InterleavedTrace,
    NoAnswerFound,
    ProblemInstance,
    check_answer_equivalence,
    extract_final_answer,
)

GATE_MODES = ("hard_gate", "additive")


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class RewardConfig:
    beta: float = 0.1
    gate_mode: str = "hard_gate"
    tau_perc: float = 0.5
    eps_geo: float = 1e-7
    key_gate: bool = True
    answer_tol: float = 1e-6
    render_px: int = 512

    def __post_init__(self) -> None:
        if not (self.beta >= 0.0 and self.beta == self.beta):
            raise ValueError("beta must be finite and >= 0")
        if self.gate_mode not in GATE_MODES:
            raise ValueError(f"unknown gate_mode {self.gate_mode!r}")
        if not (0.0 <= self.tau_perc <= 1.0):
            raise ValueError("tau_perc must be in [0, 1]")


@dataclass(frozen=True)
class RewardBreakdown:
    c_ans: int
    c_exe: int | None = None
    c_geo: int | None = None
    c_perc: int | None = None
    c_sem: int | None = None
    s_vis: float | None = None
    s_sem: float | None = None
    s_form: float | None = None
    s_draw: float | None = None
    total: float = 0.0
    trace_id: str = ""
    errors: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "c_ans": self.c_ans,
            "c_exe": self.c_exe,
            "c_geo": self.c_geo,
            "c_perc": self.c_perc,
            "c_sem": self.c_sem,
            "s_vis": self.s_vis,
            "s_sem": self.s_sem,
            "s_form": self.s_form,
            "s_draw": self.s_draw,
            "total": self.total,
            "errors": list(self.errors),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def breakdown_from_dict(d: dict) -> RewardBreakdown:
    return RewardBreakdown(
        c_ans=d["c_ans"], c_exe=d.get("c_exe"), c_geo=d.get("c_geo"),
        c_perc=d.get("c_perc"), c_sem=d.get("c_sem"), s_vis=d.get("s_vis"),
        s_sem=d.get("s_sem"), s_form=d.get("s_form"), s_draw=d.get("s_draw"),
        total=d["total"], trace_id=d.get("trace_id", ""),
        errors=tuple(d.get("errors", ())),
    )


def gated_total(c_ans: int, c_exe: int | None, c_geo: int | None,
                c_perc: int | None, c_sem: int | None, config: RewardConfig) -> float:
    """Total reward under the configured gate semantics.

    Absent bits (text-only traces) contribute nothing to the bonus and do not
    trip the executability gate.
    """
    bonus = config.beta * sum(b for b in (c_geo, c_perc, c_sem) if b is not None)
    if config.gate_mode == "hard_gate":
        if c_ans == 0 or c_exe == 0:
            return float(c_ans)
        return float(c_ans) + bonus
    return float(c_ans) + bonus


def compute_reward(
    c_ans: int,
    c_exe: int | None = None,
    c_geo: int | None = None,
    c_perc: int | None = None,
    c_sem: int | None = None,
    s_vis: float | None = None,
    s_sem: float | None = None,
    s_form: float | None = None,
    config: RewardConfig = RewardConfig(),
    trace_id: str = "",
    errors: tuple[str, ...] = (),
) -> RewardBreakdown:
    """Assemble a breakdown whose total follows the configured gating."""
    s_draw = None
    if s_vis is not None and s_sem is not None and s_form is not None:
        s_draw = compute_draw_score(s_vis, s_sem, s_form)
    return RewardBreakdown(
        c_ans=c_ans, c_exe=c_exe, c_geo=c_geo, c_perc=c_perc, c_sem=c_sem,
        s_vis=s_vis, s_sem=s_sem, s_form=s_form, s_draw=s_draw,
        total=gated_total(c_ans, c_exe, c_geo, c_perc, c_sem, config),
        trace_id=trace_id, errors=errors,
    )


def compute_draw_score(s_vis: float, s_sem: float, s_form: float) -> float:
    """Mean of the three normalized judge scores."""
    for name, v in (("s_vis", s_vis), ("s_sem", s_sem), ("s_form", s_form)):
        if not (0.0 <= v <= 1.0):
            raise OutOfRange(f"{name}={v} outside [0, 1]")
    return (s_vis + s_sem + s_form) / 3.0


def draw_score_percent(s_vis: float, s_sem: float, s_form: float) -> float:
    """x100 presentation, rounded to two decimals."""
    return round(compute_draw_score(s_vis, s_sem, s_form) * 100.0, 2)


@dataclass
class _BlockResult:
    c_exe: int
    c_geo: int
    c_perc: int
    c_sem: int
    s_vis: float
    s_sem: float
    s_form: float | None
    errors: list[str] = field(default_factory=list)


def verify_trace(
    trace: InterleavedTrace,
    problem: ProblemInstance,
    config: RewardConfig = RewardConfig(),
    backends: judges_mod.JudgeBackendConfig | None = None,
) -> RewardBreakdown:
    """Run the full verification pipeline over a parsed trace.

    Per code block: parse+execute (c_exe), hard constraints (c_geo), render and
    visual judge (c_perc, s_vis), IR entailment (c_sem, s_sem), synthesized
    assertions (s_form).  Code blocks are cumulative: block k executes the
    concatenation of blocks 1..k, so constructions may build on earlier state.
    Bits aggregate by minimum, scalars by mean.  One bad block never aborts
    the trace; its errors land in the breakdown's error ledger.
    """
    backends = backends or judges_mod.JudgeBackendConfig(mode="heuristic")
    backends = replace_tau(backends, config.tau_perc)
    c_ans = _answer_bit(trace, problem, config)
    code_blocks = trace.code_blocks()
    text_blocks = trace.text_blocks()
    if not code_blocks:
        return compute_reward(c_ans=c_ans, config=config, trace_id=problem.id)

    results: list[_BlockResult] = []
    for k in range(len(code_blocks)):
        cumulative = "\n".join(b.source for b in code_blocks[: k + 1])
        text_so_far = _text_up_to_block(trace, k)
        results.append(
            _verify_block(cumulative, text_so_far, problem, config, backends)
        )

    errors = tuple(e for r in results for e in r.errors)
    s_forms = [r.s_form for r in results if r.s_form is not None]
    return compute_reward(
        c_ans=c_ans,
        c_exe=min(r.c_exe for r in results),
        c_geo=min(r.c_geo for r in results),
        c_perc=min(r.c_perc for r in results),
        c_sem=min(r.c_sem for r in results),
        s_vis=sum(r.s_vis for r in results) / len(results),
        s_sem=sum(r.s_sem for r in results) / len(results),
        s_form=sum(s_forms) / len(s_forms) if s_forms else None,
        config=config,
        trace_id=problem.id,
        errors=errors,
    )


def replace_tau(backends: judges_mod.JudgeBackendConfig,
                tau: float) -> judges_mod.JudgeBackendConfig:
    if backends.tau_perc == tau:
        return backends
    return replace(backends, tau_perc=tau)


def _answer_bit(trace: InterleavedTrace, problem: ProblemInstance,
                config: RewardConfig) -> int:
    if problem.reference_answer is None:
        return 0
    try:
        candidate = extract_final_answer(trace)
        return int(check_answer_equivalence(candidate, problem.reference_answer,
                                            tol=config.answer_tol))
    except (NoAnswerFound, IncomparableKinds):
        return 0


def _text_up_to_block(trace: InterleavedTrace, code_index: int) -> str:
    """Concatenated text blocks appearing before the (code_index+1)-th code block ends."""
    seen_code = 0
    texts: list[str] = []
    for block in trace.blocks:
        if hasattr(block, "source"):
            seen_code += 1
            if seen_code > code_index + 1:
                break
        else:
            texts.append(block.content)
    return "\n".join(texts)


def _verify_block(
    source: str,
    text: str,
    problem: ProblemInstance,
    config: RewardConfig,
    backends: judges_mod.JudgeBackendConfig,
) -> _BlockResult:
    result = _BlockResult(c_exe=0, c_geo=0, c_perc=0, c_sem=0,
                          s_vis=0.0, s_sem=0.0, s_form=None)
    try:
        program = parser.parse_program(source)
        state = engine.execute_program(program, mode="strict")
        result.c_exe = 1
    except (parser.GgbParseError, engine.ExecutionError) as exc:
        result.errors.append(f"{type(exc).__name__}: {exc}")
        return result

    result.c_geo = int(predicates.check_hard_constraints(
        state, program, problem.hard_constraints, eps=config.eps_geo))

    render_png = None
    try:
        viewport = fit_viewport(state, config.render_px, config.render_px)
        image = render_state(state, viewport)
        render_png = encode_png(image)
    except EmptyScene as exc:
        result.errors.append(f"EmptyScene: {exc}")

    visual_request = judges_mod.JudgeRequest(
        kind="visual", trace_text=text, program_source=source,
        render_image=render_png, prompt_template_id="visual_judge",
    )
    try:
        verdict = judges_mod.judge_visual(visual_request, backends)
        result.s_vis = verdict.score
        result.c_perc = int(verdict.binary)
        if verdict.error_tag:
            result.errors.append(verdict.error_tag)
    except judges_mod.JudgeError as exc:
        result.errors.append(f"{type(exc).__name__}: {exc}")

    doc = ir_mod.lower_to_ir(program, state)
    intents = ir_mod.extract_text_intents([text])
    entailment = ir_mod.check_entailment(intents, doc)
    result.c_sem = int(entailment.ok)
    if not entailment.ok:
        result.errors.append(f"unmatched intent: {entailment.first_unmatched}")
    semantic_request = judges_mod.JudgeRequest(
        kind="semantic", trace_text=text, program_source=source,
        prompt_template_id="semantic_judge",
    )
    try:
        result.s_sem = judges_mod.judge_semantic(semantic_request, backends).score
    except judges_mod.JudgeError as exc:
        result.s_sem = entailment.score()
        result.errors.append(f"{type(exc).__name__}: {exc}")

    try:
        assertions = judges_mod.synthesize_assertions(problem, source, render_png, backends)
        form = predicates.eval_assertions(state, assertions, eps=config.eps_geo,
                                          key_gate=config.key_gate)
        result.s_form = form.score
    except judges_mod.EmptyAssertionSet:
        result.s_form = None
    except (judges_mod.JudgeError, predicates.PredicateError,
            parser.GgbParseError) as exc:
        result.s_form = 0.0
        result.errors.append(f"{type(exc).__name__}: {exc}")
    return result
