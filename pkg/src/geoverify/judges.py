"""External-judge clients with deterministic offline fallbacks.

Three judge kinds: ``visual`` (is the render usable), ``semantic`` (does the
reasoning match the construction), and ``assertion_synthesis`` (derive
executable checks).  Each supports three backend modes:

* ``live``      POST a chat-completions-style request to the configured
                endpoint and record the verdict into the cache;
* ``replay``    answer strictly from the cache, never touching the network;
* ``heuristic`` run the deterministic local stand-in.

Cache entries are content-addressed by a digest of the prompt template and
all request inputs, which makes replay runs hermetic.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import ir as ir_mod
from .ggb import engine, parser, predicates
from .ggb.objects import ConstructionState, Segment
from .render import (
    EmptyScene,
    RasterImage,
    RenderOptions,
    Viewport,
    count_label_overlaps,
    decode_png,
    render_state,
    fit_viewport,
    world_to_px,
    _finite_extent,
)
from .traces import ProblemInstance

DEFAULT_TAU_PERC = 0.5
CONNECT_GAP_PX = 3


class JudgeError(Exception):
    pass


class BackendTimeout(JudgeError):
    pass


class UnparseableVerdict(JudgeError):
    pass


class CacheMiss(JudgeError):
    pass


class EmptyAssertionSet(JudgeError):
    pass


@dataclass(frozen=True)
class JudgeRequest:
    kind: str  # visual | semantic | assertion_synthesis
    trace_text: str = ""
    program_source: str = ""
    problem_image: bytes | None = None
    render_image: bytes | None = None
    prompt_template_id: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("visual", "semantic", "assertion_synthesis"):
            raise ValueError(f"unknown judge kind {self.kind!r}")
        if self.kind == "assertion_synthesis" and not self.program_source:
            raise ValueError("assertion synthesis requires program_source")


@dataclass(frozen=True)
class JudgeVerdict:
    score: float
    binary: bool
    rationale: str = ""
    error_tag: str | None = None


def make_verdict(kind: str, score: float, tau: float, rationale: str = "",
                 error_tag: str | None = None) -> JudgeVerdict:
    """Enforce the verdict invariants: binary == (score > tau); error tags only
    accompany failing visual verdicts."""
    binary = score > tau
    if binary or kind != "visual":
        error_tag = None
    elif error_tag is None:
        error_tag = "[Visual Error] diagram judged unusable"
    return JudgeVerdict(score=score, binary=binary, rationale=rationale, error_tag=error_tag)


@dataclass
class JudgeBackendConfig:
    endpoint: str = ""
    model_id: str = ""
    timeout_s: float = 30.0
    max_retries: int = 2
    cache_dir: str | None = None
    mode: str = "heuristic"  # live | replay | heuristic
    tau_perc: float = DEFAULT_TAU_PERC
    backoff_s: float = 0.5
    max_concurrency: int = 4
    degrade_to_heuristic: bool = False
    transport: object = None  # callable(url, payload, timeout_s) -> dict, tests inject this

    def __post_init__(self) -> None:
        if self.mode not in ("live", "replay", "heuristic"):
            raise ValueError(f"unknown backend mode {self.mode!r}")
        if self.mode == "live" and not self.endpoint:
            raise ValueError("live mode requires an endpoint")
        self._semaphore = threading.Semaphore(self.max_concurrency)
        self._cache_lock = threading.Lock()


_TEMPLATES = {
    "visual": "visual_judge.txt",
    "semantic": "semantic_judge.txt",
    "assertion_synthesis": "assertion_synthesis.txt",
}


def load_prompt(kind: str) -> str:
    return resources.files("geoverify.prompts").joinpath(_TEMPLATES[kind]).read_text()


def request_digest(request: JudgeRequest, config: JudgeBackendConfig) -> str:
    """Content digest of the prompt template and every request input."""
    h = hashlib.sha256()
    payload = {
        "kind": request.kind,
        "template": hashlib.sha256(load_prompt(request.kind).encode()).hexdigest(),
        "template_id": request.prompt_template_id,
        "model": config.model_id,
        "trace_text": request.trace_text,
        "program_source": request.program_source,
        "problem_image": hashlib.sha256(request.problem_image).hexdigest()
        if request.problem_image else "",
        "render_image": hashlib.sha256(request.render_image).hexdigest()
        if request.render_image else "",
    }
    h.update(json.dumps(payload, sort_keys=True).encode())
    return h.hexdigest()


def _cache_path(config: JudgeBackendConfig, digest: str) -> str | None:
    if not config.cache_dir:
        return None
    return os.path.join(config.cache_dir, f"{digest}.json")


def _cache_read(config: JudgeBackendConfig, digest: str) -> dict | None:
    path = _cache_path(config, digest)
    if path is None or not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cache_write(config: JudgeBackendConfig, digest: str, payload: dict) -> None:
    path = _cache_path(config, digest)
    if path is None:
        return
    os.makedirs(config.cache_dir, exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}.{threading.get_ident()}"
    with config._cache_lock:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, path)


def _default_transport(url: str, payload: dict, timeout_s: float) -> dict:
    data = json.dumps(payload).encode()
    req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout_s) as resp:
            return json.loads(resp.read().decode())
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise BackendTimeout(str(exc)) from None


def _chat_payload(request: JudgeRequest, config: JudgeBackendConfig, prompt: str) -> dict:
    content: list[dict] = [{"type": "text", "text": prompt}]
    for label, image in (("problem image", request.problem_image),
                         ("rendered diagram", request.render_image)):
        if image:
            b64 = base64.b64encode(image).decode()
            content.append({"type": "text", "text": f"({label})"})
            content.append({"type": "image_url",
                            "image_url": {"url": f"data:image/png;base64,{b64}"}})
    body = request.trace_text
    if request.program_source:
        body += f"\n\nuser_construction:\n{request.program_source}"
    content.append({"type": "text", "text": body})
    return {"model": config.model_id, "messages": [{"role": "user", "content": content}]}


def _post_with_retries(request: JudgeRequest, config: JudgeBackendConfig, prompt: str) -> str:
    transport = config.transport or _default_transport
    payload = _chat_payload(request, config, prompt)
    last: Exception | None = None
    for attempt in range(config.max_retries + 1):
        with config._semaphore:
            try:
                response = transport(config.endpoint, payload, config.timeout_s)
                return response["choices"][0]["message"]["content"]
            except BackendTimeout as exc:
                last = exc
            except (KeyError, IndexError, TypeError) as exc:
                raise UnparseableVerdict(f"malformed backend response: {exc}") from None
        if attempt < config.max_retries:
            time.sleep(min(config.backoff_s * (2**attempt), 8.0))
    raise BackendTimeout(str(last))


_TAG = re.compile(r"\[[^\]\n]+\]\s*[^\n]*")


def _parse_binary_verdict(kind: str, content: str, tau: float) -> JudgeVerdict:
    stripped = content.strip()
    m = re.search(r"(?<![0-9.])([01])(?![0-9.])", stripped)
    if not m:
        raise UnparseableVerdict(f"no 0/1 verdict in {stripped[:80]!r}")
    score = float(m.group(1))
    rationale = stripped
    tag_match = _TAG.search(stripped)
    tag = tag_match.group(0) if tag_match else None
    return make_verdict(kind, score, tau, rationale=rationale, error_tag=tag)


def _verdict_to_cache(v: JudgeVerdict) -> dict:
    return {"score": v.score, "binary": v.binary, "rationale": v.rationale,
            "error_tag": v.error_tag}


def _verdict_from_cache(d: dict) -> JudgeVerdict:
    return JudgeVerdict(score=d["score"], binary=d["binary"],
                        rationale=d.get("rationale", ""), error_tag=d.get("error_tag"))


def judge_visual(request: JudgeRequest, config: JudgeBackendConfig) -> JudgeVerdict:
    """The subjective verifier.  Missing or failed renders score 0."""
    if request.kind != "visual":
        raise ValueError("judge_visual requires a visual request")
    if config.mode == "heuristic":
        return _heuristic_visual_from_request(request, config)
    digest = request_digest(request, config)
    cached = _cache_read(config, digest)
    if cached is not None:
        return _verdict_from_cache(cached)
    if config.mode == "replay":
        raise CacheMiss(digest)
    if request.render_image is None:
        return make_verdict("visual", 0.0, config.tau_perc,
                            rationale="no rendered image",
                            error_tag="[Rendering Error] no rendered image")
    try:
        content = _post_with_retries(request, config, load_prompt("visual"))
        verdict = _parse_binary_verdict("visual", content, config.tau_perc)
    except BackendTimeout:
        if config.degrade_to_heuristic:
            return _heuristic_visual_from_request(request, config)
        raise
    _cache_write(config, digest, _verdict_to_cache(verdict))
    return verdict


def judge_semantic(request: JudgeRequest, config: JudgeBackendConfig) -> JudgeVerdict:
    """The optional semantic judge; heuristic mode scores intent entailment."""
    if request.kind != "semantic":
        raise ValueError("judge_semantic requires a semantic request")
    if config.mode == "heuristic":
        return _heuristic_semantic(request, config)
    digest = request_digest(request, config)
    cached = _cache_read(config, digest)
    if cached is not None:
        return _verdict_from_cache(cached)
    if config.mode == "replay":
        raise CacheMiss(digest)
    try:
        content = _post_with_retries(request, config, load_prompt("semantic"))
        verdict = _parse_binary_verdict("semantic", content, config.tau_perc)
    except BackendTimeout:
        if config.degrade_to_heuristic:
            return _heuristic_semantic(request, config)
        raise
    _cache_write(config, digest, _verdict_to_cache(verdict))
    return verdict


def _heuristic_semantic(request: JudgeRequest, config: JudgeBackendConfig) -> JudgeVerdict:
    if not request.program_source.strip():
        return make_verdict("semantic", 0.0, config.tau_perc, rationale="no program")
    try:
        program = parser.parse_program(request.program_source)
        state = engine.execute_program(program, mode="lenient")
    except parser.GgbParseError as exc:
        return make_verdict("semantic", 0.0, config.tau_perc, rationale=str(exc))
    doc = ir_mod.lower_to_ir(program, state)
    intents = ir_mod.extract_text_intents([request.trace_text])
    result = ir_mod.check_entailment(intents, doc)
    rationale = ("all intents realized" if result.ok
                 else f"unmatched intent: {result.first_unmatched}")
    return make_verdict("semantic", result.score(), config.tau_perc, rationale=rationale)


def _heuristic_visual_from_request(request: JudgeRequest,
                                   config: JudgeBackendConfig) -> JudgeVerdict:
    if not request.program_source.strip():
        if request.render_image is None:
            return make_verdict("visual", 0.0, config.tau_perc,
                                rationale="no rendered image",
                                error_tag="[Rendering Error] no rendered image")
        # bare image with no reconstructable state: judge trivially by nonemptiness
        img = decode_png(request.render_image)
        blank = bool((img.buffer == img.buffer.flat[0]).all())
        score = 0.0 if blank else 1.0
        return make_verdict("visual", score, config.tau_perc,
                            rationale="blank render" if blank else "non-degenerate render",
                            error_tag="[Visual Error] blank render" if blank else None)
    try:
        program = parser.parse_program(request.program_source)
        state = engine.execute_program(program, mode="strict")
        viewport = fit_viewport(state)
    except (parser.GgbParseError, engine.ExecutionError, EmptyScene) as exc:
        return make_verdict("visual", 0.0, config.tau_perc,
                            rationale=f"render pipeline failed: {exc}",
                            error_tag=f"[Rendering Error] {exc}")
    required = _required_names(request.trace_text, state)
    render = render_state(state, viewport)
    return heuristic_visual_judge(render, state, viewport,
                                  required_names=required, tau=config.tau_perc)


def _required_names(trace_text: str, state: ConstructionState) -> frozenset[str]:
    """Object names the text explicitly relies on (from extracted intents)."""
    intents = ir_mod.extract_text_intents([trace_text])
    names = set()
    for _, args in intents.intents:
        for a in args:
            if a != ir_mod.WILDCARD and a in state:
                names.add(a)
    return frozenset(names)


def heuristic_visual_judge(
    render: RasterImage,
    state: ConstructionState,
    viewport: Viewport,
    dashed_names: frozenset[str] = frozenset(),
    required_names: frozenset[str] = frozenset(),
    tau: float = DEFAULT_TAU_PERC,
    options: RenderOptions = RenderOptions(),
) -> JudgeVerdict:
    """Deterministic visual check: in-frame coverage, auxiliary connectivity,
    label clutter, and required-element presence, combined by fixed weights."""
    visible = state.visible_objects()
    if not visible or bool((render.buffer == render.buffer.flat[0]).all()):
        return make_verdict("visual", 0.0, tau, rationale="blank or empty render",
                            error_tag="[Visual Error] blank render")
    tags: list[str] = []
    # required objects hidden or missing entirely
    visible_names = {n for n, _ in visible}
    missing = sorted(required_names - visible_names)
    if missing:
        return make_verdict(
            "visual", 0.0, tau,
            rationale=f"required elements not drawn: {', '.join(missing)}",
            error_tag=f"[Visual Error] missing element: {missing[0]}",
        )
    in_frame = 0
    fully_off = None
    for name, obj in visible:
        box = _finite_extent(obj)
        if box is None:
            in_frame += 1  # unbounded objects are clipped by construction
            continue
        if box[0] >= viewport.xmin and box[1] <= viewport.xmax \
                and box[2] >= viewport.ymin and box[3] <= viewport.ymax:
            in_frame += 1
        elif box[1] < viewport.xmin or box[0] > viewport.xmax \
                or box[3] < viewport.ymin or box[2] > viewport.ymax:
            fully_off = name
    frame_frac = in_frame / len(visible)
    connectivity = _auxiliary_connectivity(render, state, viewport, dashed_names, options)
    overlaps = count_label_overlaps(state, viewport, options)
    label_ok = 1.0 if overlaps == 0 else max(0.0, 1.0 - 0.25 * overlaps)
    score = 0.5 * frame_frac + 0.3 * connectivity + 0.2 * label_ok
    if fully_off is not None:
        score = min(score, 0.5)
        tags.append(f"[Visual Error] off-canvas: {fully_off}")
    if connectivity < 1.0:
        tags.append("[Visual Error] disconnected auxiliary stroke")
    if overlaps > 0:
        tags.append(f"[Visual Error] label clutter ({overlaps} overlaps)")
    rationale = "; ".join(tags) if tags else (
        f"in-frame {frame_frac:.2f}, connectivity {connectivity:.2f}, labels ok"
    )
    return make_verdict("visual", score, tau, rationale=rationale,
                        error_tag=tags[0] if tags else None)


def _auxiliary_connectivity(
    render: RasterImage,
    state: ConstructionState,
    viewport: Viewport,
    dashed_names: frozenset[str],
    options: RenderOptions,
) -> float:
    """Fraction of dashed auxiliary segments whose endpoints touch other strokes."""
    aux = [n for n in dashed_names
           if n in state and isinstance(state.objects[n], Segment)
           and state.visibility.get(n)]
    if not aux:
        return 1.0
    others = ConstructionState(
        objects=state.objects,
        order=[n for n in state.order if n not in dashed_names],
        visibility=state.visibility,
        degenerate=state.degenerate,
        labels={},
    )
    base = render_state(others, viewport,
                        RenderOptions(draw_labels=False, stroke_width=options.stroke_width))
    rows, cols = np.nonzero(base.buffer != 255)
    if len(rows) == 0:
        return 0.0
    connected = 0
    for name in aux:
        seg: Segment = state.objects[name]  # type: ignore[assignment]
        ok = True
        for p in (seg.p1, seg.p2):
            c, r = world_to_px(viewport, p.x, p.y)
            d2 = (rows - r) ** 2 + (cols - c) ** 2
            if math.sqrt(float(d2.min())) >= CONNECT_GAP_PX:
                ok = False
        if ok:
            connected += 1
    return connected / len(aux)


_RELATION_TO_ASSERTION = {
    "collinear": "AreCollinear",
    "perpendicular": "ArePerpendicular",
    "parallel": "AreParallel",
    "tangent": "IsTangent",
    "incident": "IsOnObject",
}


def heuristic_assertions(program: parser.GgbProgram,
                         state: ConstructionState | None = None) -> list[predicates.Assertion]:
    """Mechanical assertion derivation: every definitional IR relation becomes a check."""
    if state is None:
        state = engine.execute_program(program, mode="lenient")
    doc = ir_mod.lower_to_ir(program, state)
    out: list[predicates.Assertion] = []
    seen: set[str] = set()

    def push(a: predicates.Assertion) -> None:
        if a.text() not in seen:
            seen.add(a.text())
            out.append(a)

    for kind, args in doc.relations:
        if kind == "equidistant":
            m, a, b = args
            push(predicates.Assertion("EqualsWithin",
                                      (f"dist({m},{a})", f"dist({m},{b})")))
            continue
        pred = _RELATION_TO_ASSERTION.get(kind)
        if pred is None:
            continue
        usable = [a for a in args if a in state]
        if len(usable) != len(args):
            continue
        try:
            push(predicates.Assertion(pred, tuple(args)))
        except predicates.PredicateError:
            continue
    return out


def synthesize_assertions(
    problem: ProblemInstance,
    program_source: str,
    render_png: bytes | None,
    config: JudgeBackendConfig,
) -> list[predicates.Assertion]:
    """Derive the assertion set for the Formal Judge.

    Heuristic mode builds assertions from the IR's materialized relations and
    appends the problem's hard constraints as key assertions; live mode asks
    the backend and parses its ``verification_code`` list.
    """
    program = parser.parse_program(program_source)
    if config.mode in ("heuristic",):
        assertions = heuristic_assertions(program)
    else:
        request = JudgeRequest(kind="assertion_synthesis",
                               trace_text=problem.statement,
                               program_source=program_source,
                               render_image=render_png,
                               prompt_template_id="assertion_synthesis")
        digest = request_digest(request, config)
        cached = _cache_read(config, digest)
        if cached is not None:
            assertions = [predicates.parse_assertion(t) for t in cached["assertions"]]
        elif config.mode == "replay":
            raise CacheMiss(digest)
        else:
            content = _post_with_retries(request, config, load_prompt("assertion_synthesis"))
            assertions = _parse_assertion_response(content)
            _cache_write(config, digest, {"assertions": [a.text() for a in assertions]})
    for constraint in problem.hard_constraints:
        key = predicates.Assertion(constraint.predicate, constraint.args,
                                   weight=max(constraint.weight, 2.0), is_key=True)
        if key.text() not in {a.text() for a in assertions}:
            assertions.append(key)
    if not assertions:
        raise EmptyAssertionSet(problem.id)
    return assertions


def _parse_assertion_response(content: str) -> list[predicates.Assertion]:
    m = re.search(r"\{.*\}", content, re.DOTALL)
    if not m:
        raise UnparseableVerdict("no JSON object in assertion response")
    try:
        doc = json.loads(m.group(0))
        exprs_list = doc["verification_code"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UnparseableVerdict(f"bad assertion JSON: {exc}") from None
    return [predicates.parse_assertion(text) for text in exprs_list]
