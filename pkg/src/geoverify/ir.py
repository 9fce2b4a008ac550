"""Structured intermediate representation of programs, and the semantic verifier.

``lower_to_ir`` turns an executed program into entities plus materialized
relations (a midpoint induces collinearity and equidistance, an intersection
induces incidence on both parents, and so on).  ``extract_text_intents`` maps
reasoning prose to canonical intent tuples through a versioned phrase lexicon,
and ``check_entailment`` decides whether every textual intent is realized by
the code: the semantic bit is intent-subset containment, so extra code-side
entities never hurt.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources

from . import exprs
from .ggb.objects import (
    AngleMark,
    Circle,
    ConstructionState,
    Ellipse,
    FunctionGraph,
    Line,
    Point,
    Polygon,
    Ray,
    Scalar,
    Segment,
    kind_of,
)
from .ggb.parser import GgbProgram, PairArg, RefArg

WILDCARD = "*"


@dataclass(frozen=True)
class IrEntity:
    name: str
    kind: str
    attributes: dict = field(default_factory=dict)
    depends_on: tuple[str, ...] = ()


@dataclass(frozen=True)
class IrDocument:
    entities: tuple[IrEntity, ...]
    relations: tuple[tuple[str, tuple[str, ...]], ...]
    source_hash: str

    def entity(self, name: str) -> IrEntity | None:
        for e in self.entities:
            if e.name == name:
                return e
        return None


@dataclass(frozen=True)
class IntentSet:
    intents: tuple[tuple[str, tuple[str, ...]], ...]

    def __len__(self) -> int:
        return len(self.intents)


@dataclass(frozen=True)
class EntailmentResult:
    ok: bool
    matched: int
    total: int
    witness: dict[str, str]
    first_unmatched: tuple[str, tuple[str, ...]] | None = None

    def score(self) -> float:
        return 1.0 if self.total == 0 else self.matched / self.total


_SYMMETRIC_KINDS = {"segment", "line", "parallel", "perpendicular", "equidistant", "collinear"}


def canonical_intent(kind: str, args: tuple[str, ...]) -> tuple[str, tuple[str, ...]]:
    """Fix argument order for symmetric predicates so intents compare stably."""
    if kind in ("segment", "line", "parallel", "perpendicular"):
        return (kind, tuple(sorted(args)))
    if kind == "collinear":
        return (kind, tuple(sorted(args)))
    if kind in ("midpoint", "equidistant"):
        # first arg distinguished, rest symmetric
        return (kind, (args[0],) + tuple(sorted(args[1:])))
    if kind in ("perpendicular_through", "parallel_through"):
        return (kind, (args[0],) + tuple(sorted(args[1:])))
    if kind == "polygon":
        return (kind, _canonical_cycle(args))
    if kind == "angle":
        return (kind, (min(args[0], args[2]), args[1], max(args[0], args[2])))
    return (kind, tuple(args))


def _canonical_cycle(names: tuple[str, ...]) -> tuple[str, ...]:
    """Least rotation over both orientations: polygon naming up to rotation/reversal."""
    best = None
    for seq in (list(names), list(reversed(names))):
        for k in range(len(seq)):
            rot = tuple(seq[k:] + seq[:k])
            if best is None or rot < best:
                best = rot
    return best or tuple(names)


def _arg_names(cmd) -> list[str | None]:
    return [a.name if isinstance(a, RefArg) else None for a in cmd.args]


def _entity_attrs(name: str, obj, state: ConstructionState) -> dict:
    attrs: dict = {"visibility": bool(state.visibility.get(name, False))}
    if isinstance(obj, Point):
        attrs.update(x=obj.x, y=obj.y)
    elif isinstance(obj, Line):
        attrs.update(a=obj.a, b=obj.b, c=obj.c)
    elif isinstance(obj, Segment):
        attrs.update(x1=obj.p1.x, y1=obj.p1.y, x2=obj.p2.x, y2=obj.p2.y,
                     length=obj.length())
    elif isinstance(obj, Ray):
        attrs.update(x=obj.origin.x, y=obj.origin.y,
                     dx=obj.direction[0], dy=obj.direction[1])
    elif isinstance(obj, Circle):
        attrs.update(cx=obj.center.x, cy=obj.center.y, radius=obj.radius)
    elif isinstance(obj, Ellipse):
        attrs.update(cx=obj.center.x, cy=obj.center.y, semi_major=obj.semi_major,
                     semi_minor=obj.semi_minor, rotation=obj.rotation)
    elif isinstance(obj, Polygon):
        attrs.update(vertices=[[v.x, v.y] for v in obj.vertices])
    elif isinstance(obj, FunctionGraph):
        attrs.update(expression=normalize_expression(obj.expression),
                     xmin=obj.xmin, xmax=obj.xmax)
    elif isinstance(obj, AngleMark):
        attrs.update(value=obj.value)
    elif isinstance(obj, Scalar):
        attrs.update(value=obj.value)
    if name in state.labels:
        attrs["label"] = state.labels[name]
    if name in state.degenerate:
        attrs["degenerate"] = True
    return attrs


def normalize_expression(text: str) -> str:
    return re.sub(r"\s+", "", exprs.normalize(text))


def lower_to_ir(program: GgbProgram, state: ConstructionState, strict: bool = False) -> IrDocument:
    """One entity per named object, with definitional relations materialized."""
    entities: list[IrEntity] = []
    relations: list[tuple[str, tuple[str, ...]]] = []
    seen: set[tuple[str, tuple[str, ...]]] = set()

    def add_rel(kind: str, args: tuple[str, ...]) -> None:
        if any(a is None for a in args):
            return
        rel = canonical_intent(kind, args)
        if rel not in seen:
            seen.add(rel)
            relations.append(rel)

    by_name = {c.name: c for c in program.commands}
    for cmd in program.commands:
        if cmd.name not in state:
            continue
        obj = state[cmd.name]
        deps = tuple(n for n in _arg_names(cmd) if n)
        entities.append(IrEntity(
            name=cmd.name, kind=kind_of(obj),
            attributes=_entity_attrs(cmd.name, obj, state), depends_on=deps,
        ))
        names = _arg_names(cmd)
        head = cmd.head
        if head == "Point":
            add_rel("point", (cmd.name,))
        elif head == "Segment" and len(names) == 2:
            add_rel("segment", (names[0], names[1]))
            add_rel("incident", (names[0], cmd.name))
            add_rel("incident", (names[1], cmd.name))
        elif head == "Line" and len(names) == 2:
            add_rel("line", (names[0], names[1]))
            add_rel("incident", (names[0], cmd.name))
            add_rel("incident", (names[1], cmd.name))
        elif head == "Ray" and len(names) == 2:
            add_rel("ray", (names[0], names[1]))
        elif head == "Circle":
            add_rel("circle", (names[0],))
        elif head == "Polygon":
            if all(names):
                add_rel("polygon", tuple(names))
                n = len(names)
                for i in range(n):
                    add_rel("segment", (names[i], names[(i + 1) % n]))
        elif head == "Midpoint":
            endpoints = _midpoint_parents(cmd, by_name)
            if endpoints:
                a, b = endpoints
                add_rel("midpoint", (cmd.name, a, b))
                add_rel("collinear", (a, cmd.name, b))
                add_rel("equidistant", (cmd.name, a, b))
        elif head == "Intersect":
            add_rel("incident", (cmd.name, names[0]))
            add_rel("incident", (cmd.name, names[1]))
        elif head == "PerpendicularLine":
            add_rel("perpendicular", (cmd.name, names[1]))
            add_rel("incident", (names[0], cmd.name))
            through = _lineish_parents(names[1], by_name)
            if through:
                add_rel("perpendicular_through", (names[0], through[0], through[1]))
        elif head == "ParallelLine":
            add_rel("parallel", (cmd.name, names[1]))
            add_rel("incident", (names[0], cmd.name))
            through = _lineish_parents(names[1], by_name)
            if through:
                add_rel("parallel_through", (names[0], through[0], through[1]))
        elif head == "Tangent":
            add_rel("tangent", (cmd.name, names[1]))
            p = names[0]
            if p is not None:
                conic = state.objects.get(names[1]) if names[1] else None
                on_circle = (
                    isinstance(conic, Circle)
                    and isinstance(state.objects.get(p), Point)
                    and abs(state.objects[p].dist(conic.center) - conic.radius)
                    <= 1e-7 * max(1.0, conic.radius)
                )
                add_rel("tangent_at" if on_circle else "tangent_from", (p, names[1]))
                add_rel("incident", (p, cmd.name))
        elif head == "FunctionGraph":
            obj_fn = state[cmd.name]
            if isinstance(obj_fn, FunctionGraph):
                add_rel("function", (normalize_expression(obj_fn.expression),))
        elif head == "Angle" and all(names):
            add_rel("angle", (names[0], names[1], names[2]))
    if strict:
        _add_strict_relations(program, state, add_rel)
    digest = hashlib.sha256(program.source.encode("utf-8")).hexdigest()
    return IrDocument(entities=tuple(entities), relations=tuple(relations),
                      source_hash=digest)


def _midpoint_parents(cmd, by_name) -> tuple[str, str] | None:
    names = _arg_names(cmd)
    if len(names) == 2 and all(names):
        return (names[0], names[1])
    if len(names) == 1 and names[0]:
        return _lineish_parents(names[0], by_name)
    return None


def _lineish_parents(name: str | None, by_name) -> tuple[str, str] | None:
    """Endpoint names of a segment/line command, when they were references."""
    if name is None or name not in by_name:
        return None
    parent = by_name[name]
    if parent.head in ("Segment", "Line", "Ray"):
        names = _arg_names(parent)
        if len(names) == 2 and all(names):
            return (names[0], names[1])
    return None


def _add_strict_relations(program: GgbProgram, state: ConstructionState, add_rel) -> None:
    """Curation-grade relations: polygon cyclic-order naming and length ordering."""
    by_name = {c.name: c for c in program.commands}
    for cmd in program.commands:
        if cmd.head != "Polygon" or cmd.name not in state:
            continue
        obj = state[cmd.name]
        if not isinstance(obj, Polygon):
            continue
        names = _arg_names(cmd)
        if not all(names):
            continue
        cx = sum(v.x for v in obj.vertices) / len(obj.vertices)
        cy = sum(v.y for v in obj.vertices) / len(obj.vertices)
        by_angle = sorted(
            range(len(obj.vertices)),
            key=lambda i: math.atan2(obj.vertices[i].y - cy, obj.vertices[i].x - cx),
        )
        geometric = _canonical_cycle(tuple(names[i] for i in by_angle))
        given = _canonical_cycle(tuple(names))
        add_rel("polygon_cycle", (cmd.name, "ok" if geometric == given else "mismatch"))
    segments = [
        (c.name, state[c.name])
        for c in program.commands
        if c.head == "Segment" and c.name in state and isinstance(state[c.name], Segment)
    ]
    for i, (n1, s1) in enumerate(segments):
        for n2, s2 in segments[i + 1 :]:
            scale = max(s1.length(), s2.length(), 1.0)
            if s1.length() < s2.length() - 1e-9 * scale:
                add_rel("length_less", (n1, n2))
            elif s2.length() < s1.length() - 1e-9 * scale:
                add_rel("length_less", (n2, n1))


def serialize_ir(ir: IrDocument) -> str:
    """Canonical JSON with stable key order (the textual parser artifact)."""
    doc = {
        "entities": [
            {
                "name": e.name,
                "kind": e.kind,
                "attributes": {k: e.attributes[k] for k in sorted(e.attributes)},
                "depends_on": list(e.depends_on),
            }
            for e in ir.entities
        ],
        "relations": [{"predicate": p, "args": list(a)} for p, a in ir.relations],
        "source_hash": ir.source_hash,
    }
    return json.dumps(doc, sort_keys=True, indent=2)


_LEXICON_CACHE: dict | None = None


def load_lexicon() -> dict:
    global _LEXICON_CACHE
    if _LEXICON_CACHE is None:
        text = resources.files("geoverify.data").joinpath("intent_lexicon.json").read_text()
        lex = json.loads(text)
        for entry in lex["entries"]:
            entry["_compiled"] = re.compile(entry["pattern"], re.IGNORECASE)
        _LEXICON_CACHE = lex
    return _LEXICON_CACHE


_LABEL = re.compile(r"^[A-Z]$")


def _expand_arg(template: str, match: re.Match, context: dict) -> list[str] | None:
    if template == WILDCARD:
        return [WILDCARD]
    if template.startswith("#letters:"):
        captured = _substitute(template[len("#letters:"):], match)
        if captured is None or not captured.isalpha() or not captured.isupper():
            return None
        return list(captured)
    if template.startswith("#expr:"):
        captured = _substitute(template[len("#expr:"):], match)
        if captured is None:
            return None
        return [normalize_expression(captured)]
    if template.startswith("@seg"):
        seg = context.get("last_segment")
        if seg is None:
            return None
        return [seg[int(template[4:]) - 1]]
    value = _substitute(template, match)
    if value is None:
        return None
    # single-letter labels must be uppercase; longer names pass through
    if len(value) == 1 and not _LABEL.match(value):
        return None
    return [value]


def _substitute(template: str, match: re.Match) -> str | None:
    if template.startswith("$"):
        value = match.group(int(template[1:]))
        return value.strip() if value else None
    return template


def extract_text_intents(text_blocks: list[str], lexicon: dict | None = None) -> IntentSet:
    """Rule-based intent extraction; sentences without lexicon hits contribute nothing."""
    lex = lexicon or load_lexicon()
    intents: list[tuple[str, tuple[str, ...]]] = []
    seen: set[tuple[str, tuple[str, ...]]] = set()
    for block in text_blocks:
        for sentence in re.split(r"[.;\n]", block):
            context: dict = {}
            for entry in lex["entries"]:
                for m in entry["_compiled"].finditer(sentence):
                    for spec in entry["intents"]:
                        args: list[str] = []
                        ok = True
                        for tpl in spec["args"]:
                            expanded = _expand_arg(tpl, m, context)
                            if expanded is None:
                                ok = False
                                break
                            args.extend(expanded)
                        if not ok:
                            continue
                        intent = canonical_intent(spec["kind"], tuple(args))
                        if intent[0] == "segment":
                            context["last_segment"] = intent[1]
                        if intent not in seen:
                            seen.add(intent)
                            intents.append(intent)
    return IntentSet(intents=tuple(intents))


def check_entailment(intents: IntentSet, ir: IrDocument) -> EntailmentResult:
    """Intent-subset test with deterministic greedy label alignment.

    Exact label matches are preferred; a text label absent from the code may be
    bound to an unused code entity in the first relation (construction order)
    that fits.  Returns the witness mapping on success, or the first unmatched
    intent on failure.
    """
    ir_names = {e.name for e in ir.entities}
    mapping: dict[str, str] = {}
    bound_targets: set[str] = set()
    matched = 0
    first_unmatched = None
    for intent in intents.intents:
        if _match_intent(intent, ir, ir_names, mapping, bound_targets, allow_bind=False):
            matched += 1
            continue
        if _match_intent(intent, ir, ir_names, mapping, bound_targets, allow_bind=True):
            matched += 1
            continue
        if first_unmatched is None:
            first_unmatched = intent
    total = len(intents.intents)
    return EntailmentResult(
        ok=matched == total,
        matched=matched,
        total=total,
        witness=dict(mapping),
        first_unmatched=first_unmatched,
    )


def _match_intent(
    intent: tuple[str, tuple[str, ...]],
    ir: IrDocument,
    ir_names: set[str],
    mapping: dict[str, str],
    bound_targets: set[str],
    allow_bind: bool,
) -> bool:
    kind, args = intent
    for rel_kind, rel_args in ir.relations:
        if rel_kind != kind or len(rel_args) != len(args):
            continue
        trial: dict[str, str] = {}
        ok = True
        for want, have in zip(args, rel_args):
            if want == WILDCARD:
                continue
            effective = mapping.get(want, trial.get(want, want))
            if effective == have:
                continue
            if (
                allow_bind
                and want not in ir_names
                and want not in mapping
                and want not in trial
                and have not in bound_targets
            ):
                trial[want] = have
                continue
            ok = False
            break
        if ok:
            mapping.update(trial)
            bound_targets.update(trial.values())
            return True
    return False
