"""Deterministic rasterizer for construction states.

Rendering is a pure function of (state, viewport, options): no anti-aliasing,
integer Bresenham strokes, draw order = construction order, labels placed by a
fixed clockwise offset search.  Two identical calls produce bit-identical
buffers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

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
    Segment,
)


class EmptyScene(Exception):
    """No visible object with finite extent to fit a viewport around."""


@dataclass(frozen=True)
class Viewport:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    width_px: int = 512
    height_px: int = 512
    margin_frac: float = 0.1

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("viewport extents must be nonempty")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("pixel dimensions must be positive")
        if not (0.0 <= self.margin_frac < 0.5):
            raise ValueError("margin_frac must be in [0, 0.5)")

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass
class RasterImage:
    width: int
    height: int
    channels: int
    buffer: np.ndarray

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        expected = (self.height, self.width) if self.channels == 1 else (
            self.height, self.width, self.channels)
        if self.buffer.shape != expected or self.buffer.dtype != np.uint8:
            raise ValueError("buffer shape/dtype does not match dimensions")


@dataclass(frozen=True)
class RenderOptions:
    stroke_width: int = 1
    background: int = 255
    foreground: int = 0
    draw_labels: bool = True
    dashed: frozenset[str] = frozenset()
    dash_on: int = 4
    dash_off: int = 3
    point_radius: int = 2
    function_samples_per_px: int = 1


def world_to_px(viewport: Viewport, x: float, y: float) -> tuple[int, int]:
    """Map world coordinates to (col, row); y axis points up in world space."""
    sx = (x - viewport.xmin) / (viewport.xmax - viewport.xmin)
    sy = (viewport.ymax - y) / (viewport.ymax - viewport.ymin)
    return (int(round(sx * (viewport.width_px - 1))),
            int(round(sy * (viewport.height_px - 1))))


def _finite_extent(obj) -> tuple[float, float, float, float] | None:
    """World bbox for bounded objects; None for unbounded or extent-free ones."""
    if isinstance(obj, Point):
        return (obj.x, obj.x, obj.y, obj.y)
    if isinstance(obj, Segment):
        xs, ys = (obj.p1.x, obj.p2.x), (obj.p1.y, obj.p2.y)
        return (min(xs), max(xs), min(ys), max(ys))
    if isinstance(obj, Circle):
        c, r = obj.center, obj.radius
        return (c.x - r, c.x + r, c.y - r, c.y + r)
    if isinstance(obj, Ellipse):
        # bbox of a rotated ellipse
        cos_t, sin_t = math.cos(obj.rotation), math.sin(obj.rotation)
        ex = math.hypot(obj.semi_major * cos_t, obj.semi_minor * sin_t)
        ey = math.hypot(obj.semi_major * sin_t, obj.semi_minor * cos_t)
        return (obj.center.x - ex, obj.center.x + ex, obj.center.y - ey, obj.center.y + ey)
    if isinstance(obj, Polygon):
        xs = [v.x for v in obj.vertices]
        ys = [v.y for v in obj.vertices]
        return (min(xs), max(xs), min(ys), max(ys))
    if isinstance(obj, AngleMark):
        xs = [obj.vertex.x, obj.arm1.x, obj.arm2.x]
        ys = [obj.vertex.y, obj.arm1.y, obj.arm2.y]
        return (min(xs), max(xs), min(ys), max(ys))
    return None  # Line, Ray, FunctionGraph, Scalar


def fit_viewport(
    state: ConstructionState,
    width_px: int = 512,
    height_px: int = 512,
    margin_frac: float = 0.1,
    anisotropic: bool = False,
) -> Viewport:
    """Bounding box of visible finite objects, margin-expanded and aspect-padded.

    Unbounded objects (lines, rays, function graphs) are clipped to the box the
    bounded objects induce, or to [-10, 10]^2 when only unbounded objects exist.
    """
    visible = state.visible_objects()
    if not visible:
        raise EmptyScene("no visible objects")
    boxes = [b for _, obj in visible if (b := _finite_extent(obj)) is not None]
    if boxes:
        xmin = min(b[0] for b in boxes)
        xmax = max(b[1] for b in boxes)
        ymin = min(b[2] for b in boxes)
        ymax = max(b[3] for b in boxes)
    else:
        xmin, xmax, ymin, ymax = -10.0, 10.0, -10.0, 10.0
    span = max(xmax - xmin, ymax - ymin, 1e-9)
    if span <= 1e-9:
        span = 1.0
    m = margin_frac * max(xmax - xmin, ymax - ymin, 1.0)
    xmin, xmax, ymin, ymax = xmin - m, xmax + m, ymin - m, ymax + m
    if not anisotropic:
        # pad the narrower axis so world units per pixel match
        want = width_px / height_px
        w, h = xmax - xmin, ymax - ymin
        if w / h < want:
            extra = (h * want - w) / 2.0
            xmin, xmax = xmin - extra, xmax + extra
        elif w / h > want:
            extra = (w / want - h) / 2.0
            ymin, ymax = ymin - extra, ymax + extra
    return Viewport(xmin, xmax, ymin, ymax, width_px, height_px, margin_frac)


class _Canvas:
    def __init__(self, viewport: Viewport, options: RenderOptions):
        self.vp = viewport
        self.opt = options
        self.buf = np.full(
            (viewport.height_px, viewport.width_px), options.background, dtype=np.uint8
        )
        self._dash_phase = 0

    def put(self, col: int, row: int, dashed: bool = False) -> None:
        if dashed:
            period = self.opt.dash_on + self.opt.dash_off
            phase = self._dash_phase % period
            self._dash_phase += 1
            if phase >= self.opt.dash_on:
                return
        r = self.opt.stroke_width // 2
        lo_r, hi_r = max(0, row - r), min(self.vp.height_px, row + r + 1)
        lo_c, hi_c = max(0, col - r), min(self.vp.width_px, col + r + 1)
        if lo_r < hi_r and lo_c < hi_c:
            self.buf[lo_r:hi_r, lo_c:hi_c] = self.opt.foreground

    def line_px(self, c0: int, r0: int, c1: int, r1: int, dashed: bool = False) -> None:
        """Bresenham; endpoints may lie outside the canvas (pixels are clipped)."""
        dc, dr = abs(c1 - c0), abs(r1 - r0)
        step_c = 1 if c0 < c1 else -1
        step_r = 1 if r0 < r1 else -1
        err = dc - dr
        c, r = c0, r0
        while True:
            self.put(c, r, dashed)
            if c == c1 and r == r1:
                break
            e2 = 2 * err
            if e2 > -dr:
                err -= dr
                c += step_c
            if e2 < dc:
                err += dc
                r += step_r


def _clip_line_to_viewport(line: Line, vp: Viewport) -> tuple[Point, Point] | None:
    """Liang-Barsky style clip of an infinite line to the viewport rectangle."""
    dx, dy = line.direction()
    norm = math.hypot(dx, dy)
    dx, dy = dx / norm, dy / norm
    # anchor: point on the line closest to the viewport center
    cx, cy = (vp.xmin + vp.xmax) / 2.0, (vp.ymin + vp.ymax) / 2.0
    d = line.eval_at(Point(cx, cy)) / (line.a**2 + line.b**2)
    ax, ay = cx - line.a * d, cy - line.b * d
    ts = []
    for bound, coord, delta in (
        (vp.xmin, ax, dx), (vp.xmax, ax, dx), (vp.ymin, ay, dy), (vp.ymax, ay, dy),
    ):
        if abs(delta) > 1e-15:
            ts.append((bound - coord) / delta)
    ts = [t for t in ts if vp.xmin - 1e-9 <= ax + t * dx <= vp.xmax + 1e-9
          and vp.ymin - 1e-9 <= ay + t * dy <= vp.ymax + 1e-9]
    if len(ts) < 2:
        return None
    t0, t1 = min(ts), max(ts)
    return (Point(ax + t0 * dx, ay + t0 * dy), Point(ax + t1 * dx, ay + t1 * dy))


_FONT = {
    "0": ["111", "101", "101", "101", "111"],
    "1": ["010", "110", "010", "010", "111"],
    "2": ["111", "001", "111", "100", "111"],
    "3": ["111", "001", "111", "001", "111"],
    "4": ["101", "101", "111", "001", "001"],
    "5": ["111", "100", "111", "001", "111"],
    "6": ["111", "100", "111", "101", "111"],
    "7": ["111", "001", "010", "010", "010"],
    "8": ["111", "101", "111", "101", "111"],
    "9": ["111", "101", "111", "001", "111"],
    "A": ["010", "101", "111", "101", "101"],
    "B": ["110", "101", "110", "101", "110"],
    "C": ["011", "100", "100", "100", "011"],
    "D": ["110", "101", "101", "101", "110"],
    "E": ["111", "100", "110", "100", "111"],
    "F": ["111", "100", "110", "100", "100"],
    "G": ["011", "100", "101", "101", "011"],
    "H": ["101", "101", "111", "101", "101"],
    "I": ["111", "010", "010", "010", "111"],
    "J": ["001", "001", "001", "101", "010"],
    "K": ["101", "110", "100", "110", "101"],
    "L": ["100", "100", "100", "100", "111"],
    "M": ["101", "111", "111", "101", "101"],
    "N": ["101", "111", "111", "111", "101"],
    "O": ["010", "101", "101", "101", "010"],
    "P": ["110", "101", "110", "100", "100"],
    "Q": ["010", "101", "101", "011", "001"],
    "R": ["110", "101", "110", "101", "101"],
    "S": ["011", "100", "010", "001", "110"],
    "T": ["111", "010", "010", "010", "010"],
    "U": ["101", "101", "101", "101", "111"],
    "V": ["101", "101", "101", "101", "010"],
    "W": ["101", "101", "111", "111", "101"],
    "X": ["101", "101", "010", "101", "101"],
    "Y": ["101", "101", "010", "010", "010"],
    "Z": ["111", "001", "010", "100", "111"],
    "_": ["000", "000", "000", "000", "111"],
    "'": ["010", "010", "000", "000", "000"],
}

_LABEL_OFFSETS = ((3, -8), (3, 3), (-8, 3), (-8, -8), (8, -3), (0, 8), (-12, 0), (0, -12))


def _label_anchor(obj) -> Point | None:
    if isinstance(obj, Point):
        return obj
    if isinstance(obj, Segment):
        return obj.midpoint()
    if isinstance(obj, Circle):
        return Point(obj.center.x, obj.center.y + obj.radius)
    if isinstance(obj, Ellipse):
        return Point(obj.center.x, obj.center.y + obj.semi_minor)
    if isinstance(obj, Polygon):
        return obj.vertices[0]
    if isinstance(obj, AngleMark):
        return obj.vertex
    return None


def _glyph_width(text: str) -> int:
    return 4 * len(text) - 1 if text else 0


def plan_labels(
    state: ConstructionState, viewport: Viewport, options: RenderOptions
) -> list[tuple[str, str, int, int, int, int]]:
    """Deterministic label placement: (name, text, col, row, width, height).

    Anchored labels try fixed clockwise offsets in order until the box does not
    collide with a previously placed one; scan order is construction order.
    """
    placed: list[tuple[str, str, int, int, int, int]] = []
    boxes: list[tuple[int, int, int, int]] = []
    for name, obj in state.visible_objects():
        anchor = _label_anchor(obj)
        if anchor is None:
            continue
        text = state.labels.get(name, name)
        text = "".join(ch for ch in text.upper() if ch in _FONT) or name.upper()[:1]
        w, h = _glyph_width(text), 5
        base_c, base_r = world_to_px(viewport, anchor.x, anchor.y)
        chosen = None
        for dc, dr in _LABEL_OFFSETS:
            c, r = base_c + dc, base_r + dr
            box = (c, r, c + w, r + h)
            if all(not _boxes_overlap(box, b) for b in boxes):
                chosen = box
                break
        if chosen is None:
            c, r = base_c + _LABEL_OFFSETS[0][0], base_r + _LABEL_OFFSETS[0][1]
            chosen = (c, r, c + w, r + h)
        boxes.append(chosen)
        placed.append((name, text, chosen[0], chosen[1], w, h))
    return placed


def _boxes_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def count_label_overlaps(
    state: ConstructionState, viewport: Viewport, options: RenderOptions
) -> int:
    plan = plan_labels(state, viewport, options)
    boxes = [(c, r, c + w, r + h) for _, _, c, r, w, h in plan]
    return sum(
        1
        for i in range(len(boxes))
        for j in range(i + 1, len(boxes))
        if _boxes_overlap(boxes[i], boxes[j])
    )


def _draw_text(canvas: _Canvas, text: str, col: int, row: int) -> None:
    for k, ch in enumerate(text):
        glyph = _FONT.get(ch)
        if glyph is None:
            continue
        for gr, bits in enumerate(glyph):
            for gc, bit in enumerate(bits):
                if bit == "1":
                    canvas.put(col + 4 * k + gc, row + gr)


def draw_object(canvas: _Canvas, obj, dashed: bool = False) -> None:
    vp, opt = canvas.vp, canvas.opt
    if isinstance(obj, Point):
        c, r = world_to_px(vp, obj.x, obj.y)
        rad = opt.point_radius
        for dc in range(-rad, rad + 1):
            for dr in range(-rad, rad + 1):
                if dc * dc + dr * dr <= rad * rad:
                    canvas.put(c + dc, r + dr)
    elif isinstance(obj, Segment):
        c0, r0 = world_to_px(vp, obj.p1.x, obj.p1.y)
        c1, r1 = world_to_px(vp, obj.p2.x, obj.p2.y)
        canvas.line_px(c0, r0, c1, r1, dashed)
    elif isinstance(obj, Line):
        clipped = _clip_line_to_viewport(obj, vp)
        if clipped:
            c0, r0 = world_to_px(vp, clipped[0].x, clipped[0].y)
            c1, r1 = world_to_px(vp, clipped[1].x, clipped[1].y)
            canvas.line_px(c0, r0, c1, r1, dashed)
    elif isinstance(obj, Ray):
        span = math.hypot(vp.xmax - vp.xmin, vp.ymax - vp.ymin)
        end = Point(obj.origin.x + obj.direction[0] * 2 * span,
                    obj.origin.y + obj.direction[1] * 2 * span)
        c0, r0 = world_to_px(vp, obj.origin.x, obj.origin.y)
        c1, r1 = world_to_px(vp, end.x, end.y)
        canvas.line_px(c0, r0, c1, r1, dashed)
    elif isinstance(obj, Circle):
        _draw_ellipse_arc(canvas, obj.center, obj.radius, obj.radius, 0.0, dashed)
    elif isinstance(obj, Ellipse):
        _draw_ellipse_arc(canvas, obj.center, obj.semi_major, obj.semi_minor,
                          obj.rotation, dashed)
    elif isinstance(obj, Polygon):
        n = len(obj.vertices)
        for i in range(n):
            p, q = obj.vertices[i], obj.vertices[(i + 1) % n]
            c0, r0 = world_to_px(vp, p.x, p.y)
            c1, r1 = world_to_px(vp, q.x, q.y)
            canvas.line_px(c0, r0, c1, r1, dashed)
    elif isinstance(obj, FunctionGraph):
        _draw_function(canvas, obj, dashed)
    elif isinstance(obj, AngleMark):
        _draw_angle(canvas, obj, dashed)


def _draw_ellipse_arc(canvas, center: Point, a: float, b: float, rot: float,
                      dashed: bool) -> None:
    vp = canvas.vp
    px_per_unit = (vp.width_px - 1) / (vp.xmax - vp.xmin)
    steps = max(32, int(2.0 * math.pi * max(a, b) * px_per_unit))
    cos_r, sin_r = math.cos(rot), math.sin(rot)
    prev = None
    for i in range(steps + 1):
        t = 2.0 * math.pi * i / steps
        u, v = a * math.cos(t), b * math.sin(t)
        x = center.x + u * cos_r - v * sin_r
        y = center.y + u * sin_r + v * cos_r
        cur = world_to_px(vp, x, y)
        if prev is not None and prev != cur:
            canvas.line_px(prev[0], prev[1], cur[0], cur[1], dashed)
        elif prev is None:
            canvas.put(cur[0], cur[1], dashed)
        prev = cur


def _draw_function(canvas, graph: FunctionGraph, dashed: bool) -> None:
    vp = canvas.vp
    x0 = max(vp.xmin, graph.xmin)
    x1 = min(vp.xmax, graph.xmax)
    if x1 <= x0:
        return
    c0, _ = world_to_px(vp, x0, 0.0)
    c1, _ = world_to_px(vp, x1, 0.0)
    prev = None
    for c in range(min(c0, c1), max(c0, c1) + 1):
        x = vp.xmin + (c / max(vp.width_px - 1, 1)) * (vp.xmax - vp.xmin)
        x = min(max(x, graph.xmin), graph.xmax)
        try:
            y = graph.fn(x)
        except exprs.ExpressionError:
            prev = None
            continue
        if not math.isfinite(y):
            prev = None
            continue
        if y < vp.ymin or y > vp.ymax:
            prev = None
            continue
        cur = world_to_px(vp, x, y)
        if prev is not None:
            canvas.line_px(prev[0], prev[1], cur[0], cur[1], dashed)
        else:
            canvas.put(cur[0], cur[1], dashed)
        prev = cur


def _draw_angle(canvas, mark: AngleMark, dashed: bool) -> None:
    vp = canvas.vp
    arm_len = 0.08 * max(vp.xmax - vp.xmin, vp.ymax - vp.ymin)
    t1 = math.atan2(mark.arm1.y - mark.vertex.y, mark.arm1.x - mark.vertex.x)
    t2 = math.atan2(mark.arm2.y - mark.vertex.y, mark.arm2.x - mark.vertex.x)
    sweep = (t2 - t1) % (2.0 * math.pi)
    if sweep > math.pi:
        t1, sweep = t2, 2.0 * math.pi - sweep
    steps = 16
    prev = None
    for i in range(steps + 1):
        t = t1 + sweep * i / steps
        x = mark.vertex.x + arm_len * math.cos(t)
        y = mark.vertex.y + arm_len * math.sin(t)
        cur = world_to_px(vp, x, y)
        if prev is not None and prev != cur:
            canvas.line_px(prev[0], prev[1], cur[0], cur[1], dashed)
        prev = cur


def render_state(
    state: ConstructionState,
    viewport: Viewport,
    options: RenderOptions = RenderOptions(),
    warn_sink: list[str] | None = None,
) -> RasterImage:
    """Rasterize visible objects in construction order; degenerate ones are skipped."""
    canvas = _Canvas(viewport, options)
    for name in state.order:
        if name in state.degenerate:
            if warn_sink is not None:
                warn_sink.append(f"skipped degenerate object {name!r}")
            continue
        if not state.visibility.get(name, False):
            continue
        draw_object(canvas, state.objects[name], dashed=name in options.dashed)
    if options.draw_labels:
        for _, text, col, row, _, _ in plan_labels(state, viewport, options):
            _draw_text(canvas, text, col, row)
    return RasterImage(
        width=viewport.width_px, height=viewport.height_px, channels=1, buffer=canvas.buf
    )


def object_pixel_bboxes(
    state: ConstructionState, viewport: Viewport, options: RenderOptions = RenderOptions()
) -> dict[str, tuple[int, int, int, int]]:
    """Sidecar metadata: object name -> (col_min, row_min, col_max, row_max)."""
    out = {}
    for name, obj in state.visible_objects():
        canvas = _Canvas(viewport, replace(options, draw_labels=False))
        draw_object(canvas, obj, dashed=name in options.dashed)
        mask = canvas.buf != options.background
        if not mask.any():
            continue
        rows, cols = np.nonzero(mask)
        out[name] = (int(cols.min()), int(rows.min()), int(cols.max()), int(rows.max()))
    return out


def encode_png(image: RasterImage) -> bytes:
    """Standard PNG bytes; decode(encode(img)) == img."""
    import io

    mode = "L" if image.channels == 1 else "RGB"
    pil = Image.fromarray(image.buffer, mode=mode)
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> RasterImage:
    import io

    pil = Image.open(io.BytesIO(data))
    if pil.mode not in ("L", "RGB"):
        pil = pil.convert("RGB")
    arr = np.asarray(pil)
    channels = 1 if arr.ndim == 2 else arr.shape[2]
    return RasterImage(width=arr.shape[1], height=arr.shape[0], channels=channels,
                       buffer=arr.copy())
