"""Deterministic layout and SVG emission for diagrams.

Columns sit on a fixed horizontal grid; every entry of a column's wire stack
gets its own row on a fixed vertical grid, top to bottom. Morphisms are
rectangles, natural transformations (including indexes) are hexagons, and
functor wires that a morphism sits under pass straight through its column.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from .diagram import (
    ArrowheadWire, Diagram, FunctorWire, ObjectColumn, ObjectWire, Separator,
    UnitWire, wire_stack,
)
from .terms import (
    SET, Element, FunctorImage, HomFunctor, Identity, IndexNat, Named, NatComponent, PairMor,
    PartialProduct, Signature, Typer, show, show_cat, show_functor, show_obj,
)

STYLES = ("solid", "dashed", "double-dashed", "bold", "elided-unit", "arrowhead")
CHAR_WIDTH = 0.6  # of the font size, for a monospace face
ELLIPSIS = "…"


@dataclass(frozen=True)
class RenderConfig:
    column_pitch: float = 72.0
    wire_pitch: float = 24.0
    font_size: float = 12.0
    font_family: str = "monospace"
    margin: float = 24.0
    stroke: str = "#000000"
    colors: dict = field(default_factory=dict)  # name -> stroke colour, annotation only
    elide_units: bool = True

    @classmethod
    def from_json(cls, d: dict) -> "RenderConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown render config keys: {sorted(unknown)}")
        return cls(**known)


def load_config(path=None) -> RenderConfig:
    """Config from ``path``, else from ``$FSD_RENDER_CONFIG``, else defaults."""
    path = path or os.environ.get("FSD_RENDER_CONFIG")
    if not path:
        return RenderConfig()
    with open(path, encoding="utf-8") as fh:
        return RenderConfig.from_json(json.load(fh))


@dataclass(frozen=True)
class Label:
    text: str
    x: float  # centre
    y: float  # baseline
    width: float
    height: float

    def box(self):
        return (self.x - self.width / 2, self.y - self.height, self.x + self.width / 2, self.y)


@dataclass(frozen=True)
class WireSeg:
    column: int
    row: int
    x0: float
    x1: float
    y: float
    style: str
    color: str
    label: Label | None = None


@dataclass(frozen=True)
class Glyph:
    column: int
    shape: str  # "rect" or "hexagon"
    x: float  # centre
    y0: float
    y1: float
    width: float
    label: Label


@dataclass(frozen=True)
class Layout:
    width: float
    height: float
    column_x: tuple
    wires: tuple
    glyphs: tuple
    config: RenderConfig

    def labels(self) -> list[Label]:
        return [w.label for w in self.wires if w.label] + [g.label for g in self.glyphs]


def _style(w) -> str:
    if isinstance(w, Separator):
        return "double-dashed" if w.kind == "product" else "dashed"
    if isinstance(w, UnitWire):
        return "elided-unit" if w.elided else "solid"
    if isinstance(w, ArrowheadWire):
        return "arrowhead"
    if isinstance(w, FunctorWire) and w.bold:
        return "bold"
    return "solid"


def _wire_name(w) -> str:
    if isinstance(w, ObjectWire):
        return w.name
    if isinstance(w, FunctorWire):
        f = w.functor
        if isinstance(f, HomFunctor):
            # tensor axes are labelled by the axis alone; other hom wires as C(x, _)
            if f.cat == SET:
                return show_obj(f.x)
            return f"{show_cat(f.cat)}({show_obj(f.x)}, _)"
        if isinstance(f, PartialProduct):
            return show_obj(f.x)
        return show_functor(f)
    if isinstance(w, Separator):
        return w.functor or ""
    if isinstance(w, UnitWire):
        return "" if w.elided else "1"
    return ""


def _glyph_text(m) -> str:
    if isinstance(m, Element):
        return m.name if isinstance(m.name, str) else show(m.name)
    if isinstance(m, IndexNat):
        return "index " + _glyph_text(m.element)
    return show(m)


def _fit(text: str, max_width: float, font: float) -> tuple[str, float]:
    per = font * CHAR_WIDTH
    limit = max(1, int(max_width // per))
    if len(text) > limit:
        text = text[:max(0, limit - 1)] + ELLIPSIS
    return text, len(text) * per


def _same_wire(a, b) -> bool:
    # a hom-set wire and the hom-functor wire over the same object draw identically
    if isinstance(a, (FunctorWire, ArrowheadWire)) and type(a) is type(b):
        return dataclasses.replace(a, homset=False) == dataclasses.replace(b, homset=False)
    return False


def layout(sig: Signature, d: Diagram, config: RenderConfig | None = None) -> Layout:
    cfg = config or RenderConfig()
    cp, wp, font = cfg.column_pitch, cfg.wire_pitch, cfg.font_size
    n = len(d.columns)
    left = cfg.margin + cp / 2
    xs = tuple(left + i * cp for i in range(n))
    top = cfg.margin + font + 4
    stacks = []
    for c in d.columns:
        if isinstance(c, ObjectColumn):
            stacks.append(wire_stack(sig, c.term, cfg.elide_units))
        else:
            stacks.append(None)
    typer = Typer(sig)
    wires, glyphs = [], []

    def row_y(r):
        return top + r * wp

    def color(name):
        return cfg.colors.get(name, cfg.stroke)

    def through(i, r, w, x0=None, x1=None):
        x = xs[i]
        wires.append(WireSeg(i, r, x - cp / 2 if x0 is None else x0, x + cp / 2 if x1 is None else x1,
                             row_y(r), _style(w), color(_wire_name(w)), None))

    def place(i, m, r0, dom, cod):
        """Draw morphism ``m`` whose dom/cod wires are ``dom``/``cod`` starting at row ``r0``."""
        # functor wires the morphism sits under pass straight through
        while (isinstance(m, FunctorImage) and len(dom) > 1 and len(cod) > 1
               and _same_wire(dom[0], cod[0])):
            through(i, r0, dom[0])
            m, r0, dom, cod = m.arg, r0 + 1, dom[1:], cod[1:]
        if isinstance(m, Identity):
            for k, w in enumerate(dom):
                through(i, r0 + k, w)
            return
        # a pair, or a monoidal product of a pair, splits at its separator row
        pair = m
        if (isinstance(m, FunctorImage) and isinstance(m.functor, Named)
                and sig.monoidal_category_of(m.functor.name) is not None):
            pair = m.arg
        if isinstance(pair, PairMor):
            ld = len(wire_stack(sig, typer.infer(pair.left)[0], cfg.elide_units))
            lc = len(wire_stack(sig, typer.infer(pair.left)[1], cfg.elide_units))
            if (ld == lc and ld < len(dom) and ld < len(cod) and isinstance(dom[ld], Separator)
                    and dom[ld] == cod[lc] and (dom[ld].kind == "monoidal") == (pair is not m)):
                place(i, pair.left, r0, dom[:ld], cod[:lc])
                through(i, r0 + ld, dom[ld])
                place(i, pair.right, r0 + ld + 1, dom[ld + 1:], cod[lc + 1:])
                return
        x = xs[i]
        gw = cp * 0.8
        hexagon = isinstance(m, (NatComponent, IndexNat))
        if hexagon:
            # the hexagon sits on the functor wire; the argument passes below it
            span_dom = span_cod = 0
            for k in range(1, min(len(dom), len(cod))):
                through(i, r0 + k, dom[k])
        else:
            span_dom, span_cod = len(dom) - 1, len(cod) - 1
        for k in range(span_dom + 1):
            through(i, r0 + k, dom[k], x1=x - gw / 2)
        for k in range(span_cod + 1):
            through(i, r0 + k, cod[k], x0=x + gw / 2)
        y0 = row_y(r0) - wp / 3
        y1 = row_y(r0 + max(span_dom, span_cod)) + wp / 3
        text, width = _fit(_glyph_text(m), gw - 4, font)
        lab = Label(text, x, (y0 + y1) / 2 + font / 3, width, font)
        glyphs.append(Glyph(i, "hexagon" if hexagon else "rect", x, y0, y1, gw, lab))

    for i, c in enumerate(d.columns):
        x = xs[i]
        if isinstance(c, ObjectColumn):
            for r, w in enumerate(stacks[i]):
                name = _wire_name(w)
                text, width = _fit(name, cp - 8, font)
                lab = Label(text, x, row_y(r) - 4, width, font) if text else None
                wires.append(WireSeg(i, r, x - cp / 2, x + cp / 2, row_y(r), _style(w), color(name), lab))
        else:
            place(i, c.term, 0, stacks[i - 1], stacks[i + 1])
    rows = max((len(s) for s in stacks if s is not None), default=1)
    height = top + (rows - 1) * wp + wp / 3 + cfg.margin
    width = 2 * cfg.margin + n * cp
    return Layout(width, height, xs, tuple(wires), tuple(glyphs), cfg)


# -- SVG -------------------------------------------------------------------


def _f(v: float) -> str:
    return f"{v:.2f}"


def _line(x0, y, x1, color, extra=""):
    return (f'<line x1="{_f(x0)}" y1="{_f(y)}" x2="{_f(x1)}" y2="{_f(y)}" '
            f'stroke="{escape(color)}"{extra}/>')


def _wire_svg(w: WireSeg) -> list[str]:
    if w.style == "solid":
        return [_line(w.x0, w.y, w.x1, w.color, ' stroke-width="1.50"')]
    if w.style == "bold":
        return [_line(w.x0, w.y, w.x1, w.color, ' stroke-width="4.00"')]
    if w.style == "dashed":
        return [_line(w.x0, w.y, w.x1, w.color, ' stroke-width="1.00" stroke-dasharray="4 3"')]
    if w.style == "double-dashed":
        return [_line(w.x0, w.y - 2, w.x1, w.color, ' stroke-width="1.00" stroke-dasharray="4 3"'),
                _line(w.x0, w.y + 2, w.x1, w.color, ' stroke-width="1.00" stroke-dasharray="4 3"')]
    if w.style == "elided-unit":
        return [_line(w.x0, w.y, w.x1, w.color, ' stroke-width="1.50" stroke-opacity="0"')]
    # arrowhead: wire plus a head at its midpoint
    mx = (w.x0 + w.x1) / 2
    head = (f'<polygon points="{_f(mx - 4)},{_f(w.y - 4)} {_f(mx + 4)},{_f(w.y)} '
            f'{_f(mx - 4)},{_f(w.y + 4)}" fill="{escape(w.color)}"/>')
    return [_line(w.x0, w.y, w.x1, w.color, ' stroke-width="1.50"'), head]


def _text(lab: Label, cfg: RenderConfig) -> str:
    return (f'<text x="{_f(lab.x)}" y="{_f(lab.y)}" text-anchor="middle" '
            f'font-family="{escape(cfg.font_family)}" font-size="{_f(cfg.font_size)}">'
            f"{escape(lab.text)}</text>")


def _glyph_svg(g: Glyph, cfg: RenderConfig) -> list[str]:
    x0, x1 = g.x - g.width / 2, g.x + g.width / 2
    if g.shape == "rect":
        shape = (f'<rect x="{_f(x0)}" y="{_f(g.y0)}" width="{_f(g.width)}" height="{_f(g.y1 - g.y0)}" '
                 f'fill="#ffffff" stroke="{escape(cfg.stroke)}" stroke-width="1.50"/>')
    else:
        k = min(8.0, g.width / 4)
        ym = (g.y0 + g.y1) / 2
        pts = [(x0, ym), (x0 + k, g.y0), (x1 - k, g.y0), (x1, ym), (x1 - k, g.y1), (x0 + k, g.y1)]
        shape = ('<polygon points="' + " ".join(f"{_f(a)},{_f(b)}" for a, b in pts) + '" '
                 f'fill="#ffffff" stroke="{escape(cfg.stroke)}" stroke-width="1.50"/>')
    return [shape, _text(g.label, cfg)]


def emit_svg(lay: Layout) -> bytes:
    """A standalone SVG 1.1 document; identical layouts give identical bytes."""
    cfg = lay.config
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_f(lay.width)}" height="{_f(lay.height)}" '
        f'viewBox="0 0 {_f(lay.width)} {_f(lay.height)}">',
        '<g id="wires">',
    ]
    for w in lay.wires:
        out.extend(_wire_svg(w))
    out.append("</g>")
    out.append('<g id="glyphs">')
    for g in lay.glyphs:
        out.extend(_glyph_svg(g, cfg))
    out.append("</g>")
    out.append('<g id="labels">')
    for w in lay.wires:
        if w.label:
            out.append(_text(w.label, cfg))
    out.append("</g>")
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def render(sig: Signature, d: Diagram, config: RenderConfig | None = None) -> bytes:
    return emit_svg(layout(sig, d, config))


def overlapping_labels(lay: Layout) -> list[tuple[Label, Label]]:
    """Pairs of labels whose bounding boxes intersect."""
    labs = lay.labels()
    out = []
    for i, a in enumerate(labs):
        ax0, ay0, ax1, ay1 = a.box()
        for b in labs[i + 1:]:
            bx0, by0, bx1, by1 = b.box()
            if ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1:
                out.append((a, b))
    return out
