"""Vertical-section diagrams: alternating object and morphism columns."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .terms import (
    SET, UNIT, FsdError, FunctorApp, HomFunctor, HomSet, Identity, Named, Obj, Pair,
    PartialProduct, ProductCat, Signature, TypeCheckError, Typer, Unit, category_of, chain,
    functor_type, mor_from_json, mor_to_json, obj_from_json, obj_to_json, same_object, seq,
    show, show_obj,
)


class WellFormednessError(FsdError):
    def __init__(self, message: str, column: int):
        super().__init__(message)
        self.column = column


@dataclass(frozen=True)
class ObjectColumn:
    term: object


@dataclass(frozen=True)
class MorphismColumn:
    term: object


Column = Union[ObjectColumn, MorphismColumn]


@dataclass(frozen=True)
class Diagram:
    columns: tuple

    def __len__(self):
        return len(self.columns)


def diagram_of(sig: Signature, m) -> Diagram:
    """Split the top-level composite of ``m`` into columns, left to right."""
    typer = Typer(sig)
    typer.infer(m)
    factors = chain(m)
    dom, _ = typer.infer(factors[0])
    cols = [ObjectColumn(dom)]
    for f in factors:
        cols.append(MorphismColumn(f))
        cols.append(ObjectColumn(typer.infer(f)[1]))
    return Diagram(tuple(cols))


def check_wellformed(sig: Signature, d: Diagram) -> list[str]:
    """Empty iff columns alternate object/morphism and every boundary matches."""
    report = []
    cols = d.columns
    if not cols:
        return ["empty diagram"]
    for i, col in enumerate(cols):
        want = ObjectColumn if i % 2 == 0 else MorphismColumn
        if not isinstance(col, want):
            report.append(f"alternation violated at {i}")
            return report
    if len(cols) % 2 == 0:
        report.append(f"alternation violated at {len(cols) - 1}")
        return report
    typer = Typer(sig)
    for i, col in enumerate(cols):
        if isinstance(col, ObjectColumn):
            try:
                category_of(sig, col.term)
            except TypeCheckError as e:
                report.append(f"ill-typed object at column {i}: {e}")
            continue
        try:
            dom, cod = typer.infer(col.term)
        except TypeCheckError as e:
            report.append(f"ill-typed morphism at column {i}: {e}")
            continue
        if not same_object(sig, cols[i - 1].term, dom):
            report.append(f"boundary mismatch at column {i - 1}")
        if not same_object(sig, cols[i + 1].term, cod):
            report.append(f"boundary mismatch at column {i + 1}")
    return report


def expression_of(sig: Signature, d: Diagram):
    """Inverse of :func:`diagram_of`; raises on the first offending column."""
    report = check_wellformed(sig, d)
    if report:
        raise WellFormednessError(report[0], _first_column(report[0]))
    mors = [c.term for c in d.columns if isinstance(c, MorphismColumn)]
    if not mors:
        return Identity(d.columns[0].term)
    return seq(mors)


def _first_column(msg: str) -> int:
    for word in msg.replace(":", " ").split():
        if word.isdigit():
            return int(word)
    return 0


def diagram_to_json(d: Diagram) -> dict:
    cols = []
    for c in d.columns:
        if isinstance(c, ObjectColumn):
            cols.append({"kind": "object", "term": obj_to_json(c.term)})
        else:
            cols.append({"kind": "morphism", "term": mor_to_json(c.term)})
    return {"columns": cols}


def diagram_from_json(data: dict) -> Diagram:
    cols = []
    for c in data["columns"]:
        if c["kind"] == "object":
            cols.append(ObjectColumn(obj_from_json(c["term"])))
        elif c["kind"] == "morphism":
            cols.append(MorphismColumn(mor_from_json(c["term"])))
        else:
            raise FsdError(f"unknown column kind {c['kind']!r}")
    return Diagram(tuple(cols))


# -- wire stacks -----------------------------------------------------------


@dataclass(frozen=True)
class ObjectWire:
    name: str


@dataclass(frozen=True)
class FunctorWire:
    """A functor wire drawn above the ``span`` wires of its argument."""

    functor: object
    bold: bool = False
    span: int = 1
    homset: bool = False


@dataclass(frozen=True)
class Separator:
    kind: str  # "product" (double dash) or "monoidal" (single dash)
    level: int = 0
    functor: str | None = None


@dataclass(frozen=True)
class UnitWire:
    elided: bool = True


@dataclass(frozen=True)
class ArrowheadWire:
    """The 1-hom-functor wire (squeeze/unsqueeze marker)."""

    span: int = 1
    homset: bool = False


Wire = Union[ObjectWire, FunctorWire, Separator, UnitWire, ArrowheadWire]


def wire_stack(sig: Signature, o, elide_units: bool = True) -> tuple:
    """Top-to-bottom wires drawn for object ``o``."""
    return tuple(_stack(sig, o, 0, elide_units))


def _functor_wire(sig, f, arg_stack, homset=False):
    if isinstance(f, HomFunctor) and f.cat == SET and f.x == UNIT:
        return ArrowheadWire(len(arg_stack), homset)
    bold = isinstance(f, PartialProduct)
    if isinstance(f, Named):
        try:
            bold = isinstance(functor_type(sig, f)[0], ProductCat)
        except TypeCheckError:
            bold = False
    return FunctorWire(f, bold, len(arg_stack), homset)


def _stack(sig, o, level, elide):
    if isinstance(o, Obj):
        return [ObjectWire(o.name)]
    if isinstance(o, Unit):
        return [UnitWire(elide)]
    if isinstance(o, Pair):
        return (_stack(sig, o.left, level + 1, elide) + [Separator("product", level)]
                + _stack(sig, o.right, level + 1, elide))
    if isinstance(o, FunctorApp):
        f = o.functor
        if (isinstance(f, Named) and isinstance(o.arg, Pair)
                and sig.monoidal_category_of(f.name) is not None):
            return (_stack(sig, o.arg.left, level + 1, elide) + [Separator("monoidal", level, f.name)]
                    + _stack(sig, o.arg.right, level + 1, elide))
        below = _stack(sig, o.arg, level, elide)
        return [_functor_wire(sig, f, below)] + below
    if isinstance(o, HomSet):
        below = _stack(sig, o.y, level, elide)
        return [_functor_wire(sig, HomFunctor(o.cat, o.x), below, homset=True)] + below
    raise TypeError(o)


def unstack(stack) -> object:
    """Rebuild the object term a wire stack was drawn from."""
    stack = list(stack)
    if not stack:
        raise FsdError("empty wire stack")
    return _unstack(stack)


def _unstack(ws):
    head = ws[0]
    if len(ws) == 1:
        if isinstance(head, ObjectWire):
            return Obj(head.name)
        if isinstance(head, UnitWire):
            return UNIT
        raise FsdError(f"dangling wire {head!r}")
    if isinstance(head, (FunctorWire, ArrowheadWire)) and head.span == len(ws) - 1:
        arg = _unstack(ws[1:])
        f = head.functor if isinstance(head, FunctorWire) else HomFunctor(SET, UNIT)
        if head.homset:
            return HomSet(f.cat, f.x, arg)
        return FunctorApp(f, arg)
    # a pair: split at the shallowest separator in top scope
    best = None
    i = 0
    while i < len(ws):
        w = ws[i]
        if isinstance(w, Separator) and (best is None or w.level < ws[best].level):
            best = i
        if isinstance(w, (FunctorWire, ArrowheadWire)):
            i += w.span + 1
        else:
            i += 1
    if best is None:
        raise FsdError("malformed wire stack")
    sep = ws[best]
    left, right = _unstack(ws[:best]), _unstack(ws[best + 1:])
    if sep.kind == "monoidal":
        return FunctorApp(Named(sep.functor), Pair(left, right))
    return Pair(left, right)


def describe(d: Diagram) -> list[str]:
    return [show_obj(c.term) if isinstance(c, ObjectColumn) else show(c.term) for c in d.columns]
