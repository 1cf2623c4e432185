"""Signatures and the typed term language for categorical expressions.

Terms are immutable dataclasses.  Composition is forward (``f ; g`` first
applies ``f``) and is stored right-nested: ``Compose(f, Compose(g, h))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union


class FsdError(Exception):
    """Base class for all errors raised by this package."""


class TypeCheckError(FsdError):
    def __init__(self, message: str, term=None):
        super().__init__(message)
        self.term = term


# -- categories ------------------------------------------------------------


@dataclass(frozen=True)
class Cat:
    name: str


@dataclass(frozen=True)
class ProductCat:
    left: "CatExpr"
    right: "CatExpr"


@dataclass(frozen=True)
class SetCat:
    pass


SET = SetCat()
SET_NAME = "Set"

CatExpr = Union[Cat, ProductCat, SetCat]


def cat(name: str) -> CatExpr:
    return SET if name == SET_NAME else Cat(name)


def product_cat(*cats: CatExpr) -> CatExpr:
    """Left-associated binary product of ``cats``."""
    out = cats[0]
    for c in cats[1:]:
        out = ProductCat(out, c)
    return out


# -- objects ---------------------------------------------------------------


@dataclass(frozen=True)
class Obj:
    name: str


@dataclass(frozen=True)
class Unit:
    pass


UNIT = Unit()


@dataclass(frozen=True)
class FunctorApp:
    functor: "FunctorRef"
    arg: "ObjectTerm"


@dataclass(frozen=True)
class Pair:
    left: "ObjectTerm"
    right: "ObjectTerm"


@dataclass(frozen=True)
class HomSet:
    cat: CatExpr
    x: "ObjectTerm"
    y: "ObjectTerm"


ObjectTerm = Union[Obj, Unit, FunctorApp, Pair, HomSet]


# -- functor references ----------------------------------------------------


@dataclass(frozen=True)
class Named:
    name: str


@dataclass(frozen=True)
class HomFunctor:
    cat: CatExpr
    x: ObjectTerm


@dataclass(frozen=True)
class PartialProduct:
    x: ObjectTerm


FunctorRef = Union[Named, HomFunctor, PartialProduct]


# -- morphisms -------------------------------------------------------------


@dataclass(frozen=True)
class Mor:
    name: str


@dataclass(frozen=True)
class Identity:
    obj: ObjectTerm


@dataclass(frozen=True)
class Compose:
    first: "MorphismTerm"
    then: "MorphismTerm"


@dataclass(frozen=True)
class FunctorImage:
    functor: FunctorRef
    arg: "MorphismTerm"


@dataclass(frozen=True)
class NatComponent:
    nat: str
    at: ObjectTerm


@dataclass(frozen=True)
class PairMor:
    left: "MorphismTerm"
    right: "MorphismTerm"


@dataclass(frozen=True)
class Element:
    """A morphism ``1 -> target`` in Set.

    ``name`` is either a plain element label, resolved by a model, or a
    morphism term when ``target`` is a hom-set: the element of ``C(x, y)``
    corresponding to that morphism.
    """

    name: Union[str, "MorphismTerm"]
    target: ObjectTerm


@dataclass(frozen=True)
class IndexNat:
    """Component at ``over`` of the index ``Set(a, _) => Set(1, _)`` of an element ``1 -> a``."""

    element: Element
    over: ObjectTerm


MorphismTerm = Union[Mor, Identity, Compose, FunctorImage, NatComponent, PairMor, Element, IndexNat]

OBJECT_TYPES = (Obj, Unit, FunctorApp, Pair, HomSet)
MORPHISM_TYPES = (Mor, Identity, Compose, FunctorImage, NatComponent, PairMor, Element, IndexNat)


def chain(m: MorphismTerm) -> list:
    """Flatten all top-level composition into a list of factors."""
    if isinstance(m, Compose):
        return chain(m.first) + chain(m.then)
    return [m]


def seq(factors: Iterable[MorphismTerm]) -> MorphismTerm:
    """Right-nested composite of ``factors`` (no identity absorption)."""
    fs = list(factors)
    if not fs:
        raise ValueError("empty composite")
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = Compose(f, out)
    return out


# -- signatures ------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    categories: tuple = ()
    base_objects: dict = field(default_factory=dict)
    base_morphisms: dict = field(default_factory=dict)
    functors: dict = field(default_factory=dict)
    nat_transes: dict = field(default_factory=dict)
    monoidal: dict = field(default_factory=dict)

    def product_functor(self, c: CatExpr) -> str | None:
        if isinstance(c, Cat):
            return self.monoidal.get(c.name)
        return None

    def monoidal_category_of(self, functor_name: str) -> CatExpr | None:
        for cname, fname in self.monoidal.items():
            if fname == functor_name:
                return cat(cname)
        return None


def _cat_declared(sig: Signature, c: CatExpr) -> bool:
    if isinstance(c, SetCat):
        return True
    if isinstance(c, ProductCat):
        return _cat_declared(sig, c.left) and _cat_declared(sig, c.right)
    return c.name in sig.categories


def show_cat(c: CatExpr) -> str:
    if isinstance(c, SetCat):
        return SET_NAME
    if isinstance(c, ProductCat):
        right = show_cat(c.right)
        if isinstance(c.right, ProductCat):
            right = f"({right})"
        return f"{show_cat(c.left)} * {right}"
    return c.name


def validate_signature(sig: Signature) -> list[str]:
    """Return every violated signature invariant; empty iff valid."""
    report = []
    for name, c in sig.base_objects.items():
        if not _cat_declared(sig, c):
            report.append(f"object {name}: unknown category {show_cat(c)}")
    for name, (dom, cod) in sig.base_morphisms.items():
        cats = []
        for o in (dom, cod):
            try:
                cats.append(category_of(sig, o))
            except TypeCheckError as e:
                report.append(f"morphism {name}: {e}")
        if len(cats) == 2 and cats[0] != cats[1]:
            report.append(f"morphism {name}: dom and cod in different categories")
    for name, (src, dst) in sig.functors.items():
        for c in (src, dst):
            if not _cat_declared(sig, c):
                report.append(f"functor {name}: unknown category {show_cat(c)}")
    for name, (f, g) in sig.nat_transes.items():
        try:
            fs, fd = functor_type(sig, f)
            gs, gd = functor_type(sig, g)
        except TypeCheckError as e:
            report.append(f"nat {name}: {e}")
            continue
        if fs != gs:
            report.append(f"nat {name}: functor source mismatch")
        if fd != gd:
            report.append(f"nat {name}: functor target mismatch")
    for cname, fname in sig.monoidal.items():
        if cname not in sig.categories:
            report.append(f"monoidal {cname}: unknown category {cname}")
        if fname not in sig.functors:
            report.append(f"monoidal {cname}: unknown functor {fname}")
            continue
        src, dst = sig.functors[fname]
        c = cat(cname)
        if src != ProductCat(c, c) or dst != c:
            report.append(f"monoidal {cname}: {fname} must have type {cname} * {cname} -> {cname}")
    return report


# -- typing ----------------------------------------------------------------


def functor_type(sig: Signature, f: FunctorRef) -> tuple:
    """(src, dst) categories of a functor reference."""
    if isinstance(f, Named):
        if f.name not in sig.functors:
            raise TypeCheckError(f"unknown functor {f.name}", f)
        return sig.functors[f.name]
    if isinstance(f, HomFunctor):
        if not _cat_declared(sig, f.cat):
            raise TypeCheckError(f"unknown category {show_cat(f.cat)}", f)
        cx = category_of(sig, f.x)
        if cx != f.cat:
            raise TypeCheckError(f"hom-functor object does not live in {show_cat(f.cat)}", f)
        return f.cat, SET
    if isinstance(f, PartialProduct):
        c = category_of(sig, f.x)
        if sig.product_functor(c) is None:
            raise TypeCheckError(f"partial product over non-monoidal category {show_cat(c)}", f)
        return c, c
    raise TypeCheckError(f"not a functor reference: {f!r}", f)


def category_of(sig: Signature, o: ObjectTerm) -> CatExpr:
    if isinstance(o, Obj):
        if o.name not in sig.base_objects:
            raise TypeCheckError(f"unknown object {o.name}", o)
        return sig.base_objects[o.name]
    if isinstance(o, Unit):
        return SET
    if isinstance(o, FunctorApp):
        src, dst = functor_type(sig, o.functor)
        if category_of(sig, o.arg) != src:
            raise TypeCheckError("functor applied to object of the wrong category", o)
        return dst
    if isinstance(o, Pair):
        return ProductCat(category_of(sig, o.left), category_of(sig, o.right))
    if isinstance(o, HomSet):
        if not _cat_declared(sig, o.cat):
            raise TypeCheckError(f"unknown category {show_cat(o.cat)}", o)
        if category_of(sig, o.x) != o.cat or category_of(sig, o.y) != o.cat:
            raise TypeCheckError(f"hom-set objects must live in {show_cat(o.cat)}", o)
        return SET
    raise TypeCheckError(f"not an object term: {o!r}", o)


def canon(sig: Signature, o: ObjectTerm) -> ObjectTerm:
    """Unfold definitional sugar: ``C(x, y)`` and ``x (*) _`` applications."""
    if isinstance(o, FunctorApp):
        arg = canon(sig, o.arg)
        f = o.functor
        if isinstance(f, PartialProduct):
            prod = sig.product_functor(category_of(sig, f.x))
            return FunctorApp(Named(prod), Pair(canon(sig, f.x), arg))
        if isinstance(f, HomFunctor):
            return FunctorApp(HomFunctor(f.cat, canon(sig, f.x)), arg)
        return FunctorApp(f, arg)
    if isinstance(o, HomSet):
        return FunctorApp(HomFunctor(o.cat, canon(sig, o.x)), canon(sig, o.y))
    if isinstance(o, Pair):
        return Pair(canon(sig, o.left), canon(sig, o.right))
    return o


def same_object(sig: Signature, a: ObjectTerm, b: ObjectTerm) -> bool:
    return a == b or canon(sig, a) == canon(sig, b)


def hom_parts(sig: Signature, o: ObjectTerm):
    """``(cat, x, y)`` if ``o`` is a hom-set ``C(x, y)``, else None."""
    c = canon(sig, o)
    if isinstance(c, FunctorApp) and isinstance(c.functor, HomFunctor):
        return c.functor.cat, c.functor.x, c.arg
    return None


class Typer:
    """Memoizing type inference for one signature."""

    def __init__(self, sig: Signature):
        self.sig = sig
        self._memo: dict = {}

    def infer(self, m: MorphismTerm) -> tuple:
        try:
            return self._memo[m]
        except KeyError:
            pass
        t = self._infer(m)
        self._memo[m] = t
        return t

    def category(self, m: MorphismTerm) -> CatExpr:
        return category_of(self.sig, self.infer(m)[0])

    def _infer(self, m):
        sig = self.sig
        if isinstance(m, Mor):
            if m.name not in sig.base_morphisms:
                raise TypeCheckError(f"unknown morphism {m.name}", m)
            return sig.base_morphisms[m.name]
        if isinstance(m, Identity):
            category_of(sig, m.obj)
            return m.obj, m.obj
        if isinstance(m, Compose):
            d1, c1 = self.infer(m.first)
            d2, c2 = self.infer(m.then)
            if not same_object(sig, c1, d2):
                raise TypeCheckError(
                    f"cannot compose: codomain {show_obj(c1)} != domain {show_obj(d2)}", m)
            return d1, c2
        if isinstance(m, FunctorImage):
            src, _ = functor_type(sig, m.functor)
            d, c = self.infer(m.arg)
            if category_of(sig, d) != src:
                raise TypeCheckError("functor applied to morphism of the wrong category", m)
            return FunctorApp(m.functor, d), FunctorApp(m.functor, c)
        if isinstance(m, NatComponent):
            if m.nat not in sig.nat_transes:
                raise TypeCheckError(f"unknown natural transformation {m.nat}", m)
            f, g = sig.nat_transes[m.nat]
            src, _ = functor_type(sig, f)
            if category_of(sig, m.at) != src:
                raise TypeCheckError("natural transformation component at object of the wrong category", m)
            return FunctorApp(f, m.at), FunctorApp(g, m.at)
        if isinstance(m, PairMor):
            dl, cl = self.infer(m.left)
            dr, cr = self.infer(m.right)
            return Pair(dl, dr), Pair(cl, cr)
        if isinstance(m, Element):
            if category_of(sig, m.target) != SET:
                raise TypeCheckError("element target must be a set", m)
            if not isinstance(m.name, str):
                parts = hom_parts(sig, m.target)
                if parts is None:
                    raise TypeCheckError("morphism-named element needs a hom-set target", m)
                c, x, y = parts
                d, cd = self.infer(m.name)
                if category_of(sig, d) != c or not same_object(sig, d, x) or not same_object(sig, cd, y):
                    raise TypeCheckError("element morphism does not match its hom-set", m)
            return UNIT, m.target
        if isinstance(m, IndexNat):
            if not isinstance(m.element, Element):
                raise TypeCheckError("index needs an element", m)
            _, a = self.infer(m.element)
            if category_of(sig, m.over) != SET:
                raise TypeCheckError("index component must be taken at a set", m)
            return HomSet(SET, a, m.over), HomSet(SET, UNIT, m.over)
        raise TypeCheckError(f"not a morphism term: {m!r}", m)


def infer_type(sig: Signature, m: MorphismTerm) -> tuple:
    """Return ``(dom, cod)`` of ``m`` or raise :class:`TypeCheckError`."""
    return Typer(sig).infer(m)


def compose(sig: Signature, m1: MorphismTerm, m2: MorphismTerm) -> MorphismTerm:
    """Type-checked forward composite with identity absorption."""
    _, c1 = infer_type(sig, m1)
    d2, _ = infer_type(sig, m2)
    if not same_object(sig, c1, d2):
        raise TypeCheckError(f"cannot compose: codomain {show_obj(c1)} != domain {show_obj(d2)}",
                             Compose(m1, m2))
    if isinstance(m1, Identity):
        return m2
    if isinstance(m2, Identity):
        return m1
    return seq(chain(m1) + chain(m2))


# -- printing --------------------------------------------------------------


def show_functor(f: FunctorRef) -> str:
    if isinstance(f, Named):
        return f.name
    if isinstance(f, HomFunctor):
        return f"hom({show_cat(f.cat)}, {show_obj(f.x)})"
    return f"({show_obj(f.x)} * _)"


def show_obj(o: ObjectTerm) -> str:
    if isinstance(o, Obj):
        return o.name
    if isinstance(o, Unit):
        return "1"
    if isinstance(o, FunctorApp):
        return f"{show_functor(o.functor)}[{show_obj(o.arg)}]"
    if isinstance(o, Pair):
        return f"<{show_obj(o.left)}, {show_obj(o.right)}>"
    if isinstance(o, HomSet):
        return f"hom({show_cat(o.cat)}, {show_obj(o.x)}, {show_obj(o.y)})"
    raise TypeError(o)


def show(m: MorphismTerm) -> str:
    """Canonical concrete syntax for a morphism term."""
    if isinstance(m, Compose):
        first = show(m.first)
        if isinstance(m.first, Compose):
            first = f"({first})"
        return f"{first} ; {show(m.then)}"
    if isinstance(m, Mor):
        return m.name
    if isinstance(m, Identity):
        return f"id({show_obj(m.obj)})"
    if isinstance(m, FunctorImage):
        return f"{show_functor(m.functor)}[{show(m.arg)}]"
    if isinstance(m, NatComponent):
        return f"{m.nat} @ {show_obj(m.at)}"
    if isinstance(m, PairMor):
        return f"<{show(m.left)}, {show(m.right)}>"
    if isinstance(m, Element):
        name = m.name if isinstance(m.name, str) else "{" + show(m.name) + "}"
        return f"elem {name} : {show_obj(m.target)}"
    if isinstance(m, IndexNat):
        return f"index({show(m.element)}, {show_obj(m.over)})"
    raise TypeError(m)


# -- JSON ------------------------------------------------------------------


def cat_to_json(c: CatExpr) -> dict:
    if isinstance(c, SetCat):
        return {"tag": "SetCat"}
    if isinstance(c, ProductCat):
        return {"tag": "Product", "left": cat_to_json(c.left), "right": cat_to_json(c.right)}
    return {"tag": "Base", "name": c.name}


def cat_from_json(d) -> CatExpr:
    if isinstance(d, str):
        return cat(d)
    tag = d["tag"]
    if tag == "SetCat":
        return SET
    if tag == "Product":
        return ProductCat(cat_from_json(d["left"]), cat_from_json(d["right"]))
    if tag == "Base":
        return cat(d["name"])
    raise FsdError(f"unknown category tag {tag!r}")


def functor_to_json(f: FunctorRef) -> dict:
    if isinstance(f, Named):
        return {"tag": "Named", "name": f.name}
    if isinstance(f, HomFunctor):
        return {"tag": "HomFunctor", "cat": cat_to_json(f.cat), "x": obj_to_json(f.x)}
    return {"tag": "PartialProduct", "x": obj_to_json(f.x)}


def functor_from_json(d) -> FunctorRef:
    if isinstance(d, str):
        return Named(d)
    tag = d["tag"]
    if tag == "Named":
        return Named(d["name"])
    if tag == "HomFunctor":
        return HomFunctor(cat_from_json(d["cat"]), obj_from_json(d["x"]))
    if tag == "PartialProduct":
        return PartialProduct(obj_from_json(d["x"]))
    raise FsdError(f"unknown functor tag {tag!r}")


def obj_to_json(o: ObjectTerm) -> dict:
    if isinstance(o, Obj):
        return {"tag": "Base", "name": o.name}
    if isinstance(o, Unit):
        return {"tag": "Unit"}
    if isinstance(o, FunctorApp):
        return {"tag": "FunctorApp", "functor": functor_to_json(o.functor), "arg": obj_to_json(o.arg)}
    if isinstance(o, Pair):
        return {"tag": "Pair", "left": obj_to_json(o.left), "right": obj_to_json(o.right)}
    return {"tag": "HomSet", "cat": cat_to_json(o.cat), "x": obj_to_json(o.x), "y": obj_to_json(o.y)}


def obj_from_json(d) -> ObjectTerm:
    tag = d["tag"]
    if tag == "Base":
        return Obj(d["name"])
    if tag == "Unit":
        return UNIT
    if tag == "FunctorApp":
        return FunctorApp(functor_from_json(d["functor"]), obj_from_json(d["arg"]))
    if tag == "Pair":
        return Pair(obj_from_json(d["left"]), obj_from_json(d["right"]))
    if tag == "HomSet":
        return HomSet(cat_from_json(d["cat"]), obj_from_json(d["x"]), obj_from_json(d["y"]))
    raise FsdError(f"unknown object tag {tag!r}")


def mor_to_json(m: MorphismTerm) -> dict:
    if isinstance(m, Mor):
        return {"tag": "Base", "name": m.name}
    if isinstance(m, Identity):
        return {"tag": "Identity", "obj": obj_to_json(m.obj)}
    if isinstance(m, Compose):
        return {"tag": "Compose", "first": mor_to_json(m.first), "then": mor_to_json(m.then)}
    if isinstance(m, FunctorImage):
        return {"tag": "FunctorImage", "functor": functor_to_json(m.functor), "arg": mor_to_json(m.arg)}
    if isinstance(m, NatComponent):
        return {"tag": "NatComponent", "nat": m.nat, "at": obj_to_json(m.at)}
    if isinstance(m, PairMor):
        return {"tag": "PairMor", "left": mor_to_json(m.left), "right": mor_to_json(m.right)}
    if isinstance(m, Element):
        name = m.name if isinstance(m.name, str) else mor_to_json(m.name)
        return {"tag": "Element", "name": name, "target": obj_to_json(m.target)}
    return {"tag": "IndexNat", "element": mor_to_json(m.element), "over": obj_to_json(m.over)}


def mor_from_json(d) -> MorphismTerm:
    tag = d["tag"]
    if tag == "Base":
        return Mor(d["name"])
    if tag == "Identity":
        return Identity(obj_from_json(d["obj"]))
    if tag == "Compose":
        return Compose(mor_from_json(d["first"]), mor_from_json(d["then"]))
    if tag == "FunctorImage":
        return FunctorImage(functor_from_json(d["functor"]), mor_from_json(d["arg"]))
    if tag == "NatComponent":
        return NatComponent(d["nat"], obj_from_json(d["at"]))
    if tag == "PairMor":
        return PairMor(mor_from_json(d["left"]), mor_from_json(d["right"]))
    if tag == "Element":
        name = d["name"] if isinstance(d["name"], str) else mor_from_json(d["name"])
        return Element(name, obj_from_json(d["target"]))
    if tag == "IndexNat":
        return IndexNat(mor_from_json(d["element"]), obj_from_json(d["over"]))
    raise FsdError(f"unknown morphism tag {tag!r}")


def signature_to_json(sig: Signature) -> dict:
    return {
        "categories": list(sig.categories),
        "objects": {n: cat_to_json(c) for n, c in sig.base_objects.items()},
        "morphisms": {n: {"dom": obj_to_json(d), "cod": obj_to_json(c)}
                      for n, (d, c) in sig.base_morphisms.items()},
        "functors": {n: {"src": cat_to_json(s), "dst": cat_to_json(t)}
                     for n, (s, t) in sig.functors.items()},
        "nats": {n: {"src_functor": functor_to_json(f), "dst_functor": functor_to_json(g)}
                 for n, (f, g) in sig.nat_transes.items()},
        "monoidal": dict(sig.monoidal),
    }


def signature_from_json(d: dict) -> Signature:
    return Signature(
        categories=tuple(d.get("categories", ())),
        base_objects={n: cat_from_json(c) for n, c in d.get("objects", {}).items()},
        base_morphisms={n: (obj_from_json(v["dom"]), obj_from_json(v["cod"]))
                        for n, v in d.get("morphisms", {}).items()},
        functors={n: (cat_from_json(v["src"]), cat_from_json(v["dst"]))
                  for n, v in d.get("functors", {}).items()},
        nat_transes={n: (functor_from_json(v["src_functor"]), functor_from_json(v["dst_functor"]))
                     for n, v in d.get("nats", {}).items()},
        monoidal=dict(d.get("monoidal", {})),
    )
