"""Finite concrete models: categories, Set-valued functors, natural
transformations, the Yoneda correspondence checked by enumeration, and a
denotational evaluator for morphism terms."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Any

from .terms import (
    Cat, Compose, Element, FsdError, FunctorApp, FunctorImage, HomFunctor, HomSet,
    Identity, IndexNat, Mor, Named, NatComponent, Obj, Pair, PairMor, PartialProduct,
    ProductCat, SetCat, Signature, Typer, Unit, category_of, functor_type,
)

DEFAULT_MAX_COST = 2_000_000
STAR = "*"


class ModelError(FsdError):
    pass


class EnumerationTooLarge(FsdError):
    pass


class Fn:
    """A finite function; equality is extensional."""

    __slots__ = ("_map",)

    def __init__(self, mapping):
        object.__setattr__(self, "_map", dict(mapping))

    def __call__(self, x):
        try:
            return self._map[x]
        except KeyError:
            raise ModelError(f"{x!r} is outside the domain of {self!r}") from None

    @property
    def dom(self) -> tuple:
        return tuple(self._map)

    def items(self):
        return self._map.items()

    def __eq__(self, other):
        return isinstance(other, Fn) and self._map == other._map

    def __hash__(self):
        return hash(frozenset(self._map.items()))

    def __repr__(self):
        return "Fn({" + ", ".join(f"{k!r}: {v!r}" for k, v in self._map.items()) + "})"


def all_functions(dom, cod):
    """Every function ``dom -> cod`` as an :class:`Fn`, in lexicographic order."""
    dom, cod = tuple(dom), tuple(cod)
    return tuple(Fn(zip(dom, outs)) for outs in itertools.product(cod, repeat=len(dom)))


# -- finite categories -----------------------------------------------------


@dataclass(frozen=True)
class FinCategory:
    objects: tuple
    homs: dict  # (a, b) -> tuple of morphism labels
    compose_table: dict  # (m1, m2) -> label, forward order
    identities: dict  # object -> label

    def hom(self, a, b) -> tuple:
        return tuple(self.homs.get((a, b), ()))

    @cached_property
    def _ends(self) -> dict:
        ends = {}
        for (a, b), ms in self.homs.items():
            for m in ms:
                ends[m] = (a, b)
        return ends

    def src(self, m):
        return self._ends[m][0]

    def dst(self, m):
        return self._ends[m][1]

    def morphisms(self) -> list:
        out = []
        for a in self.objects:
            for b in self.objects:
                out.extend(self.hom(a, b))
        return out

    def compose(self, m1, m2):
        try:
            return self.compose_table[(m1, m2)]
        except KeyError:
            raise ModelError(f"composite ({m1}, {m2}) undefined") from None

    def to_json(self) -> dict:
        return {
            "objects": list(self.objects),
            "homs": [{"src": a, "dst": b, "morphisms": list(ms)} for (a, b), ms in self.homs.items()],
            "compose_table": [[m1, m2, r] for (m1, m2), r in self.compose_table.items()],
            "identities": dict(self.identities),
        }

    @classmethod
    def from_json(cls, d: dict) -> "FinCategory":
        return cls(
            objects=tuple(d["objects"]),
            homs={(h["src"], h["dst"]): tuple(h["morphisms"]) for h in d["homs"]},
            compose_table={(m1, m2): r for m1, m2, r in d["compose_table"]},
            identities=dict(d["identities"]),
        )


def check_category(c: FinCategory) -> list[str]:
    """Empty iff identities, closure, identity laws and associativity all hold."""
    report = []
    seen = {}
    for (a, b), ms in c.homs.items():
        for x in (a, b):
            if x not in c.objects:
                report.append(f"hom-set over unknown object {x}")
        for m in ms:
            if m in seen:
                report.append(f"morphism label {m} reused")
            seen[m] = (a, b)
    if report:
        return report
    for a in c.objects:
        i = c.identities.get(a)
        if i is None or seen.get(i) != (a, a):
            report.append(f"missing identity on {a}")
    if report:
        return report
    mors = c.morphisms()
    for m1 in mors:
        a, b = seen[m1]
        for cc in c.objects:
            for m2 in c.hom(b, cc):
                r = c.compose_table.get((m1, m2))
                if r is None:
                    report.append(f"composition undefined ({m1}, {m2})")
                elif seen.get(r) != (a, cc):
                    report.append(f"composite ({m1}, {m2}) has the wrong type")
    if report:
        return report
    for m in mors:
        a, b = seen[m]
        if c.compose(c.identities[a], m) != m:
            report.append(f"identity law violated ({c.identities[a]}, {m})")
        if c.compose(m, c.identities[b]) != m:
            report.append(f"identity law violated ({m}, {c.identities[b]})")
    for m1 in mors:
        for m2 in (x for x in mors if seen[x][0] == seen[m1][1]):
            for m3 in (x for x in mors if seen[x][0] == seen[m2][1]):
                if c.compose(c.compose(m1, m2), m3) != c.compose(m1, c.compose(m2, m3)):
                    report.append(f"associativity violated ({m1}, {m2}, {m3})")
    return report


# -- Set-valued functors and natural transformations ------------------------


@dataclass(frozen=True)
class SetFunctor:
    category: FinCategory
    on_objects: dict  # object -> tuple of elements
    on_morphisms: dict  # morphism -> dict element -> element

    def obj(self, a) -> tuple:
        return tuple(self.on_objects[a])

    def mor(self, m) -> dict:
        return self.on_morphisms[m]

    def to_json(self) -> dict:
        return {
            "on_objects": {a: list(v) for a, v in self.on_objects.items()},
            "on_morphisms": {m: dict(f) for m, f in self.on_morphisms.items()},
        }

    @classmethod
    def from_json(cls, c: FinCategory, d: dict) -> "SetFunctor":
        return cls(c, {a: tuple(v) for a, v in d["on_objects"].items()},
                   {m: dict(f) for m, f in d["on_morphisms"].items()})


def check_functor(F: SetFunctor) -> list[str]:
    c = F.category
    report = []
    for a in c.objects:
        if a not in F.on_objects:
            report.append(f"no image for object {a}")
    if report:
        return report
    for m in c.morphisms():
        a, b = c.src(m), c.dst(m)
        f = F.on_morphisms.get(m)
        if f is None:
            report.append(f"no image for morphism {m}")
            continue
        if set(f) != set(F.obj(a)) or any(v not in F.obj(b) for v in f.values()):
            report.append(f"image of {m} is not a function {a} -> {b}")
    if report:
        return report
    for a in c.objects:
        idf = F.mor(c.identities[a])
        if any(idf[x] != x for x in F.obj(a)):
            report.append(f"identity on {a} not preserved")
    for m1 in c.morphisms():
        for m2 in c.morphisms():
            if c.src(m2) != c.dst(m1):
                continue
            r = F.mor(c.compose(m1, m2))
            f1, f2 = F.mor(m1), F.mor(m2)
            if any(r[x] != f2[f1[x]] for x in F.obj(c.src(m1))):
                report.append(f"composite ({m1}, {m2}) not preserved")
    return report


@dataclass(frozen=True)
class ConcreteNatTrans:
    components: dict  # object -> dict element -> element


def check_naturality(eta: ConcreteNatTrans, F: SetFunctor, G: SetFunctor) -> list[str]:
    """Every naturality square, enumerated element by element."""
    c = F.category
    report = []
    for a in c.objects:
        comp = eta.components.get(a)
        if comp is None or set(comp) != set(F.obj(a)) or any(v not in G.obj(a) for v in comp.values()):
            report.append(f"component at {a} is not a function F{a} -> G{a}")
    if report:
        return report
    for m in c.morphisms():
        y, z = c.src(m), c.dst(m)
        ey, ez = eta.components[y], eta.components[z]
        fm, gm = F.mor(m), G.mor(m)
        if any(gm[ey[e]] != ez[fm[e]] for e in F.obj(y)):
            report.append(f"naturality square for {m} does not commute")
    return report


def hom_functor(c: FinCategory, x) -> SetFunctor:
    """The covariant hom-functor ``C(x, _)``."""
    if x not in c.objects:
        raise ModelError(f"unknown object {x}")
    on_obj = {y: c.hom(x, y) for y in c.objects}
    on_mor = {}
    for g in c.morphisms():
        on_mor[g] = {h: c.compose(h, g) for h in on_obj[c.src(g)]}
    return SetFunctor(c, on_obj, on_mor)


def _nat_cost(F: SetFunctor, G: SetFunctor) -> int:
    return math.prod(len(G.obj(a)) ** len(F.obj(a)) for a in F.category.objects)


def enumerate_nat_trans(F: SetFunctor, G: SetFunctor, max_cost: int = DEFAULT_MAX_COST) -> list:
    """All natural transformations ``F => G``, by brute force over component families."""
    if F.category is not G.category and F.category != G.category:
        raise ModelError("functors over different categories")
    cost = _nat_cost(F, G)
    if cost > max_cost:
        raise EnumerationTooLarge(f"enumeration needs {cost} candidates (cap {max_cost})")
    objs = F.category.objects
    choices = [all_functions(F.obj(a), G.obj(a)) for a in objs]
    out = []
    for family in itertools.product(*choices):
        eta = ConcreteNatTrans({a: dict(fn.items()) for a, fn in zip(objs, family)})
        if not check_naturality(eta, F, G):
            out.append(eta)
    return out


def yoneda_forward(phi: SetFunctor, x, element) -> ConcreteNatTrans:
    """``element |-> element*`` with components ``f |-> phi(f)(element)``."""
    if element not in phi.obj(x):
        raise ModelError(f"{element!r} is not an element of the image of {x}")
    c = phi.category
    return ConcreteNatTrans({y: {f: phi.mor(f)[element] for f in c.hom(x, y)} for y in c.objects})


def yoneda_backward(c: FinCategory, x, eta: ConcreteNatTrans):
    """``eta |-> eta_x(id_x)``."""
    for y in c.objects:
        if set(eta.components.get(y, {})) != set(c.hom(x, y)):
            raise ModelError(f"source mismatch: component at {y} is not defined on C({x}, {y})")
    return eta.components[x][c.identities[x]]


@dataclass(frozen=True)
class YonedaReport:
    count_nat: int
    count_elements: int
    forward_natural: bool
    backward_forward_id: bool
    forward_backward_id: bool

    @property
    def verified(self) -> bool:
        return (self.count_nat == self.count_elements and self.forward_natural
                and self.backward_forward_id and self.forward_backward_id)

    def to_json(self) -> dict:
        return {
            "verified": self.verified,
            "count_nat": self.count_nat,
            "count_elements": self.count_elements,
            "forward_natural": self.forward_natural,
            "backward_forward_id": self.backward_forward_id,
            "forward_backward_id": self.forward_backward_id,
        }

    def __str__(self):
        word = "verified" if self.verified else "FAILED"
        return f"{word}: {self.count_nat} = {self.count_elements}" if self.verified else \
            f"{word}: {self.count_nat} natural transformations, {self.count_elements} elements"


def verify_yoneda(c: FinCategory, x, phi: SetFunctor, max_cost: int = DEFAULT_MAX_COST) -> YonedaReport:
    hx = hom_functor(c, x)
    nats = enumerate_nat_trans(hx, phi, max_cost)
    elements = phi.obj(x)
    forwards = [yoneda_forward(phi, x, e) for e in elements]
    natural = all(not check_naturality(eta, hx, phi) for eta in forwards)
    bf = all(yoneda_backward(c, x, eta) == e for e, eta in zip(elements, forwards))
    fb = all(yoneda_forward(phi, x, yoneda_backward(c, x, eta)) == eta for eta in nats)
    return YonedaReport(len(nats), len(elements), natural, bf, fb)


def enumerate_set_functors(c: FinCategory, max_size: int = 3, sizes=None):
    """Yield every functor ``c -> Set`` whose sets are ``("0", .., str(n-1))`` with ``n <= max_size``.

    Morphism images are assigned by backtracking; a composition constraint is
    checked as soon as all three of its morphisms have images.
    """
    objs = list(c.objects)
    mors = c.morphisms()
    idents = set(c.identities.values())
    free = [m for m in mors if m not in idents]
    order = {m: i for i, m in enumerate(free)}
    checks = {i: [] for i in range(len(free))}
    for m1 in mors:
        for m2 in mors:
            if c.src(m2) != c.dst(m1):
                continue
            r = c.compose(m1, m2)
            involved = [order[m] for m in (m1, m2, r) if m in order]
            if involved:
                checks[max(involved)].append((m1, m2, r))
    size_iter = sizes if sizes is not None else itertools.product(range(max_size + 1), repeat=len(objs))
    for size in size_iter:
        carrier = {a: tuple(str(i) for i in range(n)) for a, n in zip(objs, size)}
        images = {c.identities[a]: tuple(carrier[a]) for a in objs}

        def apply(m, e):
            # carriers are "0".."n-1", so an element's label is its position
            return images[m][int(e)]

        def rec(k):
            if k == len(free):
                yield SetFunctor(c, dict(carrier),
                                 {m: dict(zip(carrier[c.src(m)], images[m])) for m in mors})
                return
            m = free[k]
            dom, cod = carrier[c.src(m)], carrier[c.dst(m)]
            for outs in itertools.product(cod, repeat=len(dom)):
                images[m] = outs
                if all(images[r] == tuple(apply(m2, apply(m1, e)) for e in carrier[c.src(m1)])
                       for m1, m2, r in checks[k]):
                    yield from rec(k + 1)
            images.pop(m, None)

        yield from rec(0)


# -- fixtures --------------------------------------------------------------

FIXTURES = ("terminal", "arrow", "chain3", "endo")


def load_category(path) -> FinCategory:
    with open(path, encoding="utf-8") as fh:
        return FinCategory.from_json(json.load(fh))


def fixture(name: str) -> FinCategory:
    text = resources.files("fsdiag").joinpath("fixtures", f"{name}.json").read_text("utf-8")
    return FinCategory.from_json(json.loads(text))


# -- models and evaluation -------------------------------------------------


def _tuplify(x):
    if isinstance(x, list):
        return tuple(_tuplify(v) for v in x)
    return x


@dataclass
class FunctorModel:
    on_objects: dict
    on_morphisms: dict


@dataclass
class Model:
    """Interpretation of a signature in finite data.

    Base categories map to :class:`FinCategory`; objects of ``Set`` map to
    tuples of labels; morphisms map to labels (or dicts, when in ``Set``).
    Functor and natural transformation tables are keyed by the denotations of
    objects and morphisms; product-category keys are tuples.
    """

    categories: dict = field(default_factory=dict)
    sets: dict = field(default_factory=dict)
    objects: dict = field(default_factory=dict)
    morphisms: dict = field(default_factory=dict)
    functors: dict = field(default_factory=dict)
    nats: dict = field(default_factory=dict)
    elements: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, d: dict) -> "Model":
        return cls(
            categories={n: FinCategory.from_json(c) for n, c in d.get("categories", {}).items()},
            sets={n: tuple(v) for n, v in d.get("sets", {}).items()},
            objects=dict(d.get("objects", {})),
            morphisms={n: (dict(v) if isinstance(v, dict) else v) for n, v in d.get("morphisms", {}).items()},
            functors={n: FunctorModel({_tuplify(k): _tuplify(v) for k, v in f["on_objects"]},
                                      {_tuplify(k): (dict(v) if isinstance(v, dict) else _tuplify(v))
                                       for k, v in f["on_morphisms"]})
                      for n, f in d.get("functors", {}).items()},
            nats={n: {_tuplify(k): (dict(v) if isinstance(v, dict) else _tuplify(v)) for k, v in comps}
                  for n, comps in d.get("nats", {}).items()},
            elements=dict(d.get("elements", {})),
        )


class Evaluator:
    """Denotations of object and morphism terms in a :class:`Model`."""

    def __init__(self, sig: Signature, model: Model):
        self.sig = sig
        self.model = model
        self.typer = Typer(sig)

    # category-level operations
    def _fincat(self, c: Cat) -> FinCategory:
        try:
            return self.model.categories[c.name]
        except KeyError:
            raise ModelError(f"no model for category {c.name}") from None

    def hom(self, c, a, b) -> tuple:
        if isinstance(c, SetCat):
            return all_functions(a, b)
        if isinstance(c, ProductCat):
            return tuple(itertools.product(self.hom(c.left, a[0], b[0]), self.hom(c.right, a[1], b[1])))
        return self._fincat(c).hom(a, b)

    def ident(self, c, a):
        if isinstance(c, SetCat):
            return Fn((x, x) for x in a)
        if isinstance(c, ProductCat):
            return self.ident(c.left, a[0]), self.ident(c.right, a[1])
        return self._fincat(c).identities[a]

    def comp(self, c, f, g):
        if isinstance(c, SetCat):
            return Fn((x, g(y)) for x, y in f.items())
        if isinstance(c, ProductCat):
            return self.comp(c.left, f[0], g[0]), self.comp(c.right, f[1], g[1])
        return self._fincat(c).compose(f, g)

    def objects_of(self, c) -> list:
        if isinstance(c, SetCat):
            raise ModelError("Set has no finite object list")
        if isinstance(c, ProductCat):
            return list(itertools.product(self.objects_of(c.left), self.objects_of(c.right)))
        return list(self._fincat(c).objects)

    def morphisms_of(self, c) -> list:
        """(morphism, src, dst) triples of a finite category expression."""
        if isinstance(c, ProductCat):
            return [((m, n), (a, b), (a2, b2)) for m, a, a2 in self.morphisms_of(c.left)
                    for n, b, b2 in self.morphisms_of(c.right)]
        if isinstance(c, SetCat):
            raise ModelError("Set has no finite morphism list")
        fc = self._fincat(c)
        return [(m, fc.src(m), fc.dst(m)) for m in fc.morphisms()]

    # functors
    def _named(self, name):
        try:
            return self.model.functors[name]
        except KeyError:
            raise ModelError(f"no model for functor {name}") from None

    def fobj(self, f, a):
        if isinstance(f, Named):
            src, dst = functor_type(self.sig, f)
            if isinstance(src, SetCat):
                raise ModelError(f"functor {f.name} out of Set cannot be tabulated")
            try:
                v = self._named(f.name).on_objects[a]
            except KeyError:
                raise ModelError(f"functor {f.name} undefined on object {a!r}") from None
            return tuple(v) if isinstance(dst, SetCat) else v
        if isinstance(f, HomFunctor):
            return self.hom(f.cat, self.obj(f.x), a)
        if isinstance(f, PartialProduct):
            c = category_of(self.sig, f.x)
            return self.fobj(Named(self.sig.product_functor(c)), (self.obj(f.x), a))
        raise TypeError(f)

    def fmap(self, f, m, dom):
        """Image of morphism denotation ``m`` whose domain denotation is ``dom``."""
        if isinstance(f, Named):
            src, dst = functor_type(self.sig, f)
            if isinstance(src, SetCat):
                raise ModelError(f"functor {f.name} out of Set cannot be tabulated")
            try:
                v = self._named(f.name).on_morphisms[m]
            except KeyError:
                raise ModelError(f"functor {f.name} undefined on morphism {m!r}") from None
            if isinstance(dst, SetCat):
                return Fn((x, v[x]) for x in self.fobj(f, dom))
            return v
        if isinstance(f, HomFunctor):
            return Fn((h, self.comp(f.cat, h, m)) for h in self.fobj(f, dom))
        if isinstance(f, PartialProduct):
            c = category_of(self.sig, f.x)
            prod = Named(self.sig.product_functor(c))
            x = self.obj(f.x)
            return self.fmap(prod, (self.ident(c, x), m), (x, dom))
        raise TypeError(f)

    def component(self, nat, at, dst, source_functor):
        """Component of ``nat`` at object denotation ``at``."""
        try:
            v = self.model.nats[nat][at]
        except KeyError:
            raise ModelError(f"{nat} has no component at {at!r}") from None
        if isinstance(dst, SetCat):
            return Fn((x, v[x]) for x in self.fobj(source_functor, at))
        return v

    # terms
    def obj(self, o):
        if isinstance(o, Obj):
            c = category_of(self.sig, o)
            table = self.model.sets if isinstance(c, SetCat) else self.model.objects
            try:
                v = table[o.name]
            except KeyError:
                raise ModelError(f"no model for object {o.name}") from None
            return tuple(v) if isinstance(c, SetCat) else v
        if isinstance(o, Unit):
            return (STAR,)
        if isinstance(o, FunctorApp):
            return self.fobj(o.functor, self.obj(o.arg))
        if isinstance(o, Pair):
            return self.obj(o.left), self.obj(o.right)
        if isinstance(o, HomSet):
            return self.hom(o.cat, self.obj(o.x), self.obj(o.y))
        raise TypeError(o)

    def mor(self, m):
        dom, cod = self.typer.infer(m)
        c = category_of(self.sig, dom)
        if isinstance(m, Mor):
            try:
                v = self.model.morphisms[m.name]
            except KeyError:
                raise ModelError(f"no model for morphism {m.name}") from None
            if isinstance(c, SetCat):
                return Fn((x, v[x]) for x in self.obj(dom))
            return v
        if isinstance(m, Identity):
            return self.ident(c, self.obj(m.obj))
        if isinstance(m, Compose):
            return self.comp(c, self.mor(m.first), self.mor(m.then))
        if isinstance(m, FunctorImage):
            arg_dom, _ = self.typer.infer(m.arg)
            return self.fmap(m.functor, self.mor(m.arg), self.obj(arg_dom))
        if isinstance(m, NatComponent):
            f, _ = self.sig.nat_transes[m.nat]
            return self.component(m.nat, self.obj(m.at), c, f)
        if isinstance(m, PairMor):
            return self.mor(m.left), self.mor(m.right)
        if isinstance(m, Element):
            target = self.obj(m.target)
            if isinstance(m.name, str):
                v = self.model.elements.get(m.name, m.name)
            else:
                v = self.mor(m.name)
            if v not in target:
                raise ModelError(f"element {m.name!r} is not in its target set")
            return Fn({STAR: v})
        if isinstance(m, IndexNat):
            at = self.mor(m.element)(STAR)
            return Fn((v, Fn({STAR: v(at)})) for v in self.obj(dom))
        raise TypeError(m)


def eval_expression(sig: Signature, model: Model, m) -> Any:
    """Denotation of morphism ``m``: a label, an :class:`Fn`, or a tuple of these."""
    return Evaluator(sig, model).mor(m)


def check_model(sig: Signature, model: Model) -> list[str]:
    """Check that the model respects every declared type (finite parts only)."""
    ev = Evaluator(sig, model)
    report = []
    for name, c in model.categories.items():
        report.extend(f"category {name}: {r}" for r in check_category(c))
    if report:
        return report
    for name in sig.base_objects:
        try:
            ev.obj(Obj(name))
        except ModelError as e:
            report.append(str(e))
    for name, (dom, cod) in sig.base_morphisms.items():
        c = category_of(sig, dom)
        try:
            if ev.mor(Mor(name)) not in ev.hom(c, ev.obj(dom), ev.obj(cod)):
                report.append(f"morphism {name} is not in its hom-set")
        except ModelError as e:
            report.append(str(e))
    for name, (src, dst) in sig.functors.items():
        if isinstance(src, SetCat):
            continue
        f = Named(name)
        try:
            for m, a, b in ev.morphisms_of(src):
                if ev.fmap(f, m, a) not in ev.hom(dst, ev.fobj(f, a), ev.fobj(f, b)):
                    report.append(f"functor {name}: image of {m!r} has the wrong type")
            for a in ev.objects_of(src):
                if ev.fmap(f, ev.ident(src, a), a) != ev.ident(dst, ev.fobj(f, a)):
                    report.append(f"functor {name}: identity on {a!r} not preserved")
            mors = ev.morphisms_of(src)
            for m1, a, b in mors:
                for m2, b2, _ in mors:
                    if b2 == b and ev.fmap(f, ev.comp(src, m1, m2), a) != \
                            ev.comp(dst, ev.fmap(f, m1, a), ev.fmap(f, m2, b)):
                        report.append(f"functor {name}: composite ({m1!r}, {m2!r}) not preserved")
        except ModelError as e:
            report.append(f"functor {name}: {e}")
    for name, (f, g) in sig.nat_transes.items():
        src, dst = functor_type(sig, f)
        if isinstance(src, SetCat):
            continue
        try:
            for a in ev.objects_of(src):
                if ev.component(name, a, dst, f) not in ev.hom(dst, ev.fobj(f, a), ev.fobj(g, a)):
                    report.append(f"nat {name}: component at {a!r} has the wrong type")
            for m, a, b in ev.morphisms_of(src):
                lhs = ev.comp(dst, ev.fmap(f, m, a), ev.component(name, b, dst, f))
                rhs = ev.comp(dst, ev.component(name, a, dst, f), ev.fmap(g, m, a))
                if lhs != rhs:
                    report.append(f"nat {name}: naturality square for {m!r} does not commute")
        except ModelError as e:
            report.append(f"nat {name}: {e}")
    return report
