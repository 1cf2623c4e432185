"""Equivalent-expression rewriting: redex search, application, normalization
and bounded equivalence search.

Rules (each has an ``expand`` and a ``contract`` direction):

====  ===================  ==================================================
R1    functor-composition  ``F[f ; g]``  <->  ``F[f] ; F[g]``
R2    functor-identity     ``id(F[x])``  <->  ``F[id(x)]``  (contract: right to left)
R3    naturality-slide     ``eta@x ; G[f]``  <->  ``F[f] ; eta@y``
R4    yoneda-move          ``elem {elem p:a ; v} : hom(Set,1,x)``  <->  ``elem {v} : hom(Set,a,x) ; index(elem p:a, x)``
R5    monoidal-encode      ``(x)[<f, g>]``  <->  ``(x)[<f, id(z)>] ; (y * _)[g]``
R6    unit-elision         ``t``  <->  ``<id(1), t>``  (root only)
R7    hom-evaluation       ``elem {h} : C(x,y) ; hom(C,x)[g]``  <->  ``elem {h ; g} : C(x,z)``  (contract: left to right)
R8    squeeze-unsqueeze    ``t``  <->  ``hom(Set, 1)[t]``  (root only)
====  ===================  ==================================================

Chain rules (R1 contract, R3, R4 contract, R5 contract, R7 contract) match an
adjacent pair of factors; their site is the ``Compose`` node whose first
factor is the left member of the pair.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .terms import (
    SET, UNIT, Compose, Element, FsdError, FunctorApp, FunctorImage, HomFunctor, HomSet,
    Identity, IndexNat, Named, NatComponent, PairMor, PartialProduct, Signature, Typer,
    seq,
)

RULES = {
    "R1": "functor-composition",
    "R2": "functor-identity",
    "R3": "naturality-slide",
    "R4": "yoneda-move",
    "R5": "monoidal-encode",
    "R6": "unit-elision",
    "R7": "hom-evaluation",
    "R8": "squeeze-unsqueeze",
}
EXPAND = "expand"
CONTRACT = "contract"
DIRECTIONS = (EXPAND, CONTRACT)

# fixed priority used by normalize
NORMAL_ORDER = (("R1", EXPAND), ("R2", CONTRACT), ("R6", CONTRACT), ("R8", CONTRACT))


class InvalidSiteError(FsdError):
    pass


@dataclass(frozen=True)
class RewriteSite:
    path: tuple
    rule: str
    direction: str

    def to_json(self) -> dict:
        return {"rule": self.rule, "direction": self.direction, "path": list(self.path)}

    @classmethod
    def from_json(cls, d: dict) -> "RewriteSite":
        return cls(tuple(d["path"]), d["rule"], d["direction"])

    def __str__(self):
        return f"{self.rule} {self.direction} @ {list(self.path)}"


# -- term navigation -------------------------------------------------------

_CHILD_FIELDS = {
    Compose: ("first", "then"),
    FunctorImage: ("arg",),
    PairMor: ("left", "right"),
    IndexNat: ("element",),
}


def children(m) -> list:
    if isinstance(m, Element):
        return [] if isinstance(m.name, str) else [m.name]
    return [getattr(m, f) for f in _CHILD_FIELDS.get(type(m), ())]


def _field(m, i: int) -> str:
    if isinstance(m, Element):
        if isinstance(m.name, str) or i != 0:
            raise IndexError(i)
        return "name"
    return _CHILD_FIELDS.get(type(m), ())[i]


def subterm(m, path):
    for i in path:
        m = getattr(m, _field(m, i))
    return m


def preorder(m, path=()):
    yield path, m
    for i, c in enumerate(children(m)):
        yield from preorder(c, path + (i,))


def _spine(m) -> list:
    out = []
    while isinstance(m, Compose):
        out.append(m.first)
        m = m.then
    out.append(m)
    return out


def replace_at(m, path, new):
    """Replace the subterm at ``path``; a factor expanded into a chain is spliced
    into its enclosing chain so composites stay right-nested."""
    if not path:
        return new
    parent_path, i = path[:-1], path[-1]
    parent = subterm(m, parent_path)
    old = getattr(parent, _field(parent, i))
    if (isinstance(parent, Compose) and i == 0 and isinstance(new, Compose)
            and not isinstance(old, Compose)):
        new_parent = seq(_spine(new) + [parent.then])
    else:
        new_parent = dataclasses.replace(parent, **{_field(parent, i): new})
    return replace_at(m, parent_path, new_parent)


# -- rule bodies -----------------------------------------------------------
# node rules: (ctx, node) -> replacement or None
# pair rules: (ctx, a, b) -> list of factors or None


def _r1_expand(ctx, t):
    # both directions leave a left-nested first factor alone, so each step is invertible
    if (isinstance(t, FunctorImage) and isinstance(t.arg, Compose)
            and not isinstance(t.arg.first, Compose)):
        return Compose(FunctorImage(t.functor, t.arg.first), FunctorImage(t.functor, t.arg.then))
    return None


def _r1_contract(ctx, a, b):
    if (isinstance(a, FunctorImage) and isinstance(b, FunctorImage) and a.functor == b.functor
            and not isinstance(a.arg, Compose)):
        return [FunctorImage(a.functor, Compose(a.arg, b.arg))]
    return None


def _r2_contract(ctx, t):
    if isinstance(t, FunctorImage) and isinstance(t.arg, Identity):
        return Identity(FunctorApp(t.functor, t.arg.obj))
    return None


def _r2_expand(ctx, t):
    if isinstance(t, Identity) and isinstance(t.obj, FunctorApp):
        return FunctorImage(t.obj.functor, Identity(t.obj.arg))
    return None


def _r3_expand(ctx, a, b):
    if not (isinstance(a, NatComponent) and isinstance(b, FunctorImage)):
        return None
    f, g = ctx.sig.nat_transes[a.nat]
    if b.functor != g:
        return None
    dom, cod = ctx.typer.infer(b.arg)
    if dom != a.at:
        return None
    return [FunctorImage(f, b.arg), NatComponent(a.nat, cod)]


def _r3_contract(ctx, a, b):
    if not (isinstance(a, FunctorImage) and isinstance(b, NatComponent)):
        return None
    f, g = ctx.sig.nat_transes[b.nat]
    if a.functor != f:
        return None
    dom, cod = ctx.typer.infer(a.arg)
    if cod != b.at:
        return None
    return [NatComponent(b.nat, dom), FunctorImage(g, a.arg)]


def _r4_expand(ctx, t):
    if not (isinstance(t, Element) and isinstance(t.name, Compose)
            and isinstance(t.name.first, Element)):
        return None
    target = t.target
    if not (isinstance(target, HomSet) and target.cat == SET and target.x == UNIT):
        return None
    e, v = t.name.first, t.name.then
    _, a = ctx.typer.infer(e)
    return Compose(Element(v, HomSet(SET, a, target.y)), IndexNat(e, target.y))


def _r4_contract(ctx, a, b):
    if not (isinstance(a, Element) and not isinstance(a.name, str) and isinstance(b, IndexNat)):
        return None
    _, elem_set = ctx.typer.infer(b.element)
    if a.target != HomSet(SET, elem_set, b.over):
        return None
    return [Element(Compose(b.element, a.name), HomSet(SET, UNIT, b.over))]


def _monoidal_product(ctx, f):
    if isinstance(f, Named):
        return ctx.sig.monoidal_category_of(f.name)
    return None


def _r5_expand(ctx, t):
    if not (isinstance(t, FunctorImage) and isinstance(t.arg, PairMor)):
        return None
    if _monoidal_product(ctx, t.functor) is None:
        return None
    f, g = t.arg.left, t.arg.right
    _, y = ctx.typer.infer(f)
    z, _ = ctx.typer.infer(g)
    return Compose(FunctorImage(t.functor, PairMor(f, Identity(z))),
                   FunctorImage(PartialProduct(y), g))


def _r5_contract(ctx, a, b):
    if not (isinstance(a, FunctorImage) and isinstance(a.arg, PairMor)
            and isinstance(a.arg.right, Identity) and isinstance(b, FunctorImage)
            and isinstance(b.functor, PartialProduct)):
        return None
    c = _monoidal_product(ctx, a.functor)
    if c is None or ctx.typer.category(b.arg) != c:
        return None
    f, z = a.arg.left, a.arg.right.obj
    _, y = ctx.typer.infer(f)
    g_dom, _ = ctx.typer.infer(b.arg)
    if not (y == b.functor.x and z == g_dom):
        return None
    return [FunctorImage(a.functor, PairMor(f, b.arg))]


def _r6_expand(ctx, t):
    return PairMor(Identity(UNIT), t)


def _r6_contract(ctx, t):
    if isinstance(t, PairMor) and t.left == Identity(UNIT):
        return t.right
    return None


def _hom_spelling(target):
    """The hom-functor a hom-set target is spelled with, or None."""
    if isinstance(target, HomSet):
        return HomFunctor(target.cat, target.x)
    if isinstance(target, FunctorApp) and isinstance(target.functor, HomFunctor):
        return target.functor
    return None


def _respell(target, hom, y):
    # keep the target's spelling, hom(C, x, y) or hom(C, x)[y], so R7 inverts exactly
    if isinstance(target, HomSet):
        return HomSet(hom.cat, hom.x, y)
    return FunctorApp(hom, y)


def _r7_contract(ctx, a, b):
    if not (isinstance(a, Element) and not isinstance(a.name, (str, Compose))
            and isinstance(b, FunctorImage) and isinstance(b.functor, HomFunctor)):
        return None
    if _hom_spelling(a.target) != b.functor:
        return None
    _, z = ctx.typer.infer(b.arg)
    return [Element(Compose(a.name, b.arg), _respell(a.target, b.functor, z))]


def _r7_expand(ctx, t):
    if not (isinstance(t, Element) and isinstance(t.name, Compose)
            and not isinstance(t.name.first, Compose)):
        return None
    hom = _hom_spelling(t.target)
    if hom is None:
        return None
    h, g = t.name.first, t.name.then
    _, y = ctx.typer.infer(h)
    return Compose(Element(h, _respell(t.target, hom, y)), FunctorImage(hom, g))


_ONE_HOM = HomFunctor(SET, UNIT)


def _r8_expand(ctx, t):
    if ctx.typer.category(t) == SET:
        return FunctorImage(_ONE_HOM, t)
    return None


def _r8_contract(ctx, t):
    if isinstance(t, FunctorImage) and t.functor == _ONE_HOM:
        return t.arg
    return None


_NODE, _PAIR, _ROOT = "node", "pair", "root"

_TABLE = {
    ("R1", EXPAND): (_NODE, _r1_expand),
    ("R1", CONTRACT): (_PAIR, _r1_contract),
    ("R2", EXPAND): (_NODE, _r2_expand),
    ("R2", CONTRACT): (_NODE, _r2_contract),
    ("R3", EXPAND): (_PAIR, _r3_expand),
    ("R3", CONTRACT): (_PAIR, _r3_contract),
    ("R4", EXPAND): (_NODE, _r4_expand),
    ("R4", CONTRACT): (_PAIR, _r4_contract),
    ("R5", EXPAND): (_NODE, _r5_expand),
    ("R5", CONTRACT): (_PAIR, _r5_contract),
    ("R6", EXPAND): (_ROOT, _r6_expand),
    ("R6", CONTRACT): (_ROOT, _r6_contract),
    ("R7", EXPAND): (_NODE, _r7_expand),
    ("R7", CONTRACT): (_PAIR, _r7_contract),
    ("R8", EXPAND): (_ROOT, _r8_expand),
    ("R8", CONTRACT): (_ROOT, _r8_contract),
}


class _Ctx:
    def __init__(self, sig: Signature, typer: Typer | None = None):
        self.sig = sig
        self.typer = typer or Typer(sig)


def _rewrite_node(ctx, node, rule, direction, at_root):
    """Replacement for ``node`` under the rule, or None if it does not match."""
    try:
        kind, fn = _TABLE[(rule, direction)]
    except KeyError:
        raise FsdError(f"unknown rule {rule!r} / direction {direction!r}") from None
    if kind == _ROOT:
        return fn(ctx, node) if at_root else None
    if kind == _NODE:
        return fn(ctx, node)
    if not isinstance(node, Compose):
        return None
    a, rest = node.first, node.then
    if isinstance(rest, Compose):
        b, rest = rest.first, rest.then
    else:
        b, rest = rest, None
    new = fn(ctx, a, b)
    if new is None:
        return None
    return seq(new + ([rest] if rest is not None else []))


def _find(ctx, m, rule, direction):
    sites = []
    for path, node in preorder(m):
        if _rewrite_node(ctx, node, rule, direction, not path) is not None:
            sites.append(RewriteSite(path, rule, direction))
    return sites


def _apply(ctx, m, site):
    try:
        node = subterm(m, site.path)
    except (IndexError, AttributeError):
        raise InvalidSiteError(f"no subterm at path {list(site.path)}") from None
    new = _rewrite_node(ctx, node, site.rule, site.direction, not site.path)
    if new is None:
        raise InvalidSiteError(f"{site.rule} {site.direction} does not apply at {list(site.path)}")
    return replace_at(m, site.path, new)


def find_redexes(sig: Signature, m, rule: str, direction: str) -> list[RewriteSite]:
    """All sites where ``rule`` applies in ``direction``, in pre-order."""
    return _find(_Ctx(sig), m, rule, direction)


def apply_rule(sig: Signature, m, site: RewriteSite):
    return _apply(_Ctx(sig), m, site)


def replay(sig: Signature, m, path: list[RewriteSite]):
    ctx = _Ctx(sig)
    for site in path:
        m = _apply(ctx, m, site)
    return m


def _innermost_key(site: RewriteSite):
    # post-order position: children before parents, left before right
    return tuple(site.path) + (float("inf"),)


def normalize(sig: Signature, m, max_steps: int = 100_000):
    """Rewrite to the fixpoint of R1 expand, R2/R6/R8 contract (in that priority)."""
    ctx = _Ctx(sig)
    for _ in range(max_steps):
        for rule, direction in NORMAL_ORDER:
            sites = _find(ctx, m, rule, direction)
            if sites:
                m = _apply(ctx, m, min(sites, key=_innermost_key))
                break
        else:
            return m
    raise FsdError("normalize did not terminate within the step cap")


# -- equivalence search ----------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    equivalent: bool
    path: tuple | None = None
    budget: int = 0

    def __bool__(self):
        return self.equivalent

    def to_json(self) -> dict:
        return {
            "equivalent": self.equivalent,
            "budget": self.budget,
            "path": None if self.path is None else [s.to_json() for s in self.path],
        }


def _flip(direction: str) -> str:
    return CONTRACT if direction == EXPAND else EXPAND


def _neighbours(ctx, m):
    for rule in RULES:
        for direction in DIRECTIONS:
            for site in _find(ctx, m, rule, direction):
                yield site, _apply(ctx, m, site)


def _inverse_step(ctx, after, before, site):
    """A site in ``after`` that rewrites it back to ``before``."""
    for s in _find(ctx, after, site.rule, _flip(site.direction)):
        if _apply(ctx, after, s) == before:
            return s
    for s, t in _neighbours(ctx, after):
        if t == before:
            return s
    return None


def equivalent(sig: Signature, m1, m2, budget: int) -> Verdict:
    """Bidirectional breadth-first search for a rewrite path of length <= budget."""
    ctx = _Ctx(sig)
    if m1 == m2:
        return Verdict(True, (), budget)
    # parent maps: state -> (previous state, site taking previous to state)
    parents = ({m1: None}, {m2: None})
    frontiers = ([m1], [m2])
    depths = [0, 0]
    while depths[0] + depths[1] < budget:
        side = 0 if len(frontiers[0]) <= len(frontiers[1]) else 1
        if not frontiers[side]:
            side = 1 - side
            if not frontiers[side]:
                break
        seen, other = parents[side], parents[1 - side]
        nxt = []
        for state in frontiers[side]:
            for site, t in _neighbours(ctx, state):
                if t in seen:
                    continue
                seen[t] = (state, site)
                nxt.append(t)
                if t in other:
                    path = _join(ctx, parents, t)
                    if path is not None:
                        return Verdict(True, tuple(path), budget)
        frontiers = (nxt, frontiers[1]) if side == 0 else (frontiers[0], nxt)
        depths[side] += 1
    return Verdict(False, None, budget)


def _join(ctx, parents, meet):
    fwd = []
    s = meet
    while parents[0][s] is not None:
        prev, site = parents[0][s]
        fwd.append(site)
        s = prev
    fwd.reverse()
    back = []
    s = meet
    while parents[1][s] is not None:
        prev, site = parents[1][s]
        inv = _inverse_step(ctx, s, prev, site)
        if inv is None:
            return None
        back.append(inv)
        s = prev
    return fwd + back
