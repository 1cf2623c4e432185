"""Concrete ``.fsd`` syntax: a hand-written lexer and recursive-descent parser,
and a canonical pretty-printer that the parser inverts exactly."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .ncd import (
    Broadcast, Const, Ein, InnerBroadcast, Linear, NcdProgram, Par, Pointwise, Simple, parse_einspec,
)
from .terms import (
    SET, SET_NAME, UNIT, Cat, Compose, Element, FsdError, FunctorApp, FunctorImage, HomFunctor,
    HomSet, Identity, IndexNat, Mor, Named, NatComponent, Obj, Pair, PairMor, PartialProduct,
    ProductCat, Signature, show, show_cat, show_functor, show_obj,
)

KEYWORDS = frozenset({
    "category", "object", "morphism", "functor", "nat", "monoidal", "with",
    "expr", "diagram", "ncd", "id", "elem", "hom", "index", SET_NAME,
})
DECL_KEYWORDS = ("category", "object", "morphism", "functor", "nat", "monoidal", "expr", "diagram", "ncd")
MAX_DEPTH = 200


class ParseError(FsdError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.line, self.column = line, column
        self.expected = tuple(sorted(set(expected)))
        self.bare = message
        text = f"{line}:{column}: {message}"
        if self.expected:
            text += " (expected " + ", ".join(self.expected) + ")"
        super().__init__(text)


# -- lexer -----------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, NUMBER, STRING, PUNCT, EOF
    text: str
    line: int
    column: int


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->|=>)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<name>[^\W\d]\w*)
  | (?P<string>"[^"\n]*")
  | (?P<punct>[:;,\[\]()<>@{}|*+=])
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "number":
            toks.append(Token("NUMBER", s, line, col))
        elif kind == "name":
            toks.append(Token("NAME", s, line, col))
        elif kind == "string":
            toks.append(Token("STRING", s[1:-1], line, col))
        elif kind in ("arrow", "punct"):
            toks.append(Token("PUNCT", s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("EOF", "", line, pos - line_start + 1))
    return toks


# -- module structure ------------------------------------------------------


@dataclass(frozen=True)
class CategoryDecl:
    name: str


@dataclass(frozen=True)
class ObjectDecl:
    names: tuple
    cat: object


@dataclass(frozen=True)
class MorphismDecl:
    name: str
    dom: object
    cod: object


@dataclass(frozen=True)
class FunctorDecl:
    name: str
    src: object
    dst: object


@dataclass(frozen=True)
class NatDecl:
    name: str
    src: object
    dst: object


@dataclass(frozen=True)
class MonoidalDecl:
    cat: str
    functor: str


@dataclass(frozen=True)
class ExprDecl:
    name: str
    term: object


@dataclass(frozen=True)
class DiagramDecl:
    name: str
    term: object


@dataclass(frozen=True)
class NcdDecl:
    name: str
    params: tuple  # (name, shape or None)
    stages: tuple
    weights: tuple = ()  # (name, shape) of tensors bound by name

    def weight_shapes(self) -> dict:
        return dict(self.weights)

    def program(self) -> NcdProgram:
        shapes = tuple(s for _, s in self.params)
        return NcdProgram(self.name, tuple(n for n, _ in self.params), self.stages,
                          shapes if all(s is not None for s in shapes) else None)


@dataclass(frozen=True)
class SourceModule:
    decls: tuple
    spans: tuple = field(default=(), compare=False, repr=False)  # (line, column) per declaration

    def signature(self) -> Signature:
        cats, objs, mors, funs, nats, mon = [], {}, {}, {}, {}, {}
        for d in self.decls:
            if isinstance(d, CategoryDecl):
                cats.append(d.name)
            elif isinstance(d, ObjectDecl):
                objs.update({n: d.cat for n in d.names})
            elif isinstance(d, MorphismDecl):
                mors[d.name] = (d.dom, d.cod)
            elif isinstance(d, FunctorDecl):
                funs[d.name] = (d.src, d.dst)
            elif isinstance(d, NatDecl):
                nats[d.name] = (d.src, d.dst)
            elif isinstance(d, MonoidalDecl):
                mon[d.cat] = d.functor
        return Signature(tuple(cats), objs, mors, funs, nats, mon)

    def _named(self, kind) -> dict:
        return {d.name: d for d in self.decls if isinstance(d, kind)}

    @property
    def expressions(self) -> dict:
        return {n: d.term for n, d in self._named(ExprDecl).items()}

    @property
    def diagrams(self) -> dict:
        return {n: d.term for n, d in self._named(DiagramDecl).items()}

    @property
    def programs(self) -> dict:
        return {n: d.program() for n, d in self._named(NcdDecl).items()}

    def term(self, name: str):
        """An expression or diagram term by name."""
        for d in self.decls:
            if isinstance(d, (ExprDecl, DiagramDecl)) and d.name == name:
                return d.term
        raise KeyError(name)

    def duplicates(self) -> list[str]:
        seen, out = {}, []
        for d in self.decls:
            if isinstance(d, ObjectDecl):
                keys = [("object", n) for n in d.names]
            elif isinstance(d, MonoidalDecl):
                keys = [("monoidal", d.cat)]
            else:
                kind = type(d).__name__.removesuffix("Decl").lower()
                keys = [(kind, d.name)]
            for k in keys:
                if k in seen:
                    out.append(f"duplicate {k[0]} {k[1]}")
                seen[k] = True
        return out


# -- parser ----------------------------------------------------------------


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.depth = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, expected, tok=None, message=None):
        tok = tok or self.tok
        shown = "end of input" if tok.kind == "EOF" else repr(tok.text)
        raise ParseError(message or f"unexpected {shown}", tok.line, tok.column, expected)

    def at(self, text) -> bool:
        t = self.tok
        return t.kind in ("PUNCT", "NAME") and t.text == text

    def expect(self, text) -> Token:
        if not self.at(text):
            self.error([repr(text)])
        t = self.tok
        self.i += 1
        return t

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def name(self, what="name") -> str:
        t = self.tok
        if t.kind != "NAME" or t.text in KEYWORDS:
            self.error([what])
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "NUMBER" or not re.fullmatch(r"\d+", t.text):
            self.error(["integer"])
        self.i += 1
        return int(t.text)

    def nested(self):
        if self.depth >= MAX_DEPTH:
            self.error([], message="nesting too deep")
        self.depth += 1

    # module
    def module(self) -> SourceModule:
        decls, spans = [], []
        while self.tok.kind != "EOF":
            t = self.tok
            spans.append((t.line, t.column))
            decls.append(self.decl())
        return SourceModule(tuple(decls), tuple(spans))

    def decl(self):
        t = self.tok
        if t.kind != "NAME" or t.text not in DECL_KEYWORDS:
            self.error(list(DECL_KEYWORDS))
        self.i += 1
        kw = t.text
        if kw == "category":
            return CategoryDecl(self.name("category name"))
        if kw == "object":
            names = [self.name("object name")]
            while self.accept(","):
                names.append(self.name("object name"))
            self.expect(":")
            return ObjectDecl(tuple(names), self.cat())
        if kw == "morphism":
            n = self.name("morphism name")
            self.expect(":")
            dom = self.obj()
            self.expect("->")
            return MorphismDecl(n, dom, self.obj())
        if kw == "functor":
            n = self.name("functor name")
            self.expect(":")
            src = self.cat()
            self.expect("->")
            return FunctorDecl(n, src, self.cat())
        if kw == "nat":
            n = self.name("nat name")
            self.expect(":")
            src = self.fref()
            self.expect("=>")
            return NatDecl(n, src, self.fref())
        if kw == "monoidal":
            c = self.name("category name")
            self.expect("with")
            return MonoidalDecl(c, self.name("functor name"))
        if kw in ("expr", "diagram"):
            n = self.name(f"{kw} name")
            self.expect("=")
            m = self.mor()
            return ExprDecl(n, m) if kw == "expr" else DiagramDecl(n, m)
        return self.ncd()

    # categories
    def cat(self):
        c = self.cat_atom()
        while self.accept("*"):
            c = ProductCat(c, self.cat_atom())
        return c

    def cat_atom(self):
        self.nested()
        try:
            if self.accept("("):
                c = self.cat()
                self.expect(")")
                return c
            if self.at(SET_NAME):
                self.i += 1
                return SET
            return Cat(self.name("category"))
        finally:
            self.depth -= 1

    # functor references
    def fref(self):
        if self.at("hom"):
            self.i += 1
            self.expect("(")
            c = self.cat()
            self.expect(",")
            x = self.obj()
            self.expect(")")
            return HomFunctor(c, x)
        if self.at("("):
            return self.partial()
        return Named(self.name("functor"))

    def partial(self):
        self.expect("(")
        x = self.obj()
        self.expect("*")
        if not (self.tok.kind == "NAME" and self.tok.text == "_"):
            self.error(["'_'"])
        self.i += 1
        self.expect(")")
        return PartialProduct(x)

    # objects
    def obj(self):
        self.nested()
        try:
            return self._obj()
        finally:
            self.depth -= 1

    def _obj(self):
        t = self.tok
        if t.kind == "NUMBER":
            if t.text != "1":
                self.error(["object"])
            self.i += 1
            return UNIT
        if self.accept("<"):
            a = self.obj()
            self.expect(",")
            b = self.obj()
            self.expect(">")
            return Pair(a, b)
        if self.at("hom"):
            self.i += 1
            self.expect("(")
            c = self.cat()
            self.expect(",")
            x = self.obj()
            if self.accept(","):
                y = self.obj()
                self.expect(")")
                return HomSet(c, x, y)
            self.expect(")")
            self.expect("[")
            y = self.obj()
            self.expect("]")
            return FunctorApp(HomFunctor(c, x), y)
        if self.at("("):
            f = self.partial()
            self.expect("[")
            y = self.obj()
            self.expect("]")
            return FunctorApp(f, y)
        if t.kind != "NAME" or t.text in KEYWORDS:
            self.error(["object"])
        n = self.name()
        if self.accept("["):
            y = self.obj()
            self.expect("]")
            return FunctorApp(Named(n), y)
        return Obj(n)

    # morphisms
    def mor(self):
        self.nested()
        try:
            factors = [self.factor()]
            while self.accept(";"):
                factors.append(self.factor())
        finally:
            self.depth -= 1
        out = factors[-1]
        for f in reversed(factors[:-1]):
            out = Compose(f, out)
        return out

    def factor(self):
        t = self.tok
        if self.at("id"):
            self.i += 1
            self.expect("(")
            o = self.obj()
            self.expect(")")
            return Identity(o)
        if self.accept("<"):
            a = self.mor()
            self.expect(",")
            b = self.mor()
            self.expect(">")
            return PairMor(a, b)
        if self.at("elem"):
            self.i += 1
            if self.accept("{"):
                name = self.mor()
                self.expect("}")
            else:
                name = self.name("element name")
            self.expect(":")
            return Element(name, self.obj())
        if self.at("index"):
            self.i += 1
            self.expect("(")
            e_tok = self.tok
            e = self.mor()
            if not isinstance(e, Element):
                self.error([], e_tok, "index needs an element")
            self.expect(",")
            o = self.obj()
            self.expect(")")
            return IndexNat(e, o)
        if self.at("hom"):
            f = self.fref()
            return self.image(f)
        if self.at("("):
            save = self.i
            try:
                f = self.partial()
            except ParseError:
                self.i = save
            else:
                return self.image(f)
            self.expect("(")
            m = self.mor()
            self.expect(")")
            return m
        if t.kind != "NAME" or t.text in KEYWORDS:
            self.error(["morphism"])
        n = self.name()
        if self.at("["):
            return self.image(Named(n))
        if self.accept("@"):
            return NatComponent(n, self.obj())
        return Mor(n)

    def image(self, f):
        self.expect("[")
        m = self.mor()
        self.expect("]")
        return FunctorImage(f, m)

    # tensor programs
    def ncd(self):
        n = self.name("program name")
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.param())
            while self.accept(","):
                params.append(self.param())
        self.expect(")")
        weights = []
        if self.accept("with"):
            weights.append(self.weight())
            while self.accept(","):
                weights.append(self.weight())
        self.expect("=")
        return NcdDecl(n, tuple(params), self.stages(), tuple(weights))

    def param(self):
        n = self.name("parameter")
        if not self.accept(":"):
            return n, None
        return n, self.shape()

    def weight(self):
        n = self.name("tensor name")
        self.expect(":")
        return n, self.shape()

    def shape(self) -> tuple:
        self.expect("[")
        dims = []
        if not self.at("]"):
            dims.append(self.integer())
            while self.accept(","):
                dims.append(self.integer())
        self.expect("]")
        if any(d < 1 for d in dims):
            self.error([], message="extents must be positive")
        return tuple(dims)

    def stages(self) -> tuple:
        self.nested()
        try:
            out = [self.stage()]
            while self.accept(";"):
                out.append(self.stage())
            return tuple(out)
        finally:
            self.depth -= 1

    STAGES = ("ein", "softmax", "exp", "add", "mul", "max", "divide", "scale", "linear",
              "broadcast", "inner", "par", "const", "copy", "outer", "index", "squeeze", "unsqueeze")

    def stage(self):
        t = self.tok
        if t.kind != "NAME" or t.text not in self.STAGES:
            self.error([f"'{s}'" for s in self.STAGES])
        self.i += 1
        kw = t.text
        if kw == "ein":
            s = self.tok
            if s.kind != "STRING":
                self.error(["einspec string"])
            self.i += 1
            try:
                return Ein(parse_einspec(s.text))
            except FsdError as e:
                self.error([], s, str(e))
        if kw in ("softmax", "exp", "add", "mul", "max", "divide"):
            return Pointwise(kw)
        if kw == "scale":
            s = self.tok
            if s.kind != "NUMBER":
                self.error(["number"])
            self.i += 1
            c = float(s.text)
            if not math.isfinite(c):
                self.error([], s, "scale constant must be finite")
            return Pointwise("scale", c)
        if kw == "linear":
            w = self.name("weight name")
            b = self.name("bias name") if self.accept("+") else None
            return Linear(w, b)
        if kw == "broadcast":
            k = self.integer()
            return Broadcast(self.block(), k)
        if kw == "inner":
            segs = [self.integer()]
            while self.tok.kind == "NUMBER":
                segs.append(self.integer())
            return InnerBroadcast(self.block(), tuple(segs))
        if kw == "par":
            self.expect("{")
            branches = [self.stages()]
            while self.accept("|"):
                branches.append(self.stages())
            self.expect("}")
            return Par(tuple(branches))
        if kw == "const":
            return Const(self.name("tensor name"))
        if kw == "index":
            return Simple("index", self.integer())
        return Simple(kw)

    def block(self) -> tuple:
        self.expect("{")
        body = self.stages()
        self.expect("}")
        return body


def parse(text) -> SourceModule:
    """Parse ``.fsd`` source (str or UTF-8 bytes)."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            before = bytes(text[:e.start])
            line = before.count(b"\n") + 1
            col = e.start - (before.rfind(b"\n") + 1) + 1
            raise ParseError("invalid UTF-8", line, col) from None
    try:
        return Parser(tokenize(text)).module()
    except RecursionError:
        raise ParseError("nesting too deep", 1, 1) from None


def parse_term(text: str):
    """Parse a single morphism term."""
    p = Parser(tokenize(text))
    m = p.mor()
    if p.tok.kind != "EOF":
        p.error(["end of input"])
    return m


def parse_file(path) -> SourceModule:
    with open(path, "rb") as fh:
        return parse(fh.read())


# -- pretty-printer --------------------------------------------------------


def _stage_text(s) -> str:
    if isinstance(s, Broadcast):
        return f"broadcast {s.over} {{{_stages_text(s.body)}}}"
    if isinstance(s, InnerBroadcast):
        return f"inner {' '.join(map(str, s.segments))} {{{_stages_text(s.body)}}}"
    if isinstance(s, Par):
        return "par {" + " | ".join(_stages_text(b) for b in s.branches) + "}"
    return s.label()


def _shape_text(s) -> str:
    return "[" + ", ".join(map(str, s)) + "]"


def _stages_text(stages) -> str:
    return " ; ".join(_stage_text(s) for s in stages)


def pretty_decl(d) -> str:
    if isinstance(d, CategoryDecl):
        return f"category {d.name}"
    if isinstance(d, ObjectDecl):
        return f"object {', '.join(d.names)} : {show_cat(d.cat)}"
    if isinstance(d, MorphismDecl):
        return f"morphism {d.name} : {show_obj(d.dom)} -> {show_obj(d.cod)}"
    if isinstance(d, FunctorDecl):
        return f"functor {d.name} : {show_cat(d.src)} -> {show_cat(d.dst)}"
    if isinstance(d, NatDecl):
        return f"nat {d.name} : {show_functor(d.src)} => {show_functor(d.dst)}"
    if isinstance(d, MonoidalDecl):
        return f"monoidal {d.cat} with {d.functor}"
    if isinstance(d, ExprDecl):
        return f"expr {d.name} = {show(d.term)}"
    if isinstance(d, DiagramDecl):
        return f"diagram {d.name} = {show(d.term)}"
    if isinstance(d, NcdDecl):
        ps = ", ".join(n if s is None else f"{n} : {_shape_text(s)}" for n, s in d.params)
        ws = ""
        if d.weights:
            ws = " with " + ", ".join(f"{n} : {_shape_text(s)}" for n, s in d.weights)
        return f"ncd {d.name}({ps}){ws} = {_stages_text(d.stages)}"
    raise TypeError(d)


def pretty(m: SourceModule) -> str:
    return "".join(pretty_decl(d) + "\n" for d in m.decls)
