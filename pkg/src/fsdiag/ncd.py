"""Tensor semantics for the Set/R fragment: shapes, einops, broadcasting,
indexes, squeeze/unsqueeze, and attention pipelines.

A program is a left-to-right pipeline acting on a tuple of tensors. Each
stage consumes its arity from the front of the tuple and puts its outputs
back at the front, so stage ``k`` occupies morphism column ``2k + 1`` of the
program's diagram.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .diagram import Diagram, MorphismColumn, ObjectColumn
from .terms import (
    SET, FsdError, FunctorApp, HomFunctor, HomSet, Mor, Obj, Pair, Signature, Unit, canon,
)

REAL_NAMES = ("R", "ℝ")


class ShapeError(FsdError):
    def __init__(self, message: str, column: int | None = None):
        super().__init__(message if column is None else f"column {column}: {message}")
        self.column = column


# -- tensors ---------------------------------------------------------------


def tensor(data, shape=None) -> np.ndarray:
    t = np.asarray(data, dtype=np.float64)
    if shape is not None:
        t = t.reshape(shape)
    return t


def tensor_to_json(t) -> dict:
    t = np.asarray(t, dtype=np.float64)
    return {"shape": list(t.shape), "data": [float(v) for v in t.reshape(-1)]}


def tensor_from_json(d: dict) -> np.ndarray:
    shape = [int(s) for s in d["shape"]]
    if any(s < 1 for s in shape):
        raise ShapeError(f"extents must be positive, got {shape}")
    data = d["data"]
    if len(data) != math.prod(shape):
        raise ShapeError(f"data length {len(data)} does not match shape {shape}")
    return np.asarray(data, dtype=np.float64).reshape(shape)


def is_tensor_json(d) -> bool:
    return isinstance(d, dict) and set(d) == {"shape", "data"}


# -- shapes of objects -----------------------------------------------------


def shape_of(sig: Signature, o, extents: dict):
    """Shape of an object in the fragment: nested ``Set(a, -)`` wires over R.

    ``extents`` maps each axis object name to its extent. Pairs give tuples.
    """
    o = canon(sig, o)
    if isinstance(o, Pair):
        return (shape_of(sig, o.left, extents), shape_of(sig, o.right, extents))
    if isinstance(o, Obj) and o.name in REAL_NAMES:
        return ()
    if isinstance(o, FunctorApp) and isinstance(o.functor, HomFunctor) and o.functor.cat == SET:
        a = o.functor.x
        if isinstance(a, Unit):
            n = 1
        elif isinstance(a, Obj) and a.name in extents:
            n = int(extents[a.name])
        else:
            raise ShapeError(f"no extent for axis object {a}")
        if n < 1:
            raise ShapeError(f"extent of {a} must be positive")
        return (n,) + shape_of(sig, o.arg, extents)
    raise ShapeError(f"object {o} is outside the tensor fragment")


# -- einops ----------------------------------------------------------------

_NAME = re.compile(r"[a-zA-Z][a-zA-Z0-9]*")


@dataclass(frozen=True)
class EinSpec:
    inputs: tuple  # tuple of tuples of axis names
    output: tuple  # tuple of groups; a group is a tuple of names merged into one axis

    @property
    def output_names(self) -> tuple:
        return tuple(n for g in self.output for n in g)

    def __str__(self):
        ins = ", ".join(" ".join(i) for i in self.inputs)
        outs = " ".join(g[0] if len(g) == 1 else "(" + " ".join(g) + ")" for g in self.output)
        return f"{ins} -> {outs}".rstrip()


def _names(text: str, where: str) -> tuple:
    toks = text.split()
    for t in toks:
        if not _NAME.fullmatch(t):
            raise FsdError(f"bad axis name {t!r} in {where}")
    return tuple(toks)


def parse_einspec(text: str) -> EinSpec:
    """Parse ``"i j, j k -> i k"``; output axes may be merged with ``(h v)``."""
    if text.count("->") != 1:
        raise FsdError(f"einspec needs exactly one '->': {text!r}")
    lhs, rhs = text.split("->")
    inputs = tuple(_names(part, "inputs") for part in lhs.split(","))
    groups = []
    for m in re.finditer(r"\(([^()]*)\)|([^\s()]+)|(\S)", rhs):
        if m.group(3):
            raise FsdError(f"unbalanced parenthesis in output of {text!r}")
        if m.group(1) is not None:
            g = _names(m.group(1), "output group")
            if not g:
                raise FsdError(f"empty output group in {text!r}")
            groups.append(g)
        else:
            groups.append(_names(m.group(2), "output"))
    spec = EinSpec(inputs, tuple(groups))
    outs = spec.output_names
    if len(set(outs)) != len(outs):
        raise FsdError(f"output axis repeated in {text!r}")
    bound = {n for i in inputs for n in i}
    for n in outs:
        if n not in bound:
            raise FsdError(f"output axis {n} is unbound in {text!r}")
    return spec


def _as_spec(spec) -> EinSpec:
    return parse_einspec(spec) if isinstance(spec, str) else spec


def einop(spec, *inputs) -> np.ndarray:
    """Rearrange and contract named axes.

    ``out[o] = sum over contracted c of prod_k inputs[k][names_k(o, c)]``; the
    sum runs over contracted indices in row-major order, left to right.
    """
    spec = _as_spec(spec)
    if len(inputs) != len(spec.inputs):
        raise ShapeError(f"einop {spec} takes {len(spec.inputs)} inputs, got {len(inputs)}")
    arrays = [np.asarray(x, dtype=np.float64) for x in inputs]
    extent: dict = {}
    for k, (names, a) in enumerate(zip(spec.inputs, arrays)):
        if a.ndim != len(names):
            raise ShapeError(f"einop {spec}: input {k} has shape {list(a.shape)}, "
                             f"expected {len(names)} axes")
        for n, e in zip(names, a.shape):
            if extent.setdefault(n, e) != e:
                raise ShapeError(f"einop {spec}: axis {n} has extents {extent[n]} and {e}")
    outs = spec.output_names
    for n in outs:
        if n not in extent:
            raise ShapeError(f"einop {spec}: output axis {n} unbound")
    contracted = []
    for names in spec.inputs:
        for n in names:
            if n not in outs and n not in contracted:
                contracted.append(n)
    order = list(outs) + contracted
    full = tuple(extent[n] for n in order)
    # open grid of index arrays, one per named axis
    grid = {}
    for pos, n in enumerate(order):
        shape = [1] * len(order)
        shape[pos] = extent[n]
        grid[n] = np.arange(extent[n]).reshape(shape)
    prod = np.ones(full, dtype=np.float64)
    for names, a in zip(spec.inputs, arrays):
        gathered = a[tuple(grid[n] for n in names)] if names else a
        prod = prod * gathered
    n_out = math.prod(extent[n] for n in outs)
    n_con = math.prod(extent[n] for n in contracted)
    flat = prod.reshape(n_out, n_con)
    acc = np.zeros(n_out, dtype=np.float64)
    for c in range(n_con):
        acc = acc + flat[:, c]
    return acc.reshape(tuple(math.prod(extent[n] for n in g) for g in spec.output))


# -- primitive tensor operations -------------------------------------------


def outer_product(a, b) -> np.ndarray:
    return np.multiply.outer(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def index_project(t, i: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        raise ShapeError("cannot index a scalar")
    if not 0 <= i < t.shape[0]:
        raise ShapeError(f"index {i} out of range for leading extent {t.shape[0]}")
    return t[i].copy()


def squeeze(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0 or t.shape[0] != 1:
        raise ShapeError(f"squeeze needs a leading extent-1 axis, got shape {list(t.shape)}")
    return t[0].copy()


def unsqueeze(t) -> np.ndarray:
    return np.asarray(t, dtype=np.float64)[np.newaxis].copy()


def softmax_last(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        return np.ones_like(t)
    e = np.exp(t - t.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _binary(op, a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape and a.ndim and b.ndim:
        raise ShapeError(f"{op} needs equal shapes or a scalar, got {list(a.shape)} and {list(b.shape)}")
    return {"add": np.add, "mul": np.multiply, "max": np.maximum, "divide": np.divide}[op](a, b)


def broadcast(f: Callable, over: int = 1) -> Callable:
    """Lift ``f`` (tuple of tensors -> tuple of tensors) over ``over`` leading axes
    shared by every input; outputs are restacked along the same axes."""

    def lifted(*args):
        args = [np.asarray(a, dtype=np.float64) for a in args]
        return _lift(f, args, range(len(args)), over)

    return lifted


def inner_broadcast(f: Callable, segments: Sequence[int]) -> Callable:
    """Lift ``f`` over the leading axis of the tuple components in ``segments``;
    every other component is passed unchanged to each slice."""

    def lifted(*args):
        args = [np.asarray(a, dtype=np.float64) for a in args]
        for s in segments:
            if not 0 <= s < len(args):
                raise ShapeError(f"segment {s} out of range for a {len(args)}-tuple")
        return _lift(f, args, segments, 1)

    return lifted


def _lift(f, args, segments, over):
    segments = list(segments)
    if not segments:
        raise ShapeError("broadcast needs at least one segment")
    lead = None
    for s in segments:
        a = args[s]
        if a.ndim < over:
            raise ShapeError(f"broadcast over {over} axes needs rank >= {over}, got shape {list(a.shape)}")
        if lead is None:
            lead = a.shape[:over]
        elif a.shape[:over] != lead:
            raise ShapeError(f"broadcast axes disagree: {list(lead)} and {list(a.shape[:over])}")
    results = None
    for idx in np.ndindex(*lead):
        sliced = [a[idx] if k in segments else a for k, a in enumerate(args)]
        out = f(*sliced)
        if results is None:
            results = [[] for _ in out]
        for acc, o in zip(results, out):
            acc.append(np.asarray(o, dtype=np.float64))
    return tuple(np.stack(r).reshape(lead + r[0].shape) for r in results)


# -- pipeline stages -------------------------------------------------------


@dataclass(frozen=True)
class Ein:
    spec: EinSpec

    arity = property(lambda self: len(self.spec.inputs))
    outs = 1

    def run(self, args, params):
        return (einop(self.spec, *args),)

    def label(self):
        return f'ein "{self.spec}"'


_UNARY = ("exp", "softmax", "scale")
_BINARY = ("add", "mul", "max", "divide")


@dataclass(frozen=True)
class Pointwise:
    op: str
    c: float | None = None

    def __post_init__(self):
        if self.op not in _UNARY + _BINARY:
            raise FsdError(f"unknown pointwise op {self.op!r}")
        if (self.op == "scale") != (self.c is not None):
            raise FsdError("scale takes exactly one constant")

    @property
    def arity(self):
        return 1 if self.op in _UNARY else 2

    outs = 1

    def run(self, args, params):
        if self.op == "exp":
            return (np.exp(args[0]),)
        if self.op == "softmax":
            return (softmax_last(args[0]),)
        if self.op == "scale":
            return (np.asarray(args[0], dtype=np.float64) * self.c,)
        return (_binary(self.op, *args),)

    def label(self):
        return f"scale {_num(self.c)}" if self.op == "scale" else self.op


def _num(c: float) -> str:
    return repr(float(c))


def _pipeline_arity(stages) -> tuple[int, int]:
    need = avail = 0
    for s in stages:
        if avail < s.arity:
            need += s.arity - avail
            avail = s.arity
        avail += s.outs - s.arity
    return need, avail


@dataclass(frozen=True)
class Broadcast:
    body: tuple
    over: int = 1

    arity = property(lambda self: _pipeline_arity(self.body)[0])
    outs = property(lambda self: _pipeline_arity(self.body)[1])

    def run(self, args, params):
        return broadcast(lambda *xs: run_stages(self.body, xs, params), self.over)(*args)

    def label(self):
        return f"broadcast {self.over} {{{_body_label(self.body)}}}"


@dataclass(frozen=True)
class InnerBroadcast:
    body: tuple
    segments: tuple

    arity = property(lambda self: _pipeline_arity(self.body)[0])
    outs = property(lambda self: _pipeline_arity(self.body)[1])

    def run(self, args, params):
        return inner_broadcast(lambda *xs: run_stages(self.body, xs, params), self.segments)(*args)

    def label(self):
        return f"inner {' '.join(map(str, self.segments))} {{{_body_label(self.body)}}}"


@dataclass(frozen=True)
class Par:
    branches: tuple  # tuple of stage tuples

    arity = property(lambda self: sum(_pipeline_arity(b)[0] for b in self.branches))
    outs = property(lambda self: sum(_pipeline_arity(b)[1] for b in self.branches))

    def run(self, args, params):
        out, pos = [], 0
        for b in self.branches:
            k = _pipeline_arity(b)[0]
            out.extend(run_stages(b, args[pos:pos + k], params))
            pos += k
        return tuple(out)

    def label(self):
        return "par {" + " | ".join(_body_label(b) for b in self.branches) + "}"


def _body_label(stages) -> str:
    return " ; ".join(s.label() for s in stages)


def _param(params, ref):
    if isinstance(ref, str):
        try:
            return np.asarray(params[ref], dtype=np.float64)
        except KeyError:
            raise ShapeError(f"no tensor bound to {ref}") from None
    return np.asarray(ref, dtype=np.float64)


@dataclass(frozen=True)
class Linear:
    """``x[..., i] -> sum_i x[..., i] W[i, j] (+ b[j])`` over the last axis."""

    weight: object
    bias: object = None

    arity = 1
    outs = 1

    def run(self, args, params):
        x = np.asarray(args[0], dtype=np.float64)
        w = _param(params, self.weight)
        if w.ndim != 2 or x.ndim < 1 or x.shape[-1] != w.shape[0]:
            raise ShapeError(f"linear: input shape {list(x.shape)} does not fit weight {list(w.shape)}")
        lead = x.shape[:-1]
        y = einop(parse_einspec("n i, i j -> n j"), x.reshape(-1, w.shape[0]), w)
        if self.bias is not None:
            b = _param(params, self.bias)
            if b.shape != (w.shape[1],):
                raise ShapeError(f"linear: bias shape {list(b.shape)}, expected [{w.shape[1]}]")
            y = y + b
        return (y.reshape(lead + (w.shape[1],)),)

    def label(self):
        name = lambda r: r if isinstance(r, str) else "<tensor>"
        return f"linear {name(self.weight)}" + ("" if self.bias is None else f" + {name(self.bias)}")


@dataclass(frozen=True)
class Const:
    name: str

    arity = 0
    outs = 1

    def run(self, args, params):
        return (_param(params, self.name),)

    def label(self):
        return f"const {self.name}"


@dataclass(frozen=True)
class Simple:
    """Copy, OuterProduct, IndexProject, Squeeze and Unsqueeze."""

    op: str
    index: int | None = None

    _TABLE = {"copy": (1, 2), "outer": (2, 1), "index": (1, 1), "squeeze": (1, 1), "unsqueeze": (1, 1)}

    def __post_init__(self):
        if self.op not in self._TABLE:
            raise FsdError(f"unknown stage {self.op!r}")
        if (self.op == "index") != (self.index is not None):
            raise FsdError("index takes exactly one position")

    arity = property(lambda self: self._TABLE[self.op][0])
    outs = property(lambda self: self._TABLE[self.op][1])

    def run(self, args, params):
        if self.op == "copy":
            return (args[0], args[0])
        if self.op == "outer":
            return (outer_product(*args),)
        if self.op == "index":
            return (index_project(args[0], self.index),)
        if self.op == "squeeze":
            return (squeeze(args[0]),)
        return (unsqueeze(args[0]),)

    def label(self):
        return f"index {self.index}" if self.op == "index" else self.op


Copy = lambda: Simple("copy")  # noqa: E731
OuterProduct = lambda: Simple("outer")  # noqa: E731
IndexProject = lambda i: Simple("index", i)  # noqa: E731
Squeeze = lambda: Simple("squeeze")  # noqa: E731
Unsqueeze = lambda: Simple("unsqueeze")  # noqa: E731

Stage = Union[Ein, Pointwise, Broadcast, InnerBroadcast, Par, Linear, Const, Simple]


def run_stages(stages, args, params, column_base: int | None = None) -> tuple:
    state = tuple(np.asarray(a, dtype=np.float64) for a in args)
    for k, s in enumerate(stages):
        if len(state) < s.arity:
            raise ShapeError(f"{s.label()} needs {s.arity} inputs, {len(state)} available",
                             None if column_base is None else column_base + 2 * k + 1)
        try:
            out = s.run(state[:s.arity], params)
        except ShapeError as e:
            if column_base is None:
                raise
            raise ShapeError(str(e), column_base + 2 * k + 1) from None
        state = tuple(out) + state[s.arity:]
    return state


@dataclass(frozen=True)
class NcdProgram:
    name: str
    params: tuple  # positional input names
    stages: tuple
    input_shapes: tuple | None = field(default=None, compare=False)


def eval_ncd(program: NcdProgram, inputs, params: dict | None = None) -> tuple:
    """Run ``program`` on ``inputs``; shape errors name the offending column."""
    inputs = tuple(np.asarray(x, dtype=np.float64) for x in inputs)
    if len(inputs) != len(program.params):
        raise ShapeError(f"{program.name} takes {len(program.params)} inputs, got {len(inputs)}", 0)
    if program.input_shapes is not None:
        for k, (x, want) in enumerate(zip(inputs, program.input_shapes)):
            if tuple(x.shape) != tuple(want):
                raise ShapeError(f"input {k}: expected shape {list(want)}, got {list(x.shape)}", 0)
    return run_stages(program.stages, inputs, params or {}, column_base=0)


def infer_shapes(program: NcdProgram, input_shapes, params: dict | None = None) -> list:
    """Shapes of the tuple at every object column, by abstract execution on ones."""
    params = params or {}
    state = tuple(np.ones(s) for s in input_shapes)
    shapes = [tuple(x.shape for x in state)]
    for k, s in enumerate(program.stages):
        state = run_stages((s,), state, params, column_base=2 * k)
        shapes.append(tuple(x.shape for x in state))
    return shapes


# -- attention -------------------------------------------------------------


def sdpa_stages(dk: int) -> tuple:
    return (
        Ein(parse_einspec("q d, k d -> q k")),
        Pointwise("scale", 1.0 / math.sqrt(dk)),
        Broadcast((Pointwise("softmax"),), 1),
        Ein(parse_einspec("q k, k v -> q v")),
    )


def build_sdpa(dk: int, dv: int, s_q: int, s_k: int) -> NcdProgram:
    """Scaled dot-product attention on ``(Q[s_q, dk], K[s_k, dk], V[s_k, dv])``."""
    for n in (dk, dv, s_q, s_k):
        if n < 1:
            raise ShapeError("extents must be positive")
    return NcdProgram("sdpa", ("Q", "K", "V"), sdpa_stages(dk), ((s_q, dk), (s_k, dk), (s_k, dv)))


def build_mha(h: int, dm: int, dk: int, dv: int, s: int, weights: dict | None = None) -> NcdProgram:
    """Multi-head attention on ``X[s, dm]``; weights ``Wq, Wk: [h, dm, dk]``,
    ``Wv: [h, dm, dv]`` and ``Wo: [h * dv, dm]`` are bound by name at evaluation."""
    want = {"Wq": (h, dm, dk), "Wk": (h, dm, dk), "Wv": (h, dm, dv), "Wo": (h * dv, dm)}
    for name, shape in want.items():
        if weights is not None and name in weights and tuple(np.shape(weights[name])) != shape:
            raise ShapeError(f"{name} has shape {list(np.shape(weights[name]))}, expected {list(shape)}")

    def project(w):
        return (Const(w), Ein(parse_einspec("h m d, s m -> h s d")))

    stages = (
        Simple("copy"),
        Simple("copy"),
        Par((project("Wq"), project("Wk"), project("Wv"))),
        InnerBroadcast(sdpa_stages(dk), (0, 1, 2)),
        Ein(parse_einspec("h s v -> s (h v)")),
        Linear("Wo"),
    )
    return NcdProgram("mha", ("X",), stages, ((s, dm),))


# -- diagrams of programs --------------------------------------------------


def _axis_object(shape):
    o = Obj("R")
    for n in reversed(shape):
        o = HomSet(SET, Obj(str(n)), o)
    return o


def _tuple_object(shapes):
    objs = [_axis_object(s) for s in shapes]
    if not objs:
        return Unit()
    out = objs[-1]
    for o in reversed(objs[:-1]):
        out = Pair(o, out)
    return out


def program_diagram(program: NcdProgram, input_shapes=None, params: dict | None = None):
    """A signature and a well-formed diagram drawing ``program`` stage by stage."""
    shapes = infer_shapes(program, input_shapes or program.input_shapes, params)
    axis_names = sorted({str(n) for st in shapes for s in st for n in s}, key=lambda x: int(x))
    objects = {"R": SET}
    objects.update({n: SET for n in axis_names})
    cols = [ObjectColumn(_tuple_object(shapes[0]))]
    morphisms = {}
    for k, stage in enumerate(program.stages):
        dom, cod = _tuple_object(shapes[k]), _tuple_object(shapes[k + 1])
        label = stage.label()
        name = label if label not in morphisms else f"{label} #{k}"
        morphisms[name] = (dom, cod)
        cols.append(MorphismColumn(Mor(name)))
        cols.append(ObjectColumn(cod))
    sig = Signature(categories=(), base_objects=objects, base_morphisms=morphisms)
    return sig, Diagram(tuple(cols))
