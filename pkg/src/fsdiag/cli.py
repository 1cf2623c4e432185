"""``fsd``: check, rewrite, compare, verify, evaluate and render ``.fsd`` files.

Exit status: 0 success, 1 check or verification failure, 2 usage error,
3 I/O error. ``--json`` prints one machine-readable JSON object on stdout.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import diagram as dg
from . import finset, ncd, render as rd, rewrite as rw
from .dsl import ParseError, SourceModule, parse
from .terms import FsdError, TypeCheckError, infer_type, mor_to_json, show, validate_signature

OK, FAILED, USAGE, IO_ERROR = 0, 1, 2, 3


class UsageError(Exception):
    pass


class CliIOError(Exception):
    pass


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as e:
        raise CliIOError(f"cannot read {path}: {e.strerror or e}") from None


def _read_json(path):
    try:
        return json.loads(_read_bytes(path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CliIOError(f"{path}: invalid JSON ({e})") from None


def _write(path, data: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as e:
        raise CliIOError(f"cannot write {path}: {e.strerror or e}") from None


class Result:
    """Collects human-readable lines and a JSON payload for one command."""

    def __init__(self, as_json: bool):
        self.as_json = as_json
        self.lines: list[str] = []
        self.payload: dict = {}
        self.status = OK

    def say(self, line: str):
        self.lines.append(line)

    def fail(self, line: str | None = None):
        self.status = FAILED
        if line:
            self.lines.append(line)

    def emit(self, out):
        if self.as_json:
            self.payload.setdefault("ok", self.status == OK)
            out.write(json.dumps(self.payload, sort_keys=True) + "\n")
        else:
            for line in self.lines:
                out.write(line + "\n")


def _load_module(path) -> SourceModule:
    return parse(_read_bytes(path))


def _lookup_term(mod: SourceModule, name: str):
    try:
        return mod.term(name)
    except KeyError:
        raise UsageError(f"no expression or diagram named {name!r}") from None


def _parse_site_path(text: str) -> tuple:
    text = text.strip()
    if text in ("", "[]", "root"):
        return ()
    try:
        if text.startswith("["):
            items = json.loads(text)
        else:
            items = [int(p) for p in text.replace(",", ".").split(".")]
        if not all(isinstance(i, int) and i >= 0 for i in items):
            raise ValueError
        return tuple(items)
    except (ValueError, json.JSONDecodeError):
        raise UsageError(f"bad site path {text!r}; use e.g. '[0, 1]' or '0.1'") from None


def _site_text(s: rw.RewriteSite) -> str:
    return f"{s.rule} {s.direction} @ {list(s.path)}"


# -- subcommands -----------------------------------------------------------


def module_problems(mod: SourceModule) -> list[str]:
    """Duplicate names, signature violations, ill-typed terms, malformed
    diagrams and shape errors in annotated tensor programs."""
    sig = mod.signature()
    problems = list(mod.duplicates())
    problems += [f"signature: {p}" for p in validate_signature(sig)]
    if problems:
        return problems
    for name, m in mod.expressions.items():
        try:
            infer_type(sig, m)
        except TypeCheckError as e:
            problems.append(f"expr {name}: {e}")
    for name, m in mod.diagrams.items():
        try:
            d = dg.diagram_of(sig, m)
        except TypeCheckError as e:
            problems.append(f"diagram {name}: {e}")
            continue
        problems += [f"diagram {name}: {p}" for p in dg.check_wellformed(sig, d)]
    for decl in mod.decls:
        if not hasattr(decl, "stages"):
            continue
        prog = decl.program()
        if prog.input_shapes is None:
            continue
        params = {n: np.ones(s) for n, s in decl.weights}
        try:
            ncd.infer_shapes(prog, prog.input_shapes, params)
        except FsdError as e:
            problems.append(f"ncd {decl.name}: {e}")
    return problems


def cmd_check(args, res: Result):
    try:
        mod = _load_module(args.file)
    except ParseError as e:
        res.payload = {"file": args.file, "problems": [f"syntax error at {e}"]}
        res.fail(f"{args.file}:{e}")
        return
    problems = module_problems(mod)
    res.payload = {"file": args.file, "problems": problems,
                   "declarations": len(mod.decls)}
    if problems:
        for p in problems:
            res.fail(f"{args.file}: {p}")
    else:
        n = len(mod.decls)
        res.say(f"{args.file}: ok ({n} declaration{'' if n == 1 else 's'})")


def _checked_module(args, res):
    try:
        mod = _load_module(args.file)
    except ParseError as e:
        res.payload = {"error": f"syntax error at {e}"}
        res.fail(f"{args.file}:{e}")
        return None
    problems = module_problems(mod)
    if problems:
        res.payload = {"error": "invalid module", "problems": problems}
        for p in problems:
            res.fail(f"{args.file}: {p}")
        return None
    return mod


def cmd_rewrite(args, res: Result):
    mod = _checked_module(args, res)
    if mod is None:
        return
    sig = mod.signature()
    m = _lookup_term(mod, args.expr)
    if args.site is not None:
        site = rw.RewriteSite(_parse_site_path(args.site), args.rule, args.dir)
    else:
        sites = rw.find_redexes(sig, m, args.rule, args.dir)
        if not sites:
            res.payload = {"error": "no redex", "rule": args.rule, "direction": args.dir}
            res.fail(f"no {args.rule} {args.dir} redex in {args.expr}")
            return
        site = sites[0]
    try:
        out = rw.apply_rule(sig, m, site)
    except rw.InvalidSiteError as e:
        res.payload = {"error": str(e)}
        res.fail(str(e))
        return
    path = [site.to_json()]
    res.payload = {"input": show(m), "output": show(out), "term": mor_to_json(out), "path": path}
    res.say(show(out))
    res.say(json.dumps(path))


def cmd_eq(args, res: Result):
    if args.budget < 0:
        raise UsageError("--budget must be non-negative")
    mod = _checked_module(args, res)
    if mod is None:
        return
    sig = mod.signature()
    lhs, rhs = _lookup_term(mod, args.lhs), _lookup_term(mod, args.rhs)
    verdict = rw.equivalent(sig, lhs, rhs, args.budget)
    res.payload = {"verdict": verdict.to_json()}
    if verdict:
        res.say("yes, path [" + ", ".join(_site_text(s) for s in verdict.path) + "]")
    else:
        res.fail(f"no within budget {args.budget}")
    if args.model:
        model = finset.Model.from_json(_read_json(args.model))
        try:
            a = finset.eval_expression(sig, model, lhs)
            b = finset.eval_expression(sig, model, rhs)
        except FsdError as e:
            res.payload["denotation"] = {"error": str(e)}
            res.fail(f"model: {e}")
            return
        same = a == b
        res.payload["denotation"] = {"equal": same}
        if same:
            res.say("denotations agree in the model")
        else:
            res.fail("denotations differ in the model")


def _load_category(spec: str) -> finset.FinCategory:
    if os.path.exists(spec):
        try:
            return finset.FinCategory.from_json(_read_json(spec))
        except (KeyError, TypeError, ValueError) as e:
            raise CliIOError(f"{spec}: malformed category ({e})") from None
    if spec in finset.FIXTURES:
        return finset.fixture(spec)
    raise CliIOError(f"cannot read {spec}: no such file or fixture")


def cmd_yoneda(args, res: Result):
    c = _load_category(args.category)
    problems = finset.check_category(c)
    if problems:
        res.payload = {"error": "invalid category", "problems": problems}
        for p in problems:
            res.fail(f"category: {p}")
        return
    if args.object not in c.objects:
        raise UsageError(f"unknown object {args.object!r}; category has {list(c.objects)}")
    if args.functor.startswith("hom:"):
        phi = finset.hom_functor(c, args.functor[4:]) if args.functor[4:] in c.objects else None
        if phi is None:
            raise UsageError(f"unknown object in {args.functor!r}")
    else:
        try:
            phi = finset.SetFunctor.from_json(c, _read_json(args.functor))
        except (KeyError, TypeError, AttributeError) as e:
            raise CliIOError(f"{args.functor}: malformed functor ({e})") from None
    problems = finset.check_functor(phi)
    if problems:
        res.payload = {"error": "invalid functor", "problems": problems}
        for p in problems:
            res.fail(f"functor: {p}")
        return
    try:
        report = finset.verify_yoneda(c, args.object, phi, args.max_cost)
    except finset.EnumerationTooLarge as e:
        res.payload = {"error": str(e)}
        res.fail(str(e))
        return
    res.payload = report.to_json()
    if report.verified:
        res.say(str(report))
    else:
        res.fail(str(report))


def _bind_inputs(prog: ncd.NcdProgram, paths) -> tuple[list, dict]:
    positional, named = [], {}
    for p in paths:
        data = _read_json(p)
        try:
            if ncd.is_tensor_json(data):
                positional.append(ncd.tensor_from_json(data))
            elif isinstance(data, dict):
                for k, v in data.items():
                    named[k] = ncd.tensor_from_json(v)
            else:
                raise CliIOError(f"{p}: expected a tensor or a name -> tensor mapping")
        except (KeyError, TypeError, ValueError) as e:
            raise CliIOError(f"{p}: malformed tensor ({e})") from None
    inputs = []
    for name in prog.params:
        if name in named:
            inputs.append(named.pop(name))
        elif positional:
            inputs.append(positional.pop(0))
        else:
            raise UsageError(f"no tensor given for input {name}")
    if positional:
        raise UsageError(f"{len(positional)} unused positional tensors")
    return inputs, named


def cmd_eval(args, res: Result):
    mod = _checked_module(args, res)
    if mod is None:
        return
    progs = mod.programs
    if args.ncd not in progs:
        raise UsageError(f"no ncd program named {args.ncd!r}")
    prog = progs[args.ncd]
    inputs, params = _bind_inputs(prog, args.inputs)
    try:
        outs = ncd.eval_ncd(prog, inputs, params)
    except FsdError as e:
        res.payload = {"error": str(e)}
        res.fail(str(e))
        return
    doc = {"outputs": [ncd.tensor_to_json(t) for t in outs]}
    text = json.dumps(doc, sort_keys=True)
    if args.out:
        _write(args.out, (text + "\n").encode("utf-8"))
        res.say(f"wrote {len(outs)} tensor(s) to {args.out}")
    else:
        res.say(text)
    res.payload = dict(doc, out=args.out)


def diagram_for(mod: SourceModule, name: str):
    """(signature, diagram) for a diagram, expression or ncd program name."""
    sig = mod.signature()
    for decl in mod.decls:
        if getattr(decl, "name", None) != name:
            continue
        if hasattr(decl, "stages"):
            prog = decl.program()
            if prog.input_shapes is None:
                raise UsageError(f"ncd {name} needs input shapes to be drawn")
            params = {n: np.ones(s) for n, s in decl.weights}
            return ncd.program_diagram(prog, prog.input_shapes, params)
        if hasattr(decl, "term"):
            return sig, dg.diagram_of(sig, decl.term)
    raise UsageError(f"no diagram, expression or ncd program named {name!r}")


def cmd_render(args, res: Result):
    mod = _checked_module(args, res)
    if mod is None:
        return
    try:
        cfg = rd.load_config(args.config)
    except OSError as e:
        raise CliIOError(f"cannot read render config: {e.strerror or e}") from None
    except (ValueError, TypeError) as e:
        raise UsageError(f"bad render config: {e}") from None
    sig, d = diagram_for(mod, args.diagram)
    svg = rd.render(sig, d, cfg)
    if args.stdout:
        res.payload = {"svg": svg.decode("utf-8")}
        if not args.json:
            sys.stdout.write(svg.decode("utf-8"))
        return
    _write(args.output, svg)
    res.payload = {"out": args.output, "bytes": len(svg)}
    res.say(f"wrote {args.output} ({len(svg)} bytes)")


# -- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    p = argparse.ArgumentParser(prog="fsd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    c = sub.add_parser("check", parents=[common], help="parse, validate and type-check a file")
    c.add_argument("file")
    c.set_defaults(run=cmd_check)

    r = sub.add_parser("rewrite", parents=[common], help="apply one rewrite rule")
    r.add_argument("file")
    r.add_argument("--expr", required=True)
    r.add_argument("--rule", required=True, choices=sorted(rw.RULES))
    r.add_argument("--dir", required=True, choices=rw.DIRECTIONS)
    r.add_argument("--site", help="subterm path, e.g. '[0, 1]'; default: first redex")
    r.set_defaults(run=cmd_rewrite)

    e = sub.add_parser("eq", parents=[common], help="search for a rewrite path between two terms")
    e.add_argument("file")
    e.add_argument("--lhs", required=True)
    e.add_argument("--rhs", required=True)
    e.add_argument("--budget", type=int, required=True)
    e.add_argument("--model", help="finite model JSON for a denotation check")
    e.set_defaults(run=cmd_eq)

    y = sub.add_parser("yoneda", parents=[common], help="verify the Yoneda bijection by enumeration")
    y.add_argument("--category", required=True, help="category JSON, or a fixture name")
    y.add_argument("--object", required=True)
    y.add_argument("--functor", required=True, help="functor JSON, or 'hom:X' for C(X, _)")
    y.add_argument("--max-cost", type=int, default=finset.DEFAULT_MAX_COST)
    y.set_defaults(run=cmd_yoneda)

    v = sub.add_parser("eval", parents=[common], help="evaluate a tensor program")
    v.add_argument("file")
    v.add_argument("--ncd", required=True)
    v.add_argument("--inputs", nargs="+", default=[], metavar="T.json")
    v.add_argument("--out")
    v.set_defaults(run=cmd_eval)

    d = sub.add_parser("render", parents=[common], help="draw a diagram as SVG")
    d.add_argument("file")
    d.add_argument("--diagram", required=True)
    d.add_argument("--config", help="render config JSON (default: $FSD_RENDER_CONFIG)")
    out = d.add_mutually_exclusive_group(required=True)
    out.add_argument("-o", "--output")
    out.add_argument("--stdout", action="store_true")
    d.set_defaults(run=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    res = Result(args.json)
    try:
        args.run(args, res)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"fsd: error: {e}", file=sys.stderr)
        if args.json:
            print(json.dumps({"ok": False, "error": str(e)}, sort_keys=True))
        return USAGE
    except CliIOError as e:
        print(f"fsd: {e}", file=sys.stderr)
        if args.json:
            print(json.dumps({"ok": False, "error": str(e)}, sort_keys=True))
        return IO_ERROR
    res.emit(sys.stdout)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
