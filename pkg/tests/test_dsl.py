import random

import pytest
from hypothesis import given, settings, strategies as st

from fsdiag import dsl
from fsdiag.dsl import ParseError, parse, pretty
from fsdiag.ncd import Broadcast, Ein, Pointwise, parse_einspec
from fsdiag.terms import (
    SET, Cat, Compose, FunctorImage, Mor, Named, NatComponent, Obj, ProductCat, seq,
)
from gallery import corpus_files
from gen import random_module

HEADER = "category C\ncategory D\nobject x, y, z : C\nmorphism f : x -> y\nmorphism g : y -> z\n"


def expr(text):
    return parse(HEADER + text).expressions["e"]


class TestParse:
    def test_composition(self):
        assert expr("expr e = f ; g") == Compose(Mor("f"), Mor("g"))

    def test_functor_image_of_composite(self):
        assert expr("expr e = F[f ; g]") == FunctorImage(Named("F"), Compose(Mor("f"), Mor("g")))

    def test_nat_component_then_image(self):
        assert expr("expr e = eta @ x ; G[f]") == Compose(
            NatComponent("eta", Obj("x")), FunctorImage(Named("G"), Mor("f")))

    def test_composition_nests_to_the_right(self):
        assert expr("expr e = f ; g ; h") == seq([Mor("f"), Mor("g"), Mor("h")])

    def test_product_categories_associate_left(self):
        mod = parse("category A\ncategory B\ncategory C\nfunctor P : A * B * C -> Set\n")
        (decl,) = [d for d in mod.decls if isinstance(d, dsl.FunctorDecl)]
        assert decl.src == ProductCat(ProductCat(Cat("A"), Cat("B")), Cat("C"))
        assert decl.dst == SET

    def test_ncd_pipeline(self):
        mod = parse('ncd p(x : [2, 3]) = ein "i j -> j i" ; broadcast 1 {softmax ; scale 2}')
        prog = mod.programs["p"]
        assert prog.params == ("x",)
        assert prog.input_shapes == ((2, 3),)
        assert prog.stages == (Ein(parse_einspec("i j -> j i")),
                               Broadcast((Pointwise("softmax"), Pointwise("scale", 2.0)), 1))

    def test_comments_and_spans(self):
        mod = parse("# leading comment\ncategory C  # trailing\n\n  category D\n")
        assert [d.name for d in mod.decls] == ["C", "D"]
        assert mod.spans == ((2, 1), (4, 3))

    def test_bytes_input(self):
        assert parse(b"category C\n") == parse("category C\n")


class TestErrors:
    def test_missing_colon(self):
        with pytest.raises(ParseError) as err:
            parse("category C\nobject x C\n")
        e = err.value
        assert (e.line, e.column) == (2, 10)
        assert "':'" in e.expected

    def test_unknown_declaration(self):
        with pytest.raises(ParseError) as err:
            parse("categry C")
        assert (err.value.line, err.value.column) == (1, 1)
        assert "category" in err.value.expected

    def test_bad_character(self):
        with pytest.raises(ParseError, match="1:12: unexpected character"):
            parse("category C $")

    def test_unterminated_brackets(self):
        with pytest.raises(ParseError) as err:
            parse(HEADER + "expr e = F[f ; g")
        assert err.value.line == 6 and "']'" in err.value.expected

    def test_invalid_utf8_has_position(self):
        with pytest.raises(ParseError) as err:
            parse(b"category C\ncat\xff")
        assert (err.value.line, err.value.column) == (2, 4)

    def test_deep_nesting(self):
        with pytest.raises(ParseError, match="nesting too deep"):
            parse(HEADER + "expr e = " + "F[" * 500 + "f" + "]" * 500)

    def test_names_resolve_later(self):
        # unknown names parse; validation reports them
        assert parse("morphism f : q -> r\n").signature().base_morphisms


class TestPretty:
    def test_flattens_composition(self):
        m = parse(HEADER + "expr e = f ; g ; h\n")
        assert pretty(m).splitlines()[-1] == "expr e = f ; g ; h"

    def test_canonical_spacing(self):
        m = parse("category   C\nobject x,y:C\nmorphism f:x->y\nexpr e=F[f]\n")
        assert pretty(m) == "category C\nobject x, y : C\nmorphism f : x -> y\nexpr e = F[f]\n"

    def test_idempotent_on_corpus(self):
        for path in corpus_files():
            once = pretty(parse(path.read_text("utf-8")))
            assert pretty(parse(once)) == once

    def test_left_nested_composite_keeps_parentheses(self):
        m = dsl.SourceModule((dsl.ExprDecl("e", Compose(Compose(Mor("f"), Mor("g")), Mor("h"))),))
        assert pretty(m) == "expr e = (f ; g) ; h\n"
        assert parse(pretty(m)) == m


def test_corpus_round_trip():
    files = corpus_files()
    assert len(files) == 20
    for path in files:
        m = parse(path.read_text("utf-8"))
        assert parse(pretty(m)) == m


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_generated_module_round_trip(seed):
    m = random_module(random.Random(seed))
    assert parse(pretty(m)) == m


@settings(max_examples=500, deadline=None)
@given(st.binary(max_size=200))
def test_arbitrary_bytes_never_crash(data):
    try:
        parse(data)
    except ParseError as e:
        assert e.line >= 1 and e.column >= 1


@settings(max_examples=500, deadline=None)
@given(st.lists(st.sampled_from(
    ["category", "object", "expr", "e", "=", "f", ";", "[", "]", "<", ">", ",", ":", "->",
     "@", "{", "}", "elem", "hom", "(", ")", "1", "Set", "ncd", '"i -> i"', "ein", "\n"]),
    max_size=40))
def test_token_soup_never_crashes(tokens):
    try:
        parse(" ".join(tokens))
    except ParseError as e:
        assert e.line >= 1 and e.column >= 1
