import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from fsdiag import ncd
from fsdiag.ncd import (
    Broadcast, Ein, NcdProgram, Pointwise, ShapeError, broadcast, build_mha, build_sdpa,
    einop, eval_ncd, index_project, infer_shapes, inner_broadcast, outer_product,
    parse_einspec, shape_of, softmax_last, squeeze, unsqueeze,
)
from fsdiag.terms import SET, HomSet, Obj, Pair, Signature
from oracles import einsum_loops, matmul, max_relative_error, reference_sdpa

R, A, B = Obj("R"), Obj("a"), Obj("b")
SIG = Signature(base_objects={"R": SET, "a": SET, "b": SET})


def rand(rng, *shape):
    return np.array([rng.uniform(-2, 2) for _ in range(math.prod(shape))]).reshape(shape)


class TestShapeOf:
    def test_scalar(self):
        assert shape_of(SIG, R, {}) == ()

    def test_nested_hom_wires(self):
        o = HomSet(SET, A, HomSet(SET, B, R))
        assert shape_of(SIG, o, {"a": 3, "b": 4}) == (3, 4)

    def test_pair(self):
        assert shape_of(SIG, Pair(HomSet(SET, A, R), R), {"a": 3}) == ((3,), ())

    def test_outside_fragment(self):
        with pytest.raises(ShapeError, match="outside the tensor fragment"):
            shape_of(SIG, A, {"a": 3})

    def test_missing_extent(self):
        with pytest.raises(ShapeError, match="no extent"):
            shape_of(SIG, HomSet(SET, A, R), {})


class TestEvalNcd:
    def test_pointwise_exp(self):
        prog = NcdProgram("p", ("x",), (Pointwise("exp"),))
        (out,) = eval_ncd(prog, [np.array([0.0])])
        assert out.tolist() == [1.0]

    def test_broadcast_exp(self):
        prog = NcdProgram("p", ("x",), (Broadcast((Pointwise("exp"),), 1),))
        (out,) = eval_ncd(prog, [np.zeros(2)])
        assert out.tolist() == [1.0, 1.0]

    def test_input_shape_error_names_column_zero(self):
        with pytest.raises(ShapeError) as err:
            eval_ncd(build_sdpa(4, 3, 5, 5), [np.zeros((5, 4)), np.zeros((5, 3)), np.zeros((5, 3))])
        assert err.value.column == 0

    def test_stage_shape_error_names_column(self):
        prog = NcdProgram("p", ("x", "y"), (Pointwise("exp"), Ein(parse_einspec("i, i -> i"))))
        with pytest.raises(ShapeError) as err:
            eval_ncd(prog, [np.zeros(2), np.zeros(3)])
        assert err.value.column == 3
        assert "axis i has extents 2 and 3" in str(err.value)

    def test_infer_shapes(self):
        shapes = infer_shapes(build_sdpa(4, 3, 5, 6), [(5, 4), (6, 4), (6, 3)])
        assert shapes[0] == ((5, 4), (6, 4), (6, 3))
        assert shapes[1] == ((5, 6), (6, 3))
        assert shapes[-1] == ((5, 3),)


class TestBroadcast:
    def test_scale(self):
        (out,) = broadcast(lambda t: (t * 2,), 1)(np.array([1.0, 2.0, 3.0]))
        assert out.tolist() == [2.0, 4.0, 6.0]

    def test_softmax_rows(self):
        (out,) = broadcast(lambda t: (softmax_last(t),), 1)(np.array([[0.0, 0.0], [math.log(2), 0.0]]))
        # rows worked by hand: e^0/(2 e^0) and 2/(2+1), 1/(2+1)
        assert np.allclose(out, [[0.5, 0.5], [2 / 3, 1 / 3]], rtol=0, atol=1e-15)

    def test_commutes_with_index(self):
        rng = random.Random(4)
        t = rand(rng, 3, 4)
        f = lambda s: (np.exp(s) * 3,)  # noqa: E731
        (lifted,) = broadcast(f, 1)(t)
        for i in range(3):
            assert np.array_equal(index_project(lifted, i), f(index_project(t, i))[0])

    def test_trailing_mismatch(self):
        with pytest.raises(ShapeError):
            broadcast(lambda a, b: (a + b,), 1)(np.zeros((2, 3)), np.zeros((3, 3)))


class TestInnerBroadcast:
    def test_degenerate_axis_is_plain_application(self):
        f = lambda c, x: (x + c,)  # noqa: E731
        (out,) = inner_broadcast(f, [1])(np.array(10.0), np.array([[1.0, 2.0]]))
        assert np.array_equal(out[0], f(np.array(10.0), np.array([1.0, 2.0]))[0])

    def test_pairwise_add_with_context(self):
        add = lambda c, x: (x + c,)  # noqa: E731
        (out,) = inner_broadcast(add, [1])(np.array(10.0), np.array([1.0, 2.0]))
        assert out.tolist() == [11.0, 12.0]

    def test_index_commutes(self):
        rng = random.Random(9)
        ctx, seg = rand(rng, 2), rand(rng, 3, 2)
        f = lambda c, x: (c * x, c.sum() + x)  # noqa: E731
        outs = inner_broadcast(f, [1])(ctx, seg)
        for k in range(3):
            direct = f(ctx, index_project(seg, k))
            for o, d in zip(outs, direct):
                assert np.array_equal(index_project(o, k), d)

    def test_segment_out_of_range(self):
        with pytest.raises(ShapeError, match="segment 2 out of range"):
            inner_broadcast(lambda x: (x,), [2])(np.zeros(2))


class TestEinop:
    def test_transpose(self):
        assert einop("i j -> j i", np.array([[1.0, 2], [3, 4]])).tolist() == [[1, 3], [2, 4]]

    def test_full_contraction(self):
        assert float(einop("i -> ", np.array([1.0, 2, 3]))) == 6.0

    def test_identity_matrix(self):
        out = einop("i j, j k -> i k", np.eye(2), np.array([[5.0, 6], [7, 8]]))
        assert out.tolist() == [[5, 6], [7, 8]]

    def test_random_matmul_matches_loops_exactly(self):
        rng = random.Random(0)
        a, b = rand(rng, 3, 4), rand(rng, 4, 2)
        expect = einsum_loops([["i", "j"], ["j", "k"]], ["i", "k"], [a.tolist(), b.tolist()])
        assert einop("i j, j k -> i k", a, b).tolist() == expect

    def test_elementwise_via_repeated_name(self):
        assert einop("i, i -> i", np.array([1.0, 2]), np.array([3.0, 4])).tolist() == [3, 8]

    def test_merged_output_group(self):
        t = np.arange(12.0).reshape(2, 3, 2)
        assert einop("h s v -> s (h v)", t).shape == (3, 4)

    def test_identity_spec(self):
        t = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(einop("i j -> i j", t), t)

    def test_inconsistent_extents(self):
        with pytest.raises(ShapeError, match="extents"):
            einop("i, i -> i", np.zeros(2), np.zeros(3))

    def test_unbound_output(self):
        with pytest.raises(ncd.FsdError, match="unbound"):
            parse_einspec("i -> j")

    def test_spec_text_is_whitespace_insensitive(self):
        assert parse_einspec("i  j,j k->i k") == parse_einspec("i j, j k -> i k")


class TestOuterProduct:
    def test_scalar(self):
        assert outer_product(2.0, np.array([1.0, 2])).tolist() == [2, 4]

    def test_vectors(self):
        assert outer_product(np.array([1.0, 2]), np.array([3.0, 4])).tolist() == [[3, 4], [6, 8]]

    def test_diagonal_is_elementwise(self):
        a, b = np.array([1.0, 2]), np.array([3.0, 4])
        assert np.diagonal(outer_product(a, b)).tolist() == einop("i, i -> i", a, b).tolist()


class TestIndexAndSqueeze:
    def test_index_row(self):
        assert index_project(np.array([[1.0, 2], [3, 4]]), 0).tolist() == [1, 2]

    def test_index_scalar(self):
        assert float(index_project(np.array([5.0, 6]), 1)) == 6.0

    def test_projections_reconstruct(self):
        t = np.arange(24.0).reshape(4, 3, 2)
        assert np.array_equal(np.stack([index_project(t, i) for i in range(4)]), t)

    def test_index_out_of_range(self):
        with pytest.raises(ShapeError, match="out of range"):
            index_project(np.zeros(2), 2)

    def test_unsqueeze(self):
        assert unsqueeze(np.array([1.0, 2])).tolist() == [[1, 2]]

    def test_squeeze(self):
        assert squeeze(np.array([[1.0, 2]])).tolist() == [1, 2]

    def test_squeeze_needs_extent_one(self):
        with pytest.raises(ShapeError):
            squeeze(np.zeros((2, 2)))


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=3, max_side=4),
                  elements=st.floats(-1e6, 1e6)))
def test_squeeze_unsqueeze_inverse(t):
    assert np.array_equal(squeeze(unsqueeze(t)), t)


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=3, max_side=5),
                  elements=st.floats(-50, 50)),
       st.floats(-100, 100))
def test_softmax_properties(t, shift):
    s = softmax_last(t)
    assert np.all(np.abs(s.sum(axis=-1) - 1) <= 1e-12)
    assert np.all(np.abs(softmax_last(t + shift) - s) <= 1e-9)


class TestSdpa:
    def test_single_key(self):
        rng = random.Random(1)
        Q, K, V = rand(rng, 3, 4), rand(rng, 1, 4), rand(rng, 1, 2)
        (out,) = eval_ncd(build_sdpa(4, 2, 3, 1), [Q, K, V])
        assert np.allclose(out, np.repeat(V, 3, axis=0), rtol=0, atol=1e-15)

    def test_zero_keys_average_values(self):
        rng = random.Random(2)
        Q, V = rand(rng, 3, 4), rand(rng, 5, 2)
        (out,) = eval_ncd(build_sdpa(4, 2, 3, 5), [Q, np.zeros((5, 4)), V])
        mean = [sum(V[j][c] for j in range(5)) / 5 for c in range(2)]
        assert max_relative_error(out, [mean] * 3) <= 1e-12

    def test_matches_reference(self):
        rng = random.Random(3)
        Q, K, V = rand(rng, 5, 4), rand(rng, 5, 4), rand(rng, 5, 3)
        (out,) = eval_ncd(build_sdpa(4, 3, 5, 5), [Q, K, V])
        assert max_relative_error(out, reference_sdpa(Q.tolist(), K.tolist(), V.tolist())) <= 1e-6

    def test_extents_must_be_positive(self):
        with pytest.raises(ShapeError):
            build_sdpa(0, 1, 1, 1)


class TestMha:
    def test_zero_queries_give_uniform_attention(self):
        rng = random.Random(5)
        h, dm, dk, dv, s = 2, 4, 3, 3, 4
        X = rand(rng, s, dm)
        W = {"Wq": np.zeros((h, dm, dk)), "Wk": rand(rng, h, dm, dk), "Wv": rand(rng, h, dm, dv),
             "Wo": rand(rng, h * dv, dm)}
        (out,) = eval_ncd(build_mha(h, dm, dk, dv, s, W), [X], W)
        means = []
        for i in range(h):
            V = matmul(X.tolist(), W["Wv"][i].tolist())
            means += [sum(V[j][c] for j in range(s)) / s for c in range(dv)]
        expect = matmul([means] * s, W["Wo"].tolist())
        assert max_relative_error(out, expect) <= 1e-9

    def test_weight_shape_checked(self):
        with pytest.raises(ShapeError, match="Wo has shape"):
            build_mha(2, 4, 3, 3, 4, {"Wo": np.zeros((5, 4))})

    def test_output_shape(self):
        rng = random.Random(6)
        W = {"Wq": rand(rng, 2, 4, 3), "Wk": rand(rng, 2, 4, 3), "Wv": rand(rng, 2, 4, 5),
             "Wo": rand(rng, 10, 4)}
        (out,) = eval_ncd(build_mha(2, 4, 3, 5, 6, W), [rand(rng, 6, 4)], W)
        assert out.shape == (6, 4)


def test_tensor_json_round_trip():
    t = np.arange(6.0).reshape(2, 3)
    doc = ncd.tensor_to_json(t)
    assert doc == {"shape": [2, 3], "data": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]}
    assert np.array_equal(ncd.tensor_from_json(doc), t)
    with pytest.raises(ShapeError):
        ncd.tensor_from_json({"shape": [2, 2], "data": [1.0]})
