import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from evorobo.nets import (
    Genotype,
    Network,
    NetworkSpec,
    forward,
    load_genotype,
    logistic,
    save_genotype,
    unpack,
    weight_count,
)


def brute_count(sizes, context=0):
    total = 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        total += a * b + b  # dense weights plus one bias per neuron
    return total + context * context


def reference_mlp(sizes, weights, x):
    """Straight-line re-implementation of the documented weight layout."""
    pos = 0
    h = np.asarray(x, dtype=float)
    for a, b in zip(sizes[:-1], sizes[1:]):
        out = np.empty(b)
        for j in range(b):
            row = weights[pos + j * (a + 1): pos + (j + 1) * (a + 1)]
            out[j] = 1 / (1 + math.exp(-(np.dot(row[:a], h) + row[a])))
        pos += b * (a + 1)
        h = out
    return h


class TestWeightCount:
    @pytest.mark.parametrize(
        "spec, expected",
        [
            (NetworkSpec(8, (20,), 2), 222),
            (NetworkSpec(8, (14,), 6), 216),
            (NetworkSpec(2, (), 1), 3),
            (NetworkSpec(17, (5,), 4, recurrent=True), 139),
        ],
    )
    def test_documented_counts(self, spec, expected):
        assert weight_count(spec) == expected

    def test_classical_count_is_one_off_the_published_figure(self):
        # full biases give 222; the published 221 cannot be recovered from any bias convention we tried
        assert weight_count(NetworkSpec(8, (20,), 2)) - 221 == 1

    @given(st.integers(1, 20), st.lists(st.integers(1, 12), max_size=3), st.integers(1, 8))
    @settings(max_examples=200, deadline=None)
    def test_matches_brute_count(self, n_in, hidden, n_out):
        spec = NetworkSpec(n_in, tuple(hidden), n_out)
        assert weight_count(spec) == brute_count(spec.sizes)
        assert unpack(spec, np.zeros(weight_count(spec)))[0][-1][0].shape == (1, n_out, spec.sizes[-2])

    def test_unpack_rejects_wrong_length(self):
        spec = NetworkSpec(8, (14,), 6)
        with pytest.raises(ValueError, match="216"):
            unpack(spec, np.zeros(215))


class TestSpecValidation:
    def test_elman_needs_one_hidden_layer(self):
        with pytest.raises(ValueError):
            NetworkSpec(4, (), 2, recurrent=True)
        with pytest.raises(ValueError):
            NetworkSpec(4, (3, 3), 2, recurrent=True)

    def test_rejects_empty_layers(self):
        with pytest.raises(ValueError):
            NetworkSpec(0, (), 2)

    def test_describe(self):
        assert NetworkSpec(17, (5,), 4, True).describe() == "Elman 17-5-4"
        assert NetworkSpec(8, (14,), 6).describe() == "MLP 8-14-6"


class TestForward:
    def test_zero_weights_give_half(self):
        spec = NetworkSpec(8, (14,), 6)
        out, _ = forward(spec, np.zeros(weight_count(spec)), np.random.default_rng(0).random(8))
        assert np.array_equal(out, np.full(6, 0.5))

    def test_single_unit_scalar(self):
        spec = NetworkSpec(1, (), 1)
        out, _ = forward(spec, np.array([1.0, 0.0]), np.array([1.0]))
        assert out[0] == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-15)

    def test_input_length_checked(self):
        spec = NetworkSpec(3, (), 1)
        with pytest.raises(ValueError):
            forward(spec, np.zeros(4), np.zeros(2))

    def test_elman_two_step_unroll(self):
        # zero input weights, context = identity: h1 = s(b), h2 = s(h1 + b)
        spec = NetworkSpec(2, (2,), 1, recurrent=True)
        b_hidden = np.array([0.3, -0.2])
        w_in = np.zeros((2, 3))
        w_in[:, 2] = b_hidden
        ctx = np.eye(2)
        w_out = np.array([[1.0, -1.0, 0.1]])
        weights = np.concatenate([w_in.ravel(), ctx.ravel(), w_out.ravel()])
        assert len(weights) == weight_count(spec)

        s = lambda z: 1 / (1 + np.exp(-z))  # noqa: E731
        h1 = s(b_hidden)
        h2 = s(h1 + b_hidden)
        out1, st1 = forward(spec, weights, np.array([0.9, 0.1]))
        out2, st2 = forward(spec, weights, np.array([0.0, 0.7]), st1)
        assert np.allclose(st1, h1, atol=1e-15)
        assert np.allclose(st2, h2, atol=1e-15)
        assert out2[0] == pytest.approx(s(h2[0] - h2[1] + 0.1), abs=1e-15)
        assert out1[0] == pytest.approx(s(h1[0] - h1[1] + 0.1), abs=1e-15)

    def test_mlp_state_passthrough(self):
        spec = NetworkSpec(2, (3,), 1)
        _, state = forward(spec, np.ones(weight_count(spec)), np.zeros(2), state="untouched")
        assert state == "untouched"

    @given(
        st.integers(1, 20), st.integers(1, 20), st.integers(1, 8),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=1000, deadline=None)
    def test_outputs_strictly_inside_unit_interval(self, n_in, n_hid, n_out, seed):
        # within the genotype bounds |z| <= fan-in + 1, far from float saturation
        rng = np.random.default_rng(seed)
        spec = NetworkSpec(n_in, (n_hid,), n_out)
        w = rng.choice([-1.0, 1.0], weight_count(spec))
        out, _ = forward(spec, w, rng.random(n_in))
        assert np.all((out > 0) & (out < 1))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=1000, deadline=None)
    def test_matches_reference_layout(self, seed):
        rng = np.random.default_rng(seed)
        sizes = (int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 4)))
        spec = NetworkSpec(sizes[0], (sizes[1],), sizes[2])
        w = rng.uniform(-1, 1, weight_count(spec))
        x = rng.random(sizes[0])
        out, _ = forward(spec, w, x)
        assert np.allclose(out, reference_mlp(sizes, w, x), atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=1000, deadline=None)
    def test_elman_with_zero_context_equals_mlp(self, seed):
        rng = np.random.default_rng(seed)
        n_in, h, n_out = (int(v) for v in rng.integers(1, 6, 3))
        mlp = NetworkSpec(n_in, (h,), n_out)
        elman = NetworkSpec(n_in, (h,), n_out, recurrent=True)
        w = rng.uniform(-1, 1, weight_count(mlp))
        first = (n_in + 1) * h
        w_elman = np.concatenate([w[:first], np.zeros(h * h), w[first:]])
        state = None
        for _ in range(3):
            x = rng.random(n_in)
            a, _ = forward(mlp, w, x)
            b, state = forward(elman, w_elman, x, state)
            assert np.array_equal(a, b)

    def test_mlp_is_stateless(self):
        spec = NetworkSpec(4, (5,), 2)
        w = np.random.default_rng(1).uniform(-1, 1, weight_count(spec))
        net = Network(spec, w)
        net.reset(1)
        x = np.random.default_rng(2).random((1, 4))
        first = net(x, np.array([0]))
        for _ in range(5):
            net(np.random.default_rng(3).random((1, 4)), np.array([0]))
        assert np.array_equal(net(x, np.array([0])), first)


class TestBatchedNetwork:
    def test_per_row_weights_match_single_evaluation(self):
        spec = NetworkSpec(3, (4,), 2, recurrent=True)
        rng = np.random.default_rng(4)
        w = rng.uniform(-1, 1, (5, weight_count(spec)))
        net = Network(spec, w)
        net.reset(5)
        states = [None] * 5
        for _ in range(4):
            x = rng.random((5, 3))
            rows = np.arange(5)
            batch = net(x, rows)
            for r in range(5):
                single, states[r] = forward(spec, w[r], x[r], states[r])
                assert np.allclose(batch[r], single, atol=1e-14)

    def test_subset_rows_leave_other_state_untouched(self):
        spec = NetworkSpec(2, (3,), 1, recurrent=True)
        net = Network(spec, np.random.default_rng(5).uniform(-1, 1, (3, weight_count(spec))))
        net.reset(3)
        net(np.ones((1, 2)), np.array([1]))
        assert np.all(net.state[[0, 2]] == 0)
        assert np.any(net.state[1] != 0)

    def test_logistic_saturates_without_overflow(self):
        with np.errstate(over="ignore"):
            assert logistic(np.array([-1000.0]))[0] == 0.0
        assert logistic(np.array([1000.0]))[0] == 1.0


class TestGenotypeFile:
    @given(hnp.arrays(np.float64, 139, elements=st.floats(-1, 1)))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_exact(self, tmp_path_factory, weights):
        spec = NetworkSpec(17, (5,), 4, recurrent=True)
        g = Genotype(weights, np.abs(weights) + 1e-3)
        path = tmp_path_factory.mktemp("g") / "x.gen"
        save_genotype(path, spec, g, (-1.0, 1.0), kind="supervisor", inputs="all")
        spec2, g2, bounds, meta = load_genotype(path)
        assert spec2 == spec
        assert np.array_equal(g2.weights, g.weights)
        assert np.array_equal(g2.sigmas, g.sigmas)
        assert bounds == (-1.0, 1.0)
        assert meta == {"kind": "supervisor", "inputs": "all"}

    def test_rejects_foreign_file(self, tmp_path):
        p = tmp_path / "x.gen"
        p.write_text("hello\n")
        with pytest.raises(ValueError, match="not a genotype"):
            load_genotype(p)

    def test_rejects_wrong_weight_count(self, tmp_path):
        spec = NetworkSpec(2, (), 1)
        p = tmp_path / "x.gen"
        save_genotype(p, spec, Genotype(np.zeros(3), np.ones(3)))
        text = p.read_text().replace("n_inputs 2", "n_inputs 3")
        p.write_text(text)
        with pytest.raises(ValueError):
            load_genotype(p)

    def test_genotype_shape_checked(self):
        with pytest.raises(ValueError):
            Genotype(np.zeros(3), np.ones(4))
