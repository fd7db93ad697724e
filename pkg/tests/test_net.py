import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xplab.net import (
    ActivationPattern,
    Network,
    NetworkSpec,
    UnsupportedActivation,
    activation_pattern,
    forward,
    forward_batch,
    hidden_codes,
    init_network,
    load_network,
    network_pattern,
    save_network,
)
from xplab.sweep import exact_transition_sweep
from xplab.trajectory import make_trajectory

from oracles import naive_forward


def spec_of(m=3, widths=(4, 4), out=2, act="relu", sw=2.0, sb=1.0, seed=0):
    return NetworkSpec(
        input_dim=m, hidden_widths=widths, output_dim=out, activation=act,
        sigma_w_sq=sw, sigma_b_sq=sb, seed=seed,
    )


def manual_network(weights, biases, act="relu", sw=1.0, sb=1.0):
    """Network from explicit layer arrays (last pair is the output layer)."""
    widths = tuple(len(b) for b in biases[:-1])
    spec = NetworkSpec(
        input_dim=len(weights[0][0]), hidden_widths=widths, output_dim=len(biases[-1]),
        activation=act, sigma_w_sq=sw, sigma_b_sq=sb, seed=0,
    )
    template = init_network(spec)
    layers = [(np.asarray(w, dtype=float), np.asarray(b, dtype=float)) for w, b in zip(weights, biases)]
    return template.with_layers(layers)


class TestSpecValidation:
    def test_rejects_zero_dimensions(self):
        with pytest.raises(ValueError):
            spec_of(m=0)
        with pytest.raises(ValueError):
            spec_of(widths=())
        with pytest.raises(ValueError):
            spec_of(widths=(4, 0))
        with pytest.raises(ValueError):
            spec_of(out=0)

    def test_rejects_negative_variances_and_bad_activation(self):
        with pytest.raises(ValueError):
            spec_of(sw=-1.0)
        with pytest.raises(ValueError):
            spec_of(sb=-0.5)
        with pytest.raises(ValueError):
            spec_of(act="gelu")

    def test_json_round_trip(self):
        spec = spec_of(act="hard_tanh", seed=99)
        assert NetworkSpec.from_json(spec.to_json()) == spec
        assert json.loads(spec.to_json())["activation"] == "hard_tanh"


class TestInit:
    def test_zero_variance_gives_exact_zeros(self):
        net = init_network(spec_of(sw=0.0, sb=0.0))
        for w, b in net.layers:
            assert not w.any()
            assert not b.any()

    def test_first_layer_sample_variance_concentrates(self):
        # 10^4 iid N(0, 0.04) entries: chi-square concentration puts the
        # sample variance within 10% of 0.04 except with probability ~1e-12
        for seed in range(5):
            net = init_network(spec_of(m=100, widths=(100,), out=1, sw=4.0, sb=0.0, seed=seed))
            v = float(net.layers[0][0].var())
            assert 0.04 * 0.9 <= v <= 0.04 * 1.1

    def test_bias_variance_scale(self):
        net = init_network(spec_of(m=200, widths=(200,), out=1, sw=1.0, sb=9.0, seed=3))
        assert 9.0 * 0.8 <= float(net.layers[0][1].var()) <= 9.0 * 1.2

    def test_deterministic_from_spec(self):
        a = init_network(spec_of(seed=7))
        b = init_network(spec_of(seed=7))
        for (wa, ba), (wb, bb) in zip(a.layers, b.layers):
            assert wa.tobytes() == wb.tobytes()
            assert ba.tobytes() == bb.tobytes()

    def test_different_seeds_differ(self):
        a = init_network(spec_of(seed=1))
        b = init_network(spec_of(seed=2))
        assert not np.array_equal(a.layers[0][0], b.layers[0][0])

    def test_layer_dimension_chain(self):
        net = init_network(spec_of(m=3, widths=(5, 7), out=2))
        shapes = [w.shape for w, _ in net.layers]
        assert shapes == [(5, 3), (7, 5), (2, 7)]


class TestForward:
    def test_zero_network_all_zero_trace(self):
        net = init_network(spec_of(sw=0.0, sb=0.0, act="relu"))
        trace = forward(net, np.asarray([1.0, -2.0, 3.0]))
        for h in trace.pre_activations:
            assert not h.any()
        for z in trace.activations[1:]:
            assert not z.any()

    def test_hard_tanh_saturation(self):
        net = manual_network(
            [np.eye(2), np.eye(2)], [np.zeros(2), np.zeros(2)], act="hard_tanh"
        )
        trace = forward(net, np.asarray([5.0, -5.0]))
        assert np.array_equal(trace.activations[1], [1.0, -1.0])

    def test_matches_naive_recomputation(self):
        for act in ("relu", "hard_tanh", "tanh"):
            net = init_network(spec_of(m=4, widths=(6, 5), out=3, act=act, seed=11))
            x = np.linspace(-1, 1, 4)
            got = forward(net, x).output
            want = np.asarray(naive_forward(net.layers, act, x))
            assert np.allclose(got, want, rtol=1e-12, atol=1e-14)

    def test_dimension_mismatch(self):
        net = init_network(spec_of(m=3))
        with pytest.raises(ValueError):
            forward(net, np.zeros(4))

    def test_batch_agrees_with_single(self):
        net = init_network(spec_of(act="hard_tanh", seed=5))
        xs = np.random.default_rng(0).normal(size=(7, 3))
        pres, acts = forward_batch(net, xs)
        for i in range(7):
            trace = forward(net, xs[i])
            for d in range(len(pres)):
                assert np.allclose(pres[d][i], trace.pre_activations[d], rtol=1e-12)

    def test_piecewise_linearity_within_pattern_interval(self):
        # three parameters inside one activation-pattern interval: the middle
        # output is the affine interpolation of the ends
        net = init_network(spec_of(m=3, widths=(6, 6), out=2, act="relu", seed=21))
        traj = make_trajectory("line", np.asarray([-1.0, 0.2, 0.5]), np.asarray([1.0, -0.4, 0.3]))
        res = exact_transition_sweep(net, traj)
        t_hi = res.events[0].t if res.events else 1.0
        t1, t2, t3 = 0.1 * t_hi, 0.5 * t_hi, 0.9 * t_hi
        o1 = forward(net, traj.sample([t1])[0]).output
        o2 = forward(net, traj.sample([t2])[0]).output
        o3 = forward(net, traj.sample([t3])[0]).output
        interp = o1 + (o3 - o1) * ((t2 - t1) / (t3 - t1))
        assert np.allclose(o2, interp, rtol=1e-9, atol=1e-12)


class TestActivationPattern:
    def test_relu_boundary_convention(self):
        assert hidden_codes(np.asarray([1.0, -1.0, 0.0]), "relu").tolist() == [1, 0, 0]

    def test_hard_tanh_codes(self):
        assert hidden_codes(np.asarray([2.0, -3.0, 0.5]), "hard_tanh").tolist() == [1, -1, 0]
        assert hidden_codes(np.asarray([1.0, -1.0]), "hard_tanh").tolist() == [1, -1]

    def test_pattern_length_is_total_hidden(self):
        spec = spec_of(widths=(4, 7, 2), act="hard_tanh")
        net = init_network(spec)
        pattern = network_pattern(net, np.zeros(3))
        assert len(pattern) == spec.total_hidden == 13

    def test_tanh_rejected(self):
        net = init_network(spec_of(act="tanh"))
        trace = forward(net, np.zeros(3))
        with pytest.raises(UnsupportedActivation):
            activation_pattern(trace)

    def test_pattern_equality_and_hash(self):
        net = init_network(spec_of(act="relu", seed=4))
        p1 = network_pattern(net, np.ones(3))
        p2 = network_pattern(net, np.ones(3))
        assert p1 == p2 and hash(p1) == hash(p2)
        assert p1 != ActivationPattern(codes=1 - p1.codes, activation="relu")


class TestSerialization:
    def test_binary_round_trip_bit_identical(self, tmp_path):
        net = init_network(spec_of(m=3, widths=(4, 5), out=2, act="hard_tanh", seed=13))
        path = tmp_path / "net.xpnl"
        save_network(net, path)
        loaded = load_network(path)
        assert loaded.spec == net.spec
        for (wa, ba), (wb, bb) in zip(net.layers, loaded.layers):
            assert wa.tobytes() == wb.tobytes()
            assert ba.tobytes() == bb.tobytes()

    def test_magic_and_version_guard(self, tmp_path):
        path = tmp_path / "net.xpnl"
        save_network(init_network(spec_of()), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="magic"):
            load_network(path)

    def test_forward_identical_after_reload(self, tmp_path):
        net = init_network(spec_of(act="hard_tanh", seed=2))
        path = tmp_path / "n.xpnl"
        save_network(net, path)
        x = np.asarray([0.3, -0.7, 1.1])
        assert np.array_equal(forward(net, x).output, forward(load_network(path), x).output)


@st.composite
def small_specs(draw):
    m = draw(st.integers(1, 4))
    depth = draw(st.integers(1, 3))
    widths = tuple(draw(st.integers(1, 5)) for _ in range(depth))
    act = draw(st.sampled_from(["relu", "hard_tanh"]))
    sw = draw(st.floats(0.0, 16.0, allow_nan=False))
    sb = draw(st.floats(0.0, 4.0, allow_nan=False))
    seed = draw(st.integers(0, 2**32))
    return NetworkSpec(
        input_dim=m, hidden_widths=widths, output_dim=draw(st.integers(1, 3)),
        activation=act, sigma_w_sq=sw, sigma_b_sq=sb, seed=seed,
    )


@given(small_specs())
@settings(max_examples=40, deadline=None)
def test_trace_satisfies_layer_recursion(spec):
    net = init_network(spec)
    x = np.linspace(-1.0, 1.0, spec.input_dim)
    trace = forward(net, x)
    z = x
    for d, (w, b) in enumerate(net.layers):
        h = w @ z + b
        assert np.allclose(h, trace.pre_activations[d], rtol=1e-12, atol=1e-12)
        if d < spec.depth:
            z = np.maximum(h, 0.0) if spec.activation == "relu" else np.clip(h, -1.0, 1.0)
            assert np.array_equal(z, trace.activations[d + 1])


@given(small_specs())
@settings(max_examples=25, deadline=None)
def test_init_is_pure(spec):
    a = init_network(spec)
    b = init_network(spec)
    assert all(
        np.array_equal(wa, wb) and np.array_equal(ba, bb)
        for (wa, ba), (wb, bb) in zip(a.layers, b.layers)
    )
