import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xplab.net import NetworkSpec, forward, init_network, network_pattern
from xplab.rng import child_seed, stream
from xplab.stats import linear_fit, pearson
from xplab.sweep import (
    count_transitions_curved,
    exact_transition_sweep,
    random_walk_dichotomy_baseline,
    remaining_depth_dichotomies,
    transitions_vs_length,
    weight_circle_labellings,
    weight_sweep_dichotomies,
)
from xplab.trajectory import make_trajectory

from oracles import dense_transition_count, random_walk_distinct
from test_net import manual_network


def random_net(i, m=4, k=8, n=3, act="hard_tanh", sw=8.0, sb=1.0):
    spec = NetworkSpec(
        input_dim=m, hidden_widths=(k,) * n, output_dim=1,
        activation=act, sigma_w_sq=sw, sigma_b_sq=sb, seed=child_seed(777, i),
    )
    return init_network(spec)


def random_line(i, m=4):
    g = stream(777, "line", i)
    return make_trajectory("line", g.normal(size=m), g.normal(size=m))


class TestExactSweep:
    def test_single_neuron_event_at_half(self):
        net = manual_network([[[1.0]], [[1.0]]], [[-0.5], [0.0]], act="relu")
        traj = make_trajectory("line", [0.0], [1.0])
        res = exact_transition_sweep(net, traj)
        assert res.num_transitions == 1
        assert res.events[0].t == pytest.approx(0.5, abs=1e-12)
        assert res.events[0].layer == 0
        assert res.events[0].neuron == 0
        assert res.events[0].boundary == "relu_zero"
        assert res.events[0].direction == 1
        assert res.num_patterns == 2

    def test_zero_network_no_events(self):
        spec = NetworkSpec(
            input_dim=2, hidden_widths=(4, 4), output_dim=1,
            activation="relu", sigma_w_sq=0.0, sigma_b_sq=0.0, seed=0,
        )
        res = exact_transition_sweep(init_network(spec), make_trajectory("line", [0.0, 0.0], [1.0, 1.0]))
        assert res.num_transitions == 0
        assert res.num_patterns == 1
        assert res.patterns_unique

    def test_matches_dense_oracle(self):
        for i in range(12):
            net = random_net(i)
            traj = random_line(i)
            res = exact_transition_sweep(net, traj)
            t_oracle, _, a_oracle = dense_transition_count(net, traj, 200_000)
            times = sorted({e.t for e in res.events})
            gap = min((b - a for a, b in zip(times, times[1:])), default=1.0)
            if gap > 2.0 / 200_000:
                assert res.num_transitions == t_oracle
                assert res.num_patterns == a_oracle

    def test_affine_sweep_never_repeats_patterns(self):
        # exact verification, not the hash shortcut: an affine trajectory
        # cannot re-enter a region, so midpoint patterns never repeat
        for i in range(6):
            net = random_net(i, m=3, k=5, n=2)
            traj = random_line(i, m=3)
            res = exact_transition_sweep(net, traj)
            times = [0.0, *sorted({e.t for e in res.events}), 1.0]
            mids = [(a + b) / 2 for a, b in zip(times, times[1:])]
            pats = [tuple(network_pattern(net, traj.sample([t])[0]).codes.tolist()) for t in mids]
            assert len(set(pats)) == len(pats)
            assert res.patterns_unique
            assert res.num_patterns == res.num_change_points + 1

    def test_event_order_and_fields(self):
        net = random_net(3)
        res = exact_transition_sweep(net, random_line(3))
        ts = [e.t for e in res.events]
        assert ts == sorted(ts)
        assert all(0.0 < e.t < 1.0 or e.t == 1.0 for e in res.events)
        assert all(e.direction in (-1, 1) for e in res.events)
        assert all(e.boundary in ("tanh_plus_one", "tanh_minus_one") for e in res.events)

    def test_affine_interval_output_interpolates(self):
        net = random_net(5, m=3, k=6, n=2)
        traj = random_line(5, m=3)
        res = exact_transition_sweep(net, traj)
        times = [0.0, *sorted({e.t for e in res.events}), 1.0]
        for a, b in list(zip(times, times[1:]))[:20]:
            if b - a < 1e-9:
                continue
            mid = (a + b) / 2
            oa = forward(net, traj.sample([a])[0]).output
            ob = forward(net, traj.sample([b])[0]).output
            om = forward(net, traj.sample([mid])[0]).output
            assert np.allclose(om, 0.5 * (oa + ob), rtol=1e-9, atol=1e-12)

    def test_exact_lengths_match_polyline(self):
        from xplab.trajectory import layer_image_length

        net = random_net(8, m=3, k=6, n=3)
        traj = random_line(8, m=3)
        res = exact_transition_sweep(net, traj)
        prof = layer_image_length(net, traj, num_points=4097, rel_tol=1e-8)
        assert np.allclose(res.layer_lengths, prof.lengths, rtol=1e-5)
        # polyline shortcuts kinks, never overshoots
        assert (prof.lengths <= res.layer_lengths + 1e-9).all()

    def test_requires_line_and_piecewise_activation(self):
        net = random_net(0)
        arc = make_trajectory("circular_arc", np.ones(4), np.asarray([1.0, 0.0, 0.0, 1.0]))
        with pytest.raises(ValueError):
            exact_transition_sweep(net, arc)
        tanh_spec = NetworkSpec(
            input_dim=2, hidden_widths=(3,), output_dim=1,
            activation="tanh", sigma_w_sq=1.0, sigma_b_sq=0.0, seed=0,
        )
        with pytest.raises(ValueError):
            exact_transition_sweep(init_network(tanh_spec), make_trajectory("line", [0.0, 0.0], [1.0, 1.0]))

    def test_output_sign_changes_counted(self):
        # output = x - 0.5 on [0, 1]: one sign flip, no hidden transitions
        net = manual_network([[[1.0]], [[1.0]]], [[10.0], [-10.5]], act="relu")
        res = exact_transition_sweep(net, make_trajectory("line", [0.0], [1.0]))
        assert res.num_transitions == 0
        assert res.output_sign_changes == 1


class TestCurvedCount:
    def test_line_matches_exact_sweep(self):
        for i in range(6):
            net = random_net(i, m=3, k=6, n=2)
            traj = random_line(i, m=3)
            exact = exact_transition_sweep(net, traj)
            times = sorted({e.t for e in exact.events})
            gap = min((b - a for a, b in zip(times, times[1:])), default=1.0)
            t_tol = 2.0**-14
            if gap > 2 * t_tol:
                grid = count_transitions_curved(net, traj, t_tol=t_tol)
                assert grid.num_transitions == exact.num_transitions
                assert grid.method == "adaptive_bisection"

    def test_zero_network_arc(self):
        spec = NetworkSpec(
            input_dim=2, hidden_widths=(4,), output_dim=1,
            activation="hard_tanh", sigma_w_sq=0.0, sigma_b_sq=0.0, seed=0,
        )
        arc = make_trajectory("circular_arc", [1.0, 0.0], [0.0, 1.0])
        res = count_transitions_curved(init_network(spec), arc, t_tol=1e-3)
        assert res.num_transitions == 0
        assert res.num_patterns == 1

    def test_monotone_in_tolerance(self):
        net = random_net(2, k=8, n=2)
        g = stream(2, "arc")
        arc = make_trajectory("circular_arc", g.normal(size=4), g.normal(size=4))
        counts = [
            count_transitions_curved(net, arc, t_tol=tol).num_transitions
            for tol in (1e-2, 1e-3, 1e-4, 1e-5)
        ]
        assert counts == sorted(counts)

    def test_depth_growth_positive_slope(self):
        # deeper hard-tanh stacks undergo more transitions along the same arc
        g = stream(6, "depth_arc")
        arc = make_trajectory("circular_arc", g.normal(size=8), g.normal(size=8))
        depths = [2, 4, 6, 8]
        mean_t = []
        for n in depths:
            counts = []
            for i in range(3):
                spec = NetworkSpec(
                    input_dim=8, hidden_widths=(32,) * n, output_dim=1,
                    activation="hard_tanh", sigma_w_sq=8.0, sigma_b_sq=0.0,
                    seed=child_seed(6, n, i),
                )
                counts.append(count_transitions_curved(init_network(spec), arc, t_tol=1e-4).num_transitions)
            mean_t.append(np.mean(counts))
        slope, _, _ = linear_fit(depths, np.log(mean_t))
        assert slope > 0

    def test_events_returned_when_requested(self):
        net = random_net(4, m=2, k=4, n=1)
        g = stream(4, "ev")
        arc = make_trajectory("circular_arc", g.normal(size=2), g.normal(size=2))
        res = count_transitions_curved(net, arc, t_tol=1e-4, keep_events=True)
        assert len(res.events) == res.num_transitions
        assert all(0.0 <= e.t <= 1.0 for e in res.events)

    def test_tolerance_floor(self):
        net = random_net(0, m=2, k=3, n=1)
        traj = make_trajectory("line", [0.0, 0.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            count_transitions_curved(net, traj, t_tol=2.0**-41)
        with pytest.raises(ValueError):
            count_transitions_curved(net, traj, t_tol=0.0)


class TestDichotomies:
    def test_coincident_anchors_scalar_sweep_structure(self):
        # W0 == W1 collapses the circle to W0 (cos + sin)(2 pi t): a scalar
        # multiple of one matrix. For a bias-free relu net, positive
        # homogeneity pins the output signs on each side of the scalar's
        # zero crossing: one labelling per open half
        spec = NetworkSpec(
            input_dim=6, hidden_widths=(8, 8), output_dim=1,
            activation="relu", sigma_w_sq=4.0, sigma_b_sq=0.0, seed=12,
        )
        net = init_network(spec)
        w0 = net.layers[0][0]
        xs = stream(12, "pts").normal(size=(9, 6))
        labels = weight_circle_labellings(net, 0, w0, w0, xs, num_t=512)
        ts = np.arange(512) / 512
        c = np.cos(2 * np.pi * ts) + np.sin(2 * np.pi * ts)
        assert len({row.tobytes() for row in labels[c > 1e-6]}) == 1
        assert len({row.tobytes() for row in labels[c < -1e-6]}) == 1

    def test_constant_labels_give_one_dichotomy(self):
        # an output bias that dominates every pre-activation pins the sign
        spec = NetworkSpec(
            input_dim=4, hidden_widths=(6,), output_dim=1,
            activation="hard_tanh", sigma_w_sq=4.0, sigma_b_sq=0.0, seed=5,
        )
        net = init_network(spec)
        layers = list(net.layers)
        w_out, _ = layers[-1]
        layers[-1] = (w_out, np.asarray([1e6]))
        net = net.with_layers(layers)
        g = stream(5, "anchors")
        w0 = g.normal(size=net.layers[0][0].shape)
        w1 = g.normal(size=net.layers[0][0].shape)
        labels = weight_circle_labellings(net, 0, w0, w1, stream(5, "pts").normal(size=(7, 4)), num_t=256)
        assert len({row.tobytes() for row in labels}) == 1

    def test_counting_bounds(self):
        spec = NetworkSpec(
            input_dim=8, hidden_widths=(16, 16), output_dim=1,
            activation="hard_tanh", sigma_w_sq=8.0, sigma_b_sq=0.0, seed=3,
        )
        xs = stream(3, "pts").normal(size=(5, 8))
        res = weight_sweep_dichotomies(spec, 0, xs, num_t=2048, seed=9)
        assert 1 <= res.num_dichotomies <= 2**5
        assert res.num_dichotomies <= res.num_label_transitions + 1
        assert res.s == 5

    def test_sweep_layer_validation(self):
        spec = NetworkSpec(
            input_dim=4, hidden_widths=(4, 4), output_dim=1,
            activation="hard_tanh", sigma_w_sq=8.0, sigma_b_sq=0.0, seed=0,
        )
        xs = np.zeros((3, 4)) + 0.5
        with pytest.raises(ValueError):
            weight_sweep_dichotomies(spec, 2, xs, num_t=16)
        with pytest.raises(ValueError):
            weight_sweep_dichotomies(spec, -1, xs, num_t=16)

    def test_remaining_depth_table_single_layer(self):
        spec = NetworkSpec(
            input_dim=4, hidden_widths=(8,), output_dim=1,
            activation="hard_tanh", sigma_w_sq=8.0, sigma_b_sq=0.0, seed=2,
        )
        xs = stream(2, "pts").normal(size=(6, 4))
        rows = remaining_depth_dichotomies(spec, xs, num_t=512, seed=4)
        assert len(rows) == 1
        assert rows[0].sweep_layer == 0
        assert rows[0].remaining_depth == 0

    def test_remaining_depth_keys(self):
        spec = NetworkSpec(
            input_dim=4, hidden_widths=(8, 8, 8), output_dim=1,
            activation="hard_tanh", sigma_w_sq=8.0, sigma_b_sq=0.0, seed=2,
        )
        xs = stream(2, "pts").normal(size=(4, 4))
        rows = remaining_depth_dichotomies(spec, xs, num_t=256, seed=4)
        assert [r.sweep_layer for r in rows] == [0, 1, 2]
        assert [r.remaining_depth for r in rows] == [2, 1, 0]

    def test_remaining_depth_zero_row_is_minimal(self):
        # sweeping the output-adjacent hidden layer has the least expressive
        # power: its ensemble-mean dichotomy count is the smallest row
        xs = stream(44, "pts").normal(size=(10, 32))
        sums = np.zeros(4)
        for i in range(10):
            spec = NetworkSpec(
                input_dim=32, hidden_widths=(32,) * 4, output_dim=1,
                activation="hard_tanh", sigma_w_sq=8.0, sigma_b_sq=0.0,
                seed=child_seed(44, i),
            )
            rows = remaining_depth_dichotomies(spec, xs, num_t=512, seed=child_seed(44, "anchor", i))
            for r in rows:
                sums[r.remaining_depth] += r.num_dichotomies
        assert sums[0] == sums.min()


class TestRandomWalkBaseline:
    def test_zero_transitions(self):
        assert random_walk_dichotomy_baseline(0, 5, seed=1) == 1

    def test_counting_bound(self):
        for t in (1, 7, 300):
            for s in (1, 3, 15):
                assert random_walk_dichotomy_baseline(t, s, seed=t) <= min(2**s, t + 1)

    def test_mean_matches_independent_simulation(self):
        s, t, n = 15, 10_000, 100
        ours = np.mean([random_walk_dichotomy_baseline(t, s, seed=i) for i in range(n)])
        theirs = np.mean([random_walk_distinct(t, s, py_seed=i) for i in range(n)])
        assert abs(ours - theirs) / theirs < 0.10

    def test_validation(self):
        with pytest.raises(ValueError):
            random_walk_dichotomy_baseline(-1, 5)
        with pytest.raises(ValueError):
            random_walk_dichotomy_baseline(5, 0)


class TestTransitionsVsLength:
    def test_zero_variance_flagged_pairs(self):
        spec = NetworkSpec(
            input_dim=4, hidden_widths=(8,), output_dim=1,
            activation="hard_tanh", sigma_w_sq=0.0, sigma_b_sq=0.0, seed=0,
        )
        traj = make_trajectory("line", np.zeros(4), np.ones(4))
        recs = transitions_vs_length(spec, traj, [1, 2], num_seeds=2)
        assert all(r.length == 0.0 and r.transitions == 0 for r in recs)
        assert np.isnan(pearson([r.length for r in recs], [r.transitions for r in recs]))

    def test_large_weight_transition_growth_rate(self):
        # large-weight regime: total transitions multiply per added layer by
        # a factor of order sqrt(k) (the large-weight growth factor), never
        # exceeding it, and approaching it from below as sigma_w grows
        import math

        from xplab.stats import linear_fit

        k = 64
        log_factor = math.log(math.sqrt(k))
        slopes = []
        for sw2 in (512.0, 131072.0):
            spec = NetworkSpec(
                input_dim=k, hidden_widths=(k,), output_dim=1,
                activation="hard_tanh", sigma_w_sq=sw2, sigma_b_sq=0.0, seed=21,
            )
            g = stream(21, "t4", sw2)
            traj = make_trajectory("line", g.normal(size=k), g.normal(size=k))
            recs = transitions_vs_length(spec, traj, depths=[1, 2, 3, 4], num_seeds=3)
            mean_t = [np.mean([r.transitions for r in recs if r.depth == d]) for d in (1, 2, 3, 4)]
            slope, _, r2 = linear_fit([1, 2, 3, 4], np.log(mean_t))
            assert r2 > 0.99  # clean exponential growth
            assert 0.0 < slope <= 1.25 * log_factor
            slopes.append(slope)
        assert slopes[-1] > slopes[0]  # approaches the factor as sigma_w grows
        assert slopes[-1] >= 0.7 * log_factor

    def test_strong_correlation_moderate_net(self):
        spec = NetworkSpec(
            input_dim=16, hidden_widths=(16,), output_dim=1,
            activation="hard_tanh", sigma_w_sq=16.0, sigma_b_sq=0.0, seed=9,
        )
        g = stream(9, "tl")
        traj = make_trajectory("line", g.normal(size=16), g.normal(size=16))
        recs = transitions_vs_length(spec, traj, [1, 2, 3, 4, 5], num_seeds=6)
        depths = sorted({r.depth for r in recs})
        mean_len = [np.mean([r.length for r in recs if r.depth == d]) for d in depths]
        mean_t = [np.mean([r.transitions for r in recs if r.depth == d]) for d in depths]
        assert pearson(mean_len, mean_t) > 0.99


@given(st.integers(1, 40), st.integers(1, 16), st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_random_walk_bound_property(num_transitions, s, seed):
    count = random_walk_dichotomy_baseline(num_transitions, s, seed=seed)
    assert 1 <= count <= min(2**s, num_transitions + 1)
