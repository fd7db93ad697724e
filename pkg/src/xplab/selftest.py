"""Quick invariant suite behind the `xplab selftest` subcommand.

Not a substitute for the pytest suite: these are fast structural checks that
catch a broken install or numerically misbehaving environment.
"""
from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .data import synth_blobs, write_idx, load_idx
from .net import NetworkSpec, forward, init_network, load_network, network_pattern, save_network
from .regions import decompose_input_plane, region_bound, region_recurrence
from .sweep import exact_transition_sweep, random_walk_dichotomy_baseline
from .trajectory import analytic_input_length, layer_image_length, make_trajectory


def _check(name: str, ok: bool) -> bool:
    print(f"{'ok' if ok else 'FAIL'}  {name}")
    return ok


def run() -> int:
    results = []
    spec = NetworkSpec(
        input_dim=3, hidden_widths=(5, 5), output_dim=2, activation="hard_tanh",
        sigma_w_sq=8.0, sigma_b_sq=1.0, seed=7,
    )
    net = init_network(spec)

    trace = forward(net, np.ones(3))
    recomputed = trace.activations[0]
    ok = True
    for d, (w, b) in enumerate(net.layers):
        h = w @ recomputed + b
        ok &= bool(np.allclose(h, trace.pre_activations[d], rtol=1e-12, atol=1e-12))
        if d < spec.depth:
            recomputed = np.clip(h, -1, 1)
    results.append(_check("forward trace satisfies the layer recursion", ok))

    net2 = init_network(spec)
    same = all(np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) for a, b in zip(net.layers, net2.layers))
    results.append(_check("initialization deterministic from (spec, seed)", same))

    results.append(_check("region bound equals recurrence up to 20", all(
        region_bound(k, m) == region_recurrence(k, m) for k in range(21) for m in range(21)
    )))

    traj = make_trajectory("line", np.zeros(3), np.ones(3))
    profile = layer_image_length(net, traj, num_points=65, rel_tol=1e-6)
    rel = abs(profile.lengths[0] - analytic_input_length(traj)) / analytic_input_length(traj)
    results.append(_check("input polyline length matches the analytic value", rel < 1e-6))

    res = exact_transition_sweep(net, traj)
    results.append(_check("exact sweep pattern uniqueness (affine trajectory)", res.patterns_unique))

    pat = network_pattern(net, np.zeros(3))
    results.append(_check("pattern length equals total hidden units", len(pat) == spec.total_hidden))

    results.append(_check("random walk respects the counting bound", all(
        random_walk_dichotomy_baseline(t, 7, seed=s) <= min(2**7, t + 1)
        for t in (0, 5, 200) for s in (0, 1)
    )))

    spec2 = NetworkSpec(
        input_dim=2, hidden_widths=(4,), output_dim=1, activation="relu",
        sigma_w_sq=2.0, sigma_b_sq=1.0, seed=3,
    )
    dec = decompose_input_plane(init_network(spec2))
    results.append(_check("single layer cell count is 1 + k + C(k,2)", len(dec.cells) == region_recurrence(4, 2)))

    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / "net.xpnl"
        save_network(net, p)
        loaded = load_network(p)
        ok = loaded.spec == spec and all(
            np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) for a, b in zip(net.layers, loaded.layers)
        )
        results.append(_check("binary container round trip", ok))

        blobs = synth_blobs(2, 3, 4, 0.1, seed=5)
        img = (blobs.inputs * 100).astype(np.uint8).reshape(8, 1, 3)
        write_idx(img, blobs.labels, Path(tmp) / "i.idx", Path(tmp) / "l.idx")
        back = load_idx(Path(tmp) / "i.idx", Path(tmp) / "l.idx")
        results.append(_check("idx round trip", bool(np.allclose(back.inputs * 255, img.reshape(8, 3)))))

    failed = results.count(False)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 2


if __name__ == "__main__":
    raise SystemExit(run())
