"""Experiment runner: every measurement as a subcommand.

Options resolve in three layers: built-in defaults, then a JSON/TOML config
file (--config), then command-line flags. Unknown config keys are rejected.
Outputs land in a run directory with a manifest recording the resolved
config and its hash; CSV and SVG outputs are deterministic given the config.
Exit codes: 0 success, 1 config/usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, load_idx, shuffle_split, synth_blobs
from .net import NetworkSpec, init_network, save_network
from .plotsvg import Axes, emit_plot
from .regions import (
    decompose_input_plane,
    region_bound,
    region_recurrence,
    render_regions_svg,
)
from .rng import child_seed, stream
from .sweep import (
    exact_transition_sweep,
    remaining_depth_dichotomies,
    transitions_vs_length,
    weight_sweep_dichotomies,
)
from .train import (
    TrainConfig,
    layer_noise_robustness,
    sgd_train,
    train_single_layer_experiment,
    trajectory_length_during_training,
)
from .trajectory import growth_ratio_curve, make_trajectory, theoretical_growth_bounds


class ConfigError(ValueError):
    pass


def _parse_list(text, cast):
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    return [cast(v) for v in str(text).split(",") if v != ""]


def int_list(text):
    return _parse_list(text, int)


def float_list(text):
    return _parse_list(text, float)


# option tables: name -> (type, default, help); None default means required
_NET_OPTS = {
    "width": (int, 8, "hidden layer width k"),
    "depth": (int, 2, "number of hidden layers n"),
    "input_dim": (int, None, "input dimension m (default: width)"),
    "output_dim": (int, 1, "output dimension"),
    "activation": (str, "hard_tanh", "relu | hard_tanh | tanh"),
    "sigma_w_sq": (float, 8.0, "weight variance scale"),
    "sigma_b_sq": (float, 0.0, "bias variance"),
    "seed": (int, 0, "base seed"),
}
_DATA_OPTS = {
    "classes": (int, 10, "synthetic blob classes"),
    "data_dim": (int, 16, "blob input dimension"),
    "per_class": (int, 120, "points per class"),
    "spread": (float, 0.12, "blob standard deviation"),
    "test_fraction": (float, 0.25, "held-out fraction"),
    "idx_images": (str, "", "IDX image file (overrides blobs)"),
    "idx_labels": (str, "", "IDX label file"),
    "idx_limit": (int, 0, "IDX row cap (0 = all)"),
}
_TRAIN_OPTS = {
    "learning_rate": (float, 0.1, "SGD learning rate"),
    "batch_size": (int, 32, "minibatch size"),
    "epochs": (int, 20, "training epochs"),
    "loss": (str, "softmax_cross_entropy", "softmax_cross_entropy | squared_error"),
    "eval_every": (int, 200, "steps between history records"),
}

SUBCOMMANDS: dict[str, dict] = {
    "traj-growth": {
        **_NET_OPTS,
        "sigma_w_sqs": (float_list, [4.0, 16.0], "weight variance grid"),
        "seeds": (int, 30, "ensemble size"),
        "kind": (str, "circular_arc", "trajectory kind"),
        "num_points": (int, 257, "initial polyline points"),
        "rel_tol": (float, 1e-3, "length refinement tolerance"),
    },
    "growth-bounds": {
        "ks": (int_list, [100], "widths"),
        "sigma_ws": (float_list, [2.0, 4.0], "weight stds"),
        "sigma_b": (float, 0.0, "bias std"),
        "activation": (str, "hard_tanh", "relu | hard_tanh"),
    },
    "transitions": {
        **_NET_OPTS,
        "depths": (int_list, [1, 2, 3, 4], "depth grid"),
        "seeds": (int, 10, "seeds per depth"),
    },
    "trans-vs-length": {
        **_NET_OPTS,
        "widths": (int_list, [8, 64], "width grid"),
        "sigma_w_sqs": (float_list, [8.0, 64.0], "weight variance grid"),
        "depths": (int_list, [1, 2, 3, 4, 5, 6, 7, 8], "depth grid"),
        "seeds": (int, 20, "seeds per cell"),
    },
    "dichotomies": {
        **_NET_OPTS,
        "depths": (int_list, [2, 4, 6, 8], "total depth grid"),
        "sweep_layer": (int, 0, "layer whose weights sweep"),
        "s": (int, 15, "number of datapoints"),
        "num_t": (int, 1 << 16, "sweep sample count"),
        "seeds": (int, 20, "ensemble size"),
    },
    "remaining-depth": {
        **_NET_OPTS,
        "depths": (int_list, [2, 4, 6, 8], "total depth grid"),
        "s": (int, 15, "number of datapoints"),
        "num_t": (int, 1 << 16, "sweep sample count"),
        "seeds": (int, 20, "ensemble size"),
    },
    "regions2d": {
        "width": (int, 4, "hidden layer width"),
        "depth": (int, 3, "hidden layers"),
        "activation": (str, "relu", "relu | hard_tanh"),
        "sigma_w_sq": (float, 2.0, "weight variance scale"),
        "sigma_b_sq": (float, 1.0, "bias variance"),
        "seed": (int, 0, "network seed"),
        "box": (float, 0.0, "half side of the box (0 = auto)"),
        "max_cells": (int, 200_000, "cell cap"),
    },
    "region-bounds": {
        "k": (int, None, "number of hyperplanes"),
        "m": (int, None, "dimension"),
    },
    "train-noise": {
        **_NET_OPTS,
        **_DATA_OPTS,
        **_TRAIN_OPTS,
        "magnitudes": (float_list, [0.0, 0.1, 0.25, 0.5, 1.0], "relative noise levels"),
        "noise_seeds": (int, 5, "noise draws per cell"),
    },
    "train-single-layer": {
        **_NET_OPTS,
        **_DATA_OPTS,
        **_TRAIN_OPTS,
    },
    "train-trajlen": {
        **_NET_OPTS,
        **_DATA_OPTS,
        **_TRAIN_OPTS,
    },
    "selftest": {},
}


def worker_count() -> int:
    env = os.environ.get("XPLAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def pmap(fn, items):
    """Map over independent grid cells; results keep input order."""
    items = list(items)
    if len(items) <= 1 or worker_count() == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(fn, items))


def write_csv(path, header: list[str], rows) -> None:
    def fmt(v) -> str:
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_bytes()
    if p.suffix.lower() == ".toml":
        try:
            import tomllib as toml  # py311+
        except ModuleNotFoundError:
            import tomli as toml
        return toml.loads(text.decode("utf-8"))
    return json.loads(text.decode("utf-8"))


def resolve_options(sub: str, cli_values: dict, config_path: str | None) -> dict:
    table = SUBCOMMANDS[sub]
    resolved = {}
    for name, (cast, default, _help) in table.items():
        resolved[name] = default
    if config_path:
        file_cfg = _load_config_file(config_path)
        for key, value in file_cfg.items():
            key = key.replace("-", "_")
            if key not in table:
                raise ConfigError(f"unknown config key {key!r} for {sub}")
            resolved[key] = table[key][0](value)
    for key, value in cli_values.items():
        if value is not None:
            resolved[key] = value
    missing = [k for k, v in resolved.items() if v is None and table[k][1] is None and k != "input_dim"]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return resolved


def _spec_from(opts: dict, input_dim: int | None = None, output_dim: int | None = None) -> NetworkSpec:
    m = input_dim if input_dim is not None else (opts.get("input_dim") or opts["width"])
    return NetworkSpec(
        input_dim=m,
        hidden_widths=(opts["width"],) * opts["depth"],
        output_dim=output_dim if output_dim is not None else opts.get("output_dim", 1),
        activation=opts["activation"],
        sigma_w_sq=opts["sigma_w_sq"],
        sigma_b_sq=opts["sigma_b_sq"],
        seed=opts["seed"],
    )


def _load_dataset(opts: dict) -> tuple[Dataset, Dataset]:
    if opts["idx_images"]:
        limit = opts["idx_limit"] or None
        full = load_idx(opts["idx_images"], opts["idx_labels"], limit=limit)
    else:
        full = synth_blobs(opts["classes"], opts["data_dim"], opts["per_class"], opts["spread"], opts["seed"])
    return shuffle_split(full, opts["test_fraction"], opts["seed"])


def _write_manifest(out_dir: Path, sub: str, opts: dict) -> None:
    payload = json.dumps({"subcommand": sub, "config": opts}, sort_keys=True, default=str)
    manifest = {
        "subcommand": sub,
        "config": opts,
        "config_sha256": hashlib.sha256(payload.encode()).hexdigest(),
        "version": __version__,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _arc_between_random(dim: int, seed: int):
    g = stream(seed, "cli_traj")
    x0 = g.normal(size=dim)
    x1 = g.normal(size=dim)
    x0 /= np.linalg.norm(x0)
    x1 -= (x1 @ x0) * x0
    x1 /= np.linalg.norm(x1)
    return make_trajectory("circular_arc", x0, x1)


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------


def run_region_bounds(opts, out_dir: Path | None) -> int:
    bound = region_bound(opts["k"], opts["m"])
    exact = region_recurrence(opts["k"], opts["m"])
    print(bound)
    if out_dir is not None:
        report = {"k": opts["k"], "m": opts["m"], "bound": bound, "exact_generic": exact}
        (out_dir / "arrangement.json").write_text(json.dumps(report, sort_keys=True) + "\n")
    return 0


def run_regions2d(opts, out_path: Path) -> int:
    spec = NetworkSpec(
        input_dim=2,
        hidden_widths=(opts["width"],) * opts["depth"],
        output_dim=1,
        activation=opts["activation"],
        sigma_w_sq=opts["sigma_w_sq"],
        sigma_b_sq=opts["sigma_b_sq"],
        seed=opts["seed"],
    )
    net = init_network(spec)
    box = None
    if opts["box"] > 0:
        b = opts["box"]
        box = (-b, b, -b, b)
    dec = decompose_input_plane(net, box=box, max_cells=opts["max_cells"])
    if out_path.suffix == ".svg":
        svg_path, csv_path = out_path, out_path.with_suffix(".cells.csv")
    else:
        out_path.mkdir(parents=True, exist_ok=True)
        svg_path, csv_path = out_path / "regions.svg", out_path / "cells.csv"
    render_regions_svg(dec.cells, svg_path, box=dec.box)
    rows = []
    for cid, cell in enumerate(dec.cells):
        pattern = "".join(str(int(c)) if int(c) >= 0 else "m" for c in cell.pattern.codes)
        edge_layers = ";".join(str(int(t)) for t in cell.edge_layers)
        rows.append((cid, cell.area, pattern, edge_layers))
    write_csv(csv_path, ["cell_id", "area", "pattern", "depth_introduced_edges"], rows)
    print(f"{len(dec.cells)} cells ({'complete' if dec.complete else 'partial'}), {dec.num_slivers_discarded} slivers")
    return 0


def run_growth_bounds(opts, out_dir: Path) -> int:
    rows = []
    for k in opts["ks"]:
        for sw in opts["sigma_ws"]:
            gb = theoretical_growth_bounds(k, sw, opts["sigma_b"], opts["activation"])
            rows.append((k, sw, opts["sigma_b"], opts["activation"], gb.lower_ratio, gb.upper_ratio))
            print(f"k={k} sigma_w={sw}: [{gb.lower_ratio:.6g}, {gb.upper_ratio:.6g}]")
    write_csv(out_dir / "bounds.csv", ["k", "sigma_w", "sigma_b", "activation", "lower", "upper"], rows)
    print("note: lower bounds assume a near-unit perpendicular trajectory component (random circular arcs)")
    return 0


def run_traj_growth(opts, out_dir: Path) -> int:
    spec = _spec_from(opts)
    traj = _arc_between_random(spec.input_dim, opts["seed"])
    series = []
    for sw in opts["sigma_w_sqs"]:
        member = NetworkSpec(
            input_dim=spec.input_dim,
            hidden_widths=spec.hidden_widths,
            output_dim=spec.output_dim,
            activation=spec.activation,
            sigma_w_sq=sw,
            sigma_b_sq=spec.sigma_b_sq,
            seed=spec.seed,
        )
        curve = growth_ratio_curve(member, traj, opts["seeds"], num_points=opts["num_points"], rel_tol=opts["rel_tol"])
        rows = []
        for d in range(member.depth + 1):
            ratio = curve.ratios[d - 1] if d >= 1 else float("nan")
            r_lo = curve.ratio_ci[d - 1, 0] if d >= 1 else float("nan")
            r_hi = curve.ratio_ci[d - 1, 1] if d >= 1 else float("nan")
            excl = int(curve.excluded[d - 1]) if d >= 1 else 0
            rows.append(
                (d, float(curve.mean_lengths[d]), float(curve.length_ci[d, 0]), float(curve.length_ci[d, 1]),
                 float(ratio), float(r_lo), float(r_hi), excl)
            )
        write_csv(
            out_dir / f"growth_sw{sw:g}.csv",
            ["layer", "mean_length", "ci_lo", "ci_hi", "ratio", "ratio_ci_lo", "ratio_ci_hi", "excluded"],
            rows,
        )
        series.append((f"sigma_w^2={sw:g}", list(range(member.depth + 1)), [max(v, 1e-300) for v in curve.mean_lengths]))
    emit_plot(series, Axes(xlabel="layer", ylabel="mean image length", title="trajectory length growth", log_y=True), out_dir / "growth.svg")
    return 0


def run_transitions(opts, out_dir: Path) -> int:
    spec = _spec_from(opts)
    g = stream(opts["seed"], "cli_line")
    x0 = g.normal(size=spec.input_dim)
    x1 = g.normal(size=spec.input_dim)
    traj = make_trajectory("line", x0, x1)
    records = transitions_vs_length(spec, traj, opts["depths"], opts["seeds"])
    rows = [(r.depth, r.width, r.sigma_w_sq, r.seed, r.length, r.transitions, r.patterns) for r in records]
    write_csv(out_dir / "summary.csv", ["depth", "width", "sigma_w_sq", "seed", "length", "transitions", "patterns"], rows)
    first = NetworkSpec(
        input_dim=spec.input_dim,
        hidden_widths=(spec.hidden_widths[0],) * opts["depths"][0],
        output_dim=spec.output_dim,
        activation=spec.activation,
        sigma_w_sq=spec.sigma_w_sq,
        sigma_b_sq=spec.sigma_b_sq,
        seed=child_seed(spec.seed, "tvl", opts["depths"][0], 0),
    )
    res = exact_transition_sweep(init_network(first), traj)
    write_csv(
        out_dir / "events.csv",
        ["t", "layer", "neuron", "boundary", "direction"],
        [(e.t, e.layer, e.neuron, e.boundary, e.direction) for e in res.events],
    )
    depths = sorted({r.depth for r in records})
    mean_t = [float(np.mean([r.transitions for r in records if r.depth == d])) for d in depths]
    emit_plot(
        [("mean transitions", depths, [max(v, 1e-300) for v in mean_t])],
        Axes(xlabel="depth", ylabel="transitions", title="transitions vs depth", log_y=True),
        out_dir / "transitions.svg",
    )
    return 0


def run_trans_vs_length(opts, out_dir: Path) -> int:
    def cell(args):
        width, sw = args
        spec = NetworkSpec(
            input_dim=opts["input_dim"] or width,
            hidden_widths=(width,),
            output_dim=opts["output_dim"],
            activation=opts["activation"],
            sigma_w_sq=sw,
            sigma_b_sq=opts["sigma_b_sq"],
            seed=child_seed(opts["seed"], "cell", width, sw),
        )
        g = stream(spec.seed, "cli_line")
        traj = make_trajectory("line", g.normal(size=spec.input_dim), g.normal(size=spec.input_dim))
        return transitions_vs_length(spec, traj, opts["depths"], opts["seeds"])

    grid = [(w, sw) for w in opts["widths"] for sw in opts["sigma_w_sqs"]]
    rows = []
    series = []
    for (width, sw), records in zip(grid, pmap(cell, grid)):
        rows.extend((r.depth, r.width, r.sigma_w_sq, r.seed, r.length, r.transitions, r.patterns) for r in records)
        pts = sorted((r.length, r.transitions) for r in records if r.length > 0 and r.transitions > 0)
        series.append((f"k={width} sw2={sw:g}", [p[0] for p in pts], [p[1] for p in pts]))
    write_csv(out_dir / "summary.csv", ["depth", "width", "sigma_w_sq", "seed", "length", "transitions", "patterns"], rows)
    emit_plot(series, Axes(xlabel="final layer length", ylabel="transitions", title="transitions vs length", log_y=True), out_dir / "trans_vs_length.svg")
    return 0


_DICH_HEADER = ["sweep_layer", "remaining_depth", "s", "dichotomies", "label_transitions", "seed"]


def _dichotomy_grid(opts, per_cell) -> list[tuple]:
    """Run per_cell(spec, seed_idx) over the (depth, seed) grid; flat rows."""
    def cell(args):
        depth, seed_idx = args
        spec = NetworkSpec(
            input_dim=opts["input_dim"] or opts["width"],
            hidden_widths=(opts["width"],) * depth,
            output_dim=opts["output_dim"],
            activation=opts["activation"],
            sigma_w_sq=opts["sigma_w_sq"],
            sigma_b_sq=opts["sigma_b_sq"],
            seed=child_seed(opts["seed"], "dich", depth, seed_idx),
        )
        return [
            (r.sweep_layer, r.remaining_depth, r.s, r.num_dichotomies, r.num_label_transitions, seed_idx)
            for r in per_cell(spec, seed_idx)
        ]

    grid = [(depth, i) for depth in opts["depths"] for i in range(opts["seeds"])]
    rows = []
    for chunk in pmap(cell, grid):
        rows.extend(chunk)
    return rows


def run_dichotomies(opts, out_dir: Path) -> int:
    s_pts = stream(opts["seed"], "dich_data").normal(size=(opts["s"], opts["input_dim"] or opts["width"]))

    def per_cell(spec, seed_idx):
        layer = min(opts["sweep_layer"], spec.depth - 1)
        return [
            weight_sweep_dichotomies(
                spec, layer, s_pts, num_t=opts["num_t"], seed=child_seed(spec.seed, "anchors", layer)
            )
        ]

    write_csv(out_dir / "dichotomies.csv", _DICH_HEADER, _dichotomy_grid(opts, per_cell))
    return 0


def run_remaining_depth(opts, out_dir: Path) -> int:
    s_pts = stream(opts["seed"], "dich_data").normal(size=(opts["s"], opts["input_dim"] or opts["width"]))

    def per_cell(spec, seed_idx):
        return remaining_depth_dichotomies(spec, s_pts, num_t=opts["num_t"], seed=child_seed(spec.seed, "anchors"))

    write_csv(out_dir / "dichotomies.csv", _DICH_HEADER, _dichotomy_grid(opts, per_cell))
    return 0


def _train_setup(opts):
    train_set, test_set = _load_dataset(opts)
    spec = _spec_from(opts, input_dim=train_set.dim, output_dim=train_set.num_classes)
    config = TrainConfig(
        learning_rate=opts["learning_rate"],
        batch_size=opts["batch_size"],
        epochs=opts["epochs"],
        loss=opts["loss"],
        eval_every=opts["eval_every"],
        seed=opts["seed"],
    )
    return spec, train_set, test_set, config


def run_train_noise(opts, out_dir: Path) -> int:
    spec, train_set, test_set, config = _train_setup(opts)
    net, _ = sgd_train(init_network(spec), train_set, config, test_set=test_set)
    save_network(net, out_dir / "trained.xpnl")
    acc = layer_noise_robustness(net, test_set, opts["magnitudes"], num_seeds=opts["noise_seeds"], seed=opts["seed"])
    rows = [
        (layer, mag, float(acc[layer, mi]))
        for layer in range(acc.shape[0])
        for mi, mag in enumerate(opts["magnitudes"])
    ]
    write_csv(out_dir / "noise.csv", ["layer", "magnitude", "accuracy"], rows)
    series = [
        (f"layer {layer}", opts["magnitudes"], list(map(float, acc[layer])))
        for layer in range(acc.shape[0])
    ]
    emit_plot(series, Axes(xlabel="relative noise", ylabel="test accuracy", title="noise robustness by layer"), out_dir / "noise.svg")
    return 0


def run_train_single_layer(opts, out_dir: Path) -> int:
    spec, train_set, test_set, config = _train_setup(opts)
    results = train_single_layer_experiment(spec, train_set, test_set, config)
    rows = [(r.layer, r.train_accuracy, r.test_accuracy) for r in results]
    write_csv(out_dir / "single_layer.csv", ["layer", "train_acc", "test_acc"], rows)
    emit_plot(
        [
            ("train", [r.layer for r in results], [r.train_accuracy for r in results]),
            ("test", [r.layer for r in results], [r.test_accuracy for r in results]),
        ],
        Axes(xlabel="trained layer", ylabel="accuracy", title="single trained layer"),
        out_dir / "single_layer.svg",
    )
    return 0


def run_train_trajlen(opts, out_dir: Path) -> int:
    spec, train_set, test_set, config = _train_setup(opts)
    result = trajectory_length_during_training(spec, train_set, test_set, config)
    rows = []
    for si, step in enumerate(result.steps):
        for layer in range(spec.depth + 1):
            rows.append(
                (
                    step,
                    result.train_accuracy[si],
                    result.test_accuracy[si],
                    layer,
                    float(result.weight_scales[si][layer]) if layer <= spec.depth else float("nan"),
                    float(result.lengths_data[si][layer]),
                )
            )
    write_csv(out_dir / "history.csv", ["step", "train_acc", "test_acc", "layer", "weight_scale", "traj_len"], rows)
    rows_r = [
        (step, layer, float(result.lengths_random[si][layer]))
        for si, step in enumerate(result.steps)
        for layer in range(spec.depth + 1)
    ]
    write_csv(out_dir / "history_random.csv", ["step", "layer", "traj_len"], rows_r)
    series = [
        (f"layer {layer}", result.steps, [max(float(v), 1e-300) for v in result.lengths_data[:, layer]])
        for layer in range(1, spec.depth + 1)
    ]
    emit_plot(series, Axes(xlabel="step", ylabel="trajectory length", title="length during training", log_y=True), out_dir / "trajlen.svg")
    return 0


def run_selftest(_opts, _out_dir) -> int:
    from . import selftest

    return selftest.run()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xplab", description=__doc__, exit_on_error=False)
    subs = parser.add_subparsers(dest="subcommand")
    for sub, table in SUBCOMMANDS.items():
        sp = subs.add_parser(sub, exit_on_error=False)
        sp.add_argument("--config", default=None, help="JSON or TOML config file")
        sp.add_argument("--out", default=None, help="output directory (regions2d also accepts an .svg path)")
        for name, (cast, default, help_text) in table.items():
            sp.add_argument(
                f"--{name.replace('_', '-')}",
                dest=name,
                type=cast if cast is not bool else int,
                default=None,
                help=f"{help_text} (default {default})",
            )
    return parser


_RUNNERS = {
    "region-bounds": run_region_bounds,
    "regions2d": run_regions2d,
    "growth-bounds": run_growth_bounds,
    "traj-growth": run_traj_growth,
    "transitions": run_transitions,
    "trans-vs-length": run_trans_vs_length,
    "dichotomies": run_dichotomies,
    "remaining-depth": run_remaining_depth,
    "train-noise": run_train_noise,
    "train-single-layer": run_train_single_layer,
    "train-trajlen": run_train_trajlen,
    "selftest": run_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except (argparse.ArgumentError, SystemExit):
        parser.print_usage(sys.stderr)
        return 1
    if not args.subcommand:
        parser.print_usage(sys.stderr)
        return 1
    sub = args.subcommand
    try:
        cli_values = {k: v for k, v in vars(args).items() if k in SUBCOMMANDS[sub]}
        opts = resolve_options(sub, cli_values, args.config)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if sub == "selftest":
            return run_selftest(opts, None)
        if sub == "region-bounds" and args.out is None:
            return run_region_bounds(opts, None)
        out = Path(args.out) if args.out else Path("runs") / sub
        if sub == "regions2d" and out.suffix == ".svg":
            out.parent.mkdir(parents=True, exist_ok=True)
            return run_regions2d(opts, out)
        out.mkdir(parents=True, exist_ok=True)
        _write_manifest(out, sub, opts)
        return _RUNNERS[sub](opts, out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
