"""Transition and dichotomy counting along input and weight trajectories.

Along a line trajectory every pre-activation is affine in t within an
interval of constant activation pattern, so threshold crossings have exact
roots; ``exact_transition_sweep`` walks these events one by one. Curved
trajectories fall back to a dyadic grid at resolution t_tol whose count is a
lower bound on the true transition count (events below t_tol can cancel).

Weight sweeps move one layer's weight matrix along a great circle
W(t) = W0 cos(2 pi t) + W1 sin(2 pi t) between two independent draws and
count the binary labellings (dichotomies) induced on a fixed set of inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .net import Network, NetworkSpec, forward, hidden_codes, init_network, phi
from .rng import child_seed, stream
from .trajectory import Trajectory, layer_image_length

BOUNDARIES = ("relu_zero", "tanh_plus_one", "tanh_minus_one")
_B_RELU, _B_PLUS, _B_MINUS = 0, 1, 2
_BOUNDARY_NAME = {_B_RELU: "relu_zero", _B_PLUS: "tanh_plus_one", _B_MINUS: "tanh_minus_one"}

ROOT_TOL = 1e-12  # events closer than this in t are simultaneous
MIN_T_TOL = 2.0**-40


@dataclass(frozen=True)
class TransitionEvent:
    t: float
    layer: int
    neuron: int
    boundary: str
    direction: int


@dataclass
class SweepResult:
    """Counts from one sweep.

    num_transitions counts hidden-neuron boundary crossings; the output
    unit's sign flips are reported separately in output_sign_changes so both
    hidden-only and hidden-plus-output counts stay available. For exact line
    sweeps layer_lengths holds the exact per-layer image arc lengths (index 0
    the input line, d the hidden image z(d)): the image is a polyline whose
    vertices are exactly the event points.
    """

    events: list[TransitionEvent]
    num_transitions: int
    num_patterns: int
    patterns_unique: bool
    method: str
    num_change_points: int
    output_sign_changes: int
    layer_lengths: np.ndarray | None = None


_ZOBRIST_CACHE: dict[int, np.ndarray] = {}


def _zobrist(total_neurons: int) -> np.ndarray:
    """Fixed random table for incremental pattern hashing, (neurons, 3)."""
    tab = _ZOBRIST_CACHE.get(total_neurons)
    if tab is None:
        tab = stream(0x5EB0, "zobrist", total_neurons).integers(
            0, 2**64, size=(total_neurons, 3), dtype=np.uint64
        )
        _ZOBRIST_CACHE[total_neurons] = tab
    return tab


def _layer_roots(uh: np.ndarray, vh: np.ndarray, t_low: float, activation: str):
    """Next threshold crossing per neuron in (t_low + ROOT_TOL, 1] (inf if none).

    Grazing contacts (zero slope) produce no events: an affine segment with
    vh == 0 never changes code.
    """
    lo = t_low + ROOT_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        if activation == "relu":
            roots = np.where(vh != 0.0, -uh / vh, np.inf)
            roots = np.where((roots >= lo) & (roots <= 1.0), roots, np.inf)
            return roots, np.full(uh.shape, _B_RELU, dtype=np.int8)
        tp = np.where(vh != 0.0, (1.0 - uh) / vh, np.inf)
        tm = np.where(vh != 0.0, (-1.0 - uh) / vh, np.inf)
    tp = np.where((tp >= lo) & (tp <= 1.0), tp, np.inf)
    tm = np.where((tm >= lo) & (tm <= 1.0), tm, np.inf)
    bounds = np.where(tp <= tm, _B_PLUS, _B_MINUS).astype(np.int8)
    return np.minimum(tp, tm), bounds


def _flip_code(boundary: int, direction: int) -> int:
    if boundary == _B_MINUS:
        return 0 if direction > 0 else -1
    return 1 if direction > 0 else 0


def exact_transition_sweep(net: Network, traj: Trajectory, keep_events: bool = True) -> SweepResult:
    """Event-driven exact sweep along a line trajectory.

    Within each constant-pattern interval, affine coefficients are pushed
    through the layers (off relu units contribute zero, saturated hard-tanh
    units contribute constants) and each neuron's crossing roots are solved
    exactly. After an event at layer d only downstream layers need
    recomputation, so events at the deepest layers stay cheap.
    """
    spec = net.spec
    if traj.kind != "line":
        raise ValueError("exact_transition_sweep requires a line trajectory")
    if spec.activation not in ("relu", "hard_tanh"):
        raise ValueError("exact sweep needs relu or hard_tanh activations")
    if traj.dim != spec.input_dim:
        raise ValueError("trajectory dimension does not match the network input")
    act = spec.activation
    n = spec.depth
    w_out, b_out = net.layers[n]

    # z(d)(t) = uz[d] + vz[d] t and h(d)(t) = uh[d] + vh[d] t on the interval
    uz: list[np.ndarray] = [np.zeros(0)] * (n + 1)
    vz: list[np.ndarray] = [np.zeros(0)] * (n + 1)
    uh: list[np.ndarray] = [np.zeros(0)] * n
    vh: list[np.ndarray] = [np.zeros(0)] * n
    codes: list[np.ndarray] = [np.zeros(0, dtype=np.int8)] * n
    roots: list[np.ndarray] = [np.zeros(0)] * n
    bounds: list[np.ndarray] = [np.zeros(0, dtype=np.int8)] * n
    layer_min: list[float] = [math.inf] * n  # cached roots[d].min()
    speeds = np.zeros(n + 1)  # ||vz[d]||: image speed on the current interval
    uz[0], vz[0] = traj.x0, traj.x1 - traj.x0
    speeds[0] = float(np.sqrt(vz[0] @ vz[0]))

    def refresh_z(d: int) -> None:
        """uz[d+1], vz[d+1] from the current codes at layer d."""
        if act == "relu":
            on = codes[d] == 1
            uz[d + 1] = np.where(on, uh[d], 0.0)
            vz[d + 1] = np.where(on, vh[d], 0.0)
        else:
            lin = codes[d] == 0
            uz[d + 1] = np.where(lin, uh[d], codes[d].astype(np.float64))
            vz[d + 1] = np.where(lin, vh[d], 0.0)
        speeds[d + 1] = float(np.sqrt(vz[d + 1] @ vz[d + 1]))

    def propagate(from_layer: int, t_low: float) -> None:
        for d in range(from_layer, n):
            w, b = net.layers[d]
            uh[d] = w @ uz[d] + b
            vh[d] = w @ vz[d]
            roots[d], bounds[d] = _layer_roots(uh[d], vh[d], t_low, act)
            layer_min[d] = float(roots[d].min()) if roots[d].size else math.inf
            refresh_z(d)

    def next_event_time() -> float:
        return min(layer_min, default=math.inf)

    def seed_codes(t_probe: float) -> None:
        trace = forward(net, traj.sample([t_probe])[0])
        for d in range(n):
            codes[d] = hidden_codes(trace.pre_activations[d], act)

    seed_codes(0.0)
    propagate(0, 0.0)
    # a neuron sitting exactly on a threshold at t=0 takes its code from the
    # first open interval, not from the point convention at the endpoint
    t_first = next_event_time()
    probe = 0.5 * min(t_first, 1.0)
    if probe > 0.0:
        before = [c.copy() for c in codes]
        seed_codes(probe)
        if any(not np.array_equal(a, b) for a, b in zip(before, codes)):
            propagate(0, 0.0)

    offsets = np.cumsum([0, *spec.hidden_widths])
    ztab = _zobrist(spec.total_hidden)
    pat_hash = np.uint64(0)
    for d in range(n):
        pat_hash ^= np.bitwise_xor.reduce(ztab[offsets[d] + np.arange(spec.hidden_widths[d]), codes[d] + 1])
    seen = {int(pat_hash)}

    events: list[TransitionEvent] = []
    num_transitions = 0
    change_points = 0
    sign_changes = 0
    t_cur = 0.0
    lengths = np.zeros(n + 1)

    def count_output_crossing(a: float, b: float) -> int:
        uo = float(w_out[0] @ uz[n] + b_out[0])
        vo = float(w_out[0] @ vz[n])
        if vo == 0.0:
            return 0
        r = -uo / vo
        return 1 if a < r < b else 0

    def advance_lengths(t_next: float) -> None:
        # exact: z(d) is affine on (t_cur, t_next), so the image arc is a
        # straight segment of length speed * dt
        lengths[:] = lengths + speeds * (t_next - t_cur)

    def refresh_own_root(d: int, i: int, t_low: float) -> None:
        """The fired neuron's affine form is unchanged; only its next root
        moves past t_low. Scalar re-solve avoids array overhead."""
        u, v = float(uh[d][i]), float(vh[d][i])
        lo = t_low + ROOT_TOL
        best, best_b = math.inf, _B_RELU
        if v != 0.0:
            if act == "relu":
                r = -u / v
                if lo <= r <= 1.0:
                    best = r
            else:
                rp = (1.0 - u) / v
                if lo <= rp <= 1.0:
                    best, best_b = rp, _B_PLUS
                rm = (-1.0 - u) / v
                if lo <= rm <= 1.0 and rm < best:
                    best, best_b = rm, _B_MINUS
        roots[d][i] = best
        bounds[d][i] = best_b

    while True:
        t_star = next_event_time()
        if not math.isfinite(t_star):
            break
        sign_changes += count_output_crossing(t_cur, t_star)
        advance_lengths(t_star)
        fired: list[tuple[float, int, int]] = []
        thresh = t_star + ROOT_TOL
        for d in range(n):
            if layer_min[d] <= thresh:
                for i in np.nonzero(roots[d] <= thresh)[0]:
                    fired.append((float(roots[d][i]), d, int(i)))
        fired.sort()
        d_min = n
        for t_i, d, i in fired:
            b_kind = int(bounds[d][i])
            direction = 1 if vh[d][i] > 0 else -1
            old = int(codes[d][i])
            new = _flip_code(b_kind, direction)
            codes[d][i] = new
            pat_hash ^= ztab[offsets[d] + i, old + 1] ^ ztab[offsets[d] + i, new + 1]
            if keep_events:
                events.append(
                    TransitionEvent(t=t_i, layer=d, neuron=i, boundary=_BOUNDARY_NAME[b_kind], direction=direction)
                )
            num_transitions += 1
            d_min = min(d_min, d)
            refresh_own_root(d, i, t_star)
        for d in {dd for _, dd, _ in fired}:
            layer_min[d] = float(roots[d].min()) if roots[d].size else math.inf
        change_points += 1
        seen.add(int(pat_hash))
        refresh_z(d_min)
        propagate(d_min + 1, t_star)
        t_cur = t_star

    sign_changes += count_output_crossing(t_cur, 1.0)
    advance_lengths(1.0)
    num_patterns = len(seen)
    return SweepResult(
        events=events,
        num_transitions=num_transitions,
        num_patterns=num_patterns,
        patterns_unique=num_patterns == change_points + 1,
        method="exact_affine",
        num_change_points=change_points,
        output_sign_changes=sign_changes,
        layer_lengths=lengths,
    )


def _crossed_boundaries(old: int, new: int, activation: str) -> list[str]:
    if activation == "relu":
        return ["relu_zero"]
    crossed = []
    if min(old, new) == -1:
        crossed.append("tanh_minus_one")
    if max(old, new) == 1:
        crossed.append("tanh_plus_one")
    return crossed


def count_transitions_curved(
    net: Network,
    traj: Trajectory,
    t_tol: float,
    keep_events: bool = False,
    chunk: int = 1 << 14,
) -> SweepResult:
    """Transition counting on any trajectory by dyadic subdivision.

    Subdivision runs until every cell is narrower than t_tol; each per-neuron
    code step between adjacent grid patterns counts as one event (a hard-tanh
    jump across both thresholds counts twice). The reported count is a lower
    bound on the true count: event pairs inside one cell cancel invisibly.
    """
    spec = net.spec
    if t_tol <= 0:
        raise ValueError("t_tol must be positive")
    if t_tol < MIN_T_TOL:
        raise ValueError("t_tol below 2^-40 exceeds root separation at float resolution")
    if spec.activation not in ("relu", "hard_tanh"):
        raise ValueError("transition counting needs relu or hard_tanh activations")
    act = spec.activation
    n = spec.depth
    cells = 1 << max(1, math.ceil(math.log2(1.0 / t_tol)))
    ts = np.arange(cells + 1, dtype=np.float64) / cells
    ztab = _zobrist(spec.total_hidden)
    offsets = np.cumsum([0, *spec.hidden_widths])

    num_transitions = 0
    change_points = 0
    sign_changes = 0
    events: list[TransitionEvent] = []
    hash_chunks: list[np.ndarray] = []

    start = 0
    while start < cells + 1:
        stop = min(start + chunk, cells + 1)
        lo = start - 1 if start > 0 else 0  # overlap one point to join chunks
        z = traj.sample(ts[lo:stop])
        blocks = []
        out_sign = None
        for d in range(n + 1):
            w, b = net.layers[d]
            z = z @ w.T + b
            if d == n:
                out_sign = z[:, 0] > 0.0
                break
            blocks.append(hidden_codes(z, act))
            z = phi(z, act)
        grid_codes = np.concatenate(blocks, axis=1)
        diffs = np.abs(np.diff(grid_codes.astype(np.int16), axis=0))
        num_transitions += int(diffs.sum())
        change_points += int((diffs.sum(axis=1) > 0).sum())
        sign_changes += int((out_sign[1:] != out_sign[:-1]).sum())
        if keep_events:
            for r, c in zip(*np.nonzero(diffs)):
                d = int(np.searchsorted(offsets, c, side="right")) - 1
                i = int(c - offsets[d])
                t_mid = float(0.5 * (ts[lo + r] + ts[lo + r + 1]))
                old, new = int(grid_codes[r, c]), int(grid_codes[r + 1, c])
                direction = 1 if new > old else -1
                for boundary in _crossed_boundaries(old, new, act):
                    events.append(TransitionEvent(t=t_mid, layer=d, neuron=i, boundary=boundary, direction=direction))
        row_hash = np.bitwise_xor.reduce(
            ztab[np.arange(grid_codes.shape[1])[None, :], grid_codes.astype(np.int64) + 1], axis=1
        )
        hash_chunks.append(np.unique(row_hash if start == 0 else row_hash[1:]))
        start = stop

    num_patterns = int(np.unique(np.concatenate(hash_chunks)).size)
    return SweepResult(
        events=events,
        num_transitions=num_transitions,
        num_patterns=num_patterns,
        patterns_unique=num_patterns == change_points + 1,
        method="adaptive_bisection",
        num_change_points=change_points,
        output_sign_changes=sign_changes,
    )


# ---------------------------------------------------------------------------
# dichotomies under weight sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DichotomyResult:
    s: int
    num_dichotomies: int
    num_label_transitions: int
    sweep_layer: int
    remaining_depth: int
    num_t: int


def _pack_labels(labels: np.ndarray) -> np.ndarray:
    """Boolean label rows to uint64 words (s <= 64)."""
    s = labels.shape[1]
    if s > 64:
        raise ValueError("at most 64 datapoints per labelling word")
    weights = np.uint64(1) << np.arange(s, dtype=np.uint64)
    return (labels.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def weight_circle_labellings(
    net: Network,
    sweep_layer: int,
    w0: np.ndarray,
    w1: np.ndarray,
    xs: np.ndarray,
    num_t: int,
    chunk: int = 256,
) -> np.ndarray:
    """Output-sign labels, shape (num_t, s), as the layer's weights sweep the
    circle W(t) = w0 cos(2 pi t) + w1 sin(2 pi t) at t = j / num_t."""
    spec = net.spec
    n = spec.depth
    if not 0 <= sweep_layer < n:
        raise ValueError(f"sweep_layer must be in [0, {n})")
    if num_t < 2:
        raise ValueError("num_t must be >= 2")
    xs = np.asarray(xs, dtype=np.float64)
    act = spec.activation
    # activations feeding the swept layer do not depend on the sweep
    z = xs
    for d in range(sweep_layer):
        w, b = net.layers[d]
        z = phi(z @ w.T + b, act)
    a0 = z @ w0.T
    a1 = z @ w1.T
    b_sw = net.layers[sweep_layer][1]
    s = xs.shape[0]
    ts = np.arange(num_t, dtype=np.float64) / num_t
    labels = np.empty((num_t, s), dtype=bool)
    for start in range(0, num_t, chunk):
        stop = min(start + chunk, num_t)
        ang = 2.0 * np.pi * ts[start:stop]
        h = np.cos(ang)[:, None, None] * a0[None] + np.sin(ang)[:, None, None] * a1[None] + b_sw
        z_blk = phi(h, act).reshape((stop - start) * s, -1)
        for d in range(sweep_layer + 1, n + 1):
            w, b = net.layers[d]
            z_blk = z_blk @ w.T + b
            if d < n:
                z_blk = phi(z_blk, act)
        labels[start:stop] = (z_blk[:, 0] > 0.0).reshape(stop - start, s)
    return labels


def weight_sweep_dichotomies(
    spec: NetworkSpec,
    sweep_layer: int,
    dataset,
    num_t: int = 1 << 16,
    seed: int = 0,
) -> DichotomyResult:
    """Count output labellings while one layer's weights sweep a great circle.

    The base network comes from spec.seed; the circle anchors W0, W1 are two
    fresh independent draws (layer-init distribution) keyed by ``seed``.
    """
    xs = np.asarray(getattr(dataset, "inputs", dataset), dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise ValueError("dataset must provide at least one input vector")
    net = init_network(spec)
    n = spec.depth
    if not 0 <= sweep_layer < n:
        raise ValueError(f"sweep_layer must be in [0, {n})")
    fan_in, fan_out = spec.layer_dims()[sweep_layer]
    w_std = math.sqrt(spec.sigma_w_sq / fan_in)
    w0 = stream(seed, "wsweep", sweep_layer, 0).normal(0.0, 1.0, size=(fan_out, fan_in)) * w_std
    w1 = stream(seed, "wsweep", sweep_layer, 1).normal(0.0, 1.0, size=(fan_out, fan_in)) * w_std
    labels = weight_circle_labellings(net, sweep_layer, w0, w1, xs, num_t)
    packed = _pack_labels(labels)
    return DichotomyResult(
        s=xs.shape[0],
        num_dichotomies=int(np.unique(packed).size),
        num_label_transitions=int((packed[1:] != packed[:-1]).sum()),
        sweep_layer=sweep_layer,
        remaining_depth=n - 1 - sweep_layer,
        num_t=num_t,
    )


def remaining_depth_dichotomies(
    spec: NetworkSpec,
    dataset,
    num_t: int = 1 << 16,
    seed: int = 0,
) -> list[DichotomyResult]:
    """Dichotomy counts for every sweepable hidden layer; remaining_depth is
    the number of hidden layers above the swept one."""
    return [
        weight_sweep_dichotomies(spec, layer, dataset, num_t=num_t, seed=seed)
        for layer in range(spec.depth)
    ]


def random_walk_dichotomy_baseline(num_transitions: int, s: int, seed: int = 0) -> int:
    """Distinct label vectors visited when each transition flips one uniform label."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if num_transitions < 0:
        raise ValueError("num_transitions must be >= 0")
    if num_transitions == 0:
        return 1
    g = stream(seed, "label_walk")
    if s <= 64:
        flips = np.uint64(1) << g.integers(0, s, size=num_transitions, dtype=np.uint64)
        states = np.bitwise_xor.accumulate(flips)
        return int(np.unique(np.concatenate([[np.uint64(0)], states])).size)
    state = np.zeros(s, dtype=bool)
    visited = {state.tobytes()}
    for i in g.integers(0, s, size=num_transitions):
        state[i] = ~state[i]
        visited.add(state.tobytes())
    return len(visited)


# ---------------------------------------------------------------------------
# transitions versus trajectory length
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LengthTransitionRecord:
    depth: int
    width: int
    sigma_w_sq: float
    seed: int
    length: float
    transitions: int
    patterns: int


def transitions_vs_length(
    spec: NetworkSpec,
    traj: Trajectory,
    depths: list[int],
    num_seeds: int,
    num_points: int = 257,
    rel_tol: float = 1e-3,
    t_tol: float = 1e-5,
) -> list[LengthTransitionRecord]:
    """Paired (final hidden layer length, transition count) per depth and seed.

    Line trajectories use the exact sweep; curved kinds use grid counting at
    t_tol. The spec's first hidden width replicates to every tested depth.
    """
    records = []
    for depth in depths:
        widths = (spec.hidden_widths[0],) * depth
        for i in range(num_seeds):
            member = replace(spec, hidden_widths=widths, seed=child_seed(spec.seed, "tvl", depth, i))
            network = init_network(member)
            if traj.kind == "line":
                # the exact sweep yields the piecewise-linear image length as
                # a byproduct, exactly and cheaply
                res = exact_transition_sweep(network, traj, keep_events=False)
                length = float(res.layer_lengths[-1])
            else:
                res = count_transitions_curved(network, traj, t_tol=t_tol)
                length = float(layer_image_length(network, traj, num_points=num_points, rel_tol=rel_tol).lengths[-1])
            records.append(
                LengthTransitionRecord(
                    depth=depth,
                    width=member.hidden_widths[0],
                    sigma_w_sq=member.sigma_w_sq,
                    seed=member.seed,
                    length=length,
                    transitions=res.num_transitions,
                    patterns=res.num_patterns,
                )
            )
    return records
