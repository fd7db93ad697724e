"""Hyperplane-arrangement counting and exact 2-D input-space decomposition.

r(k, m) <= sum_i C(k, i) bounds the regions cut by k hyperplanes in R^m and
is tight for generic arrangements; the same quantity drives the per-layer
activation-pattern bound. For two-dimensional inputs the network's convex
linear regions are built exactly by clipping cells with each neuron's
activation-boundary line, layer by layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .net import ActivationPattern, Network, hidden_codes
from .rng import stream

SLIVER_AREA = 1e-12
SIDE_EPS = 1e-12  # on-line tolerance for point/line side tests


def region_bound(k: int, m: int) -> int:
    """Closed-form bound sum_{i=0}^{m} C(k, i), exact integer arithmetic."""
    if k < 0 or m < 0:
        raise ValueError("k and m must be nonnegative")
    return sum(math.comb(k, i) for i in range(m + 1))


def region_recurrence(k: int, m: int) -> int:
    """Same count via r(k, m) = r(k-1, m) + r(k-1, m-1), r(0, .) = r(., 0) = 1."""
    if k < 0 or m < 0:
        raise ValueError("k and m must be nonnegative")
    row = [1] * (m + 1)  # r(0, m)
    for _ in range(1, k + 1):
        new = [1] * (m + 1)
        for j in range(1, m + 1):
            new[j] = row[j] + row[j - 1]
        row = new
    return row[m]


def activation_pattern_bound(n: int, k: int, m: int, activation: str) -> int:
    """Proof-implied product bound on distinct activation patterns.

    Each layer contributes at most one generic-arrangement factor: r(k, m)^n
    for relu, r(2k, m)^n for hard tanh (two boundary hyperplanes per neuron).
    """
    if n < 1 or k < 1 or m < 1:
        raise ValueError("n, k, m must be >= 1")
    if activation == "relu":
        return region_bound(k, m) ** n
    if activation == "hard_tanh":
        return region_bound(2 * k, m) ** n
    raise ValueError(f"pattern bound defined for relu and hard_tanh, got {activation!r}")


@dataclass(frozen=True)
class ArrangementCount:
    k: int
    m: int
    bound: int
    exact_generic: int

    def __post_init__(self):
        if self.bound != self.exact_generic:
            raise ValueError("generic arrangements meet the bound exactly")


def arrangement_count(k: int, m: int) -> ArrangementCount:
    return ArrangementCount(k=k, m=m, bound=region_bound(k, m), exact_generic=region_recurrence(k, m))


def count_regions_sampling(hyperplanes, box, num_samples: int, seed: int = 0) -> int:
    """Distinct sign vectors of uniform box samples; lower-bounds the true
    region count restricted to the box.

    hyperplanes: iterable of (a, beta) with a a nonzero m-vector; the sign of
    a . x - beta classifies each sample.
    """
    normals = np.asarray([a for a, _ in hyperplanes], dtype=np.float64)
    offsets = np.asarray([b for _, b in hyperplanes], dtype=np.float64)
    if normals.size and not np.all(np.linalg.norm(normals, axis=1) > 0.0):
        raise ValueError("degenerate hyperplane: zero normal")
    lo = np.asarray([b[0] for b in box], dtype=np.float64)
    hi = np.asarray([b[1] for b in box], dtype=np.float64)
    g = stream(seed, "region_samples")
    xs = g.uniform(size=(num_samples, lo.size)) * (hi - lo) + lo
    signs = (xs @ normals.T - offsets) > 0.0
    if signs.shape[1] <= 64:
        weights = np.uint64(1) << np.arange(signs.shape[1], dtype=np.uint64)
        packed = (signs.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
        return int(np.unique(packed).size)
    return int(np.unique(np.packbits(signs, axis=1), axis=0).shape[0])


# ---------------------------------------------------------------------------
# exact 2-D decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionCell:
    """Convex cell of the input plane with its pattern and affine output map.

    polygon is counterclockwise; edge_layers[i] names the layer that
    introduced edge polygon[i] -> polygon[i+1] (0 for the bounding box,
    d >= 1 for hidden layer d).
    """

    polygon: np.ndarray
    edge_layers: np.ndarray
    pattern: ActivationPattern
    affine_map: tuple[np.ndarray, np.ndarray]

    @property
    def area(self) -> float:
        return _polygon_area(self.polygon)

    @property
    def centroid(self) -> np.ndarray:
        return self.polygon.mean(axis=0)


@dataclass
class PlaneDecomposition:
    cells: list[RegionCell]
    complete: bool
    num_slivers_discarded: int
    box: tuple[float, float, float, float]


def _polygon_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def split_convex(verts: np.ndarray, tags: np.ndarray, g: np.ndarray, c: float, new_tag: int, tie_pos: bool = True):
    """Split a convex CCW polygon by the line g . x + c = 0.

    Returns (pos, neg, slivers): each side is (verts, tags) or None, pos
    collecting the g . x + c >= 0 part; slivers counts pieces a proper split
    produced but whose area fell below the discard threshold. Edges created
    along the cut carry new_tag; partial original edges keep their tag.
    A polygon lying entirely on the line goes to the side tie_pos names
    (boundary code conventions differ per threshold).
    """
    f = verts @ g + c
    scale = float(np.abs(f).max()) or 1.0
    eps = SIDE_EPS * max(scale, 1.0)
    side = np.zeros(len(verts), dtype=np.int8)
    side[f > eps] = 1
    side[f < -eps] = -1
    if not side.any():
        return ((verts, tags), None, 0) if tie_pos else (None, (verts, tags), 0)
    if not (side == -1).any():
        return (verts, tags), None, 0
    if not (side == 1).any():
        return None, (verts, tags), 0
    pos_v, pos_t, neg_v, neg_t = [], [], [], []
    nv = len(verts)
    for i in range(nv):
        j = (i + 1) % nv
        si, sj = side[i], side[j]
        if si >= 0:
            pos_v.append(verts[i])
            # a vertex exactly on the line exits along the cut, not the edge
            pos_t.append(tags[i] if (sj >= 0 or si > 0) else new_tag)
        if si <= 0:
            neg_v.append(verts[i])
            neg_t.append(tags[i] if (sj <= 0 or si < 0) else new_tag)
        if si * sj < 0:  # proper crossing
            w = f[i] / (f[i] - f[j])
            x = verts[i] + w * (verts[j] - verts[i])
            if si > 0:  # leaving the positive side
                pos_v.append(x)
                pos_t.append(new_tag)
                neg_v.append(x)
                neg_t.append(tags[i])
            else:  # entering the positive side
                pos_v.append(x)
                pos_t.append(tags[i])
                neg_v.append(x)
                neg_t.append(new_tag)
    pos = _finalize(pos_v, pos_t)
    neg = _finalize(neg_v, neg_t)
    return pos, neg, int(pos is None) + int(neg is None)


def _finalize(vlist, tlist):
    if len(vlist) < 3:
        return None
    verts = np.asarray(vlist, dtype=np.float64)
    tags = np.asarray(tlist, dtype=np.int64)
    # drop duplicate consecutive vertices from near-vertex cuts
    keep = np.ones(len(verts), dtype=bool)
    for i in range(len(verts)):
        j = (i + 1) % len(verts)
        if np.abs(verts[j] - verts[i]).max() <= SIDE_EPS:
            keep[j] = False
    verts = verts[keep]
    tags = tags[keep]
    if len(verts) < 3 or abs(_polygon_area(verts)) <= SLIVER_AREA:
        return None
    return verts, tags


def auto_box(net: Network, fallback: float = 2.0) -> tuple[float, float, float, float]:
    """Square box sized 4x the largest first-layer line intersection coordinate.

    With such a box the single-layer cell count is box-independent: every
    pairwise intersection (hence every bounded region) lies well inside.
    """
    spec = net.spec
    if spec.input_dim != 2:
        raise ValueError("auto_box needs a 2-D input space")
    w, b = net.layers[0]
    lines: list[tuple[np.ndarray, float]] = []
    for i in range(w.shape[0]):
        if spec.activation == "hard_tanh":
            lines.append((w[i], b[i] - 1.0))
            lines.append((w[i], b[i] + 1.0))
        else:
            lines.append((w[i], b[i]))
    best = 0.0
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            a = np.stack([lines[i][0], lines[j][0]])
            rhs = -np.asarray([lines[i][1], lines[j][1]])
            det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
            if abs(det) < 1e-12 * (np.abs(a).max() ** 2 + 1e-300):
                continue
            pt = np.linalg.solve(a, rhs)
            best = max(best, float(np.abs(pt).max()))
    half = 2.0 * best if best > 0 else fallback
    return (-half, half, -half, half)


def decompose_input_plane(
    net: Network,
    box: tuple[float, float, float, float] | None = None,
    max_cells: int = 200_000,
) -> PlaneDecomposition:
    """Exact convex-cell decomposition of a 2-D input box.

    Walks the layers in order; inside a cell all earlier codes are fixed, so
    each neuron's pre-activation is affine over the cell and its activation
    boundary clips the cell by a line (two parallel lines for hard tanh).
    Cells come back sorted by centroid with their pattern and the affine map
    the network computes on them.
    """
    spec = net.spec
    if spec.input_dim != 2:
        raise ValueError("decompose_input_plane is defined for 2-D inputs")
    if spec.activation not in ("relu", "hard_tanh"):
        raise ValueError("decomposition needs relu or hard_tanh activations")
    if box is None:
        box = auto_box(net)
    x0, x1, y0, y1 = box
    if not (x1 > x0 and y1 > y0):
        raise ValueError("box must have positive extent")
    base = np.asarray([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)
    base_tags = np.zeros(4, dtype=np.int64)
    n = spec.depth
    hard = spec.activation == "hard_tanh"
    w_out, b_out = net.layers[n]

    # depth-first: each item is (verts, tags, code blocks so far, affine map
    # of z(d) over the cell, next layer d); completed cells keep accumulating
    # even if the cell cap aborts the recursion partway
    stack = [(base, base_tags, [], np.eye(2), np.zeros(2), 0)]
    cells: list[RegionCell] = []
    slivers = 0
    complete = True
    while stack:
        verts, tags, code_blocks, mw, mb, d = stack.pop()
        if d == n:
            codes = np.concatenate(code_blocks)
            codes.flags.writeable = False
            pattern = ActivationPattern(codes=codes, activation=spec.activation)
            affine = (w_out @ mw, w_out @ mb + b_out)
            cells.append(RegionCell(polygon=verts, edge_layers=tags, pattern=pattern, affine_map=affine))
            continue
        if len(cells) + len(stack) >= max_cells:
            complete = False
            break
        w, b = net.layers[d]
        g_all = w @ mw
        c_all = w @ mb + b
        pieces = [(verts, tags, np.zeros(0, dtype=np.int8))]
        for i in range(w.shape[0]):
            grown = []
            for pv, pt, pcodes in pieces:
                if hard:
                    # on-line conventions: h = 1 -> code 1, h = -1 -> code -1
                    hi_part, rest, sl = split_convex(pv, pt, g_all[i], c_all[i] - 1.0, d + 1, tie_pos=True)
                    slivers += sl
                    if hi_part is not None:
                        grown.append((hi_part[0], hi_part[1], np.append(pcodes, np.int8(1))))
                    if rest is not None:
                        mid, low, sl = split_convex(rest[0], rest[1], g_all[i], c_all[i] + 1.0, d + 1, tie_pos=False)
                        slivers += sl
                        if mid is not None:
                            grown.append((mid[0], mid[1], np.append(pcodes, np.int8(0))))
                        if low is not None:
                            grown.append((low[0], low[1], np.append(pcodes, np.int8(-1))))
                else:
                    # on-line convention: h = 0 -> code 0
                    on_part, off_part, sl = split_convex(pv, pt, g_all[i], c_all[i], d + 1, tie_pos=False)
                    slivers += sl
                    if on_part is not None:
                        grown.append((on_part[0], on_part[1], np.append(pcodes, np.int8(1))))
                    if off_part is not None:
                        grown.append((off_part[0], off_part[1], np.append(pcodes, np.int8(0))))
            pieces = grown
        for pv, pt, pcodes in pieces:
            if hard:
                lin = pcodes == 0
                nmw = np.where(lin[:, None], g_all, 0.0)
                nmb = np.where(lin, c_all, pcodes.astype(np.float64))
            else:
                on = pcodes == 1
                nmw = np.where(on[:, None], g_all, 0.0)
                nmb = np.where(on, c_all, 0.0)
            stack.append((pv, pt, code_blocks + [pcodes], nmw, nmb, d + 1))

    cells.sort(key=lambda cell: (float(cell.centroid[0]), float(cell.centroid[1])))
    return PlaneDecomposition(cells=cells, complete=complete, num_slivers_discarded=slivers, box=box)


# ---------------------------------------------------------------------------
# SVG rendering
# ---------------------------------------------------------------------------

# Figure-style palette: box gray, layer 1 black, layer 2 green, layer 3 purple
_LAYER_COLORS = ["#bbbbbb", "#000000", "#2ca02c", "#9467bd", "#ff7f0e", "#1f77b4", "#d62728"]


def layer_color(layer: int) -> str:
    if layer <= 0:
        return _LAYER_COLORS[0]
    return _LAYER_COLORS[1 + (layer - 1) % (len(_LAYER_COLORS) - 1)]


def render_regions_svg(cells, path, size: int = 640, box=None) -> None:
    """Write the decomposition as an SVG; edges colored by introducing layer."""
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
    ]
    if not cells and box is None:
        lines.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 1 1"/>')
        _write_lines(path, lines)
        return
    if box is None:
        allv = np.concatenate([c.polygon for c in cells], axis=0)
        x0, y0 = allv.min(axis=0)
        x1, y1 = allv.max(axis=0)
    else:
        x0, x1, y0, y1 = box
    span = max(x1 - x0, y1 - y0) or 1.0
    scale = size / span

    def to_px(p):
        return (p[0] - x0) * scale, (y1 - p[1]) * scale  # y flipped for svg

    lines.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">'
    )
    lines.append(f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>')
    for cell in cells:
        nv = len(cell.polygon)
        for i in range(nv):
            a = to_px(cell.polygon[i])
            b = to_px(cell.polygon[(i + 1) % nv])
            color = layer_color(int(cell.edge_layers[i]))
            lines.append(
                f'<line x1="{a[0]:.4f}" y1="{a[1]:.4f}" x2="{b[0]:.4f}" y2="{b[1]:.4f}" '
                f'stroke="{color}" stroke-width="1.2"/>'
            )
    lines.append("</svg>")
    _write_lines(path, lines)


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def verify_cell_patterns(net: Network, cells, samples_per_cell: int = 5, seed: int = 0) -> bool:
    """Interior-sampling oracle: every sampled point reproduces its cell's codes."""
    from .net import forward_batch

    g = stream(seed, "cell_check")
    for cell in cells:
        pts = _interior_points(cell.polygon, samples_per_cell, g)
        pres, _ = forward_batch(net, pts)
        codes = np.concatenate([hidden_codes(h, net.spec.activation) for h in pres[:-1]], axis=1)
        if not np.all(codes == cell.pattern.codes[None, :]):
            return False
    return True


def _interior_points(verts: np.ndarray, count: int, g: np.random.Generator) -> np.ndarray:
    """Random interior points as convex combinations biased to the centroid."""
    centroid = verts.mean(axis=0)
    w = g.uniform(0.05, 0.6, size=(count, 1))
    idx = g.integers(0, len(verts), size=count)
    return centroid + w * (verts[idx] - centroid)
