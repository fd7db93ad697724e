"""Input-space trajectories and the growth of their per-layer images.

A trajectory is a curve x(t) on t in [0, 1]. Its image at hidden layer d is
z(d)(x(t)); we estimate image arc lengths by polyline refinement on nested
dyadic grids, so refined estimates never decrease (triangle inequality).
Closed-form per-layer growth bounds for random nets are evaluated by
``theoretical_growth_bounds``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .net import Network, NetworkSpec, init_network, phi
from .rng import child_seed
from .stats import mean_ci

KINDS = ("line", "circular_arc", "great_circle_loop")

MAX_POINTS = 1 << 21  # refinement cap


@dataclass(frozen=True)
class Trajectory:
    """Closed-form curve between two vectors.

    line:              x(t) = t x1 + (1 - t) x0
    circular_arc:      x(t) = cos(pi t / 2) x0 + sin(pi t / 2) x1
    great_circle_loop: x(t) = cos(2 pi t) u0 + sin(2 pi t) u1, where (u0, u1)
                       is the orthonormalized pair stored in (x0, x1).
    """

    kind: str
    x0: np.ndarray
    x1: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.x0.size)

    def sample(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.float64)[:, None]
        if self.kind == "line":
            return ts * self.x1 + (1.0 - ts) * self.x0
        if self.kind == "circular_arc":
            ang = 0.5 * np.pi * ts
            return np.cos(ang) * self.x0 + np.sin(ang) * self.x1
        if self.kind == "great_circle_loop":
            ang = 2.0 * np.pi * ts
            return np.cos(ang) * self.x0 + np.sin(ang) * self.x1
        raise ValueError(f"unknown trajectory kind {self.kind!r}")

    def velocity(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.float64)[:, None]
        if self.kind == "line":
            return np.broadcast_to(self.x1 - self.x0, (ts.size, self.dim)).copy()
        if self.kind == "circular_arc":
            ang = 0.5 * np.pi * ts
            return 0.5 * np.pi * (np.cos(ang) * self.x1 - np.sin(ang) * self.x0)
        ang = 2.0 * np.pi * ts
        return 2.0 * np.pi * (np.cos(ang) * self.x1 - np.sin(ang) * self.x0)


def make_trajectory(kind: str, x0, x1) -> Trajectory:
    """Build a trajectory; great_circle_loop orthonormalizes (x0, x1)."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    x0 = np.asarray(x0, dtype=np.float64).copy()
    x1 = np.asarray(x1, dtype=np.float64).copy()
    if x0.ndim != 1 or x0.shape != x1.shape:
        raise ValueError("endpoints must be 1-D vectors of equal dimension")
    if np.array_equal(x0, x1):
        raise ValueError("degenerate trajectory: x0 equals x1")
    if kind == "great_circle_loop":
        r = float(np.linalg.norm(x0))
        if r == 0.0:
            raise ValueError("great_circle_loop needs a nonzero first vector")
        u0 = x0
        perp = x1 - (x1 @ u0) / (r * r) * u0
        pn = float(np.linalg.norm(perp))
        if pn <= 1e-12 * max(r, float(np.linalg.norm(x1))):
            raise ValueError("great_circle_loop basis is linearly dependent")
        x1 = perp * (r / pn)
    x0.flags.writeable = False
    x1.flags.writeable = False
    return Trajectory(kind=kind, x0=x0, x1=x1)


def analytic_input_length(traj: Trajectory) -> float:
    """Arc length of the input-space curve from its exact derivative.

    Lines are exact; the curved kinds integrate the closed-form speed with
    composite Gauss-Legendre quadrature (machine precision for these smooth
    integrands).
    """
    if traj.kind == "line":
        return float(np.linalg.norm(traj.x1 - traj.x0))
    nodes, weights = np.polynomial.legendre.leggauss(32)
    total = 0.0
    panels = 16
    for p in range(panels):
        a, b = p / panels, (p + 1) / panels
        ts = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        speed = np.linalg.norm(traj.velocity(ts), axis=1)
        total += 0.5 * (b - a) * float(weights @ speed)
    return total


@dataclass(frozen=True)
class LengthProfile:
    """Per-layer polyline arc lengths of a trajectory's images.

    lengths[0] is the input-space length, lengths[d] the post-activation
    image z(d) for d = 1..n. pre_lengths[d] is the pre-activation image
    h(d); its last entry is the affine output image.
    """

    lengths: np.ndarray
    pre_lengths: np.ndarray
    points_used: int
    converged: bool
    last_rel_change: float
    refinement_lengths: tuple[np.ndarray, ...]

    @property
    def output_length(self) -> float:
        return float(self.pre_lengths[-1])


def _segsum(a: np.ndarray) -> float:
    return float(np.sqrt(((a[1:] - a[:-1]) ** 2).sum(axis=1)).sum())


def _polyline_lengths(net: Network, traj: Trajectory, segments: int, chunk: int = 1 << 14):
    """Summed segment lengths per layer over a uniform grid, chunked.

    Chunks overlap by one point so segment sums join exactly; memory stays
    bounded by chunk * max_width regardless of grid size.
    """
    n = net.spec.depth
    act = net.spec.activation
    z_len = np.zeros(n + 1)
    h_len = np.zeros(n + 1)
    ts = np.linspace(0.0, 1.0, segments + 1)
    start = 0
    while start < segments + 1:
        stop = min(start + chunk, segments + 1)
        lo = start - 1 if start > 0 else 0
        z = traj.sample(ts[lo:stop])
        z_len[0] += _segsum(z)
        for d in range(n + 1):
            w, b = net.layers[d]
            z = z @ w.T + b
            h_len[d] += _segsum(z)
            if d == n:
                break
            z = phi(z, act)
            z_len[d + 1] += _segsum(z)
        start = stop
    return z_len, h_len


def layer_image_length(
    net: Network,
    traj: Trajectory,
    num_points: int = 1025,
    rel_tol: float = 1e-6,
    max_points: int = MAX_POINTS,
) -> LengthProfile:
    """Arc length of every layer image, refined until stable.

    The grid doubles (nested dyadic points) until every layer's length moves
    by less than rel_tol between refinements; hitting the max_points cap
    flags the profile as non-converged instead of raising.
    """
    if num_points < 2:
        raise ValueError("num_points must be >= 2")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    if traj.dim != net.spec.input_dim:
        raise ValueError("trajectory dimension does not match the network input")
    segments = num_points - 1
    history: list[np.ndarray] = []
    prev = None
    prev_pre = None
    rel = math.inf
    converged = False
    while True:
        z_len, h_len = _polyline_lengths(net, traj, segments)
        history.append(z_len)
        if prev is not None:
            scale = np.maximum(np.maximum(z_len, prev), 1e-300)
            rel = float(np.max(np.abs(z_len - prev) / scale))
            if rel < rel_tol:
                converged = True
                break
        prev, prev_pre = z_len, h_len
        if 2 * segments + 1 > max_points:
            z_len, h_len = prev, prev_pre
            history.pop()
            break
        segments *= 2
    return LengthProfile(
        lengths=z_len,
        pre_lengths=h_len,
        points_used=segments + 1,
        converged=converged,
        last_rel_change=rel,
        refinement_lengths=tuple(history),
    )


@dataclass(frozen=True)
class GrowthBounds:
    """Closed-form per-layer expected growth factor bounds."""

    k: int
    sigma_w: float
    sigma_b: float
    activation: str
    lower_ratio: float
    upper_ratio: float


def theoretical_growth_bounds(k: int, sigma_w: float, sigma_b: float, activation: str) -> GrowthBounds:
    """Evaluate the explicit growth-factor bounds for a random layer.

    upper_ratio is the linear-map (no clipping) bound sigma_w sqrt((k+1)/k).
    lower_ratio uses the explicit constants from the bound derivation:

    relu:      (1/sqrt(2)) (sigma_w sqrt(k) / sqrt(2(k+1)) - sigma_w sqrt(k) / 2^k)
    hard_tanh: (sigma_w/sigma) (1/sqrt(2)) ((2 pi)^(-1/4) sqrt(sigma k)
               / sqrt(sigma sqrt(2 pi) + k - 1) - sqrt(k) (1 - 1/sigma)^(k-1)),
               sigma = sqrt(sigma_w^2 + sigma_b^2), valid for sigma >= 1.

    The hard-tanh lower expression turns negative for very large sigma (the
    subtracted saturation term dominates); a nonpositive lower_ratio is a
    vacuous bound, not an error. The lower bound takes the trajectory's
    perpendicular-component ratio as ~1, which holds for random circular
    arcs but not for arbitrary curves.
    """
    if activation not in ("relu", "hard_tanh"):
        raise ValueError(f"growth bounds are defined for relu and hard_tanh, got {activation!r}")
    if k < 2:
        raise ValueError("growth bounds assume width k >= 2")
    if sigma_w <= 0:
        raise ValueError("growth bounds assume sigma_w > 0")
    if sigma_b < 0:
        raise ValueError("sigma_b must be nonnegative")
    upper = sigma_w * math.sqrt((k + 1) / k)
    if activation == "relu":
        lower = (sigma_w * math.sqrt(k) / math.sqrt(2.0 * (k + 1)) - sigma_w * math.sqrt(k) / 2.0**k) / math.sqrt(2.0)
    else:
        sigma = math.hypot(sigma_w, sigma_b)
        if sigma < 1.0:
            raise ValueError("hard_tanh lower bound assumes sqrt(sigma_w^2 + sigma_b^2) >= 1")
        main = (2.0 * math.pi) ** -0.25 * math.sqrt(sigma * k) / math.sqrt(sigma * math.sqrt(2.0 * math.pi) + (k - 1))
        tail = math.sqrt(k) * (1.0 - 1.0 / sigma) ** (k - 1)
        lower = (sigma_w / sigma) * (main - tail) / math.sqrt(2.0)
    return GrowthBounds(k=k, sigma_w=sigma_w, sigma_b=sigma_b, activation=activation, lower_ratio=lower, upper_ratio=upper)


@dataclass(frozen=True)
class GrowthCurve:
    """Ensemble layer lengths and layer-to-layer ratios with 95% CIs.

    ratio[d] is the mean over seeds of lengths[d+1] / lengths[d] for
    d = 0..n-1 (d = 0 is input -> first hidden). Seeds whose denominator or
    numerator image has zero length are excluded per ratio and counted.
    """

    num_seeds: int
    mean_lengths: np.ndarray
    length_ci: np.ndarray
    ratios: np.ndarray
    ratio_ci: np.ndarray
    excluded: np.ndarray
    lengths_by_seed: np.ndarray


def growth_ratio_curve(
    spec: NetworkSpec,
    traj: Trajectory,
    num_seeds: int,
    num_points: int = 257,
    rel_tol: float = 1e-3,
) -> GrowthCurve:
    """Mean per-layer growth ratios over an ensemble of seeds."""
    if num_seeds < 2:
        raise ValueError("num_seeds must be >= 2")
    n = spec.depth
    lengths = np.zeros((num_seeds, n + 1))
    for i in range(num_seeds):
        member = spec.with_seed(child_seed(spec.seed, "ensemble", i))
        profile = layer_image_length(init_network(member), traj, num_points=num_points, rel_tol=rel_tol)
        lengths[i] = profile.lengths
    mean_lengths = np.zeros(n + 1)
    length_ci = np.zeros((n + 1, 2))
    for d in range(n + 1):
        mean_lengths[d], length_ci[d, 0], length_ci[d, 1] = mean_ci(lengths[:, d])
    ratios = np.full(n, np.nan)
    ratio_ci = np.full((n, 2), np.nan)
    excluded = np.zeros(n, dtype=np.int64)
    for d in range(n):
        num = lengths[:, d + 1]
        den = lengths[:, d]
        ok = (den > 0.0) & (num > 0.0)
        excluded[d] = int((~ok).sum())
        if ok.sum() >= 1:
            vals = num[ok] / den[ok]
            ratios[d], ratio_ci[d, 0], ratio_ci[d, 1] = mean_ci(vals)
    return GrowthCurve(
        num_seeds=num_seeds,
        mean_lengths=mean_lengths,
        length_ci=length_ci,
        ratios=ratios,
        ratio_ci=ratio_ci,
        excluded=excluded,
        lengths_by_seed=lengths,
    )
