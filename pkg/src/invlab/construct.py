"""Constructive approximation networks and the probabilistic bound calculators.

Building blocks
---------------
* ``square_net`` / ``mult_net``: sawtooth-based squaring and, via the
  polarization identity, approximate multiplication.  Both preserve zeros
  exactly (the squaring net is exactly even, so products with a zero factor
  realize to exactly zero), which the partition-of-unity constructions rely
  on.  Depth grows like log(1/eps).
* ``minmax_net``: exact min or max of n inputs by a binary tree of pairwise
  comparisons, depth <= 2*ceil(log2 n).
* ``cpwl1d_net``: exact one-hidden-layer realization of a continuous
  piecewise-linear function, extended affinely outside its knot range.
* ``pou_net``: tensor-product bump functions on a uniform grid, combined by
  multiplication chains with a tracked error budget; bumps vanish exactly
  outside the max-norm ball of radius h around their center.
* ``lipschitz_cube_net``: nodal interpolation of a Lipschitz function on a
  uniform grid over [-K, K]^d (exact piecewise-linear interpolation for d=1,
  hat-weighted slice interpolants multiplied together for d>=2).  The claimed
  sup error is always measured on a finer grid, never assumed.
* ``assemble_manifold_net``: glues chart-local approximators with a chart
  partition of unity and tangent projections into one network on R^D.
* ``robustness_statistic``: Monte-Carlo estimate of the expected squared
  sup-deviation under Gaussian input noise, reported next to its closed-form
  upper bound.
* ``chi2_max_bound`` / ``generalization_bound``: scalar bound calculators.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from invlab.network import (
    LayerWeights,
    Network,
    affine_net,
    concat,
    extend_depth,
    full_parallelize,
    identity_net,
    metrics,
    network,
    parallelize,
    parallelize_many,
    realize_batch,
)


class ApproximationError(RuntimeError):
    """A constructed network failed its own validation grid."""


# --- squaring and multiplication --------------------------------------------


def _sawtooth_stages(span: float, eps: float) -> int:
    # piecewise-linear interpolation of u^2 on a 2^-n grid has sup error
    # 4^-(n+1); rescaling to [-span, span] multiplies it by span^2
    n = math.ceil(math.log(span * span / eps) / math.log(4.0) - 1.0 - 1e-12)
    return max(1, n)


def square_net(eps: float, K: float) -> Network:
    """Network approximating t^2 on [-K, K] within eps; even and zero at 0 exactly."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if K < 1.0:
        raise ValueError("K must be >= 1")
    n = _sawtooth_stages(K, eps)
    layers = [LayerWeights(np.array([[1.0 / K], [-1.0 / K]]), np.zeros(2))]
    # state (a, b, c, S): a,b,c encode the current sawtooth iterate, S the
    # running interpolant value; all stay nonnegative so hidden ReLUs are inert
    m = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
    layers.append(LayerWeights(m, np.array([0.0, -0.5, -1.0, 0.0])))
    for k in range(1, n):
        g = np.array([2.0, -4.0, 2.0, 0.0])
        mk = np.vstack([g, g, g, np.array([-2.0, 4.0, -2.0, 1.0 * 4.0**k]) / 4.0**k])
        layers.append(LayerWeights(mk, np.array([0.0, -0.5, -1.0, 0.0])))
    out = np.array([[-2.0, 4.0, -2.0, 4.0**n]]) * (K * K / 4.0**n)
    layers.append(LayerWeights(out, np.zeros(1)))
    return Network(tuple(layers), 1)


def mult_net(eps: float, K: float) -> Network:
    """Two-input network with |xy - out| <= eps on [-K, K]^2 and out = 0 when xy = 0."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if K < 1.0:
        raise ValueError("K must be >= 1")
    # xy = ((x+y)^2 - (x-y)^2) / 4; each square is accurate to eps on
    # [-2K, 2K], so the product error is at most eps/2
    sq = square_net(eps, 2.0 * K)
    pre = affine_net(np.array([[1.0, 1.0], [1.0, -1.0]]))
    comb = affine_net(np.array([[0.25, -0.25]]))
    return concat(comb, concat(full_parallelize(sq, sq), pre))


# --- exact min/max trees ------------------------------------------------------


def _pair_net(mode: str) -> Network:
    if mode == "max":
        # max(a, b) = relu(a - b) + b
        l1 = LayerWeights(np.array([[1.0, -1.0], [0.0, 1.0], [0.0, -1.0]]), np.zeros(3))
        l2 = LayerWeights(np.array([[1.0, 1.0, -1.0]]), np.zeros(1))
    else:
        # min(a, b) = b - relu(b - a)
        l1 = LayerWeights(np.array([[-1.0, 1.0], [0.0, 1.0], [0.0, -1.0]]), np.zeros(3))
        l2 = LayerWeights(np.array([[-1.0, 1.0, -1.0]]), np.zeros(1))
    return Network((l1, l2), 2)


def minmax_net(n: int, mode: str) -> Network:
    """Exact min or max of n inputs; depth <= 2*ceil(log2 n)."""
    if n < 2:
        raise ValueError("minmax_net needs n >= 2")
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")

    def build(k: int) -> Network:
        if k == 1:
            return identity_net(1, 1)
        if k == 2:
            return _pair_net(mode)
        left = build((k + 1) // 2)
        right = build(k // 2)
        depth = max(left.depth, right.depth)
        return concat(_pair_net(mode), full_parallelize(extend_depth(left, depth), extend_depth(right, depth)))

    return build(n)


# --- exact continuous piecewise-linear functions -----------------------------


def cpwl1d_net(breakpoints, values) -> Network:
    """Exact network for the piecewise-linear interpolant of (breakpoints, values).

    Outside [t_0, t_k] the realization continues affinely with the boundary
    slopes.  ``values`` may be a vector or a (k+1, q) array for q outputs.
    """
    t = np.asarray(breakpoints, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("need at least two breakpoints")
    if np.any(np.diff(t) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != t.size:
        raise ValueError("values must match breakpoints")
    q = v.shape[1]
    slopes = np.diff(v, axis=0) / np.diff(t)[:, None]  # (k, q)
    # hidden: relu(x), relu(-x), relu(x - t_i) for interior knots
    inner = t[1:-1]
    m1 = np.concatenate([[1.0, -1.0], np.ones(inner.size)])[:, None]
    b1 = np.concatenate([[0.0, 0.0], -inner])
    out = np.zeros((q, 2 + inner.size))
    out[:, 0] = slopes[0]
    out[:, 1] = -slopes[0]
    out[:, 2:] = (slopes[1:] - slopes[:-1]).T
    bias = v[0] - slopes[0] * t[0]
    return Network((LayerWeights(m1, b1), LayerWeights(out, bias)), 1)


def _hat_net_1d(center: float, h: float, input_dim: int = 1, coord: int = 0) -> Network:
    """Exact tent function max(0, 1 - |x_coord - center| / h) as a 2-layer net."""
    s_row = np.zeros(input_dim)
    s_row[coord] = 1.0 / h
    m1 = np.vstack([s_row, s_row, s_row])
    b1 = np.array([1.0 - center / h, -center / h, -1.0 - center / h])
    m2 = np.array([[1.0, -2.0, 1.0]])
    return Network((LayerWeights(m1, b1), LayerWeights(m2, np.zeros(1))), input_dim)


# --- tensor-product partitions of unity --------------------------------------


def pou_net(centers, spacing: float, eps_mult: float = 1e-4) -> Network:
    """One output per center: the tensor-product bump around that grid point.

    Each bump multiplies D per-axis tents of width ``spacing``; products come
    from multiplication chains so every output vanishes exactly outside the
    max-norm ball of radius ``spacing`` around its center and carries error at
    most (D-1)*eps_mult inside.
    """
    z = np.atleast_2d(np.asarray(centers, dtype=float))
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    dim = z.shape[1]
    offsets = (z - z[0]) / spacing
    if not np.allclose(offsets, np.round(offsets), atol=1e-9):
        raise ValueError("centers must lie on a uniform grid of the given spacing")
    if dim == 1:
        nets = [_hat_net_1d(c, spacing) for c in z[:, 0]]
        return parallelize_many(nets)
    if not 0.0 < eps_mult < 0.5:
        raise ValueError("eps_mult must lie in (0, 1/2)")
    prod = mult_net(eps_mult, 1.0)
    nets = []
    for center in z:
        chain = _hat_net_1d(center[0], spacing, dim, 0)
        for axis in range(1, dim):
            tent = _hat_net_1d(center[axis], spacing, dim, axis)
            depth = max(chain.depth, tent.depth)
            stacked = parallelize(extend_depth(chain, depth), extend_depth(tent, depth))
            chain = concat(prod, stacked)
        nets.append(chain)
    return parallelize_many(nets)


# --- Lipschitz interpolants on cubes ------------------------------------------


def _validate_sup_error(net: Network, g, pts: np.ndarray, eps: float, what: str) -> float:
    if pts.ndim != 2:
        pts = pts[:, None]
    err = 0.0
    for lo in range(0, pts.shape[0], 4096):
        chunk = pts[lo : lo + 4096]
        approx = realize_batch(net, chunk)
        exact = np.asarray(g(chunk), dtype=float)
        if exact.ndim == 1:
            exact = exact[:, None]
        err = max(err, float(np.linalg.norm(approx - exact, axis=1).max()))
    if err > eps:
        raise ApproximationError(f"{what}: validated error {err:.3g} exceeds target {eps:.3g}")
    return err


def lipschitz_cube_net(g, lip_const: float, eps: float, K: float, d: int = 1) -> Network:
    """Approximate a Lipschitz map g: [-K, K]^d -> R^q to sup error eps.

    Nodal interpolation on a uniform grid of mesh eps / (lip_const * sqrt(d));
    the result is validated on a finer grid and construction fails loudly if
    the measured error exceeds eps.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if lip_const <= 0 or K <= 0 or d < 1:
        raise ValueError("lip_const, K must be positive and d >= 1")
    h_target = eps / (lip_const * math.sqrt(d))
    n_ax = max(2, math.ceil(2.0 * K / h_target)) + 1
    if n_ax % 2 == 0:
        n_ax += 1
    axis = np.linspace(-K, K, n_ax)

    def eval_grid(points: np.ndarray) -> np.ndarray:
        vals = np.asarray(g(points), dtype=float)
        return vals[:, None] if vals.ndim == 1 else vals

    if d == 1:
        values = eval_grid(axis[:, None])
        net = cpwl1d_net(axis, values)
        fine = np.linspace(-K, K, 4 * n_ax + 1)[:, None]
        _validate_sup_error(net, g, fine, eps, "lipschitz_cube_net(d=1)")
        return net

    if d != 2:
        raise NotImplementedError("cube interpolants are implemented for d in {1, 2}")

    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    values = eval_grid(nodes).reshape(n_ax, n_ax, -1)  # (i, j, q)
    q = values.shape[2]
    vmax = float(np.abs(values).max())
    prod = mult_net(eps / 4.0, max(1.0, vmax))
    h = axis[1] - axis[0]

    rows = []
    for i in range(n_ax):
        tent = _hat_net_1d(axis[i], h, 2, 0)
        slice_net = concat(cpwl1d_net(axis, values[i]), affine_net(np.array([[0.0, 1.0]])))
        depth = max(tent.depth, slice_net.depth)
        pair = parallelize(extend_depth(tent, depth), extend_depth(slice_net, depth))
        # one multiplication per output component, sharing the tent factor
        comps = []
        for j in range(q):
            sel = np.zeros((2, 1 + q))
            sel[0, 0] = 1.0
            sel[1, 1 + j] = 1.0
            comps.append(concat(prod, concat(affine_net(sel), pair)))
        rows.append(parallelize_many(comps))
    body = parallelize_many(rows)
    head = np.tile(np.eye(q), (1, n_ax))
    net = concat(affine_net(head), body)

    fine_axis = np.linspace(-K, K, 2 * n_ax + 1)
    fx, fy = np.meshgrid(fine_axis, fine_axis, indexing="ij")
    fine = np.column_stack([fx.ravel(), fy.ravel()])
    _validate_sup_error(net, g, fine, eps, "lipschitz_cube_net(d=2)")
    return net


# --- charts and manifold assembly ---------------------------------------------


@dataclass(frozen=True)
class Chart:
    """One manifold chart: anchor point, tangent projection, local inverse map.

    ``local_fn`` maps tangent coordinates (n, d) to target values (n, q).
    ``weight_profile``, when present, gives this chart's partition-of-unity
    weight as a function of the tangent coordinates; ``gate`` is an optional
    half-space filter (direction, lo, hi) that cuts the weight to exactly zero
    on the far side of the manifold, where the tangent projection stops being
    injective.
    """

    anchor: np.ndarray
    projection: np.ndarray
    local_fn: callable
    radius: float
    weight_profile: callable | None = None
    gate: tuple[np.ndarray, float, float] | None = None
    local_lipschitz: float | None = None

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=float)
        proj = np.asarray(self.projection, dtype=float)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "projection", proj)
        if proj.ndim != 2 or proj.shape[1] != anchor.shape[0]:
            raise ValueError("projection must be (d x D) with D matching the anchor")
        gram = proj @ proj.T
        if not np.allclose(gram, np.eye(proj.shape[0]), atol=1e-10):
            raise ValueError("projection rows must be orthonormal")
        if not self.radius > 0:
            raise ValueError("chart radius must be positive")

    @property
    def ambient_dim(self) -> int:
        return self.anchor.shape[0]

    @property
    def intrinsic_dim(self) -> int:
        return self.projection.shape[0]


@dataclass(frozen=True)
class ChartAtlas:
    """A finite chart cover of a manifold, with optional analytic ground truth."""

    charts: tuple[Chart, ...]
    ambient_dim: int
    intrinsic_dim: int
    output_dim: int
    lipschitz: float | None = None
    target_fn: callable | None = None  # exact f on ambient points, for validation
    sample_fn: callable | None = None  # deterministic on-manifold sampler
    kind: str = ""
    params: tuple = ()

    def __post_init__(self):
        if not self.charts:
            raise ValueError("atlas needs at least one chart")
        for c in self.charts:
            if c.ambient_dim != self.ambient_dim or c.intrinsic_dim != self.intrinsic_dim:
                raise ValueError("all charts must share ambient and intrinsic dimensions")

    @property
    def chart_count(self) -> int:
        return len(self.charts)

    @property
    def min_radius(self) -> float:
        return min(c.radius for c in self.charts)


def circle_atlas_fixture(D: int, M: int) -> ChartAtlas:
    """Unit circle isometrically embedded in the first two coordinates of R^D.

    M equally spaced anchors; each chart projects onto the tangent line and
    inverts through the local angle branch.  The target map sends a circle
    point p to ((1 + p1)/2, (1 + p2)/2), an ambient-Lipschitz function with
    constant 1/2 taking values in [0, 1]^2.
    """
    if D < 2:
        raise ValueError("D must be >= 2")
    if M < 4:
        raise ValueError("M must be >= 4")
    spacing = 2.0 * math.pi / M
    radius = min(1.0, 2.0 * math.sin(min(spacing, math.pi / 2) / 2.0))
    gate_cut = max(0.15, math.cos(spacing) / 2.0)
    slope_angle = min(spacing, 0.45 * math.pi)

    def embed(theta: np.ndarray) -> np.ndarray:
        pts = np.zeros((theta.size, D))
        pts[:, 0] = np.cos(theta)
        pts[:, 1] = np.sin(theta)
        return pts

    def target(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return 0.5 * (1.0 + points[:, :2])

    def sampler(n: int) -> np.ndarray:
        theta = (np.arange(n) + 0.5) * (2.0 * math.pi / n)
        return embed(theta)

    def profile(t: np.ndarray) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float).reshape(-1), -1.0, 1.0)
        return np.maximum(0.0, 1.0 - np.abs(np.arcsin(t)) / spacing)

    charts = []
    for i in range(M):
        theta_i = i * spacing
        anchor = embed(np.array([theta_i]))[0]
        tangent = np.zeros((1, D))
        tangent[0, 0] = -math.sin(theta_i)
        tangent[0, 1] = math.cos(theta_i)

        def local(t, _ti=theta_i):
            t = np.clip(np.asarray(t, dtype=float).reshape(-1), -1.0, 1.0)
            theta = _ti + np.arcsin(t)
            return np.column_stack([0.5 * (1.0 + np.cos(theta)), 0.5 * (1.0 + np.sin(theta))])

        charts.append(
            Chart(
                anchor=anchor,
                projection=tangent,
                local_fn=local,
                radius=radius,
                weight_profile=profile,
                gate=(anchor.copy(), -gate_cut, gate_cut),
                local_lipschitz=0.5 / math.cos(slope_angle),
            )
        )
    return ChartAtlas(
        charts=tuple(charts),
        ambient_dim=D,
        intrinsic_dim=1,
        output_dim=2,
        lipschitz=0.5,
        target_fn=target,
        sample_fn=sampler,
        kind="circle",
        params=(D, M),
    )


def _profile_net(chart: Chart, e_w: float) -> Network:
    """Piecewise-linear realization of a chart weight profile (d = 1 only)."""
    r = chart.radius
    probe = np.linspace(-1.5 * r, 1.5 * r, 4097)
    vals = chart.weight_profile(probe)
    support = np.abs(probe[vals > 0]).max() if np.any(vals > 0) else r
    for n_knots in (17, 33, 65, 129, 257, 513):
        spacing = 2.0 * support / (n_knots - 1)
        knots = np.linspace(-support - 2 * spacing, support + 2 * spacing, n_knots + 4)
        kv = chart.weight_profile(knots)
        net = cpwl1d_net(knots, kv)
        fine = np.linspace(knots[0], knots[-1], 8 * (n_knots + 4))
        err = np.abs(realize_batch(net, fine[:, None])[:, 0] - chart.weight_profile(fine)).max()
        if err <= e_w and kv[0] == 0.0 and kv[1] == 0.0 and kv[-1] == 0.0 and kv[-2] == 0.0:
            return net
    raise ApproximationError("could not realize the chart weight profile to the requested accuracy")


def _gate_net(gate) -> Network:
    _, lo, hi = gate
    width = hi - lo
    knots = np.array([lo - width, lo, hi, hi + width])
    return cpwl1d_net(knots, np.array([0.0, 0.0, 1.0, 1.0]))


def assemble_manifold_net(atlas: ChartAtlas, eps: float, eps_mult: float | None = None,
                          clamp: bool = False) -> Network:
    """One network on R^D approximating the chart-localized target on the manifold.

    Per chart: a tangent-coordinate weight (the chart's share of the partition
    of unity, gated away from the far side of the manifold), multiplied with a
    piecewise-linear approximation of the chart-local map; chart contributions
    are summed by a final affine layer.  ``clamp`` appends the exact coordinate
    clamp to [0, 1]^q.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if atlas.intrinsic_dim != 1:
        raise NotImplementedError("assembly is implemented for intrinsic dimension 1")
    e_m = eps / 20.0 if eps_mult is None else float(eps_mult)
    e_w = eps / 20.0
    e_f = 0.4 * eps
    q = atlas.output_dim
    M = atlas.chart_count
    D = atlas.ambient_dim
    prod = mult_net(e_m, 1.25)

    single = M == 1
    chart_nets = []
    for chart in atlas.charts:
        to_tangent = affine_net(chart.projection, -chart.projection @ chart.anchor)
        lip = chart.local_lipschitz
        if lip is None:
            probe = np.linspace(-chart.radius, chart.radius, 2049)
            fv = np.asarray(chart.local_fn(probe), dtype=float)
            lip = 1.2 * float(
                np.abs(np.diff(fv, axis=0) / np.diff(probe)[:, None]).max()
            )
        fhat = concat(lipschitz_cube_net(chart.local_fn, lip, e_f, chart.radius, d=1), to_tangent)

        if single:
            chart_nets.append(fhat)
            continue
        if chart.weight_profile is None:
            def default_profile(t, _r=chart.radius):
                return np.maximum(0.0, 1.0 - np.abs(np.asarray(t, dtype=float).reshape(-1)) / _r)
            chart = Chart(chart.anchor, chart.projection, chart.local_fn, chart.radius,
                          default_profile, chart.gate, chart.local_lipschitz)
        w_path = concat(_profile_net(chart, e_w), to_tangent)
        if chart.gate is not None:
            direction = np.asarray(chart.gate[0], dtype=float)
            g_path = concat(_gate_net(chart.gate), affine_net(direction[None, :]))
            depth = max(w_path.depth, g_path.depth)
            phi = concat(prod, parallelize(extend_depth(w_path, depth), extend_depth(g_path, depth)))
        else:
            phi = w_path
        comps = []
        for j in range(q):
            sel = np.zeros((1, q))
            sel[0, j] = 1.0
            f_j = concat(affine_net(sel), fhat)
            depth = max(phi.depth, f_j.depth)
            comps.append(concat(prod, parallelize(extend_depth(phi, depth), extend_depth(f_j, depth))))
        chart_nets.append(parallelize_many(comps))

    depth = max(n.depth for n in chart_nets)
    body = parallelize_many([extend_depth(n, depth) for n in chart_nets])
    head = np.tile(np.eye(q), (1, M))
    net = concat(affine_net(head), body)
    if clamp:
        m1 = np.vstack([np.eye(q), np.eye(q)])
        b1 = np.concatenate([np.zeros(q), -np.ones(q)])
        m2 = np.hstack([np.eye(q), -np.eye(q)])
        clamp_net = Network((LayerWeights(m1, b1), LayerWeights(m2, np.zeros(q))), q)
        net = concat(clamp_net, net)
    return net


# --- robustness statistic and bounds -------------------------------------------


@dataclass(frozen=True)
class RobustNetReport:
    """Monte-Carlo noise-robustness estimate next to its closed-form bound."""

    eps_target: float
    sup_error_on_manifold: float
    robustness_lhs: float
    bound_rhs: float
    sigma: float
    trials: int
    noise_energy: float
    mc_standard_error: float
    ambient_dim: int
    chart_count: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for name in ("sup_error_on_manifold", "robustness_lhs", "bound_rhs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    CSV_FIELDS = (
        "eps_target", "sup_error_on_manifold", "robustness_lhs", "bound_rhs",
        "sigma", "trials", "noise_energy", "mc_standard_error", "ambient_dim",
        "chart_count",
    )

    def csv_row(self) -> dict:
        return {name: getattr(self, name) for name in self.CSV_FIELDS}


def chi2_max_bound(d: int, M: int) -> float:
    """Upper bound for the mean of the max of M chi-squared(d) variables."""
    if d < 1 or M < 2:
        raise ValueError("need d >= 1 and M >= 2")
    return math.sqrt(2.0 * d * math.log(M)) + 2.0 * math.log(M) + d


def robustness_bound_rhs(*, lip_const: float, intrinsic_dim: int, chart_count: int,
                         ambient_dim: int, sigma: float, eps: float, delta: float) -> float:
    """Closed-form right-hand side of the noise-robustness estimate.

    Uses C_hat = 8 C^2, total noise energy D sigma^2, the chi-squared maximal
    bound, and the tail term 2 D exp(-r0^2 / (2 sigma^2)) with
    r0 = min(delta / (2 sqrt(D)), 1).
    """
    r0 = min(delta / (2.0 * math.sqrt(ambient_dim)), 1.0)
    energy = ambient_dim * sigma**2
    main = (8.0 * lip_const**2 / ambient_dim) * energy * chi2_max_bound(intrinsic_dim, chart_count)
    tail = 2.0 * ambient_dim * math.exp(-(r0**2) / (2.0 * sigma**2))
    return main + 8.0 * eps**2 + tail


def robustness_statistic(net: Network, manifold_samples, sigma: float, trials: int,
                         *, atlas: ChartAtlas | None = None, eps_target: float = 0.0,
                         lip_const: float | None = None, seed=0,
                         trial_batch: int = 256) -> RobustNetReport:
    """Monte-Carlo estimate of E_eta sup_x |R(x + eta) - R(x)|^2 with Gaussian eta.

    The bound side needs the target Lipschitz constant, intrinsic dimension,
    chart count, and locality radius; these come from ``atlas`` (``lip_const``
    may override the atlas value, and is required without an atlas).
    """
    samples = np.atleast_2d(np.asarray(manifold_samples, dtype=float))
    if samples.size == 0:
        raise ValueError("empty sample set")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if trials < 100:
        raise ValueError("trials must be >= 100")
    D = samples.shape[1]
    if atlas is None:
        if lip_const is None:
            raise ValueError("need an atlas or an explicit lip_const for the bound side")
        d_int, M, delta = 1, 2, 1.0
    else:
        d_int, M, delta = atlas.intrinsic_dim, atlas.chart_count, atlas.min_radius
        if lip_const is None:
            lip_const = atlas.lipschitz
        if lip_const is None:
            raise ValueError("atlas carries no Lipschitz constant; pass lip_const")
    r0 = min(delta / (2.0 * math.sqrt(D)), 1.0)
    if sigma > r0:
        warnings.warn(f"sigma={sigma:.3g} exceeds r0={r0:.3g}; the bound's tail term dominates")

    base = realize_batch(net, samples)
    sup_err = 0.0
    if atlas is not None and atlas.target_fn is not None:
        sup_err = float(np.linalg.norm(base - atlas.target_fn(samples), axis=1).max())

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = samples.shape[0]
    sups = np.empty(trials)
    done = 0
    while done < trials:
        block = min(trial_batch, trials - done)
        eta = rng.normal(0.0, sigma, size=(block, D))
        noisy = (samples[None, :, :] + eta[:, None, :]).reshape(block * n, D)
        diff = realize_batch(net, noisy).reshape(block, n, -1) - base[None, :, :]
        sups[done : done + block] = np.einsum("bnq,bnq->bn", diff, diff).max(axis=1)
        done += block
    lhs = float(sups.mean())
    se = float(sups.std(ddof=1) / math.sqrt(trials))
    rhs = robustness_bound_rhs(
        lip_const=lip_const, intrinsic_dim=d_int, chart_count=M,
        ambient_dim=D, sigma=sigma, eps=eps_target, delta=delta,
    )
    return RobustNetReport(
        eps_target=eps_target,
        sup_error_on_manifold=sup_err,
        robustness_lhs=lhs,
        bound_rhs=rhs,
        sigma=sigma,
        trials=trials,
        noise_energy=D * sigma**2,
        mc_standard_error=se,
        ambient_dim=D,
        chart_count=M,
    )


def generalization_bound(W: int, q: int, L: int, B: float, m: int, eps: float, p: float) -> float:
    """Closed-form high-probability excess-risk bound for bounded-weight classes."""
    if min(W, q, L, m) < 1:
        raise ValueError("W, q, L, m must be positive integers")
    if B <= 0:
        raise ValueError("B must be positive")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    inner = (
        5.0
        + math.log(q)
        + 4.0 * math.log(L)
        + math.log(1.0 / eps)
        + (L + 1) * (math.log(math.ceil(B)) + math.log(max(q, W)))
    )
    return math.sqrt((8.0 + 8.0 * W * q * inner) / m + 8.0 * math.log(1.0 / p) / m)


# --- atlas serialization --------------------------------------------------------
#
# Fixture-backed atlases round-trip through a small text header (kind and
# parameters) plus the numeric chart data for inspection; reconstruction goes
# through the fixture builder so the callable fields come back intact.

_ATLAS_BUILDERS = {"circle": circle_atlas_fixture}


def save_atlas(atlas: ChartAtlas, path) -> None:
    if atlas.kind not in _ATLAS_BUILDERS:
        raise ValueError("only fixture-backed atlases serialize (unknown kind)")
    with open(path, "w") as fh:
        fh.write("chartatlas 1\n")
        fh.write(f"kind {atlas.kind}\n")
        fh.write("params " + " ".join(str(int(p)) for p in atlas.params) + "\n")
        fh.write(f"dims {atlas.ambient_dim} {atlas.intrinsic_dim} {atlas.output_dim}\n")
        for chart in atlas.charts:
            fh.write("anchor " + " ".join(f"{v:.17g}" for v in chart.anchor) + "\n")
            for row in chart.projection:
                fh.write("proj " + " ".join(f"{v:.17g}" for v in row) + "\n")
            fh.write(f"radius {chart.radius:.17g}\n")


def load_atlas(path) -> ChartAtlas:
    with open(path) as fh:
        lines = [ln.split() for ln in fh]
    if lines[0] != ["chartatlas", "1"]:
        raise ValueError(f"{path}: not an atlas file")
    kind = lines[1][1]
    params = tuple(int(v) for v in lines[2][1:])
    if kind not in _ATLAS_BUILDERS:
        raise ValueError(f"{path}: unknown atlas kind {kind!r}")
    atlas = _ATLAS_BUILDERS[kind](*params)
    # cross-check the stored numeric fields against the rebuilt fixture
    stored_anchors = [np.array([float(v) for v in ln[1:]]) for ln in lines if ln[0] == "anchor"]
    for chart, anchor in zip(atlas.charts, stored_anchors):
        if not np.allclose(chart.anchor, anchor, atol=1e-12):
            raise ValueError(f"{path}: stored chart data disagrees with the {kind} fixture")
    return atlas
