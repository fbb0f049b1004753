"""Fixed-grid quadrature rules used by the forward operators.

Everything here works on uniform grids so that running (cumulative) integrals
share nodes with the outer rule.  The cumulative Simpson rule integrates the
local quadratic fit over half-pairs, which keeps it exact for polynomials up
to degree two on every prefix and fourth-order accurate in general; the plain
composite rule is the classical one (exact through degree three).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_RULES = ("composite-simpson", "gauss-legendre-tensor")


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature selection: rule name plus per-axis node count."""

    rule: str = "composite-simpson"
    nodes: int = 513

    def __post_init__(self):
        if self.rule not in _RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.rule == "composite-simpson":
            if self.nodes < 3 or self.nodes % 2 == 0:
                raise ValueError("composite Simpson needs an odd node count >= 3")
        else:
            if self.nodes < 2:
                raise ValueError("Gauss-Legendre order must be >= 2")

    def refined(self) -> "QuadratureSpec":
        """Same rule with (roughly) doubled resolution, for convergence checks."""
        if self.rule == "composite-simpson":
            return QuadratureSpec(self.rule, 2 * self.nodes - 1)
        return QuadratureSpec(self.rule, 2 * self.nodes)


DEFAULT_QUAD = QuadratureSpec()
GRAV_QUAD = QuadratureSpec("gauss-legendre-tensor", 16)


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weight vector for n (odd) uniform nodes of spacing h."""
    if n < 3 or n % 2 == 0:
        raise ValueError("simpson needs an odd number of nodes >= 3")
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return (h / 3.0) * w


def simpson(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Composite Simpson integral of sampled values on a uniform grid.

    The node count along ``axis`` must be odd.
    """
    values = np.asarray(values, dtype=float)
    v = np.moveaxis(values, axis, 0)
    w = simpson_weights(v.shape[0], h)
    return np.tensordot(w, v, axes=(0, 0))


def cumulative_simpson(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Running integral of sampled values; output has the same shape as input.

    Even-index prefixes use Simpson pairs; odd-index prefixes add the
    Newton-Cotes half-pair rule h/12 * (5 f0 + 8 f1 - f2), so every prefix is
    exact for quadratics.  Requires at least 3 nodes.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if n < 3:
        raise ValueError("cumulative_simpson needs at least 3 nodes")
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[0] = 0.0

    # integrals over full pairs [x_{2k}, x_{2k+2}]
    pair_count = (n - 1) // 2
    pairs = (h / 3.0) * (v[0 : 2 * pair_count - 1 : 2] + 4.0 * v[1 : 2 * pair_count : 2] + v[2 : 2 * pair_count + 1 : 2])
    even_prefix = np.cumsum(pairs, axis=0)
    out[2 : 2 * pair_count + 1 : 2] = even_prefix

    # half-pair corrections for odd indices 1, 3, ..
    half = (h / 12.0) * (5.0 * v[0 : 2 * pair_count - 1 : 2] + 8.0 * v[1 : 2 * pair_count : 2] - v[2 : 2 * pair_count + 1 : 2])
    out[1 : 2 * pair_count : 2] = half
    out[3 : 2 * pair_count : 2] += even_prefix[: pair_count - 1]

    if n % 2 == 0:
        # trailing node: integrate the quadratic through the last three nodes
        # over the final subinterval [x_{n-2}, x_{n-1}]
        out[n - 1] = out[n - 2] + (h / 12.0) * (-v[n - 3] + 8.0 * v[n - 2] + 5.0 * v[n - 1])
    return np.moveaxis(out, 0, axis)


class PiecewiseGrid:
    """Uniform quadrature grids on [0, x] split at interior breakpoints.

    Integrands with derivative kinks (piecewise-linear coefficient functions)
    keep full composite-Simpson accuracy only when the kinks sit on segment
    boundaries; each segment receives a node share proportional to its length,
    rounded up to an odd count >= 3.
    """

    def __init__(self, x: float, nodes: int, breakpoints=()):
        cuts = [0.0]
        cuts += sorted({float(b) for b in breakpoints if 0.0 < b < x})
        cuts.append(float(x))
        self.pieces: list[tuple[np.ndarray, float]] = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(3, round(nodes * (b - a) / x))
            if n % 2 == 0:
                n += 1
            self.pieces.append((np.linspace(a, b, n), (b - a) / (n - 1)))

    def eval(self, fn) -> list[np.ndarray]:
        return [np.asarray(fn(grid), dtype=float) for grid, _ in self.pieces]

    def integral(self, values: list[np.ndarray]):
        total = 0.0
        for (grid, h), v in zip(self.pieces, values):
            total = total + simpson(v, h)
        return total

    def cumulative(self, values: list[np.ndarray]) -> list[np.ndarray]:
        """Running integral from 0, continuous across segment boundaries."""
        out = []
        offset = 0.0
        for (grid, h), v in zip(self.pieces, values):
            cum = cumulative_simpson(v, h) + offset
            offset = cum[-1]
            out.append(cum)
        return out


def gauss_legendre_nodes(order: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights rescaled to [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


def gauss_legendre_2d(order: int, box: tuple[float, float, float, float]) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule on an axis-aligned box (x0, x1, y0, y1).

    Returns points of shape (order**2, 2) and matching weights.
    """
    x0, x1, y0, y1 = box
    xs, wx = gauss_legendre_nodes(order, x0, x1)
    ys, wy = gauss_legendre_nodes(order, y0, y1)
    px, py = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([px.ravel(), py.ravel()])
    wts = np.outer(wx, wy).ravel()
    return pts, wts
