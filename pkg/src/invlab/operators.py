"""Forward integral operators, their derivatives, and analytic inversion baselines.

Four problems are covered:

* transmissivity identification:  u(x) = int_0^x (int_0^z f + c0) / a(z) dz + c1
* beam stiffness identification:  u(x) = int_0^x int_0^y (int_0^s int_0^w f
                                          + c3 s + c2) / a(s) ds dy + c1 x + c0
* quadratic Volterra equation:    v(t) = int_0^t u(s)^2 ds
* planar gravimetric potential:   U(y) = sum_k alpha_k int_{cell_k} ln|x - y| dx

All 1-D integrals use a per-call uniform grid on [0, upper] with running inner
integrals computed by cumulative Simpson on the same grid, so nested integrals
cost O(n) per nesting level and the quadrature error is a smooth function of
the evaluation point (which matters when inverse formulas differentiate dense
forward samples numerically).

Analytic inverses use central differences on the sampling grid: a 3-point
stencil for first derivatives (one boundary point dropped per side) and a
5-point fourth-order stencil for second derivatives (two dropped per side);
the wider second-derivative stencil is needed because the reconstruction
divides by u'' which vanishes at the left endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from invlab.quadrature import (
    DEFAULT_QUAD,
    GRAV_QUAD,
    PiecewiseGrid,
    QuadratureSpec,
    cumulative_simpson,
    gauss_legendre_2d,
    simpson,
)


class DomainError(ValueError):
    """An operator was evaluated outside its admissible set (e.g. a <= 0)."""


class ReconstructionError(ValueError):
    """An analytic inverse hit a degenerate derivative estimate."""


class GeometryError(ValueError):
    """A gravimetric sample point violates the boundary/cell separation."""


@dataclass(frozen=True)
class FunctionHandle:
    """An evaluable real function on a stated interval.

    ``eval`` must accept numpy arrays of points and return values of the same
    shape.  ``breakpoints`` lists abscissas where the function has derivative
    kinks (piecewise-linear basis combinations); quadrature grids split there.
    Finiteness is spot-checked at 16 points on construction.
    """

    eval: callable
    domain: tuple[float, float] = (0.0, 1.0)
    description: str = ""
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        lo, hi = self.domain
        probe = np.linspace(lo, hi, 16)
        vals = np.asarray(self.eval(probe), dtype=float)
        if vals.shape != probe.shape or not np.isfinite(vals).all():
            raise ValueError(f"function handle {self.description!r} is not finite on its domain")

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))


def constant_fn(c: float, domain=(0.0, 1.0)) -> FunctionHandle:
    return FunctionHandle(lambda x: np.full_like(np.asarray(x, dtype=float), float(c)),
                          domain, f"const {c}")


UNIT_SOURCE = constant_fn(1.0)


def _pw_grid(x: float, quad: QuadratureSpec, *handles: FunctionHandle) -> PiecewiseGrid:
    if quad.rule != "composite-simpson":
        raise ValueError("1-D operators use the composite-simpson rule")
    kinks: tuple[float, ...] = ()
    for h in handles:
        kinks += h.breakpoints
    return PiecewiseGrid(x, quad.nodes, kinks)


def _check_positive(values: list[np.ndarray], what: str) -> None:
    low = min(float(v.min()) for v in values)
    if low <= 0.0:
        raise DomainError(f"{what} must stay positive; min value {low:.3g}")


# --- transmissivity --------------------------------------------------------


def transmissivity_forward(a: FunctionHandle, f: FunctionHandle, c0: float, c1: float,
                           x: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return float(c1)
    pw = _pw_grid(x, quad, a, f)
    av = pw.eval(a)
    _check_positive(av, "transmissivity coefficient")
    inner = pw.cumulative(pw.eval(f))
    return float(pw.integral([(ci + c0) / ai for ci, ai in zip(inner, av)]) + c1)


def transmissivity_frechet(a: FunctionHandle, f: FunctionHandle, da: FunctionHandle,
                           x: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    pw = _pw_grid(x, quad, a, f, da)
    av = pw.eval(a)
    _check_positive(av, "transmissivity coefficient")
    inner = pw.cumulative(pw.eval(f))
    dav = pw.eval(da)
    return float(-pw.integral([di * ci / ai**2 for di, ci, ai in zip(dav, inner, av)]))


def transmissivity_inverse(u_samples: np.ndarray, f: FunctionHandle, c0: float) -> np.ndarray:
    """Reconstruct a at the interior nodes of a uniform grid on [0, 1].

    Returns values at grid[1:-1]; u' comes from 3-point central differences.
    """
    u = np.asarray(u_samples, dtype=float)
    n = u.size
    if n < 5:
        raise ValueError("need at least 5 samples")
    h = 1.0 / (n - 1)
    du = (u[2:] - u[:-2]) / (2.0 * h)
    if du.min() <= 0.0:
        raise ReconstructionError("u' estimate is not positive; inverse formula breaks down")
    grid = np.linspace(0.0, 1.0, n)
    inner = cumulative_simpson(np.asarray(f(grid), dtype=float), h)
    return (inner[1:-1] + c0) / du


# --- beam stiffness (fourth-order problem) ---------------------------------


def eb_forward(a: FunctionHandle, f: FunctionHandle, c: tuple[float, float, float, float],
               x: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    c0, c1, c2, c3 = c
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return float(c0)
    pw = _pw_grid(x, quad, a, f)
    av = pw.eval(a)
    _check_positive(av, "stiffness coefficient")
    ff = pw.cumulative(pw.cumulative(pw.eval(f)))
    inner = pw.cumulative([
        (fi + c3 * grid + c2) / ai for (grid, _), fi, ai in zip(pw.pieces, ff, av)
    ])
    return float(pw.integral(inner) + c1 * x + c0)


def eb_frechet(a: FunctionHandle, f: FunctionHandle, da: FunctionHandle,
               x: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    pw = _pw_grid(x, quad, a, f, da)
    av = pw.eval(a)
    _check_positive(av, "stiffness coefficient")
    ff = pw.cumulative(pw.cumulative(pw.eval(f)))
    dav = pw.eval(da)
    inner = pw.cumulative([di * fi / ai**2 for di, fi, ai in zip(dav, ff, av)])
    return float(-pw.integral(inner))


def eb_inverse(u_samples: np.ndarray, f: FunctionHandle, c2: float, c3: float) -> np.ndarray:
    """Reconstruct a at grid[2:-2] from dense deflection samples on [0, 1].

    u'' comes from the 5-point fourth-order stencil; two boundary points are
    dropped on each side.
    """
    u = np.asarray(u_samples, dtype=float)
    n = u.size
    if n < 7:
        raise ValueError("need at least 7 samples")
    h = 1.0 / (n - 1)
    d2u = (-u[:-4] + 16.0 * u[1:-3] - 30.0 * u[2:-2] + 16.0 * u[3:-1] - u[4:]) / (12.0 * h * h)
    if d2u.min() <= 0.0:
        raise ReconstructionError("u'' estimate is not positive; inverse formula breaks down")
    grid = np.linspace(0.0, 1.0, n)
    ff = cumulative_simpson(cumulative_simpson(np.asarray(f(grid), dtype=float), h), h)
    return (ff[2:-2] + c3 * grid[2:-2] + c2) / d2u


# --- quadratic Volterra ------------------------------------------------------


def volterra_forward(u: FunctionHandle, t: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]")
    if t == 0.0:
        return 0.0
    pw = _pw_grid(t, quad, u)
    return float(pw.integral([ui * ui for ui in pw.eval(u)]))


def volterra_frechet(u: FunctionHandle, du: FunctionHandle, t: float,
                     quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]")
    if t == 0.0:
        return 0.0
    pw = _pw_grid(t, quad, u, du)
    uv, duv = pw.eval(u), pw.eval(du)
    return float(2.0 * pw.integral([a * b for a, b in zip(uv, duv)]))


def volterra_inverse(v_samples: np.ndarray) -> np.ndarray:
    """Positive branch u = sqrt(v') at the interior nodes of a uniform grid."""
    v = np.asarray(v_samples, dtype=float)
    n = v.size
    if n < 5:
        raise ValueError("need at least 5 samples")
    h = 1.0 / (n - 1)
    dv = (v[2:] - v[:-2]) / (2.0 * h)
    if dv.min() <= 0.0:
        raise ReconstructionError("v' estimate is not positive; no real square root branch")
    return np.sqrt(dv)


# --- planar gravimetric problem ---------------------------------------------


@dataclass(frozen=True)
class GravGeometry:
    """Four density cells inside [-0.5, 0.5]^2 sampled from the unit-square boundary.

    Cells are (x0, x1, y0, y1) boxes; the perimeter walk starts at (-1, 1) and
    proceeds counterclockwise.  Every boundary point keeps distance >= 0.5 from
    every cell, which keeps the log kernel smooth.
    """

    cells: tuple[tuple[float, float, float, float], ...] = (
        (-0.5, 0.0, 0.0, 0.5),
        (0.0, 0.5, 0.0, 0.5),
        (-0.5, 0.0, -0.5, 0.0),
        (0.0, 0.5, -0.5, 0.0),
    )
    start: tuple[float, float] = (-1.0, 1.0)

    def perimeter_point(self, s: float) -> tuple[float, float]:
        """Point at counterclockwise arc length s from the start corner."""
        s = float(s) % 8.0
        if s < 2.0:
            return (-1.0, 1.0 - s)
        if s < 4.0:
            return (-1.0 + (s - 2.0), -1.0)
        if s < 6.0:
            return (1.0, -1.0 + (s - 4.0))
        return (1.0 - (s - 6.0), 1.0)

    def perimeter_points(self, count: int) -> np.ndarray:
        """count equally spaced boundary points starting at the start corner."""
        spacing = 8.0 / count
        return np.array([self.perimeter_point(k * spacing) for k in range(count)])

    def cell_distance(self, y) -> float:
        """Euclidean distance from y to the nearest cell."""
        y = np.asarray(y, dtype=float)
        best = np.inf
        for x0, x1, y0, y1 in self.cells:
            dx = max(x0 - y[0], 0.0, y[0] - x1)
            dy = max(y0 - y[1], 0.0, y[1] - y1)
            best = min(best, float(np.hypot(dx, dy)))
        return best


DEFAULT_GRAV_GEOMETRY = GravGeometry()


def _check_boundary_point(y, geom: GravGeometry) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if abs(np.abs(y).max() - 1.0) > 1e-9:
        raise GeometryError(f"sample point {y} is not on the boundary of [-1, 1]^2")
    if geom.cell_distance(y) < 0.5 - 1e-9:
        raise GeometryError(f"sample point {y} is too close to a density cell")
    return y


def _cell_log_integrals(y, geom: GravGeometry, quad: QuadratureSpec) -> np.ndarray:
    """Integral of ln|x - y| over each cell, tensor Gauss-Legendre per cell."""
    y = np.asarray(y, dtype=float)
    order = quad.nodes if quad.rule == "gauss-legendre-tensor" else GRAV_QUAD.nodes
    out = np.empty(len(geom.cells))
    for k, cell in enumerate(geom.cells):
        pts, wts = gauss_legendre_2d(order, cell)
        r = np.hypot(pts[:, 0] - y[0], pts[:, 1] - y[1])
        out[k] = float(wts @ np.log(r))
    return out


def grav_forward(alpha, y, geom: GravGeometry = DEFAULT_GRAV_GEOMETRY,
                 quad: QuadratureSpec = GRAV_QUAD) -> float:
    """Potential of the piecewise-constant density sum_k alpha_k 1_{cell_k} at y."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (len(geom.cells),):
        raise ValueError(f"alpha must have length {len(geom.cells)}")
    y = _check_boundary_point(y, geom)
    return float(alpha @ _cell_log_integrals(y, geom, quad))


def grav_matrix(D: int, geom: GravGeometry = DEFAULT_GRAV_GEOMETRY,
                quad: QuadratureSpec = GRAV_QUAD) -> np.ndarray:
    """Discretized operator of shape (4D, 4): column k is the unit density of cell k."""
    if D < 1:
        raise ValueError("D must be >= 1")
    points = geom.perimeter_points(4 * D)
    return np.array([_cell_log_integrals(y, geom, quad) for y in points])


def grav_lsq_inverse(measurements, matrix) -> np.ndarray:
    """Least-squares density recovery via the normal equations."""
    m = np.asarray(matrix, dtype=float)
    b = np.asarray(measurements, dtype=float)
    if b.shape != (m.shape[0],):
        raise ValueError(f"expected {m.shape[0]} measurements, got {b.shape}")
    gram = m.T @ m
    if np.linalg.matrix_rank(gram) < m.shape[1]:
        raise ValueError("measurement matrix is rank deficient")
    return np.linalg.solve(gram, m.T @ b)
