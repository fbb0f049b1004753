"""Coefficient bases, parameter-to-function maps, and the discretized forward map.

The discretized map sends a coefficient vector alpha to point samples of the
forward operator applied to the basis expansion of alpha:

    transmissivity / beam / volterra:  D equidistant samples on [0, 1]
    gravimetric:                       4D samples along the unit-square boundary

``ftilde_batch`` vectorizes the whole pipeline over a batch of coefficient
vectors; each sample point gets its own quadrature grid so results agree with
the scalar operators and the quadrature error varies smoothly along the
sample grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from invlab.operators import (
    DEFAULT_GRAV_GEOMETRY,
    DomainError,
    FunctionHandle,
    GravGeometry,
    UNIT_SOURCE,
    eb_forward,
    grav_matrix,
    transmissivity_forward,
    volterra_forward,
)
from invlab.quadrature import (
    DEFAULT_QUAD,
    GRAV_QUAD,
    PiecewiseGrid,
    QuadratureSpec,
    cumulative_simpson,
    simpson_weights,
)

BASIS_KINDS = ("hat-fem", "cosine-eb", "cosine-volterra", "indicator-grav")
PROBLEMS = ("transmissivity", "euler-bernoulli", "volterra", "gravimetric")


@dataclass(frozen=True)
class BasisSpec:
    """A finite coefficient basis plus the affine offset of the parameter map."""

    kind: str
    d: int
    offset: float = 0.0
    # hat-fem mesh convention: "interior" places hats at the interior nodes of
    # the (d+2)-point mesh i/(d+1); "seven-point" keeps the fixed mesh {i/6}
    # and uses its first d interior nodes (only meaningful for d <= 5).
    mesh: str = "interior"

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("basis dimension must be >= 1")
        if self.kind == "indicator-grav" and self.d != 4:
            raise ValueError("the gravimetric basis has exactly 4 cells")
        if self.mesh not in ("interior", "seven-point"):
            raise ValueError(f"unknown hat mesh convention {self.mesh!r}")
        if self.kind == "hat-fem" and self.mesh == "seven-point" and self.d > 5:
            raise ValueError("the seven-point mesh has only 5 interior nodes")


def _hat_nodes(basis: BasisSpec) -> tuple[np.ndarray, float]:
    if basis.mesh == "seven-point":
        h = 1.0 / 6.0
        return np.arange(1, basis.d + 1) * h, h
    h = 1.0 / (basis.d + 1)
    return np.arange(1, basis.d + 1) * h, h


def basis_matrix(basis: BasisSpec, x: np.ndarray) -> np.ndarray:
    """Values of all d basis functions at the 1-D points x, shape (len(x), d)."""
    x = np.asarray(x, dtype=float)
    k = np.arange(1, basis.d + 1)
    if basis.kind == "hat-fem":
        nodes, h = _hat_nodes(basis)
        return np.maximum(0.0, 1.0 - np.abs(x[:, None] - nodes[None, :]) / h)
    if basis.kind == "cosine-eb":
        return np.cos(2.0 * np.pi * k[None, :] * x[:, None]) / 10.0 + 0.11
    if basis.kind == "cosine-volterra":
        return np.cos(2.0 * np.pi * k[None, :] * (x[:, None] + 0.25)) / 4.0 + 1.0
    raise ValueError("basis_matrix applies to 1-D bases only")


def basis_kinks(basis: BasisSpec) -> tuple[float, ...]:
    """Interior derivative-kink abscissas of the basis (empty for smooth bases)."""
    if basis.kind != "hat-fem":
        return ()
    denom = 6 if basis.mesh == "seven-point" else basis.d + 1
    idx = sorted({j for i in range(1, basis.d + 1) for j in (i - 1, i, i + 1)} & set(range(1, denom)))
    return tuple(j / denom for j in idx)


def basis_eval(basis: BasisSpec, k: int, x) -> float:
    """Value of the k-th basis function (1-based) at a point."""
    if not 1 <= k <= basis.d:
        raise IndexError(f"basis index {k} outside 1..{basis.d}")
    if basis.kind == "indicator-grav":
        x = np.asarray(x, dtype=float)
        x0, x1, y0, y1 = DEFAULT_GRAV_GEOMETRY.cells[k - 1]
        return float((x0 <= x[0] <= x1) and (y0 <= x[1] <= y1))
    return float(basis_matrix(basis, np.atleast_1d(np.asarray(x, dtype=float)))[0, k - 1])


@dataclass(frozen=True)
class GravDensity:
    """Piecewise-constant density: coefficient 4-vector tagged with its cells."""

    alpha: np.ndarray
    geom: GravGeometry = DEFAULT_GRAV_GEOMETRY


def p_map(basis: BasisSpec, alpha):
    """Affine parameter map: alpha -> offset + sum_k alpha_k phi_k.

    Returns a FunctionHandle for the 1-D bases and a GravDensity for the
    indicator basis.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (basis.d,):
        raise ValueError(f"expected {basis.d} coefficients, got shape {alpha.shape}")
    if basis.kind == "indicator-grav":
        return GravDensity(alpha)
    lam = basis.offset

    def vec_eval(x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        vals = lam + basis_matrix(basis, flat) @ alpha
        return vals.reshape(x.shape) if x.ndim else float(vals[0])

    return FunctionHandle(vec_eval, (0.0, 1.0), f"{basis.kind} combination",
                          breakpoints=basis_kinks(basis))


@dataclass(frozen=True)
class ProblemSpec:
    """One discretized inverse problem: basis, measurement count, coefficient box."""

    problem: str
    basis: BasisSpec
    D: int
    coefficient_box: tuple[float, float] = (0.0, 1.0)
    sampling: str = "endpoint"  # or "midpoint": x_j = (j + 1/2)/D

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.D < 2:
            raise ValueError("D must be >= 2")
        lo, hi = self.coefficient_box
        if not lo < hi:
            raise ValueError("coefficient box must be nonempty")
        if self.sampling not in ("endpoint", "midpoint"):
            raise ValueError(f"unknown sampling convention {self.sampling!r}")

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def output_dim(self) -> int:
        return 4 * self.D if self.problem == "gravimetric" else self.D


def problem_spec(problem: str, d: int = 4, D: int = 100, **kwargs) -> ProblemSpec:
    """Build a ProblemSpec with the per-problem default basis."""
    if problem == "transmissivity":
        basis = BasisSpec("hat-fem", d, offset=0.1, mesh=kwargs.pop("mesh", "interior"))
    elif problem == "euler-bernoulli":
        basis = BasisSpec("cosine-eb", d)
    elif problem == "volterra":
        basis = BasisSpec("cosine-volterra", d)
    elif problem == "gravimetric":
        basis = BasisSpec("indicator-grav", 4)
    else:
        raise ValueError(f"unknown problem {problem!r}")
    return ProblemSpec(problem, basis, D, **kwargs)


def sample_points(spec: ProblemSpec) -> np.ndarray:
    """The 1-D sample abscissas for the interval problems."""
    if spec.sampling == "midpoint":
        return (np.arange(spec.D) + 0.5) / spec.D
    return np.arange(spec.D) / (spec.D - 1)


def sample_equidistant(g: FunctionHandle, D: int, sampling: str = "endpoint") -> np.ndarray:
    """Sample a function at D equidistant points of [0, 1] (both endpoints included)."""
    if D < 2:
        raise ValueError("D must be >= 2")
    if sampling == "midpoint":
        xs = (np.arange(D) + 0.5) / D
    else:
        xs = np.arange(D) / (D - 1)
    return np.asarray(g(xs), dtype=float)


_GRAV_MATRIX_CACHE: dict = {}


def cached_grav_matrix(D: int, quad: QuadratureSpec = GRAV_QUAD) -> np.ndarray:
    key = (D, quad.rule, quad.nodes)
    if key not in _GRAV_MATRIX_CACHE:
        _GRAV_MATRIX_CACHE[key] = grav_matrix(D, quad=quad)
    return _GRAV_MATRIX_CACHE[key]


def sample_grav_boundary(alpha, D: int, geom: GravGeometry = DEFAULT_GRAV_GEOMETRY,
                         quad: QuadratureSpec = GRAV_QUAD) -> np.ndarray:
    """Potential values at 4D counterclockwise boundary points starting at (-1, 1)."""
    alpha = np.asarray(alpha, dtype=float)
    matrix = grav_matrix(D, geom, quad) if geom is not DEFAULT_GRAV_GEOMETRY else cached_grav_matrix(D, quad)
    return matrix @ alpha


_BATCH_CHUNK = 8192


def ftilde_batch(spec: ProblemSpec, alphas, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Discretized forward map for a batch of coefficient rows, shape (m, d).

    Returns an (m, output_dim) array.  Deterministic given (spec, alphas, quad).
    """
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
    if alphas.shape[1] != spec.d:
        raise ValueError(f"expected coefficient rows of length {spec.d}")

    if spec.problem == "gravimetric":
        return alphas @ cached_grav_matrix(spec.D, GRAV_QUAD if quad.rule != "gauss-legendre-tensor" else quad).T

    xs = sample_points(spec)
    m = alphas.shape[0]
    out = np.empty((m, spec.D))
    lam = spec.basis.offset
    kinks = basis_kinks(spec.basis)
    grids = {}
    for j, x in enumerate(xs):
        if x > 0.0:
            pw = PiecewiseGrid(x, quad.nodes, kinks)
            grids[j] = [
                (grid, h, simpson_weights(grid.size, h), basis_matrix(spec.basis, grid))
                for grid, h in pw.pieces
            ]
    for start in range(0, m, _BATCH_CHUNK):
        block = alphas[start : start + _BATCH_CHUNK]
        sl = slice(start, start + block.shape[0])
        for j, x in enumerate(xs):
            if x == 0.0:
                out[sl, j] = 0.0
                continue
            total = 0.0
            inner_off = 0.0
            for grid, h, w, bm in grids[j]:
                vals = lam + bm @ block.T  # (n_piece, m_block)
                if spec.problem == "volterra":
                    np.multiply(vals, vals, out=vals)
                    total = total + w @ vals
                    continue
                if vals.min() <= 0.0:
                    raise DomainError("coefficient function is not positive at a quadrature node")
                if spec.problem == "transmissivity":
                    np.reciprocal(vals, out=vals)
                    total = total + (w * grid) @ vals
                else:  # euler-bernoulli
                    ff = 0.5 * grid**2
                    np.divide(ff[:, None], vals, out=vals)
                    inner = cumulative_simpson(vals, h, axis=0) + inner_off
                    inner_off = inner[-1]
                    total = total + w @ inner
            out[sl, j] = total
    return out


def ftilde(spec: ProblemSpec, alpha, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Discretized forward map of a single coefficient vector."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (spec.d,):
        raise ValueError(f"expected a coefficient vector of length {spec.d}")
    return ftilde_batch(spec, alpha[None, :], quad)[0]


def ftilde_reference(spec: ProblemSpec, alpha, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Slow scalar-operator composition of the same map, for consistency checks."""
    alpha = np.asarray(alpha, dtype=float)
    if spec.problem == "gravimetric":
        return sample_grav_boundary(alpha, spec.D, quad=quad if quad.rule == "gauss-legendre-tensor" else GRAV_QUAD)
    handle = p_map(spec.basis, alpha)
    xs = sample_points(spec)
    if spec.problem == "transmissivity":
        return np.array([transmissivity_forward(handle, UNIT_SOURCE, 0.0, 0.0, x, quad) for x in xs])
    if spec.problem == "euler-bernoulli":
        return np.array([eb_forward(handle, UNIT_SOURCE, (0.0, 0.0, 0.0, 0.0), x, quad) for x in xs])
    return np.array([volterra_forward(handle, x, quad) for x in xs])
