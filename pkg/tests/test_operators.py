import numpy as np
import pytest

from invlab.operators import (
    DEFAULT_GRAV_GEOMETRY,
    DomainError,
    FunctionHandle,
    GeometryError,
    ReconstructionError,
    constant_fn,
    UNIT_SOURCE,
    eb_forward,
    eb_frechet,
    eb_inverse,
    grav_forward,
    grav_lsq_inverse,
    grav_matrix,
    transmissivity_forward,
    transmissivity_frechet,
    transmissivity_inverse,
    volterra_forward,
    volterra_frechet,
    volterra_inverse,
)
from invlab.quadrature import GRAV_QUAD, QuadratureSpec, cumulative_simpson, simpson
from invlab.sampling import BasisSpec, p_map

F1 = UNIT_SOURCE
A_TENTH = constant_fn(0.1)
A_ONE = constant_fn(1.0)


def random_handle(rng, kind="hat-fem", d=4, offset=0.1):
    basis = BasisSpec(kind, d, offset=offset)
    return p_map(basis, rng.uniform(0.2, 0.9, size=d))


# --- quadrature building blocks ------------------------------------------------


def test_simpson_exact_for_cubics():
    grid = np.linspace(0.0, 2.0, 9)
    h = grid[1] - grid[0]
    vals = 3.0 * grid**3 - grid + 2.0
    exact = 3.0 / 4.0 * 2.0**4 - 2.0**2 / 2.0 + 2.0 * 2.0
    assert simpson(vals, h) == pytest.approx(exact, abs=1e-14)


def test_cumulative_simpson_exact_for_quadratics_every_prefix():
    grid = np.linspace(0.0, 1.0, 11)
    h = grid[1] - grid[0]
    vals = grid**2 - 2.0 * grid + 0.5
    want = grid**3 / 3.0 - grid**2 + 0.5 * grid
    got = cumulative_simpson(vals, h)
    assert np.abs(got - want).max() < 1e-15


def test_cumulative_simpson_matrix_axis():
    grid = np.linspace(0.0, 1.0, 9)
    h = grid[1] - grid[0]
    vals = np.column_stack([np.ones(9), grid])
    got = cumulative_simpson(vals, h, axis=0)
    assert np.abs(got[:, 0] - grid).max() < 1e-15
    assert np.abs(got[:, 1] - grid**2 / 2).max() < 1e-15


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec("composite-simpson", 10)
    with pytest.raises(ValueError):
        QuadratureSpec("unknown-rule", 11)


# --- transmissivity -------------------------------------------------------------


def test_transmissivity_closed_forms():
    # a = 0.1, f = 1: u(x) = 5 x^2
    assert transmissivity_forward(A_TENTH, F1, 0.0, 0.0, 1.0) == pytest.approx(5.0, abs=1e-12)
    assert transmissivity_forward(A_ONE, F1, 0.0, 0.0, 0.5) == pytest.approx(0.125, abs=1e-12)
    assert transmissivity_forward(A_ONE, F1, 0.0, 2.5, 0.0) == 2.5


def test_transmissivity_rejects_nonpositive_coefficient():
    bad = FunctionHandle(lambda x: 0.5 - np.asarray(x), (0, 1), "crosses zero")
    with pytest.raises(DomainError):
        transmissivity_forward(bad, F1, 0.0, 0.0, 1.0)


def test_transmissivity_frechet_closed_forms():
    assert transmissivity_frechet(A_ONE, F1, constant_fn(0.0), 1.0) == 0.0
    assert transmissivity_frechet(A_ONE, F1, constant_fn(1.0), 1.0) == pytest.approx(-0.5, abs=1e-12)


def test_transmissivity_monotone_in_coefficient():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a2 = random_handle(rng)
        a1 = FunctionHandle(lambda x, f=a2: f(x) + 0.3, (0, 1), "larger")
        for x in (0.25, 0.5, 1.0):
            assert transmissivity_forward(a1, F1, 0.0, 0.0, x) <= transmissivity_forward(
                a2, F1, 0.0, 0.0, x
            )


def test_transmissivity_inverse_round_trips():
    grid = np.linspace(0.0, 1.0, 1025)
    rec = transmissivity_inverse(5.0 * grid**2, F1, 0.0)
    assert np.abs(rec - 0.1).max() <= 1e-4
    rec = transmissivity_inverse(grid**2 / 2.0, F1, 0.0)
    assert np.abs(rec - 1.0).max() <= 1e-4
    with pytest.raises(ReconstructionError):
        transmissivity_inverse(np.ones(1025), F1, 0.0)


# --- beam stiffness -------------------------------------------------------------


def test_eb_closed_forms():
    assert eb_forward(A_ONE, F1, (0, 0, 0, 0), 1.0) == pytest.approx(1.0 / 24.0, abs=1e-12)
    assert eb_forward(A_ONE, F1, (1.5, 0, 0, 0), 0.0) == 1.5
    half = eb_forward(constant_fn(2.0), F1, (0, 0, 0, 0), 0.7)
    assert half == pytest.approx(0.5 * eb_forward(A_ONE, F1, (0, 0, 0, 0), 0.7), rel=1e-12)


def test_eb_frechet_closed_form():
    assert eb_frechet(A_ONE, F1, constant_fn(0.0), 1.0) == 0.0
    assert eb_frechet(A_ONE, F1, constant_fn(1.0), 1.0) == pytest.approx(-1.0 / 24.0, abs=1e-12)


def test_eb_inverse_round_trips():
    grid = np.linspace(0.0, 1.0, 1025)
    rec = eb_inverse(grid**4 / 24.0, F1, 0.0, 0.0)
    assert np.abs(rec - 1.0).max() <= 1e-3
    # quadratic deflection: u'' constant q, so a(x) = (x^2/2)/q
    q = 0.35
    u = 0.5 * q * grid**2 + 0.1 * grid + 0.2
    rec = eb_inverse(u, F1, 0.0, 0.0)
    want = (grid[2:-2] ** 2 / 2.0) / q
    assert np.abs(rec - want).max() <= 1e-6
    with pytest.raises(ReconstructionError):
        eb_inverse(grid, F1, 0.0, 0.0)


# --- Volterra -------------------------------------------------------------------


def test_volterra_closed_forms():
    for t in (0.0, 0.3, 1.0):
        assert volterra_forward(constant_fn(1.0), t) == pytest.approx(t, abs=1e-14)
    ident = FunctionHandle(lambda s: np.asarray(s, dtype=float), (0, 1), "s")
    assert volterra_forward(ident, 1.0) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_volterra_frechet_closed_forms():
    assert volterra_frechet(constant_fn(1.0), constant_fn(0.0), 1.0) == 0.0
    assert volterra_frechet(constant_fn(1.0), constant_fn(1.0), 1.0) == pytest.approx(2.0, abs=1e-12)


def test_volterra_inverse_round_trips():
    grid = np.linspace(0.0, 1.0, 1025)
    rec = volterra_inverse(grid)
    assert np.abs(rec - 1.0).max() <= 1e-6
    rec = volterra_inverse(grid**3 / 3.0)
    # the sqrt amplifies the h^2 stencil bias where u -> 0, so the first
    # interior point carries the worst error
    err = np.abs(rec - grid[1:-1])
    assert err[1:].max() <= 1e-4
    assert err.max() <= 1e-3
    with pytest.raises(ReconstructionError):
        volterra_inverse(-grid)


# --- Frechet derivatives vs finite differences ----------------------------------


def _fd_directional(forward, a_vec, da_vec, basis, x, t=1e-5):
    up = p_map(basis, a_vec + t * da_vec)
    dn = p_map(basis, a_vec - t * da_vec)
    return (forward(up, x) - forward(dn, x)) / (2.0 * t)


@pytest.mark.parametrize("problem", ["transmissivity", "euler-bernoulli", "volterra"])
def test_frechet_matches_finite_differences(problem):
    rng = np.random.default_rng(99)
    if problem == "transmissivity":
        basis = BasisSpec("hat-fem", 4, offset=0.1)
        fwd = lambda h, x: transmissivity_forward(h, F1, 0.0, 0.0, x)
        der = lambda h, dh, x: transmissivity_frechet(h, F1, dh, x)
    elif problem == "euler-bernoulli":
        basis = BasisSpec("cosine-eb", 4)
        fwd = lambda h, x: eb_forward(h, F1, (0, 0, 0, 0), x)
        der = lambda h, dh, x: eb_frechet(h, F1, dh, x)
    else:
        basis = BasisSpec("cosine-volterra", 4)
        fwd = lambda h, x: volterra_forward(h, x)
        der = lambda h, dh, x: volterra_frechet(h, dh, x)
    for _ in range(20):
        a_vec = rng.uniform(0.2, 0.9, size=4)
        da_vec = rng.standard_normal(4)
        x = float(rng.uniform(0.3, 1.0))
        handle = p_map(basis, a_vec)
        dhandle_vals = p_map(basis, da_vec)
        # direction through the affine basis map: subtract the offset
        dh = FunctionHandle(lambda z, f=dhandle_vals, lam=basis.offset: f(z) - lam, (0, 1), "da")
        got = der(handle, dh, x)
        want = _fd_directional(fwd, a_vec, da_vec, basis, x)
        assert got == pytest.approx(want, rel=1e-5, abs=1e-9)


@pytest.mark.parametrize("problem", ["transmissivity", "euler-bernoulli", "volterra"])
def test_frechet_linearity(problem):
    rng = np.random.default_rng(5)
    basis = BasisSpec("hat-fem", 4, offset=0.1)
    a = p_map(basis, rng.uniform(0.2, 0.9, size=4))
    d1 = constant_fn(0.7)
    d2 = FunctionHandle(lambda z: np.sin(2 * np.pi * np.asarray(z)), (0, 1), "sin")
    lam = 1.7
    combo = FunctionHandle(lambda z: d1(z) + lam * d2(z), (0, 1), "combo")
    if problem == "transmissivity":
        der = lambda dh, x: transmissivity_frechet(a, F1, dh, x)
    elif problem == "euler-bernoulli":
        der = lambda dh, x: eb_frechet(a, F1, dh, x)
    else:
        der = lambda dh, x: volterra_frechet(a, dh, x)
    for x in (0.3, 0.8, 1.0):
        lhs = der(combo, x)
        rhs = der(d1, x) + lam * der(d2, x)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_quadrature_refinement_stable():
    rng = np.random.default_rng(17)
    base = QuadratureSpec("composite-simpson", 513)
    fine = base.refined()
    for _ in range(5):
        a = random_handle(rng)
        u = random_handle(rng, kind="cosine-volterra", d=4, offset=0.0)
        x = float(rng.uniform(0.3, 1.0))
        assert transmissivity_forward(a, F1, 0.0, 0.0, x, base) == pytest.approx(
            transmissivity_forward(a, F1, 0.0, 0.0, x, fine), abs=1e-8
        )
        assert eb_forward(a, F1, (0, 0, 0, 0), x, base) == pytest.approx(
            eb_forward(a, F1, (0, 0, 0, 0), x, fine), abs=1e-8
        )
        assert volterra_forward(u, x, base) == pytest.approx(
            volterra_forward(u, x, fine), abs=1e-8
        )


# --- gravimetric ----------------------------------------------------------------


def test_grav_zero_density():
    for s in (0.0, 1.0, 3.0, 5.5):
        y = DEFAULT_GRAV_GEOMETRY.perimeter_point(s)
        assert grav_forward(np.zeros(4), y) == 0.0


def test_grav_rotational_symmetry():
    val1 = grav_forward(np.ones(4), (-1.0, 1.0))
    val2 = grav_forward(np.ones(4), (1.0, -1.0))
    assert val1 == pytest.approx(val2, rel=1e-12)


def test_grav_single_cell_regression_value():
    # frozen from a 64x64 Gauss-Legendre evaluation of the cell-1 integral
    want = grav_forward(np.array([1.0, 0, 0, 0]), (-1.0, 1.0),
                        quad=QuadratureSpec("gauss-legendre-tensor", 64))
    got = grav_forward(np.array([1.0, 0, 0, 0]), (-1.0, 1.0))
    assert got == pytest.approx(want, abs=1e-12)
    # frozen from scipy.integrate.dblquad at epsabs=1e-13
    assert got == pytest.approx(0.014671332850356258, abs=1e-12)


def test_grav_forward_linearity():
    rng = np.random.default_rng(2)
    y = DEFAULT_GRAV_GEOMETRY.perimeter_point(2.5)
    a, b = rng.uniform(0, 1, 4), rng.uniform(0, 1, 4)
    assert grav_forward(a + b, y) == pytest.approx(
        grav_forward(a, y) + grav_forward(b, y), abs=1e-12
    )


def test_grav_rejects_off_boundary_points():
    with pytest.raises(GeometryError):
        grav_forward(np.ones(4), (0.2, 0.3))


def test_grav_matrix_consistency_and_symmetry():
    rng = np.random.default_rng(8)
    D = 3
    M = grav_matrix(D)
    assert M.shape == (4 * D, 4)
    pts = DEFAULT_GRAV_GEOMETRY.perimeter_points(4 * D)
    for _ in range(5):
        alpha = rng.uniform(0, 1, 4)
        direct = np.array([grav_forward(alpha, y) for y in pts])
        assert np.abs(M @ alpha - direct).max() <= 1e-12
    # 180-degree rotation swaps cells (1,4) and (2,3) and shifts the boundary
    # walk by half the perimeter
    shift = 2 * D
    perm = [3, 2, 1, 0]
    rotated = np.roll(M, -shift, axis=0)[:, perm]
    assert np.allclose(M, rotated, atol=1e-12)


def test_grav_nearest_cell_dominates():
    # ln|x-y| is most negative for the nearest cell, so at each sample point
    # the nearest-cell entry is strictly below the farthest-cell entry
    M = grav_matrix(2)
    pts = DEFAULT_GRAV_GEOMETRY.perimeter_points(8)
    for row, y in zip(M, pts):
        centers = np.array([[(c[0] + c[1]) / 2, (c[2] + c[3]) / 2]
                            for c in DEFAULT_GRAV_GEOMETRY.cells])
        dists = np.linalg.norm(centers - np.asarray(y), axis=1)
        assert row[np.argmin(dists)] < row[np.argmax(dists)]


def test_grav_lsq_round_trip():
    rng = np.random.default_rng(21)
    M = grav_matrix(4)
    alpha = rng.uniform(0, 1, 4)
    rec = grav_lsq_inverse(M @ alpha, M)
    assert np.abs(rec - alpha).max() <= 1e-8
    assert np.abs(grav_lsq_inverse(np.zeros(16), M)).max() == 0.0


def test_grav_lsq_noisy_recovery_unbiased():
    rng = np.random.default_rng(23)
    M = grav_matrix(4)
    alpha = np.array([0.3, 0.6, 0.2, 0.8])
    clean = M @ alpha
    recs = np.array([
        grav_lsq_inverse(clean + rng.normal(0, 1e-3, clean.size), M) for _ in range(100)
    ])
    pseudo = np.linalg.solve(M.T @ M, M.T)
    per_trial_std = 1e-3 * np.sqrt(np.sum(pseudo**2, axis=1))
    se = 3.0 * per_trial_std / np.sqrt(100)
    assert np.all(np.abs(recs.mean(axis=0) - alpha) <= se + 1e-12)


def test_grav_quadrature_order_refinement():
    alpha = np.array([0.4, 0.1, 0.7, 0.9])
    y = (-1.0, 0.0)
    coarse = grav_forward(alpha, y, quad=QuadratureSpec("gauss-legendre-tensor", 16))
    fine = grav_forward(alpha, y, quad=QuadratureSpec("gauss-legendre-tensor", 32))
    assert coarse == pytest.approx(fine, abs=1e-12)


def test_function_handle_finite_guard():
    with pytest.raises(ValueError):
        FunctionHandle(lambda x: 1.0 / np.asarray(x), (0.0, 1.0), "pole at 0")
