import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from gpe2.energy import energy_segregated
from gpe2.errors import DegenerateInputError, ParameterError
from gpe2.grid import Grid2D, integrate, laplacian, normalize
from gpe2.oracles import (
    GaussianFrameField,
    OscillatorEigenfunction,
    eval_eigenfunction,
    frame_grid,
    gaussian_dirichlet_eigenvalue,
    gaussian_mass,
    gaussian_rayleigh,
    gaussian_weight,
    ground_state,
    lambda_halfspace,
    lambda_table,
    to_gaussian_frame,
)


def _dipole(grid, nu=(1.0, 0.0), part="signed"):
    return eval_eigenfunction(OscillatorEigenfunction("second_dipole", grid.omega, nu), grid, part)


# -- eigenfunctions -----------------------------------------------------------

def test_eigenfunction_normalization(std_grid):
    w = _dipole(std_grid, (0.6, 0.8))
    wp = _dipole(std_grid, (0.6, 0.8), "positive")
    wm = _dipole(std_grid, (0.6, 0.8), "negative")
    assert integrate(w * w) == pytest.approx(2.0, abs=1e-6)
    assert integrate(wp * wp) == pytest.approx(1.0, abs=1e-6)
    assert integrate(wm * wm) == pytest.approx(1.0, abs=1e-6)
    assert np.array_equal(w.values, wp.values - wm.values)


def test_perpendicular_dipoles_orthogonal(std_grid):
    a = _dipole(std_grid, (0.6, 0.8))
    b = _dipole(std_grid, (-0.8, 0.6))
    assert abs(integrate(a * b)) <= 1e-10


@pytest.mark.parametrize("kind,level", [("ground", 2.0), ("second_dipole", 4.0)])
def test_eigen_residual(std_grid, kind, level):
    e = OscillatorEigenfunction(kind, 1.0, (1.0, 0.0))
    assert e.eigenvalue == level
    f = eval_eigenfunction(e, std_grid)
    r = -laplacian(f).values + (std_grid.potential - level) * f.values
    r[0, :] = r[-1, :] = r[:, 0] = r[:, -1] = 0
    h = std_grid.spacing
    assert h * math.sqrt(np.sum(r * r)) <= 5e-3


def test_nu_is_normalized():
    e = OscillatorEigenfunction("second_dipole", 1.0, (3.0, 4.0))
    assert e.nu == pytest.approx((0.6, 0.8))
    with pytest.raises(ParameterError):
        OscillatorEigenfunction("second_dipole", 1.0, (0.0, 0.0))
    with pytest.raises(ParameterError):
        OscillatorEigenfunction("third", 1.0)


def test_omega_mismatch(std_grid):
    with pytest.raises(ParameterError):
        eval_eigenfunction(OscillatorEigenfunction("ground", 2.0), std_grid)


# -- Gaussian frame -------------------------------------------------------------

@pytest.mark.parametrize("omega", [0.5, 1.0, 2.0])
def test_ground_state_maps_to_one(omega):
    grid = Grid2D(6.0 / math.sqrt(omega) + 2.0, 257, omega)
    f = to_gaussian_frame(ground_state(grid))
    assert np.max(np.abs(f.values[1:-1, 1:-1] - 1.0)) <= 1e-4
    assert gaussian_mass(f) == pytest.approx(1.0, abs=1e-4)


def test_frame_mass_identity(std_grid):
    rng = np.random.default_rng(1)
    c = rng.standard_normal(3)
    u = normalize(std_grid.evaluate(
        lambda x1, x2: (1 + c[0] * x1 + c[1] * x2 ** 2) ** 2 * np.exp(-0.6 * (x1**2 + x2**2) + c[2] * x1 * 0.1)
    ))
    assert gaussian_mass(to_gaussian_frame(u)) == pytest.approx(1.0, abs=1e-4)


def test_frame_grid_scaling(std_grid):
    fg = frame_grid(std_grid)
    assert fg.points == std_grid.points
    assert fg.half_width == pytest.approx(8.0 * math.sqrt(2.0))


def test_dipole_part_maps_to_halfplane_linear(wpair):
    f = to_gaussian_frame(wpair[0])
    x1, _ = f.grid.mesh
    # u~ = sqrt(2) x1^+ has unit Gaussian mass
    inner = f.grid.radius_squared < 25
    assert np.max(np.abs(f.values - math.sqrt(2) * np.maximum(x1, 0))[inner]) < 1e-12
    assert gaussian_rayleigh(f) == pytest.approx(1.0, abs=1e-3)


def test_rayleigh_constant_and_linear(std_grid):
    fg = frame_grid(std_grid)
    one = GaussianFrameField(fg, np.ones(fg.shape), 1.0)
    assert gaussian_rayleigh(one) == 0.0
    x1, _ = fg.mesh
    lin = GaussianFrameField(fg, x1.copy(), 1.0)
    assert gaussian_rayleigh(lin) == pytest.approx(1.0, abs=1e-3)


def test_rayleigh_zero_field(std_grid):
    fg = frame_grid(std_grid)
    with pytest.raises(DegenerateInputError):
        gaussian_rayleigh(GaussianFrameField(fg, np.zeros(fg.shape), 1.0))


def test_frame_overflow():
    with pytest.raises(ParameterError):
        to_gaussian_frame(ground_state(Grid2D(40.0, 33, 1.0)))


def _smooth_segregated_pair(grid, rng):
    """u supported on {x . nu > 0}, v on the complement; both smooth inside."""
    theta = rng.uniform(0, 2 * math.pi)
    nu = np.array([math.cos(theta), math.sin(theta)])
    x1, x2 = grid.mesh
    t = nu[0] * x1 + nu[1] * x2
    s = -nu[1] * x1 + nu[0] * x2
    c = rng.uniform(-0.5, 0.5, size=4)
    env = np.exp(-0.5 * grid.omega * grid.radius_squared)
    u = np.maximum(t, 0) * (1 + c[0] * s + c[1] * t) ** 2 * env
    v = np.maximum(-t, 0) * (1 + c[2] * s + c[3] * t) ** 2 * env
    return normalize(grid.field(u)), normalize(grid.field(v))


@pytest.mark.parametrize("omega", [1.0, 2.0])
def test_energy_identity_random_pairs(omega):
    grid = Grid2D(8.0 / math.sqrt(omega), 257, omega)
    rng = np.random.default_rng(11)
    for _ in range(5):
        u, v = _smooth_segregated_pair(grid, rng)
        e = energy_segregated(u, v, 0, 0)
        f = omega * (gaussian_rayleigh(to_gaussian_frame(u)) + gaussian_rayleigh(to_gaussian_frame(v)) + 2)
        assert abs(e - f) / e <= 1e-3


# -- Lambda(H_a) ----------------------------------------------------------------

def test_lambda_h0():
    assert lambda_halfspace(0.0) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("a,expected", [(1.0, 2.0), (math.sqrt(3.0), 3.0)])
def test_lambda_hermite_zeros(a, expected):
    # He_2 = t^2 - 1 and He_3 = t^3 - 3t are positive beyond their largest zero
    assert lambda_halfspace(a) == pytest.approx(expected, abs=1e-5)


def test_lambda_far_left():
    a = -3.0
    val = lambda_halfspace(a)
    assert 0.0 < val < 0.2
    # upper bound from the test function min(t - a, 1)
    w = lambda t: math.exp(-t * t / 2)
    num = sci_integrate.quad(w, a, a + 1)[0]
    den = sci_integrate.quad(lambda t: (t - a) ** 2 * w(t), a, a + 1)[0] + sci_integrate.quad(w, a + 1, np.inf)[0]
    assert val <= num / den + 1e-6


def test_lambda_monotone_and_convex():
    a = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5]
    lam = {x: lambda_halfspace(x) for x in a}
    vals = [lam[x] for x in a[:5]]
    assert all(p < q for p, q in zip(vals, vals[1:]))
    for x in (-1.0, -0.5, 0.0, 0.5):
        assert lam[x] + lam[x + 1] >= 2 * lam[x + 0.5] - 1e-3


@pytest.mark.parametrize("a", [-3.01, 3.5, float("nan")])
def test_lambda_range(a):
    with pytest.raises(ParameterError):
        lambda_halfspace(a)


def test_lambda_table_rows():
    rows = lambda_table(-1.0, 1.0, 0.5)
    assert [r[0] for r in rows] == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert lambda_table(0.0, 0.0, 1.0)[0][1] == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ParameterError):
        lambda_table(0, 1, 0)


# -- 2D Dirichlet problems in the Gaussian frame ---------------------------------

@pytest.fixture(scope="module")
def coarse_frame():
    return Grid2D(8.5, 141, 0.5)


def test_halfplane_2d_matches_1d(coarse_frame):
    x1, x2 = coarse_frame.mesh
    l_a = gaussian_dirichlet_eigenvalue(x1 > 0, coarse_frame)
    l_b = gaussian_dirichlet_eigenvalue(x2 > 0, coarse_frame)
    assert l_a == pytest.approx(l_b, rel=1e-10)  # rotation invariance on the grid
    assert l_a == pytest.approx(lambda_halfspace(0.0), abs=1e-2)
    l_c = gaussian_dirichlet_eigenvalue(x1 > 0.5, coarse_frame)
    assert l_c == pytest.approx(lambda_halfspace(0.5), abs=2e-2)


def test_ehrhard_spot_check(coarse_frame):
    """Quadrant and disc of Gaussian measure 1/2 have Lambda >= Lambda(H_0)."""
    x1, x2 = coarse_frame.mesh
    # quadrant {x1 > c, x2 > c} with Phi(-c)^2 = 1/2
    from scipy.stats import norm

    c = -norm.ppf(math.sqrt(0.5))
    r = math.sqrt(2 * math.log(2))
    h2 = coarse_frame.spacing**2
    w = gaussian_weight(coarse_frame.radius_squared)
    lam0 = lambda_halfspace(0.0)
    for mask in ((x1 > c) & (x2 > c), coarse_frame.radius_squared < r * r):
        measure = h2 * w[mask].sum()
        assert measure == pytest.approx(0.5, abs=2e-2)
        assert gaussian_dirichlet_eigenvalue(mask, coarse_frame) >= lam0 - 1e-3


def test_dirichlet_eigenvalue_empty(coarse_frame):
    with pytest.raises(DegenerateInputError):
        gaussian_dirichlet_eigenvalue(np.zeros(coarse_frame.shape, bool), coarse_frame)
