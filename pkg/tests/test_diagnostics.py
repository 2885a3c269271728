import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from gpe2.diagnostics import (
    angular_defect,
    fit_half_plane,
    nodal_curve,
    nodal_interior_probe,
    overlap,
    segregation_report,
    to_csv,
    to_record,
    truncation_check,
    zero_contour,
)
from gpe2.errors import DirectionUndefinedError, ParameterError
from gpe2.grid import Grid2D, normalize
from gpe2.oracles import dipole_pair, ground_state


# -- segregation -----------------------------------------------------------------

def test_disjoint_pair(wpair):
    rep = segregation_report(*wpair, 0.1)
    assert rep.max_v_on_U_eps == 0.0 and rep.max_u_on_V_eps == 0.0
    assert rep.overlap == 0.0 and rep.sup_min == 0.0
    assert not rep.empty_region
    assert rep.eps_set == "single-solution"


def test_identical_ground_pair(phi0):
    rep = segregation_report(phi0, phi0, 0.1)
    assert rep.max_v_on_U_eps == pytest.approx(math.sqrt(1 / math.pi), abs=1e-6)
    assert rep.sup_min == rep.max_v_on_U_eps


def test_empty_region_flag(phi0):
    with pytest.warns(UserWarning, match="empty"):
        rep = segregation_report(phi0, phi0, 10.0)
    assert rep.empty_region
    assert rep.max_v_on_U_eps == 0.0 and rep.max_u_on_V_eps == 0.0


def test_eps_must_be_positive(phi0):
    with pytest.raises(ParameterError):
        segregation_report(phi0, phi0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.5))
def test_swap_symmetry(seed, eps):
    g = Grid2D(6.0, 33)
    rng = np.random.default_rng(seed)
    u = g.field(np.abs(rng.standard_normal(g.shape)))
    v = g.field(np.abs(rng.standard_normal(g.shape)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = segregation_report(u, v, eps)
        b = segregation_report(v, u, eps)
    assert a.max_v_on_U_eps == b.max_u_on_V_eps
    assert a.max_u_on_V_eps == b.max_v_on_U_eps
    assert a.overlap == b.overlap


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.0))
def test_overlap_zero_iff_disjoint(seed, density):
    g = Grid2D(6.0, 33)
    rng = np.random.default_rng(seed)
    u = np.abs(rng.standard_normal(g.shape))
    v = np.abs(rng.standard_normal(g.shape))
    v[rng.random(g.shape) >= density] = 0.0
    v[u > 0.5] = 0.0
    u[v > 0] = np.where(rng.random() < 0.5, 0.0, u[v > 0])
    uf, vf = g.field(u), g.field(v)
    assert (overlap(uf, vf) == 0.0) == (not (uf.values * vf.values).any())


# -- half-plane fit -------------------------------------------------------------

def test_self_fit_oblique(std_grid):
    wp, wm = dipole_pair(std_grid, (0.6, 0.8))
    rep = fit_half_plane(wp, wm)
    assert rep.nu_fit == pytest.approx((0.6, 0.8), abs=1e-3)
    assert rep.l2_error_u <= 1e-6 and rep.l2_error_v <= 1e-6
    assert rep.nodal_line_distance() <= 3 * std_grid.spacing
    assert math.hypot(*rep.nu_fit) == pytest.approx(1.0, abs=1e-14)


def test_fit_symmetric_pair_undefined(phi0):
    with pytest.raises(DirectionUndefinedError):
        fit_half_plane(phi0, phi0)


def test_defects(phi0, wpair):
    assert angular_defect(phi0) <= 1e-6
    assert angular_defect(wpair[0]) >= 0.3
    assert 0.0 <= angular_defect(wpair[1]) <= 1.0


def _rotate(field, theta_deg):
    """Resampled field x -> f(R(-theta) x), i.e. f rotated counterclockwise by theta."""
    g = field.grid
    c, s = math.cos(math.radians(theta_deg)), math.sin(math.radians(theta_deg))
    x1, x2 = g.mesh
    src1, src2 = c * x1 + s * x2, -s * x1 + c * x2
    idx = [(src1 + g.half_width) / g.spacing, (src2 + g.half_width) / g.spacing]
    vals = ndimage.map_coordinates(field.values, idx, order=3, mode="constant")
    return g.field(np.maximum(vals, 0.0))


@pytest.mark.parametrize("theta", [30.0, 90.0, 137.0])
def test_rotation_equivariance(std_grid, theta):
    rng = np.random.default_rng(int(theta))
    nu = (math.cos(0.2), math.sin(0.2))
    wp, wm = dipole_pair(std_grid, nu)
    # an off-model pair, so the l2 errors are not trivially zero
    bump = std_grid.evaluate(lambda x1, x2: np.exp(-((x1 - 1) ** 2 + x2**2)))
    u = normalize(wp + bump * (0.05 * rng.random()))
    v = normalize(wm)
    base = fit_half_plane(u, v)
    rot = fit_half_plane(normalize(_rotate(u, theta)), normalize(_rotate(v, theta)))
    ang0 = math.degrees(math.atan2(base.nu_fit[1], base.nu_fit[0]))
    ang1 = math.degrees(math.atan2(rot.nu_fit[1], rot.nu_fit[0]))
    diff = (ang1 - ang0 - theta + 180) % 360 - 180
    assert abs(diff) <= 2.0
    assert abs(rot.l2_error_u - base.l2_error_u) <= 1e-2
    assert abs(rot.l2_error_v - base.l2_error_v) <= 1e-2


# -- contours -------------------------------------------------------------------

def test_zero_contour_straight_line():
    coords = np.linspace(-1, 1, 21)
    x1, x2 = np.meshgrid(coords, coords, indexing="ij")
    segs = zero_contour(x1 - 0.33, coords)
    assert segs.shape[1:] == (2, 2)
    assert np.allclose(segs[..., 0], 0.33)
    assert len(segs) == 20


def test_zero_contour_circle():
    coords = np.linspace(-2, 2, 81)
    x1, x2 = np.meshgrid(coords, coords, indexing="ij")
    segs = zero_contour(1.0 - x1**2 - x2**2, coords)
    r = np.hypot(segs[..., 0], segs[..., 1])
    assert np.max(np.abs(r - 1.0)) < 5e-3
    length = np.sum(np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1))
    assert length == pytest.approx(2 * math.pi, rel=1e-2)


def test_zero_contour_none():
    coords = np.linspace(0, 1, 5)
    assert zero_contour(np.ones((5, 5)), coords).shape == (0, 2, 2)


def test_nodal_curve_ignores_tail(phi0):
    # u - v is identically zero for the symmetric pair: no crossings recorded
    assert nodal_curve(phi0, phi0).size == 0


# -- nodal interior probe ----------------------------------------------------------

def test_probe_dipole_thin_strip(std_grid, wpair):
    area = nodal_interior_probe(*wpair, 1e-3)
    assert area <= 20 * std_grid.spacing * 1.0


def test_probe_ground_state(phi0):
    assert nodal_interior_probe(phi0, phi0, 1e-3) == pytest.approx(0.0, abs=1e-12)


def test_probe_zeroed_disc(std_grid, phi0):
    vals = phi0.values.copy()
    vals[std_grid.radius_squared <= 1.0] = 0.0
    f = std_grid.field(vals)
    assert nodal_interior_probe(f, f, 1e-3) == pytest.approx(math.pi, rel=0.1)


def test_probe_threshold_positive(phi0):
    with pytest.raises(ParameterError):
        nodal_interior_probe(phi0, phi0, 0.0)


# -- truncation ---------------------------------------------------------------

def test_truncation_ground_state(phi0):
    assert truncation_check(phi0) <= 1e-13


def test_truncation_small_box():
    with pytest.warns(UserWarning):
        g = Grid2D(2.0, 65)
    assert truncation_check(ground_state(g)) >= 1e-2


def test_truncation_zero(small_grid):
    assert truncation_check(small_grid.zeros()) == 0.0


# -- serialization -------------------------------------------------------------------

def test_record_and_csv(wpair):
    rep = segregation_report(*wpair, 0.1)
    text = rep.to_record()
    assert text.endswith("\n")
    kv = dict(line.split("=", 1) for line in text.strip().splitlines())
    assert float(kv["overlap"]) == 0.0 and kv["eps_set"] == "single-solution"
    csv_text = to_csv([{"run": "a", "x": 0.5}, {"run": "b", "x": 1.25}])
    assert csv_text == "run,x\na,0.5\nb,1.25\n"
    assert to_csv([]) == ""
    assert to_record({"k": 1}) == "k=1\n"
