"""Segregation and symmetry-breaking measurements on computed pairs."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DirectionUndefinedError, ParameterError
from .grid import ScalarField, angular_modes, check_same_grid, mass
from .oracles import dipole_pair

ANGULAR_M_MAX = 8
# contour points where both components are below this fraction of the peak
# are tail noise, not nodal line
NODAL_FLOOR = 1e-6


@dataclass
class SegregationReport:
    overlap: float
    sup_min: float
    eps: float
    max_v_on_U_eps: float
    max_u_on_V_eps: float
    empty_region: bool = False
    # U_eps is thresholded on this one solution, not on an infimum over a family
    eps_set: str = "single-solution"

    def to_record(self) -> str:
        return to_record(asdict(self))


@dataclass
class SymmetryReport:
    defect_u: float
    defect_v: float
    nu_fit: tuple
    l2_error_u: float
    l2_error_v: float
    nodal_curve: np.ndarray = field(repr=False)

    def nodal_line_distance(self) -> float:
        """Largest distance from a nodal-curve point to the line ``x . nu_fit = 0``."""
        if self.nodal_curve.size == 0:
            return float("nan")
        pts = self.nodal_curve.reshape(-1, 2)
        return float(np.max(np.abs(pts @ np.asarray(self.nu_fit))))

    def scalars(self) -> dict:
        return {
            "defect_u": self.defect_u,
            "defect_v": self.defect_v,
            "nu_x1": self.nu_fit[0],
            "nu_x2": self.nu_fit[1],
            "l2_error_u": self.l2_error_u,
            "l2_error_v": self.l2_error_v,
            "nodal_line_distance": self.nodal_line_distance(),
            "nodal_segments": int(self.nodal_curve.shape[0]),
        }

    def to_record(self) -> str:
        return to_record(self.scalars())


def to_record(d: dict) -> str:
    """Flat ``key=value`` text, one pair per line."""
    lines = []
    for k, val in d.items():
        if isinstance(val, float):
            val = repr(val)
        lines.append(f"{k}={val}")
    return "\n".join(lines) + "\n"


def to_csv(rows: list[dict]) -> str:
    """CSV with a header row; ``rows`` share keys (the first row fixes the order)."""
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def overlap(u: ScalarField, v: ScalarField) -> float:
    check_same_grid(u, v)
    h = u.grid.spacing
    return float(h * h * np.sum(u.values**2 * v.values**2))


def segregation_report(u: ScalarField, v: ScalarField, eps: float) -> SegregationReport:
    """Measure how small each component is where the other one is at least ``eps``."""
    check_same_grid(u, v)
    if not eps > 0:
        raise ParameterError("eps must be positive")
    a, b = u.values, v.values
    in_u = a >= eps
    in_v = b >= eps
    empty = not in_u.any() or not in_v.any()
    if empty:
        warnings.warn(f"eps={eps} leaves an empty region; maxima reported as 0", stacklevel=2)
    return SegregationReport(
        overlap=overlap(u, v),
        sup_min=float(np.max(np.minimum(a, b))),
        eps=float(eps),
        max_v_on_U_eps=float(b[in_u].max()) if in_u.any() else 0.0,
        max_u_on_V_eps=float(a[in_v].max()) if in_v.any() else 0.0,
        empty_region=empty,
    )


def zero_contour(values: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Marching-squares zero level set as an array of segments, shape (k, 2, 2).

    A node counts as inside when its value is >= 0.  Edge crossings are found
    by linear interpolation; ambiguous (saddle) cells are resolved with the
    cell-centre average.
    """
    s = values
    inside = s >= 0
    h = coords[1] - coords[0]
    x0 = coords[0]

    def cross(sa, sb):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = sa / (sa - sb)
        return np.where(np.isfinite(t), np.clip(t, 0.0, 1.0), 0.5)

    # corners of cell (i, j): c00=(i,j), c10=(i+1,j), c01=(i,j+1), c11=(i+1,j+1)
    s00, s10, s01, s11 = s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]
    i00, i10, i01, i11 = inside[:-1, :-1], inside[1:, :-1], inside[:-1, 1:], inside[1:, 1:]
    ii, jj = np.meshgrid(np.arange(s.shape[0] - 1), np.arange(s.shape[1] - 1), indexing="ij")

    # crossing point on each of the four cell edges, in index coordinates
    edges = {
        "bottom": (i00 != i10, ii + cross(s00, s10), jj.astype(float)),
        "top": (i01 != i11, ii + cross(s01, s11), jj + 1.0),
        "left": (i00 != i01, ii.astype(float), jj + cross(s00, s01)),
        "right": (i10 != i11, ii + 1.0, jj + cross(s10, s11)),
    }
    n_cross = sum(e[0].astype(int) for e in edges.values())
    segs = []

    def emit(mask, ea, eb):
        if mask.any():
            pa = np.stack([edges[ea][1][mask], edges[ea][2][mask]], axis=-1)
            pb = np.stack([edges[eb][1][mask], edges[eb][2][mask]], axis=-1)
            segs.append(np.stack([pa, pb], axis=1))

    two = n_cross == 2
    names = list(edges)
    for p in range(4):
        for q in range(p + 1, 4):
            ea, eb = names[p], names[q]
            emit(two & edges[ea][0] & edges[eb][0], ea, eb)
    four = n_cross == 4
    if four.any():
        centre_in = (0.25 * (s00 + s10 + s01 + s11)) >= 0
        # centre joins the corners of its own class: separate the other pair
        same_as_00 = centre_in == i00
        emit(four & same_as_00, "bottom", "right")
        emit(four & same_as_00, "left", "top")
        emit(four & ~same_as_00, "bottom", "left")
        emit(four & ~same_as_00, "top", "right")
    if not segs:
        return np.zeros((0, 2, 2))
    out = np.concatenate(segs, axis=0)
    return x0 + h * out


def nodal_curve(u: ScalarField, v: ScalarField) -> np.ndarray:
    """Zero set of ``u - v`` restricted to where the pair is not negligible."""
    grid = check_same_grid(u, v)
    segs = zero_contour(u.values - v.values, grid.coords)
    if segs.size == 0:
        return segs
    big = np.maximum(u.values, v.values)
    peak = big.max()
    mids = segs.mean(axis=1)
    idx = (mids + grid.half_width) / grid.spacing
    level = ndimage.map_coordinates(big, [idx[:, 0], idx[:, 1]], order=1, mode="nearest")
    return segs[level >= NODAL_FLOOR * peak]


def fit_half_plane(u: ScalarField, v: ScalarField) -> SymmetryReport:
    """Fit the limit profile ``(w_nu^+, w_nu^-)`` to the pair.

    The direction comes from the difference of the first moments of ``u^2`` and
    ``v^2``; errors are L2 distances to the unit-mass half-plane parts.
    """
    grid = check_same_grid(u, v)
    x1, x2 = grid.mesh
    h2 = grid.spacing**2
    diff = u.values**2 - v.values**2
    moment = np.array([h2 * np.sum(x1 * diff), h2 * np.sum(x2 * diff)])
    norm = float(np.hypot(*moment))
    if norm < 1e-8:
        raise DirectionUndefinedError(
            f"moment vector has norm {norm:.3g}; the pair has no preferred direction"
        )
    nu = moment / norm
    wp, wm = dipole_pair(grid, tuple(nu))
    return SymmetryReport(
        defect_u=angular_defect(u),
        defect_v=angular_defect(v),
        nu_fit=(float(nu[0]), float(nu[1])),
        l2_error_u=math.sqrt(mass(u - wp)),
        l2_error_v=math.sqrt(mass(v - wm)),
        nodal_curve=nodal_curve(u, v),
    )


def angular_defect(f: ScalarField) -> float:
    """``1 - (weight of angular mode 0)``; zero for radial fields."""
    w = angular_modes(f, ANGULAR_M_MAX)
    if not w.any():
        return 0.0
    return float(min(1.0, max(0.0, 1.0 - w[0])))


def tail_radius(omega: float, threshold: float, half_width: float) -> float:
    """Radius beyond which even the ground state is below ``threshold``, capped at ``L - 1``."""
    peak = math.sqrt(omega / math.pi)
    cap = half_width - 1.0
    if threshold >= peak:
        return 0.0
    return min(cap, math.sqrt(2.0 / omega * math.log(peak / threshold)))


def nodal_interior_probe(u: ScalarField, v: ScalarField, threshold: float) -> float:
    """Area of the largest connected patch where both components are below ``threshold``.

    The far field, where the trap envelope itself drops below ``threshold``,
    is excluded (see :func:`tail_radius`).
    """
    grid = check_same_grid(u, v)
    if not threshold > 0:
        raise ParameterError("threshold must be positive")
    r = tail_radius(grid.omega, threshold, grid.half_width)
    low = (np.maximum(u.values, v.values) < threshold) & (grid.radius_squared <= r * r)
    labels, n = ndimage.label(low)
    if n == 0:
        return 0.0
    sizes = np.bincount(labels.ravel())[1:]
    return float(sizes.max() * grid.spacing**2)


def truncation_check(u: ScalarField) -> float:
    """Largest ``|u|`` on the outermost band ``max(|x1|, |x2|) >= L - h``."""
    grid = u.grid
    x1, x2 = grid.mesh
    ring = np.maximum(np.abs(x1), np.abs(x2)) >= grid.half_width - grid.spacing * (1 + 1e-9)
    return float(np.max(np.abs(u.values[ring])))


def summarize(sol, eps_fraction: float = 0.4) -> dict:
    """Scalar diagnostics for a solver result, flattened for CSV/manifest rows."""
    u, v = sol.u, sol.v
    seg = segregation_report(u, v, eps_fraction * float(u.values.max()))
    row = {
        "g1": sol.g.g1,
        "g2": sol.g.g2,
        "g12": sol.g.g12,
        "energy": sol.energy.total,
        "lambda": sol.multipliers.lam,
        "mu": sol.multipliers.mu,
        "residual_u": sol.residual_u,
        "residual_v": sol.residual_v,
        "overlap": seg.overlap,
        "sup_min": seg.sup_min,
        "eps": seg.eps,
        "max_v_on_U_eps": seg.max_v_on_U_eps,
        "max_u_on_V_eps": seg.max_u_on_V_eps,
        "truncation_u": truncation_check(u),
        "truncation_v": truncation_check(v),
        "iterations": sol.iterations,
        "converged": sol.converged,
    }
    try:
        sym = fit_half_plane(u, v)
        row.update(sym.scalars())
    except DirectionUndefinedError:
        row.update(
            defect_u=angular_defect(u),
            defect_v=angular_defect(v),
            nu_x1=float("nan"),
            nu_x2=float("nan"),
            l2_error_u=float("nan"),
            l2_error_v=float("nan"),
            nodal_line_distance=float("nan"),
            nodal_segments=0,
        )
    return row
