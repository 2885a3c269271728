"""Closed-form reference states and the Gaussian-frame eigenvalue machinery.

Contents:

* harmonic-oscillator eigenfunctions: the ground state
  ``sqrt(omega/pi) exp(-omega|x|^2/2)`` and the dipole second eigenfunction
  ``w_nu = (2/sqrt(pi)) omega (x.nu) exp(-omega|x|^2/2)`` (level ``4 omega``,
  total mass 2, unit mass in each half-plane part);
* the map to the Gaussian frame
  ``u~(x) = sqrt(2 pi) a u(a x) exp(|x|^2/4)`` with ``a = (2 omega)^(-1/2)``,
  under which ``E_{0,0,inf}(u, v) = omega (F(u~) + F(v~) + 2)``;
* the Gaussian-Rayleigh quotient ``F`` and the principal Dirichlet value
  ``Lambda(S)`` of ``F`` on a set, both on grids and, for half-planes, through
  the separated 1D problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import DegenerateInputError, ParameterError
from .grid import Grid2D, ScalarField

Part = Literal["signed", "positive", "negative"]

# Gaussian frame grids are dimensionless; -Lap + |x|^2/4 is the oscillator
# with frequency 1/2, which is what we tag them with.
FRAME_OMEGA = 0.5

HALFSPACE_NODES = 4000
HALFSPACE_LENGTH = 12.0
HALFSPACE_RANGE = (-3.0, 3.0)


@dataclass(frozen=True)
class OscillatorEigenfunction:
    kind: Literal["ground", "second_dipole"]
    omega: float = 1.0
    nu: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("ground", "second_dipole"):
            raise ParameterError(f"unknown eigenfunction kind {self.kind!r}")
        if not self.omega > 0:
            raise ParameterError("omega must be positive")
        n = math.hypot(*self.nu)
        if abs(n - 1.0) > 1e-12:
            if n == 0:
                raise ParameterError("nu must be nonzero")
            object.__setattr__(self, "nu", (self.nu[0] / n, self.nu[1] / n))

    @property
    def eigenvalue(self) -> float:
        return 2.0 * self.omega if self.kind == "ground" else 4.0 * self.omega


def ground_state(grid: Grid2D) -> ScalarField:
    return eval_eigenfunction(OscillatorEigenfunction("ground", grid.omega), grid)


def dipole_pair(grid: Grid2D, nu=(1.0, 0.0)) -> tuple[ScalarField, ScalarField]:
    """Unit-mass half-plane parts ``(w_nu^+, w_nu^-)``, both nonnegative."""
    e = OscillatorEigenfunction("second_dipole", grid.omega, tuple(nu))
    return (
        eval_eigenfunction(e, grid, part="positive"),
        eval_eigenfunction(e, grid, part="negative"),
    )


def eval_eigenfunction(
    e: OscillatorEigenfunction, grid: Grid2D, part: Part = "signed"
) -> ScalarField:
    if abs(e.omega - grid.omega) > 1e-12 * grid.omega:
        raise ParameterError(f"eigenfunction omega {e.omega} != grid omega {grid.omega}")
    if part not in ("signed", "positive", "negative"):
        raise ParameterError(f"unknown part {part!r}")
    w = e.omega
    x1, x2 = grid.mesh
    envelope = np.exp(-0.5 * w * grid.radius_squared)
    if e.kind == "ground":
        return grid.field(math.sqrt(w / math.pi) * envelope)
    t = e.nu[0] * x1 + e.nu[1] * x2
    if part == "positive":
        t = np.maximum(t, 0.0)
    elif part == "negative":
        t = np.maximum(-t, 0.0)
    return grid.field((2.0 / math.sqrt(math.pi)) * w * t * envelope)


# -- Gaussian frame -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianFrameField:
    """Field in Gaussian-frame coordinates together with the physical omega."""

    grid: Grid2D
    values: np.ndarray
    omega: float

    def as_scalar_field(self) -> ScalarField:
        return ScalarField(self.grid, self.values)


def frame_scale(omega: float) -> float:
    return (2.0 * omega) ** -0.5


def frame_grid(grid: Grid2D) -> Grid2D:
    """Gaussian-frame grid whose nodes are the physical nodes divided by alpha."""
    return Grid2D(grid.half_width / frame_scale(grid.omega), grid.points, FRAME_OMEGA)


def gaussian_weight(r2: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * r2) / (2.0 * math.pi)


def to_gaussian_frame(u: ScalarField) -> GaussianFrameField:
    """Apply ``u~(x) = sqrt(2 pi) alpha u(alpha x) exp(|x|^2/4)``.

    The target grid is the physical grid scaled by ``1/alpha``, so ``u(alpha x)``
    is read off the nodes directly and no interpolation is involved.
    """
    alpha = frame_scale(u.grid.omega)
    fg = frame_grid(u.grid)
    with np.errstate(over="raise", invalid="raise"):
        try:
            growth = np.exp(0.25 * fg.radius_squared)
        except FloatingPointError as exc:
            raise ParameterError(
                "Gaussian-frame growth factor overflows; box too large for this omega"
            ) from exc
    values = math.sqrt(2.0 * math.pi) * alpha * u.values * growth
    return GaussianFrameField(fg, values, u.grid.omega)


def gaussian_rayleigh(f: GaussianFrameField) -> float:
    """Discrete ``F(f) = int |grad f|^2 dmu / int f^2 dmu``.

    Differences live on grid edges and are weighted by the Gaussian density at
    the edge midpoints; the mass uses the density at the nodes.
    """
    grid = f.grid
    h = grid.spacing
    x = grid.coords
    mid = 0.5 * (x[1:] + x[:-1])
    a = f.values
    w_node = gaussian_weight(grid.radius_squared)
    denom = h * h * float(np.sum(a * a * w_node))
    if denom <= 0.0:
        raise DegenerateInputError("Gaussian-Rayleigh quotient of a zero field")
    d1 = np.diff(a, axis=0)
    d2 = np.diff(a, axis=1)
    w1 = gaussian_weight(mid[:, None] ** 2 + x[None, :] ** 2)
    w2 = gaussian_weight(x[:, None] ** 2 + mid[None, :] ** 2)
    num = float(np.sum(d1 * d1 * w1) + np.sum(d2 * d2 * w2))
    return num / denom


def gaussian_mass(f: GaussianFrameField) -> float:
    h = f.grid.spacing
    return h * h * float(np.sum(f.values**2 * gaussian_weight(f.grid.radius_squared)))


# -- Lambda(H_a) via the separated 1D problem --------------------------------

def _halfspace_pencil(a: float):
    t = np.linspace(a, a + HALFSPACE_LENGTH, HALFSPACE_NODES)
    h = t[1] - t[0]
    # rescale the weight so its largest value on [a, a+12] is O(1)
    shift = 0.0 if a <= 0.0 <= a + HALFSPACE_LENGTH else min(a * a, (a + HALFSPACE_LENGTH) ** 2)
    tm = 0.5 * (t[1:] + t[:-1])
    w_mid = np.exp(-0.5 * (tm * tm - shift))
    w_node = np.exp(-0.5 * (t * t - shift))
    # unknowns are nodes 1..n-1 (f(a) = 0); natural condition at the far end
    k = w_mid / h  # edge conductances, edge e joins nodes e and e+1
    diag = k[:-1] + k[1:]
    diag = np.append(diag, k[-1])
    off = -k[1:]
    m = h * w_node[1:].copy()
    m[-1] *= 0.5
    return t, diag, off, m


def _count_below(sigma: float, diag, off, m) -> int:
    """Number of generalized eigenvalues of (K, M) below ``sigma`` (Sturm count)."""
    d = diag - sigma * m
    off2 = off * off
    count = 0
    piv = d[0]
    tiny = 1e-300
    if piv < 0:
        count += 1
    for k in range(1, d.shape[0]):
        if piv == 0.0:
            piv = tiny
        piv = d[k] - off2[k - 1] / piv
        if piv < 0:
            count += 1
    return count


def lambda_halfspace(a: float, rtol: float = 1e-12) -> float:
    """Principal value of the Gaussian-Rayleigh quotient on ``{x . nu > a}``.

    Reduces to minimizing ``int_a^inf f'^2 e^{-t^2/2} / int_a^inf f^2 e^{-t^2/2}``
    with ``f(a) = 0``: P1 elements on ``[a, a+12]`` (4000 nodes, midpoint
    weights in the stiffness, lumped mass) and bisection on the Sturm count of
    the tridiagonal pencil.
    """
    lo_a, hi_a = HALFSPACE_RANGE
    if not (lo_a <= a <= hi_a):
        raise ParameterError(f"a must lie in [{lo_a}, {hi_a}], got {a}")
    t, diag, off, m = _halfspace_pencil(float(a))
    # Rayleigh quotient of the discrete vector f = t - a is an upper bound
    f = t[1:] - a
    kf = diag * f
    kf[:-1] += off * f[1:]
    kf[1:] += off * f[:-1]
    hi = float(f @ kf) / float(f @ (m * f))
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _count_below(mid, diag, off, m) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def lambda_table(start: float, stop: float, step: float) -> list[tuple[float, float]]:
    if step <= 0:
        raise ParameterError("step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    if n < 1:
        raise ParameterError("empty range")
    rows = []
    for k in range(n):
        a = round(start + k * step, 12)
        rows.append((a, lambda_halfspace(a)))
    return rows


# -- Lambda(S) on a grid, for the half-space extremality spot check ----------

def gaussian_dirichlet_eigenvalue(mask: np.ndarray, grid: Grid2D) -> float:
    """Minimum of the discrete ``F`` over fields vanishing off ``mask``.

    ``grid`` is a Gaussian-frame grid.  Nodes outside ``mask`` (and the grid
    boundary ring) are held at zero.
    """
    mask = np.asarray(mask, dtype=bool).copy()
    if mask.shape != grid.shape:
        raise ParameterError("mask shape does not match grid")
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
    n_free = int(mask.sum())
    if n_free == 0:
        raise DegenerateInputError("support set contains no interior nodes")
    idx = -np.ones(grid.shape, dtype=np.int64)
    idx[mask] = np.arange(n_free)
    x = grid.coords
    mid = 0.5 * (x[1:] + x[:-1])
    h = grid.spacing
    rows, cols, vals = [], [], []
    diag = np.zeros(n_free)
    for axis in (0, 1):
        if axis == 0:
            w = gaussian_weight(mid[:, None] ** 2 + x[None, :] ** 2)
            ia, ib = idx[:-1, :], idx[1:, :]
        else:
            w = gaussian_weight(x[:, None] ** 2 + mid[None, :] ** 2)
            ia, ib = idx[:, :-1], idx[:, 1:]
        # an edge contributes to each free endpoint's diagonal
        for p in (ia, ib):
            sel = p >= 0
            np.add.at(diag, p[sel], w[sel])
        both = (ia >= 0) & (ib >= 0)
        rows += [ia[both], ib[both]]
        cols += [ib[both], ia[both]]
        vals += [-w[both], -w[both]]
    rows.append(np.arange(n_free))
    cols.append(np.arange(n_free))
    vals.append(diag)
    stiff = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_free, n_free),
    )
    massm = sp.diags(h * h * gaussian_weight(grid.radius_squared)[mask]).tocsc()
    val = eigsh(stiff, k=1, M=massm, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(val[0])
