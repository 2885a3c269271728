"""Energy functional, Lagrange multipliers, residuals and the L2 gradient.

With ``V = omega^2 |x|^2`` the two-component energy is

    E = 1/2 int |grad u|^2 + V u^2 + g1/2 u^4
      + 1/2 int |grad v|^2 + V v^2 + g2/2 v^4
      + g12/2 int u^2 v^2

and everything here is its exact discrete counterpart on the grid, so that the
multipliers, the gradient and the energy are algebraically consistent.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import MassConstraintError, ParameterError
from .grid import (
    CouplingParams,
    ScalarField,
    check_same_grid,
    dirichlet_form_array,
    laplacian_array,
    mass,
)

MASS_TOL = 1e-8


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic_u: float
    trap_u: float
    quartic_u: float
    kinetic_v: float
    trap_v: float
    quartic_v: float
    interaction: float

    @property
    def total(self) -> float:
        return math.fsum(
            (
                self.kinetic_u,
                self.trap_u,
                self.quartic_u,
                self.kinetic_v,
                self.trap_v,
                self.quartic_v,
                self.interaction,
            )
        )

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass(frozen=True)
class MultiplierPair:
    lam: float
    mu: float


def _check_inputs(u: ScalarField, v: ScalarField, g: CouplingParams, check_mass: bool):
    grid = check_same_grid(u, v)
    if not isinstance(g, CouplingParams):
        raise ParameterError("couplings must be a CouplingParams instance")
    if abs(g.omega - grid.omega) > 1e-12 * grid.omega:
        raise ParameterError(f"coupling omega {g.omega} differs from grid omega {grid.omega}")
    if check_mass:
        for name, f in (("u", u), ("v", v)):
            m = mass(f)
            if abs(m - 1.0) > MASS_TOL:
                raise MassConstraintError(f"{name} has mass {m!r}, expected 1")
    return grid


def energy_total(
    u: ScalarField, v: ScalarField, g: CouplingParams, check_mass: bool = True
) -> EnergyBreakdown:
    grid = _check_inputs(u, v, g, check_mass)
    h2 = grid.spacing**2
    a, b = u.values, v.values
    a2, b2 = a * a, b * b
    pot = grid.potential
    return EnergyBreakdown(
        kinetic_u=0.5 * dirichlet_form_array(a, a, grid.spacing),
        trap_u=0.5 * h2 * float(np.sum(pot * a2)),
        quartic_u=0.25 * g.g1 * h2 * float(np.sum(a2 * a2)),
        kinetic_v=0.5 * dirichlet_form_array(b, b, grid.spacing),
        trap_v=0.5 * h2 * float(np.sum(pot * b2)),
        quartic_v=0.25 * g.g2 * h2 * float(np.sum(b2 * b2)),
        interaction=0.5 * g.g12 * h2 * float(np.sum(a2 * b2)),
    )


def energy_segregated(
    u: ScalarField, v: ScalarField, g1: float, g2: float, check_mass: bool = True
) -> float:
    """Sum of the single-component energies; the coupling term is dropped.

    Whether ``u * v == 0`` holds is not checked.
    """
    g = CouplingParams(g1, g2, 0.0, u.grid.omega)
    return energy_total(u, v, g, check_mass=check_mass).total


def lagrange_multipliers(
    u: ScalarField, v: ScalarField, g: CouplingParams, check_mass: bool = True
) -> MultiplierPair:
    grid = _check_inputs(u, v, g, check_mass)
    h2 = grid.spacing**2
    a, b = u.values, v.values
    a2, b2 = a * a, b * b
    pot = grid.potential
    overlap = h2 * float(np.sum(a2 * b2))
    lam = (
        dirichlet_form_array(a, a, grid.spacing)
        + h2 * float(np.sum(pot * a2))
        + g.g1 * h2 * float(np.sum(a2 * a2))
        + g.g12 * overlap
    )
    mu = (
        dirichlet_form_array(b, b, grid.spacing)
        + h2 * float(np.sum(pot * b2))
        + g.g2 * h2 * float(np.sum(b2 * b2))
        + g.g12 * overlap
    )
    return MultiplierPair(lam, mu)


def gradient_arrays(a: np.ndarray, b: np.ndarray, g: CouplingParams, grid) -> tuple:
    h = grid.spacing
    pot = grid.potential
    ga = -laplacian_array(a, h) + (pot + g.g1 * a * a + g.g12 * b * b) * a
    gb = -laplacian_array(b, h) + (pot + g.g2 * b * b + g.g12 * a * a) * b
    for arr in (ga, gb):
        arr[0, :] = arr[-1, :] = arr[:, 0] = arr[:, -1] = 0.0
    return ga, gb


def energy_gradient(
    u: ScalarField, v: ScalarField, g: CouplingParams
) -> tuple[ScalarField, ScalarField]:
    """Unconstrained L2 gradient of the discrete energy.

    ``G_u = -Lap u + V u + g1 u^3 + g12 v^2 u`` on interior nodes, zero on the
    boundary ring; so ``integrate(G_u * p)`` is the directional derivative of
    :func:`energy_total` along any Dirichlet perturbation ``p`` of ``u``.
    """
    grid = _check_inputs(u, v, g, check_mass=False)
    ga, gb = gradient_arrays(u.values, v.values, g, grid)
    return u.like(ga), v.like(gb)


def nodal_band_mask(u: ScalarField, v: ScalarField, width: int = 2) -> np.ndarray:
    """Nodes within ``width * h`` of a sign change of ``u - v``."""
    s = np.sign(u.values - v.values)
    crossing = np.zeros(s.shape, dtype=bool)
    for axis in (0, 1):
        change = np.diff(s, axis=axis) != 0
        if axis == 0:
            crossing[:-1, :] |= change
            crossing[1:, :] |= change
        else:
            crossing[:, :-1] |= change
            crossing[:, 1:] |= change
    # disc of radius `width` in index units
    r = np.arange(-width, width + 1)
    disc = (r[:, None] ** 2 + r[None, :] ** 2) <= width * width
    return ndimage.binary_dilation(crossing, structure=disc)


def gp_residual(
    u: ScalarField,
    v: ScalarField,
    g: CouplingParams,
    lm: MultiplierPair,
    segregated: bool = False,
) -> tuple[float, float]:
    """Interior L2 norms of the residuals of the coupled stationary equations.

    With ``segregated=True`` nodes within ``2h`` of the detected nodal line
    (zero set of ``u - v``) are left out, since limit profiles have a
    derivative jump there.
    """
    grid = _check_inputs(u, v, g, check_mass=False)
    ga, gb = gradient_arrays(u.values, v.values, g, grid)
    ru = ga - lm.lam * u.values
    rv = gb - lm.mu * v.values
    keep = np.zeros(grid.shape, dtype=bool)
    keep[1:-1, 1:-1] = True
    if segregated:
        keep &= ~nodal_band_mask(u, v)
    h = grid.spacing
    return (
        h * float(np.sqrt(np.sum(ru[keep] ** 2))),
        h * float(np.sqrt(np.sum(rv[keep] ** 2))),
    )
