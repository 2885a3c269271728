"""Computational domain, discrete fields and the finite-difference operators.

All fields live on a uniform square grid covering ``[-L, L]^2`` with
homogeneous Dirichlet data on the outermost ring of nodes.  The operators
below are chosen to be mutually consistent: the 5-point Laplacian, the
forward-difference Dirichlet form and the rectangle-rule quadrature satisfy
summation by parts exactly, so discrete energies and their gradients agree to
round-off.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import GridMismatchError, ParameterError

# Box half-width, in oscillator lengths 1/sqrt(omega), below which the
# Gaussian tail at the boundary exceeds ~1e-7.
TRUNCATION_FACTOR = 6.0
ANGULAR_SAMPLES = 256


@dataclass(frozen=True)
class Grid2D:
    """Uniform ``points x points`` grid on ``[-half_width, half_width]^2``.

    Node ``(i, j)`` sits at ``(-L + i*h, -L + j*h)``; arrays are indexed
    ``[i, j]`` so axis 0 runs along ``x1``.
    """

    half_width: float
    points: int
    omega: float = 1.0

    def __post_init__(self):
        if int(self.points) != self.points or self.points < 16:
            raise ParameterError(f"points must be an integer >= 16, got {self.points}")
        if not self.half_width > 0:
            raise ParameterError(f"half_width must be positive, got {self.half_width}")
        if not self.omega > 0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if self.half_width < self.min_half_width(self.omega) * (1 - 1e-12):
            warnings.warn(
                f"half_width {self.half_width} < 6/sqrt(omega) = "
                f"{self.min_half_width(self.omega):.4g}; boundary truncation error "
                "may exceed solver tolerances",
                stacklevel=2,
            )

    @staticmethod
    def min_half_width(omega: float) -> float:
        return TRUNCATION_FACTOR / math.sqrt(omega)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.points, self.points)

    @cached_property
    def coords(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.coords, self.coords, indexing="ij"))

    @cached_property
    def radius_squared(self) -> np.ndarray:
        x1, x2 = self.mesh
        return x1 * x1 + x2 * x2

    @cached_property
    def potential(self) -> np.ndarray:
        """Harmonic trap ``omega^2 |x|^2`` at the nodes."""
        return self.omega**2 * self.radius_squared

    def same_as(self, other: "Grid2D") -> bool:
        return (
            self.points == other.points
            and self.half_width == other.half_width
            and self.omega == other.omega
        )

    def field(self, values: np.ndarray) -> "ScalarField":
        """Wrap ``values`` as a field, forcing the Dirichlet ring to zero."""
        arr = np.array(values, dtype=float, copy=True)
        arr[0, :] = arr[-1, :] = arr[:, 0] = arr[:, -1] = 0.0
        return ScalarField(self, arr)

    def evaluate(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ScalarField":
        x1, x2 = self.mesh
        return self.field(fn(x1, x2))

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real field sampled on a :class:`Grid2D`; treated as an immutable value."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise GridMismatchError(
                f"values of shape {vals.shape} do not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ParameterError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def like(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def boundary_is_zero(self) -> bool:
        a = self.values
        return not (a[0, :].any() or a[-1, :].any() or a[:, 0].any() or a[:, -1].any())

    def __neg__(self):
        return self.like(-self.values)

    def __mul__(self, s):
        if isinstance(s, ScalarField):
            check_same_grid(self, s)
            return self.like(self.values * s.values)
        return self.like(self.values * s)

    __rmul__ = __mul__

    def __add__(self, other: "ScalarField"):
        check_same_grid(self, other)
        return self.like(self.values + other.values)

    def __sub__(self, other: "ScalarField"):
        check_same_grid(self, other)
        return self.like(self.values - other.values)


@dataclass(frozen=True)
class CouplingParams:
    """Coupling triple ``(g1, g2, g12)`` together with the trap frequency."""

    g1: float = 0.0
    g2: float = 0.0
    g12: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        if not (self.g1 >= 0 and self.g2 >= 0):
            raise ParameterError(
                f"intracomponent couplings must satisfy g1 >= 0 and g2 >= 0 "
                f"(repulsive components), got g1={self.g1}, g2={self.g2}"
            )
        if not self.g12 >= 0:
            raise ParameterError(f"g12 must be nonnegative, got {self.g12}")
        if not self.omega > 0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        for name in ("g1", "g2", "g12", "omega"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    def swapped(self) -> "CouplingParams":
        return CouplingParams(self.g2, self.g1, self.g12, self.omega)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.g1, self.g2, self.g12)


def check_same_grid(*fields: ScalarField) -> Grid2D:
    grid = fields[0].grid
    for f in fields[1:]:
        if not grid.same_as(f.grid):
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


# -- array kernels (shared with the solver, which works on raw arrays) --------

def laplacian_array(a: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(a)
    out[1:-1, 1:-1] = (
        a[2:, 1:-1] + a[:-2, 1:-1] + a[1:-1, 2:] + a[1:-1, :-2] - 4.0 * a[1:-1, 1:-1]
    ) / (h * h)
    return out


def dirichlet_form_array(a: np.ndarray, b: np.ndarray, h: float) -> float:
    """Discrete ``int grad a . grad b`` over all grid edges (forward differences)."""
    da1 = np.diff(a, axis=0)
    db1 = np.diff(b, axis=0)
    da2 = np.diff(a, axis=1)
    db2 = np.diff(b, axis=1)
    # h^2 * (d/h)(d/h) = d*d
    return float(np.sum(da1 * db1) + np.sum(da2 * db2))


# -- public operators ---------------------------------------------------------

def laplacian(f: ScalarField) -> ScalarField:
    """5-point Laplacian; the output boundary ring is zero."""
    return f.like(laplacian_array(f.values, f.grid.spacing))


def integrate(f: ScalarField) -> float:
    """Rectangle rule ``h^2 * sum(f)``."""
    h = f.grid.spacing
    return float(h * h * np.sum(f.values))


def mass(f: ScalarField) -> float:
    h = f.grid.spacing
    return float(h * h * np.sum(f.values * f.values))


def normalize(f: ScalarField) -> ScalarField:
    m = mass(f)
    if m <= 0:
        raise ParameterError("cannot normalize a zero field")
    return f.like(f.values / math.sqrt(m))


def gradient_squared_integral(f: ScalarField) -> float:
    """Forward-difference approximation of ``int |grad f|^2``.

    For fields vanishing on the boundary ring this equals
    ``integrate(-laplacian(f) * f)`` up to round-off.
    """
    return dirichlet_form_array(f.values, f.values, f.grid.spacing)


def dirichlet_form(f: ScalarField, g: ScalarField) -> float:
    """Discrete bilinear form ``int grad f . grad g``."""
    check_same_grid(f, g)
    return dirichlet_form_array(f.values, g.values, f.grid.spacing)


def rotate_field(f: ScalarField, angle: float) -> ScalarField:
    """``x -> f(R(-angle) x)``: the field rotated counterclockwise about the origin.

    Cubic spline resampling; values from outside the box are taken as zero.
    """
    grid = f.grid
    c, s = math.cos(angle), math.sin(angle)
    x1, x2 = grid.mesh
    i = (c * x1 + s * x2 + grid.half_width) / grid.spacing
    j = (-s * x1 + c * x2 + grid.half_width) / grid.spacing
    return grid.field(ndimage.map_coordinates(f.values, [i, j], order=3, mode="constant"))


def _polar_samples(f: ScalarField) -> np.ndarray:
    grid = f.grid
    h = grid.spacing
    n_rings = int(math.floor(grid.half_width / h + 1e-9))
    radii = h * np.arange(1, n_rings + 1)
    theta = 2.0 * np.pi * np.arange(ANGULAR_SAMPLES) / ANGULAR_SAMPLES
    r, t = np.meshgrid(radii, theta, indexing="ij")
    # fractional node indices
    i = (r * np.cos(t) + grid.half_width) / h
    j = (r * np.sin(t) + grid.half_width) / h
    return ndimage.map_coordinates(f.values, [i, j], order=1, mode="nearest")


def angular_modes(f: ScalarField, m_max: int) -> np.ndarray:
    """Fraction of angular spectral power carried by modes ``m = 0..m_max``.

    The field is resampled on rings of radius ``h, 2h, ..., <= L`` with 256
    bilinear samples each.  Modes ``+m`` and ``-m`` are pooled.  The weights
    sum to at most one; what is missing sits in modes above ``m_max``.  A zero
    field returns all-zero weights.
    """
    if int(m_max) != m_max or m_max < 1:
        raise ParameterError(f"m_max must be an integer >= 1, got {m_max}")
    if m_max >= ANGULAR_SAMPLES // 2:
        raise ParameterError(f"m_max must be < {ANGULAR_SAMPLES // 2}, got {m_max}")
    samples = _polar_samples(f)
    coeffs = np.fft.rfft(samples, axis=1) / ANGULAR_SAMPLES
    power = np.abs(coeffs) ** 2
    # pool +m and -m; the Nyquist bin has no partner
    power[:, 1 : ANGULAR_SAMPLES // 2] *= 2.0
    per_mode = power.sum(axis=0)
    total = per_mode.sum()
    if total == 0.0:
        return np.zeros(m_max + 1)
    return per_mode[: m_max + 1] / total
