"""Normalized gradient flow (discrete imaginary time) for two-component ground states.

Each step solves, for both components from the same ``(u, v)`` snapshot,

    (I + tau (-Lap + V + g1 u^2 + g12 v^2)) u* = u          ("implicit", default)
    (I + tau (-Lap + V)) u* = u - tau (g1 u^3 + g12 v^2 u)  ("semi_implicit")

by preconditioned conjugate gradients, then rescales ``u*`` to unit mass.  The
step size adapts: halve when the energy goes up (step rejected), grow by 1.2
toward ``tau0`` after 50 accepted steps in a row.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .energy import (
    EnergyBreakdown,
    MultiplierPair,
    energy_total,
    gp_residual,
    lagrange_multipliers,
)
from .errors import NumericalFailure, ParameterError
from .grid import CouplingParams, Grid2D, ScalarField, check_same_grid, rotate_field
from .io import read_field

log = logging.getLogger(__name__)

SEED_KINDS = ("symmetric_gaussian", "dipole_perturbed", "random", "from_file")
SCHEMES = ("implicit", "semi_implicit")
DIPOLE_TILT = 0.3
RANDOM_NOISE = 0.2
GROW_AFTER = 50
GROW_FACTOR = 1.2
# relative energy rise tolerated before a step counts as an increase
ENERGY_SLACK = 1e-13
# orientation alignment: fire once the per-step decrement is below this, at
# most ALIGN_MAX times, and only for clearly segregated pairs
ALIGN_TRIGGER = 1e-7
ALIGN_MAX = 2
ALIGN_MIN_MOMENT = 1e-2
ALIGN_MIN_ANGLE = 1e-4


@dataclass
class SolverConfig:
    schedule: list = field(default_factory=lambda: [CouplingParams()])
    time_step: float = 1.0
    residual_tol: float = 1e-6
    energy_tol: float = 1e-11
    max_iters: int = 5000
    seed_kind: str = "dipole_perturbed"
    rng_seed: int = 0
    scheme: str = "implicit"
    dipole_angle: float = 0.0
    seed_files: Optional[tuple] = None
    cg_tol: float = 1e-10
    align_orientation: bool = True

    def validate(self) -> None:
        if not self.schedule:
            raise ParameterError("continuation schedule must be nonempty")
        for g in self.schedule:
            if not isinstance(g, CouplingParams):
                raise ParameterError("schedule entries must be CouplingParams")
        if not self.time_step > 0:
            raise ParameterError("time_step must be positive")
        if not (self.residual_tol > 0 and self.energy_tol > 0):
            raise ParameterError("residual_tol and energy_tol must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ParameterError("max_iters must be a positive integer")
        if self.seed_kind not in SEED_KINDS:
            raise ParameterError(f"seed_kind must be one of {SEED_KINDS}, got {self.seed_kind!r}")
        if self.seed_kind == "from_file" and not self.seed_files:
            raise ParameterError("seed_kind 'from_file' needs seed_files=(u_path, v_path)")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass
class GroundStateSolution:
    u: ScalarField
    v: ScalarField
    g: CouplingParams
    energy: EnergyBreakdown
    multipliers: MultiplierPair
    residual_u: float
    residual_v: float
    iterations: int
    converged: bool
    time_step: float = float("nan")
    message: str = ""
    energy_history: list = field(default_factory=list, repr=False)
    wall_time: float = 0.0


# -- discrete operators on interior unknowns ---------------------------------

@lru_cache(maxsize=8)
def _interior_laplacian(points: int, spacing: float) -> sp.csr_matrix:
    """-Lap on the (points-2)^2 interior nodes, row-major."""
    n = points - 2
    one = np.ones(n)
    t = sp.diags([-one[:-1], 2.0 * one, -one[:-1]], [-1, 0, 1]) / (spacing * spacing)
    eye = sp.identity(n)
    return (sp.kron(t, eye) + sp.kron(eye, t)).tocsr()


class _Stepper:
    def __init__(self, grid: Grid2D, scheme: str, cg_tol: float):
        self.grid = grid
        self.scheme = scheme
        self.cg_tol = cg_tol
        self.n = grid.points - 2
        self.lap = _interior_laplacian(grid.points, grid.spacing)
        self.pot = grid.potential[1:-1, 1:-1].ravel()
        self.h2 = grid.spacing**2
        self.lap_diag = 4.0 / self.h2
        self.maxiter = 10 * grid.points

    def _solve(self, diag_pot: np.ndarray, rhs: np.ndarray, x0: np.ndarray, tau: float):
        size = rhs.shape[0]
        lap = self.lap

        def matvec(x):
            return x + tau * (lap @ x + diag_pot * x)

        op = LinearOperator((size, size), matvec=matvec, dtype=float)
        inv_diag = 1.0 / (1.0 + tau * (self.lap_diag + diag_pot))
        pre = LinearOperator((size, size), matvec=lambda x: inv_diag * x, dtype=float)
        x, info = cg(op, rhs, x0=x0, rtol=self.cg_tol, atol=0.0, maxiter=self.maxiter, M=pre)
        if info != 0:
            raise NumericalFailure(
                f"inner conjugate-gradient solve did not converge in {self.maxiter} iterations"
                f" (tau={tau:g})"
            )
        return x

    def step(self, a: np.ndarray, b: np.ndarray, g: CouplingParams, tau: float):
        """One flow step on interior vectors; returns unit-mass interior vectors."""
        a2, b2 = a * a, b * b
        if self.scheme == "implicit":
            ua = self._solve(self.pot + g.g1 * a2 + g.g12 * b2, a, a, tau)
            ub = self._solve(self.pot + g.g2 * b2 + g.g12 * a2, b, b, tau)
        else:
            ua = self._solve(self.pot, a - tau * (g.g1 * a2 + g.g12 * b2) * a, a, tau)
            ub = self._solve(self.pot, b - tau * (g.g2 * b2 + g.g12 * a2) * b, b, tau)
        return self.renormalize(ua), self.renormalize(ub)

    def renormalize(self, x: np.ndarray) -> np.ndarray:
        m = self.h2 * float(x @ x)
        if not m > 0 or not math.isfinite(m):
            raise NumericalFailure("flow step produced a zero or non-finite field")
        return x / math.sqrt(m)

    def energy(self, a, b, g: CouplingParams) -> float:
        a2, b2 = a * a, b * b
        lap_a = self.lap @ a
        lap_b = self.lap @ b
        h2 = self.h2
        return 0.5 * h2 * float(
            a @ lap_a
            + b @ lap_b
            + self.pot @ (a2 + b2)
            + 0.5 * g.g1 * (a2 @ a2)
            + 0.5 * g.g2 * (b2 @ b2)
            + g.g12 * (a2 @ b2)
        )

    def to_field(self, x: np.ndarray) -> ScalarField:
        full = np.zeros(self.grid.shape)
        full[1:-1, 1:-1] = x.reshape(self.n, self.n)
        return ScalarField(self.grid, full)

    @staticmethod
    def from_field(f: ScalarField) -> np.ndarray:
        return np.ascontiguousarray(f.values[1:-1, 1:-1]).ravel()


def flow_step(
    u: ScalarField,
    v: ScalarField,
    g: CouplingParams,
    tau: float,
    scheme: str = "implicit",
    cg_tol: float = 1e-10,
) -> tuple[ScalarField, ScalarField]:
    """One normalized-gradient-flow step from the snapshot ``(u, v)``.

    Both components see the same snapshot (Jacobi coupling), so ``u == v``
    and ``g1 == g2`` imply the output pair is identical too.
    """
    grid = check_same_grid(u, v)
    if not tau > 0:
        raise ParameterError("tau must be positive")
    if scheme not in SCHEMES:
        raise ParameterError(f"scheme must be one of {SCHEMES}")
    stepper = _Stepper(grid, scheme, cg_tol)
    a, b = stepper.step(stepper.from_field(u), stepper.from_field(v), g, tau)
    return stepper.to_field(a), stepper.to_field(b)


# -- seeds ---------------------------------------------------------------------

def initial_pair(cfg: SolverConfig, grid: Grid2D) -> tuple[ScalarField, ScalarField]:
    """Unit-mass starting pair for ``cfg.seed_kind``."""
    from .grid import normalize
    from .oracles import ground_state

    phi = ground_state(grid).values
    x1, x2 = grid.mesh
    L = grid.half_width
    kind = cfg.seed_kind
    if kind == "symmetric_gaussian":
        a, b = phi, phi
    elif kind == "dipole_perturbed":
        t = (math.cos(cfg.dipole_angle) * x1 + math.sin(cfg.dipole_angle) * x2) / L
        a = phi * (1.0 + DIPOLE_TILT * t)
        b = phi * (1.0 - DIPOLE_TILT * t)
    elif kind == "random":
        rng = np.random.default_rng(cfg.rng_seed)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        t = (math.cos(angle) * x1 + math.sin(angle) * x2) / L
        a = phi * (1.0 + DIPOLE_TILT * t) * (1.0 + RANDOM_NOISE * rng.uniform(-1, 1, grid.shape))
        b = phi * (1.0 - DIPOLE_TILT * t) * (1.0 + RANDOM_NOISE * rng.uniform(-1, 1, grid.shape))
    elif kind == "from_file":
        fu, fv = (read_field(p) for p in cfg.seed_files)
        for f in (fu, fv):
            if not f.grid.same_as(grid):
                raise ParameterError(f"seed file grid {f.grid} does not match {grid}")
        a, b = fu.values, fv.values
    else:
        raise ParameterError(f"unknown seed kind {kind!r}")
    return normalize(grid.field(a)), normalize(grid.field(b))


# -- relaxation ---------------------------------------------------------------

StepCallback = Callable[[int, ScalarField, ScalarField], None]


def _finish(stepper, a, b, g, iters, converged, tau, message, history, t_start):
    u, v = stepper.to_field(a), stepper.to_field(b)
    lm = lagrange_multipliers(u, v, g, check_mass=False)
    ru, rv = gp_residual(u, v, g, lm)
    return GroundStateSolution(
        u=u,
        v=v,
        g=g,
        energy=energy_total(u, v, g, check_mass=False),
        multipliers=lm,
        residual_u=ru,
        residual_v=rv,
        iterations=iters,
        converged=converged,
        time_step=tau,
        message=message,
        energy_history=history,
        wall_time=time.perf_counter() - t_start,
    )


def _axis_offset(stepper: "_Stepper", a: np.ndarray, b: np.ndarray) -> Optional[float]:
    """Angle from the pair's dipole direction to the nearest grid axis.

    ``None`` when the pair has no clear direction (e.g. the symmetric state).
    """
    x = stepper.grid.coords[1:-1]
    d = (a * a - b * b).reshape(stepper.n, stepper.n)
    m1 = stepper.h2 * float(x @ d.sum(axis=1))
    m2 = stepper.h2 * float(d.sum(axis=0) @ x)
    if math.hypot(m1, m2) < ALIGN_MIN_MOMENT:
        return None
    theta = math.atan2(m2, m1)
    return theta - (math.pi / 2) * round(theta / (math.pi / 2))


def relax(
    u0: ScalarField,
    v0: ScalarField,
    g: CouplingParams,
    cfg: SolverConfig,
    callback: Optional[StepCallback] = None,
) -> GroundStateSolution:
    """Run the adaptive flow from ``(u0, v0)`` at fixed couplings ``g``.

    Converged means the last accepted energy decrement is at most
    ``cfg.energy_tol`` and both residuals are at most ``cfg.residual_tol``.
    Running out of iterations, or an inner-solve failure, returns the last
    accepted iterate with ``converged=False``.

    With ``cfg.align_orientation`` a segregated pair whose transient has died
    out is rotated once onto the nearest grid axis.  The continuum energy is
    rotation invariant, so only the weak grid anisotropy would otherwise turn
    an oblique pair, and that takes thousands of steps.
    """
    t_start = time.perf_counter()
    grid = check_same_grid(u0, v0)
    if abs(g.omega - grid.omega) > 1e-12 * grid.omega:
        raise ParameterError(f"coupling omega {g.omega} differs from grid omega {grid.omega}")
    stepper = _Stepper(grid, cfg.scheme, cfg.cg_tol)
    a = stepper.renormalize(stepper.from_field(u0))
    b = stepper.renormalize(stepper.from_field(v0))
    energy = stepper.energy(a, b, g)
    history = [energy]
    tau0 = cfg.time_step
    tau = tau0
    streak = 0
    tau_floor = tau0 * 2.0**-40
    aligned = 0
    for it in range(1, cfg.max_iters + 1):
        try:
            na, nb = stepper.step(a, b, g, tau)
        except NumericalFailure as exc:
            return _finish(stepper, a, b, g, it, False, tau, str(exc), history, t_start)
        new_energy = stepper.energy(na, nb, g)
        if new_energy > energy + ENERGY_SLACK * abs(energy):
            tau *= 0.5
            streak = 0
            if tau < tau_floor:
                return _finish(
                    stepper, a, b, g, it, False, tau, "step size underflow", history, t_start
                )
            continue
        decrement = energy - new_energy
        a, b, energy = na, nb, new_energy
        history.append(energy)
        streak += 1
        if streak >= GROW_AFTER and tau < tau0:
            tau = min(tau0, GROW_FACTOR * tau)
            streak = 0
        u, v = stepper.to_field(a), stepper.to_field(b)
        if callback is not None:
            callback(it, u, v)
        if decrement <= cfg.energy_tol:
            lm = lagrange_multipliers(u, v, g, check_mass=False)
            ru, rv = gp_residual(u, v, g, lm)
            if max(ru, rv) <= cfg.residual_tol:
                return _finish(stepper, a, b, g, it, True, tau, "converged", history, t_start)
        if cfg.align_orientation and aligned < ALIGN_MAX and decrement <= ALIGN_TRIGGER:
            offset = _axis_offset(stepper, a, b)
            if offset is not None and abs(offset) > ALIGN_MIN_ANGLE:
                a = stepper.renormalize(stepper.from_field(rotate_field(u, -offset)))
                b = stepper.renormalize(stepper.from_field(rotate_field(v, -offset)))
                energy = stepper.energy(a, b, g)
                history.append(energy)
                aligned += 1
                streak = 0
                log.debug("step %d: rotated pair by %.4g rad onto the grid axis", it, -offset)
    return _finish(
        stepper, a, b, g, cfg.max_iters, False, tau, "max_iters exceeded", history, t_start
    )


def solve_ground_state(
    cfg: SolverConfig, grid: Grid2D, callback: Optional[StepCallback] = None
) -> GroundStateSolution:
    """Minimize along ``cfg.schedule`` (warm-started) and return the last solution."""
    return continuation_sweep(cfg, grid, callback=callback)[-1]


def continuation_sweep(
    cfg: SolverConfig,
    grid: Grid2D,
    warm_start: bool = True,
    workers: int = 1,
    callback: Optional[StepCallback] = None,
) -> list[GroundStateSolution]:
    """Solve every schedule entry in order.

    With ``warm_start`` each entry starts from the previous entry's result;
    otherwise every entry starts from the configured seed, and with
    ``workers > 1`` the entries run in separate processes.
    """
    cfg.validate()
    g12s = [g.g12 for g in cfg.schedule]
    if any(b < a for a, b in zip(g12s, g12s[1:])):
        raise ParameterError("continuation schedule must have nondecreasing g12")
    if not warm_start:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_cold_solve, cfg, grid, g) for g in cfg.schedule
                ]
                return [f.result() for f in futures]
        return [_cold_solve(cfg, grid, g, callback) for g in cfg.schedule]
    u, v = initial_pair(cfg, grid)
    out = []
    for g in cfg.schedule:
        sol = relax(u, v, g, cfg, callback)
        log.info(
            "g=%s energy=%.10g iters=%d converged=%s",
            g.as_tuple(), sol.energy.total, sol.iterations, sol.converged,
        )
        out.append(sol)
        u, v = sol.u, sol.v
    return out


def _cold_solve(cfg, grid, g, callback=None):
    u, v = initial_pair(cfg, grid)
    return relax(u, v, g, cfg, callback)


DEFAULT_MULTISTART = (("dipole_perturbed", 0), ("random", 1), ("random", 2), ("random", 3))


def solve_multistart(
    cfg: SolverConfig,
    grid: Grid2D,
    seeds: Sequence[tuple[str, int]] = DEFAULT_MULTISTART,
    workers: int = 1,
) -> tuple[GroundStateSolution, list[GroundStateSolution]]:
    """Solve from several seeds; return the lowest-energy result and all results.

    Converged results are preferred over unconverged ones.
    """
    cfgs = [replace(cfg, seed_kind=kind, rng_seed=seed) for kind, seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_ground_state, cfgs, [grid] * len(cfgs)))
    else:
        results = [solve_ground_state(c, grid) for c in cfgs]
    best = min(results, key=lambda s: (not s.converged, s.energy.total))
    return best, results
