"""Two-component Gross-Pitaevskii ground states in a 2D harmonic trap.

Finite-difference energy minimization by normalized gradient flow, with
closed-form oscillator references and segregation / symmetry-breaking
diagnostics.
"""

__version__ = "0.1.0"

from .grid import (  # noqa: E402
    CouplingParams,
    Grid2D,
    ScalarField,
    angular_modes,
    gradient_squared_integral,
    integrate,
    laplacian,
)
from .energy import (  # noqa: E402
    EnergyBreakdown,
    MultiplierPair,
    energy_gradient,
    energy_segregated,
    energy_total,
    gp_residual,
    lagrange_multipliers,
)
from .solver import (  # noqa: E402
    GroundStateSolution,
    SolverConfig,
    continuation_sweep,
    flow_step,
    solve_ground_state,
    solve_multistart,
)

__all__ = [
    "CouplingParams",
    "Grid2D",
    "ScalarField",
    "angular_modes",
    "gradient_squared_integral",
    "integrate",
    "laplacian",
    "EnergyBreakdown",
    "MultiplierPair",
    "energy_gradient",
    "energy_segregated",
    "energy_total",
    "gp_residual",
    "lagrange_multipliers",
    "GroundStateSolution",
    "SolverConfig",
    "continuation_sweep",
    "flow_step",
    "solve_ground_state",
    "solve_multistart",
]
