"""Run configuration, orchestration and on-disk outputs.

Config files are plain ``key = value`` lines; ``#`` starts a comment.  The
schedule for sweeps is given by repeating ``g = g1 g2 g12``.  Relative paths
are resolved against the directory holding the config file.

Recognised keys::

    L N omega                       grid
    g1 g2 g12                       single coupling triple (solve)
    g                               repeated triple (sweep schedule)
    seed rng_seed dipole_angle      seed kind, RNG seed, dipole axis angle (rad)
    seed_files                      two paths, for seed = from_file
    tau scheme                      initial step, implicit | semi_implicit
    align                           on | off: rotate settled pairs onto a grid axis
    tol_residual tol_energy max_iters
    multistart                      number of seeds tried by `solve` (1 = just `seed`)
    eps_fraction                    U_eps threshold relative to max u
    diagnostics                     on | off
    c0                              advisory cap on max(g1, g2), recorded only
    out_dir label
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .diagnostics import summarize, to_csv
from .errors import GPE2Error, ParameterError
from .grid import CouplingParams, Grid2D
from .io import read_field, write_field
from .solver import (
    DEFAULT_MULTISTART,
    GroundStateSolution,
    SolverConfig,
    continuation_sweep,
    solve_multistart,
)
from .energy import EnergyBreakdown, MultiplierPair


class ConfigError(GPE2Error, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, key: Optional[str], message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}" if key else message)


_FLOAT_KEYS = {"L", "omega", "g1", "g2", "g12", "tau", "tol_residual", "tol_energy",
               "eps_fraction", "c0", "dipole_angle"}
_INT_KEYS = {"N", "rng_seed", "max_iters", "multistart"}
_STR_KEYS = {"seed", "scheme", "out_dir", "label", "diagnostics", "align"}
_REPEATED = {"g"}
_KNOWN = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS | _REPEATED | {"seed_files"}


@dataclass
class RunConfig:
    half_width: float = 8.0
    points: int = 257
    omega: float = 1.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    diagnostics: bool = True
    eps_fraction: float = 0.4
    multistart: int = 1
    c0: Optional[float] = None
    out_dir: Path = Path("out")
    label: str = "run"
    schedule_given: bool = False
    source_text: str = ""

    def grid(self) -> Grid2D:
        return Grid2D(self.half_width, self.points, self.omega)

    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def describe(self) -> dict:
        s = self.solver
        return {
            "L": self.half_width,
            "N": self.points,
            "omega": self.omega,
            "schedule": [list(g.as_tuple()) for g in s.schedule],
            "seed": s.seed_kind,
            "rng_seed": s.rng_seed,
            "dipole_angle": s.dipole_angle,
            "tau": s.time_step,
            "scheme": s.scheme,
            "align": s.align_orientation,
            "tol_residual": s.residual_tol,
            "tol_energy": s.energy_tol,
            "max_iters": s.max_iters,
            "multistart": self.multistart,
            "eps_fraction": self.eps_fraction,
            "c0": self.c0,
        }


def _parse_lines(text: str) -> tuple[dict, list]:
    single: dict = {}
    triples = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(None, f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _KNOWN:
            raise ConfigError(key, f"unknown key (line {lineno})")
        if key in _REPEATED:
            parts = value.split()
            if len(parts) != 3:
                raise ConfigError(key, f"expected three numbers 'g1 g2 g12' (line {lineno})")
            try:
                triples.append(tuple(float(p) for p in parts))
            except ValueError:
                raise ConfigError(key, f"not a number triple: {value!r}") from None
            continue
        if key in single:
            raise ConfigError(key, f"given more than once (line {lineno})")
        single[key] = value
    return single, triples


def _convert(key: str, value: str):
    try:
        if key in _FLOAT_KEYS:
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
            return out
        if key in _INT_KEYS:
            return int(value)
    except ValueError:
        raise ConfigError(key, f"cannot parse {value!r}") from None
    return value


def _flag(vals: dict, key: str) -> bool:
    text = vals.get(key, "on").lower()
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    raise ConfigError(key, f"expected on/off, got {text!r}")


def parse_config(text: str, base_dir: Path = Path(".")) -> RunConfig:
    """Parse and fully validate a run configuration."""
    single, triples = _parse_lines(text)
    vals = {k: _convert(k, v) for k, v in single.items() if k != "seed_files"}
    omega = vals.get("omega", 1.0)
    if not omega > 0:
        raise ConfigError("omega", "must be positive")

    def coupling(key_hint, g1, g2, g12):
        for name, val in (("g1", g1), ("g2", g2)):
            if val < 0:
                raise ConfigError(
                    key_hint or name,
                    f"{name} = {val} violates the nonnegativity assumption g1 >= 0 and g2 >= 0",
                )
        if g12 < 0:
            raise ConfigError(key_hint or "g12", "g12 must be nonnegative")
        try:
            return CouplingParams(g1, g2, g12, omega)
        except ParameterError as exc:
            raise ConfigError(key_hint, str(exc)) from None

    if triples:
        if any(k in vals for k in ("g1", "g2", "g12")):
            raise ConfigError("g", "give either a 'g' schedule or g1/g2/g12, not both")
        schedule = [coupling("g", *t) for t in triples]
        g12s = [g.g12 for g in schedule]
        if any(b < a for a, b in zip(g12s, g12s[1:])):
            raise ConfigError("g", "schedule must have nondecreasing g12")
    else:
        schedule = [coupling(None, vals.get("g1", 0.0), vals.get("g2", 0.0), vals.get("g12", 0.0))]

    seed_files = None
    if "seed_files" in single:
        parts = single["seed_files"].split()
        if len(parts) != 2:
            raise ConfigError("seed_files", "expected two paths 'u_file v_file'")
        seed_files = tuple(str((base_dir / p).resolve()) for p in parts)

    align = _flag(vals, "align")
    solver = SolverConfig(
        schedule=schedule,
        time_step=vals.get("tau", 1.0),
        residual_tol=vals.get("tol_residual", 1e-6),
        energy_tol=vals.get("tol_energy", 1e-11),
        max_iters=vals.get("max_iters", 5000),
        seed_kind=vals.get("seed", "dipole_perturbed"),
        rng_seed=vals.get("rng_seed", 0),
        scheme=vals.get("scheme", "implicit"),
        dipole_angle=vals.get("dipole_angle", 0.0),
        seed_files=seed_files,
        align_orientation=align,
    )
    key_of = {
        "time_step": "tau", "residual_tol": "tol_residual", "energy_tol": "tol_energy",
        "max_iters": "max_iters", "seed_kind": "seed", "seed_files": "seed_files",
        "scheme": "scheme", "schedule": "g",
    }
    try:
        solver.validate()
    except ParameterError as exc:
        msg = str(exc)
        key = next((k for attr, k in key_of.items() if attr in msg), None)
        raise ConfigError(key, msg) from None

    L = vals.get("L", 8.0)
    N = vals.get("N", 257)
    if N < 16:
        raise ConfigError("N", f"must be >= 16, got {N}")
    if not L > 0:
        raise ConfigError("L", "must be positive")
    if L < Grid2D.min_half_width(omega) * (1 - 1e-12):
        raise ConfigError(
            "L", f"box too small: need L >= 6/sqrt(omega) = {Grid2D.min_half_width(omega):.6g}"
        )
    diag = _flag(vals, "diagnostics")
    multistart = vals.get("multistart", 1)
    if not 1 <= multistart <= len(DEFAULT_MULTISTART):
        raise ConfigError("multistart", f"must be between 1 and {len(DEFAULT_MULTISTART)}")
    eps_fraction = vals.get("eps_fraction", 0.4)
    if not 0 < eps_fraction < 1:
        raise ConfigError("eps_fraction", "must lie in (0, 1)")
    c0 = vals.get("c0")
    if c0 is not None and c0 < 0:
        raise ConfigError("c0", "must be nonnegative")
    return RunConfig(
        half_width=L,
        points=N,
        omega=omega,
        solver=solver,
        diagnostics=diag,
        eps_fraction=eps_fraction,
        multistart=multistart,
        c0=c0,
        out_dir=(base_dir / vals.get("out_dir", "out")),
        label=vals.get("label", "run"),
        schedule_given=bool(triples),
        source_text=text,
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(None, f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


# -- persistence ---------------------------------------------------------------

def save_solution(sol: GroundStateSolution, directory: Path) -> dict:
    """Write ``u.gpe2``, ``v.gpe2`` and a ``solution.json`` sidecar."""
    directory.mkdir(parents=True, exist_ok=True)
    write_field(directory / "u.gpe2", sol.u)
    write_field(directory / "v.gpe2", sol.v)
    meta = {
        "g": {"g1": sol.g.g1, "g2": sol.g.g2, "g12": sol.g.g12, "omega": sol.g.omega},
        "energy": sol.energy.as_dict(),
        "lambda": sol.multipliers.lam,
        "mu": sol.multipliers.mu,
        "residual_u": sol.residual_u,
        "residual_v": sol.residual_v,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "message": sol.message,
    }
    (directory / "solution.json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta


def load_solution(directory: Path) -> GroundStateSolution:
    directory = Path(directory)
    meta = json.loads((directory / "solution.json").read_text())
    e = dict(meta["energy"])
    e.pop("total", None)
    return GroundStateSolution(
        u=read_field(directory / "u.gpe2"),
        v=read_field(directory / "v.gpe2"),
        g=CouplingParams(**meta["g"]),
        energy=EnergyBreakdown(**e),
        multipliers=MultiplierPair(meta["lambda"], meta["mu"]),
        residual_u=meta["residual_u"],
        residual_v=meta["residual_v"],
        iterations=meta["iterations"],
        converged=meta["converged"],
        message=meta.get("message", ""),
    )


def _entry(index, sol, rel_dir, wall_time, diag_row) -> dict:
    entry = {
        "index": index,
        "g": {"g1": sol.g.g1, "g2": sol.g.g2, "g12": sol.g.g12, "omega": sol.g.omega},
        "u_file": str(rel_dir / "u.gpe2"),
        "v_file": str(rel_dir / "v.gpe2"),
        "energy": sol.energy.total,
        "lambda": sol.multipliers.lam,
        "mu": sol.multipliers.mu,
        "residual_u": sol.residual_u,
        "residual_v": sol.residual_v,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "message": sol.message,
        "wall_time": wall_time,
    }
    for key in ("overlap", "defect_u", "defect_v", "l2_error_u", "l2_error_v"):
        entry[key] = diag_row.get(key) if diag_row else None
    return entry


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_outputs(cfg: RunConfig, solutions, wall_times, layout: str) -> dict:
    """Write field files, diagnostics CSV and the manifest; return the manifest."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    entries, rows = [], []
    for k, (sol, wt) in enumerate(zip(solutions, wall_times)):
        rel = Path(".") if layout == "flat" else Path(f"entry_{k:03d}")
        save_solution(sol, out / rel)
        row = summarize(sol, cfg.eps_fraction) if cfg.diagnostics else {}
        if row:
            rows.append({"run": f"{cfg.label}/{k}", **row})
        entries.append({key: _finite_or_none(v) for key, v in _entry(k, sol, rel, wt, row).items()})
    for e in entries:
        for key in ("u_file", "v_file"):
            if not (out / e[key]).exists():
                raise RuntimeError(f"manifest references missing file {e[key]}")
    manifest = {
        "label": cfg.label,
        "tool_version": __version__,
        "config_hash": cfg.config_hash(),
        "config": cfg.describe(),
        "grid": {"L": cfg.half_width, "N": cfg.points, "omega": cfg.omega,
                 "h": cfg.grid().spacing},
        "eps_set_note": "U_eps/V_eps thresholded per solution at eps_fraction * max(u)",
        "entries": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if rows:
        (out / "diagnostics.csv").write_text(to_csv(rows))
    return manifest


def run_solve(cfg: RunConfig) -> tuple[int, dict]:
    """Single solve (continuation through the schedule if one is given)."""
    grid = cfg.grid()
    t0 = time.perf_counter()
    if cfg.multistart > 1:
        best, _ = solve_multistart(cfg.solver, grid, DEFAULT_MULTISTART[: cfg.multistart])
    else:
        best = continuation_sweep(cfg.solver, grid)[-1]
    manifest = write_outputs(cfg, [best], [time.perf_counter() - t0], layout="flat")
    return (0 if best.converged else 2), manifest


def run_sweep(cfg: RunConfig, parallel: int = 1) -> tuple[int, dict]:
    """Continuation sweep; ``parallel > 1`` runs cold-started entries concurrently."""
    warm = parallel <= 1
    sols = continuation_sweep(cfg.solver, cfg.grid(), warm_start=warm, workers=parallel)
    manifest = write_outputs(cfg, sols, [s.wall_time for s in sols], layout="entries")
    return (0 if all(s.converged for s in sols) else 2), manifest
