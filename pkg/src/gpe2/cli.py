"""Command line entry point: ``gpe2 solve|sweep|oracle|diagnose``.

Exit codes: 0 success / converged, 1 bad input, 2 ran but did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import warnings
from pathlib import Path

from .diagnostics import (
    fit_half_plane,
    nodal_interior_probe,
    segregation_report,
    to_csv,
    to_record,
    truncation_check,
)
from .errors import DirectionUndefinedError, GPE2Error
from .grid import Grid2D
from .io import read_field, write_field
from .oracles import (
    OscillatorEigenfunction,
    eval_eigenfunction,
    lambda_table,
    to_gaussian_frame,
)
from .runner import ConfigError, load_config, run_solve, run_sweep

EXIT_OK, EXIT_ERROR, EXIT_UNCONVERGED = 0, 1, 2


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    code, manifest = run_solve(cfg)
    e = manifest["entries"][0]
    print(
        f"energy={e['energy']!r} lambda={e['lambda']!r} mu={e['mu']!r} "
        f"converged={e['converged']} out={cfg.out_dir}"
    )
    return code


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if not cfg.schedule_given:
        raise ConfigError("g", "sweep needs a schedule: one or more 'g = g1 g2 g12' lines")
    code, manifest = run_sweep(cfg, parallel=args.parallel)
    for e in manifest["entries"]:
        g = e["g"]
        print(
            f"g=({g['g1']}, {g['g2']}, {g['g12']}) energy={e['energy']!r} "
            f"overlap={e['overlap']!r} converged={e['converged']}"
        )
    return code


def _grid_from_args(args) -> Grid2D:
    return Grid2D(args.L, args.N, args.omega)


def _cmd_eigen(args) -> int:
    grid = _grid_from_args(args)
    kind = "ground" if args.kind == "ground" else "second_dipole"
    e = OscillatorEigenfunction(kind, grid.omega, tuple(args.nu))
    write_field(args.out, eval_eigenfunction(e, grid, part=args.part))
    print(args.out)
    return EXIT_OK


def _cmd_lambda(args) -> int:
    rows = lambda_table(args.start, args.stop, args.step)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["a", "lambda"])
    for a, lam in rows:
        writer.writerow([repr(float(a)), repr(lam)])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _cmd_frame(args) -> int:
    f = to_gaussian_frame(read_field(args.input))
    write_field(args.out, f.as_scalar_field())
    print(args.out)
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    u, v = read_field(args.u), read_field(args.v)
    eps = args.eps_fraction * float(u.values.max())
    row = {"run": args.label}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        seg = segregation_report(u, v, eps)
    row.update(
        {k: val for k, val in vars(seg).items() if k != "eps_set"}
    )
    try:
        row.update(fit_half_plane(u, v).scalars())
    except DirectionUndefinedError as exc:
        logging.getLogger(__name__).warning("%s", exc)
    row["nodal_interior_area"] = nodal_interior_probe(u, v, args.threshold)
    row["truncation_u"] = truncation_check(u)
    row["truncation_v"] = truncation_check(v)
    sys.stdout.write(to_record(row))
    if args.csv:
        Path(args.csv).write_text(to_csv([row]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpe2", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="ground state for one coupling triple")
    s.add_argument("config")
    s.set_defaults(func=_cmd_solve)

    s = sub.add_parser("sweep", help="warm-started continuation over a g schedule")
    s.add_argument("config")
    s.add_argument("--parallel", type=int, default=1,
                   help="run k cold-started entries concurrently (disables warm starts)")
    s.set_defaults(func=_cmd_sweep)

    o = sub.add_parser("oracle", help="closed-form reference artifacts")
    osub = o.add_subparsers(dest="oracle", required=True)

    e = osub.add_parser("eigen", help="write an oscillator eigenfunction field")
    e.add_argument("--kind", choices=["ground", "dipole"], default="ground")
    e.add_argument("--nu", type=float, nargs=2, default=[1.0, 0.0])
    e.add_argument("--part", choices=["signed", "positive", "negative"], default="signed")
    e.add_argument("--L", type=float, default=8.0)
    e.add_argument("--N", type=int, default=257)
    e.add_argument("--omega", type=float, default=1.0)
    e.add_argument("--out", default="eigen.gpe2")
    e.set_defaults(func=_cmd_eigen)

    lam = osub.add_parser("lambda-h", help="CSV table of a, Lambda(H_a)")
    lam.add_argument("--from", dest="start", type=float, default=-1.0)
    lam.add_argument("--to", dest="stop", type=float, default=1.0)
    lam.add_argument("--step", type=float, default=0.1)
    lam.add_argument("--out")
    lam.set_defaults(func=_cmd_lambda)

    fr = osub.add_parser("frame", help="map a field file to the Gaussian frame")
    fr.add_argument("--in", dest="input", required=True)
    fr.add_argument("--out", default="frame.gpe2")
    fr.set_defaults(func=_cmd_frame)

    d = sub.add_parser("diagnose", help="segregation and symmetry report for a field pair")
    d.add_argument("--u", required=True)
    d.add_argument("--v", required=True)
    d.add_argument("--eps-fraction", type=float, default=0.4)
    d.add_argument("--threshold", type=float, default=1e-3)
    d.add_argument("--label", default="pair")
    d.add_argument("--csv")
    d.set_defaults(func=_cmd_diagnose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; our contract reserves 2
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (GPE2Error, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
