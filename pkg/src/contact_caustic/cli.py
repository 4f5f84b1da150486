"""Command line entry point.

Every subcommand reads a scenario config (``--config``) and writes its
results below ``--out``.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 validation mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import caustic, flow
from .classifier import DegenerateLeadingCoefficient, NumericalRootFailure, classify
from .fitseries import DegenerateB, IllConditioned
from .model import ConfigError
from .scenario import ScenarioConfig, side_name
from .svg import slice_svg
from .validation import rounded, run_validation

log = logging.getLogger("contact_caustic")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 2, 3, 4

NUMERICAL_ERRORS = (flow.StepFailure, flow.NoBracket, caustic.SolveFailure,
                    caustic.CuspCountUnexpected, caustic.PassageOnCusp, IllConditioned,
                    DegenerateB, NumericalRootFailure, DegenerateLeadingCoefficient,
                    FloatingPointError)


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_csv(path: Path, header: List[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def _slices(cfg: ScenarioConfig):
    return [caustic.slice(cfg.coefficients, cfg.h, s, cfg.n_grid, cfg.settings)
            for s in cfg.sides]


# --- subcommands ---------------------------------------------------------------

def cmd_geodesic(cfg, args, out: Path) -> int:
    r = args.r
    t = args.t if args.t is not None else 2 * math.pi / abs(r)
    s0 = flow.initial_covector(args.phi, r)
    arc = flow.integrate(cfg.coefficients, s0, t, cfg.settings)
    write_csv(out / "geodesic.csv", ["t", "x", "y", "w", "p", "q", "r"],
              np.column_stack([arc.times, arc.states]))
    return EXIT_OK


def cmd_conjugate(cfg, args, out: Path) -> int:
    phis = np.arange(args.n_phi) * (2 * math.pi / args.n_phi)
    rs = np.asarray(args.r_values, dtype=float)
    P, R = np.meshgrid(phis, rs, indexing="ij")
    status, tau, pts = flow.conjugate_points(cfg.coefficients, P.ravel(), R.ravel(),
                                             cfg.settings)
    if np.any(status != 0):
        raise flow.NoBracket(f"{int(np.sum(status != 0))} grid points without a conjugate time")
    write_csv(out / "conjugate.csv", ["phi", "r", "tau", "x", "y", "w"],
              np.column_stack([P.ravel(), R.ravel(), tau, pts]))
    return EXIT_OK


def _slice_record(sl) -> dict:
    rec = sl.sidecar()
    if len(sl.cusp_angles) == 6:
        try:
            sym = caustic.extract_symbol(sl)
            rec["symbol"] = str(sym.canonical())
            rec["symbol_name"] = caustic.symbol_name(sym)
        except caustic.PassageOnCusp as exc:
            rec["symbol_error"] = str(exc)
    return rec


def cmd_slice(cfg, args, out: Path) -> int:
    slices = _slices(cfg)
    for sl in slices:
        key = side_name(sl.side)
        write_csv(out / f"slice_{key}.csv", ["phi", "x", "y"], sl.samples)
        write_json(out / f"slice_{key}.json", rounded(_slice_record(sl)))
    if args.svg:
        (out / "slice.svg").write_text(slice_svg(slices, cfg.name), encoding="utf-8")
    return EXIT_OK


def cmd_symbol(cfg, args, out: Path) -> int:
    result = {"name": cfg.name, "h": cfg.h, "sides": {}}
    for sl in _slices(cfg):
        sym = caustic.extract_symbol(sl)
        canon = sym.canonical()
        result["sides"][side_name(sl.side)] = {
            "symbol": list(canon.entries),
            "text": str(canon),
            "name": caustic.symbol_name(sym),
            "n_cusps": len(sl.cusp_angles),
            "n_crossings": len(sl.crossings),
        }
    write_json(out / "symbol.json", rounded(result))
    return EXIT_OK


def cmd_classify(cfg, args, out: Path) -> int:
    write_json(out / "classify.json", rounded(classify(cfg.coefficients).to_dict()))
    return EXIT_OK


def cmd_validate(cfg, args, out: Path) -> int:
    result = run_validation(cfg)
    write_json(out / "validate.json", result)
    for c in result["checks"]:
        log.info("%s %s", "PASS" if c["passed"] else "FAIL", c["name"])
    return EXIT_OK if result["passed"] else EXIT_MISMATCH


def cmd_plot(cfg, args, out: Path) -> int:
    (out / "slice.svg").write_text(slice_svg(_slices(cfg), cfg.name), encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "geodesic": cmd_geodesic,
    "conjugate": cmd_conjugate,
    "slice": cmd_slice,
    "symbol": cmd_symbol,
    "classify": cmd_classify,
    "validate": cmd_validate,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--h", type=float, help="slice height")
    common.add_argument("--side", choices=["plus", "minus", "both"])
    common.add_argument("--grid", type=int, help="angles per slice")
    common.add_argument("--steps-per-period", type=int)
    common.add_argument("--tol-energy", type=float)
    common.add_argument("--svg", action="store_true", help="also write an SVG (slice)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="contact-caustic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "geodesic":
            p.add_argument("--phi", type=float, default=0.0)
            p.add_argument("--r", type=float, default=1.0)
            p.add_argument("--t", type=float, help="final time (default 2 pi/|r|)")
        if name == "conjugate":
            p.add_argument("--n-phi", type=int, default=16)
            p.add_argument("--r-values", type=float, nargs="+", default=[10.0, 20.0, 40.0])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = ScenarioConfig.load(args.config).with_overrides(
            h=args.h, side=args.side, n_grid=args.grid,
            steps_per_period=args.steps_per_period, tol_energy=args.tol_energy)
        if args.command == "geodesic" and args.r == 0:
            raise ConfigError("r must be non-zero")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with np.errstate(over="raise", invalid="raise"):
            return COMMANDS[args.command](cfg, args, out)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
