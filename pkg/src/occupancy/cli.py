"""Command-line entry point: ``occupancy {fit,simulate,study,sensitivity}``.

Exit status is 0 on success, 2 for bad input and 3 for numerical or
estimation failures.  Output files are written atomically, only after all
computation has succeeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import io as occ_io
from .errors import DomainError, EstimationError, InputError, NumericalError, OccupancyError
from .estimate import METHODS, fit, sensitivity_profile
from .optim import OptimSettings
from .sim import run_study, simulate_history

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("occupancy")


def _write_output(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, prefix=f".{out.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format(args, default: str) -> str:
    if args.format:
        return args.format
    if args.out and str(args.out).lower().endswith(".csv"):
        return "csv"
    if args.out and str(args.out).lower().endswith(".json"):
        return "json"
    return default


def _settings(args) -> OptimSettings:
    """Environment defaults, then command-line flags, then the optional config file."""
    settings = OptimSettings.from_env().updated(
        tol_x=args.tol_x, tol_f=args.tol_f, max_iter=args.max_iter, fd_step=args.fd_step)
    if args.optim_config:
        try:
            overrides = json.loads(Path(args.optim_config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read optimizer config: {exc}") from exc
        unknown = set(overrides) - {"tol_x", "tol_f", "max_iter", "fd_step"}
        if unknown:
            raise InputError(f"unknown optimizer settings: {', '.join(sorted(unknown))}")
        settings = settings.updated(**overrides)
    return settings


def cmd_fit(args) -> int:
    stats = occ_io.load_stats(args.input)
    settings = _settings(args)
    methods = ("partial", "full", "two_stage") if args.method == "all" else (args.method,)
    results = []
    start = None
    for method in methods:
        if method == "partial" and args.method == "all" and stats.b is None:
            log.warning("skipping partial: b (occasions after first detection) not supplied")
            continue
        try:
            r = fit(stats, method, settings, start=start if method == "full" else None)
        except (EstimationError, NumericalError) as exc:
            if args.method != "all":
                raise
            log.warning("%s fit failed: %s", method, exc)
            continue
        if method == "partial" and r.identifiable and 0 < r.p_hat < 1 and r.psi_hat < 1:
            start = (r.psi_hat, r.p_hat)
        results.append(r)
    if not results:
        raise EstimationError("no estimator succeeded")
    _write_output(occ_io.emit_fit(results, _format(args, "json"), stats), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    history = simulate_history(args.sites, args.occasions, args.psi, args.p, rng)
    _write_output(occ_io.emit_history(history), args.out)
    return EXIT_OK


def cmd_study(args) -> int:
    cells = occ_io.parse_study_config(args.config, args.seed)
    settings = _settings(args)
    summaries = []
    for cell in cells:
        log.info("cell S=%d tau=%d psi=%g p=%g n_sim=%d", cell.S, cell.tau, cell.psi, cell.p,
                 cell.n_sim)
        summaries.append(run_study(cell, args.drop_boundary, settings, n_jobs=args.jobs))
    _write_output(occ_io.emit_study(summaries, _format(args, "csv")), args.out)
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    stats = occ_io.load_stats(args.input)
    profile = sensitivity_profile(stats, args.grid)
    p_hat = args.p_hat
    if args.mark:
        p_hat = fit(stats, args.mark, _settings(args)).p_hat
    _write_output(occ_io.emit_sensitivity(profile, p_hat), args.out)
    return EXIT_OK


def _optim_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("optimizer (defaults from OCC_TOL_X, OCC_TOL_F, OCC_MAX_ITER, OCC_FD_STEP)")
    g.add_argument("--tol-x", type=float)
    g.add_argument("--tol-f", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--fd-step", type=float)
    g.add_argument("--optim-config", type=Path, help="JSON file of settings; overrides the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occupancy", description="Fit, simulate and profile single-season occupancy models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate psi and p from a detection matrix or sufficient statistics")
    p.add_argument("--input", required=True, type=Path, help="detection CSV or stats JSON")
    p.add_argument("--method", required=True, choices=(*METHODS, "all"))
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--out")
    _optim_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="draw one detection matrix")
    p.add_argument("--sites", required=True, type=int)
    p.add_argument("--occasions", required=True, type=int)
    p.add_argument("--psi", required=True, type=float)
    p.add_argument("--p", required=True, type=float)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="Monte-Carlo comparison of partial and full estimators")
    p.add_argument("--config", required=True, type=Path, help="JSON list of study cells")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--drop-boundary", action="store_true",
                   help="exclude replicates with an occupancy estimate >= 1")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--out")
    _optim_flags(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("sensitivity", help="occupancy estimate as a function of p")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--grid", type=int, default=99)
    mark = p.add_mutually_exclusive_group()
    mark.add_argument("--p-hat", type=float, help="add a marker row at this p")
    mark.add_argument("--mark", choices=METHODS, help="fit with this method and mark its p_hat")
    p.add_argument("--out")
    _optim_flags(p)
    p.set_defaults(func=cmd_sensitivity)
    return parser


def _exit_code(exc: Exception):
    if isinstance(exc, (InputError, DomainError, OSError)):
        return EXIT_INPUT
    if isinstance(exc, OccupancyError):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_INPUT
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        print(f"occupancy: error: {exc}", file=sys.stderr)
        return code

if __name__ == "__main__":
    sys.exit(main())
