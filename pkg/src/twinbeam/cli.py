"""Command-line front end.

    twinbeam sweep --config scenario.cfg
    twinbeam calibrate --config scenario.cfg
    twinbeam dump-config --config scenario.cfg
    twinbeam cavity --radius 100e-3 --crystal 10e-3 --index 1.7881 --finesse 300

Exit status is 0 on success, 1 when the simulation itself fails and 2 for
invalid flags or configuration files. ``TWINBEAM_SEED`` overrides the
acquisition seed of any scenario.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from .acquisition import (
    IrisSchedule,
    analyze_run,
    block_series_csv,
    calibrate_shot_noise,
    fit_single_mode_line,
    synthesize_run,
    write_record,
)
from .cavity import CavityGeometry, confocal_length, confocality_range, degeneracy_overlap
from .config import build_state, dump_scenario, load_scenario
from .errors import ConfigError, InsufficientSpanError, TwinBeamError
from .plotting import series_svg
from .state import coherent_state

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.path.abspath(path)
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(path):
    try:
        sc = load_scenario(path)
        state = build_state(sc)
    except ConfigError as exc:
        raise _Fail(EXIT_USAGE, f"invalid configuration, key '{exc.key}': {exc}") from None
    return sc, state


# --- sweep ------------------------------------------------------------------

def run_scenario(config_path, csv=None, svg=None, report=None, out=None) -> int:
    """Synthesize, analyze and fit one scenario; returns the exit code."""
    out = out or sys.stdout
    try:
        sc, state = _load(config_path)
        try:
            record = synthesize_run(state, sc.schedule, sc.acquisition)
            series = analyze_run(record, sc.gains, track_gains=sc.track_iris)
        except TwinBeamError as exc:
            raise _Fail(EXIT_RUNTIME, f"simulation failed: {exc}") from None
    except _Fail as exc:
        print(f"twinbeam: {exc}", file=sys.stderr)
        return exc.code

    fit = None
    if not sc.schedule.is_open:
        try:
            fit = fit_single_mode_line(series, sc.threshold, sc.fit_column)
        except InsufficientSpanError as exc:
            print(f"twinbeam: fit skipped: {exc}", file=sys.stderr)

    info = _report(sc, series, fit)
    csv_path = csv or sc.csv
    write_atomic(csv_path, block_series_csv(series))
    svg_path = svg or sc.svg
    if svg_path:
        write_atomic(svg_path, series_svg(series, f"iris on {sc.target}"))
    report_path = report or sc.report
    if report_path:
        write_atomic(report_path, json.dumps(info, indent=2, sort_keys=True) + "\n")
    if sc.record:
        write_record(record, sc.record + ".tmp")
        os.replace(sc.record + ".tmp", sc.record)

    valid = np.asarray(series.valid)
    print(f"blocks: {len(valid)} ({int(valid.sum())} valid), seed {sc.acquisition.rng_seed}", file=out)
    print(f"open iris: n_d = {series.n_d[0]:.4f}, n_corr = {series.n_corr[0]:.4f}", file=out)
    if fit is not None:
        print(f"fit ({fit.column}): slope = {fit.slope:.4f}, intercept = {fit.intercept:.4f}, "
              f"max residual = {fit.max_residual:.4f}", file=out)
        print(f"reference line from open iris: max deviation = {fit.max_reference_deviation:.4f}",
              file=out)
        print(f"verdict: {fit.verdict}", file=out)
    else:
        print(f"mean over valid blocks: n_d = {info['mean_n_d']:.4f}, "
              f"n_corr = {info['mean_n_corr']:.4f}", file=out)
    print(f"wrote {csv_path}" + (f", {svg_path}" if svg_path else ""), file=out)
    return EXIT_OK


def _report(sc, series, fit) -> dict:
    ok = np.asarray(series.valid, bool)
    info = {
        "target": sc.target,
        "seed": sc.acquisition.rng_seed,
        "blocks": int(len(ok)),
        "valid_blocks": int(ok.sum()),
        "open_n_d": float(series.n_d[0]),
        "open_n_corr": float(series.n_corr[0]),
        "mean_n_d": float(np.mean(series.n_d[ok])) if ok.any() else math.nan,
        "mean_n_corr": float(np.mean(series.n_corr[ok])) if ok.any() else math.nan,
        "fit": None,
    }
    if fit is not None:
        info["fit"] = fit._asdict()
    return info


# --- other subcommands ------------------------------------------------------

def run_calibration(config_path, out=None) -> int:
    """Coherent beams in the first pair's modes through the scenario's
    acquisition chain, iris open; prints the shot-noise calibration."""
    out = out or sys.stdout
    try:
        sc, state = _load(config_path)
    except _Fail as exc:
        print(f"twinbeam: {exc}", file=sys.stderr)
        return exc.code
    pair = sc.pairs[0]
    mode = state.mean_field("signal") if state.flux_s > 0 else state.basis[0]
    mode = mode / mode.norm
    try:
        coh = coherent_state(mode, pair.flux_s, pair.flux_i)
        record = synthesize_run(coh, IrisSchedule.open("both"), sc.acquisition)
        shot = calibrate_shot_noise(record)
        series = analyze_run(record)
    except TwinBeamError as exc:
        print(f"twinbeam: calibration failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"shot_calibration = {shot:.6g}", file=out)
    print(f"per-block n_d: mean = {np.mean(series.n_d):.4f}, std = {np.std(series.n_d, ddof=1):.4f}",
          file=out)
    return EXIT_OK


def run_dump(config_path, out=None) -> int:
    out = out or sys.stdout
    try:
        sc, _ = _load(config_path)
    except _Fail as exc:
        print(f"twinbeam: {exc}", file=sys.stderr)
        return exc.code
    out.write(dump_scenario(sc))
    return EXIT_OK


def cavity_report(radius, crystal, indices, finesse, out=None) -> int:
    out = out or sys.stdout
    try:
        geoms = [CavityGeometry(radius, crystal, n, finesse) for n in indices]
    except TwinBeamError as exc:
        print(f"twinbeam: invalid cavity: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for g in geoms:
        prefix = f"n = {g.refractive_index}: " if len(geoms) > 1 else ""
        print(f"{prefix}L_conf = {confocal_length(g) * 1e3:.2f} mm, "
              f"range = ±{confocality_range(g) * 1e3:.3f} mm", file=out)
    if len(geoms) > 1:
        _, spread, half = degeneracy_overlap(radius, crystal, indices, finesse)
        common = "yes" if spread < half else "no"
        print(f"spread = {spread * 1e3:.3f} mm, common degeneracy: {common}", file=out)
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def _positive(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return v


def _nonnegative(s):
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s}")
    return v


def _index(s):
    v = float(s)
    if not v >= 1:
        raise argparse.ArgumentTypeError(f"refractive index must be >= 1, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twinbeam", description="Twin-beam noise simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run an iris-sweep scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--csv", help="override outputs.csv")
    s.add_argument("--svg", help="override outputs.svg")
    s.add_argument("--report", help="write the fit report as JSON")
    s.add_argument("--dump-config", action="store_true",
                   help="print the parsed configuration and exit")

    c = sub.add_parser("calibrate", help="coherent-state shot-noise calibration run")
    c.add_argument("--config", required=True)

    d = sub.add_parser("dump-config", help="print the canonical form of a scenario")
    d.add_argument("--config", required=True)

    k = sub.add_parser("cavity", help="confocal length and degeneracy range")
    k.add_argument("--radius", type=_positive, required=True, help="mirror curvature (m)")
    k.add_argument("--crystal", type=_nonnegative, default=0.0, help="crystal length (m)")
    k.add_argument("--index", type=_index, nargs="+", default=[1.0], help="refractive index(es)")
    k.add_argument("--finesse", type=_positive, required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sweep":
        if args.dump_config:
            return run_dump(args.config)
        return run_scenario(args.config, args.csv, args.svg, args.report)
    if args.command == "calibrate":
        return run_calibration(args.config)
    if args.command == "dump-config":
        return run_dump(args.config)
    return cavity_report(args.radius, args.crystal, args.index, args.finesse)


if __name__ == "__main__":
    sys.exit(main())
