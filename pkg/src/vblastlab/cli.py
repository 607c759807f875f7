"""Command-line front end: ``vblastlab curves | simulate | validate``.

Exit codes: 0 success, 1 usage error, 2 failed validation check, 3 I/O error.

Every data file written with ``--out PATH`` gets a manifest at
``PATH.manifest.json`` holding the full configuration, the seed, the tool
version and the SHA-256 of the data file. The data files themselves carry no
timestamps, so reruns with the same flags are byte-identical.
"""

import argparse
import csv
from decimal import Decimal
import hashlib
import io
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import analytic as an
from . import montecarlo as mc
from . import validation
from .channel import SEED_MAX, db_to_linear

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK = 2
EXIT_IO = 3

SIGNIFICANT_DIGITS = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def format_number(x):
    """Positional notation, 12 significant digits, '.' as decimal point."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not np.isfinite(x):
        return repr(x)
    # Round in scientific notation, then let Decimal print it positionally;
    # Decimal keeps the trailing zeros, so every value shows 12 digits.
    rounded = Decimal(format(x, f".{SIGNIFICANT_DIGITS - 1}e"))
    return format(rounded, "f")


def parse_snr_grid(text):
    """``start:stop:step`` (inclusive), a comma list, or a single value, in dB."""
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise UsageError(f"bad SNR range {text!r}")
            count = int(round((stop - start) / step)) + 1
            return tuple(round(start + k * step, 10) for k in range(count))
        values = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse SNR grid {text!r}") from None
    if list(values) != sorted(values):
        raise UsageError("SNR grid must be sorted")
    return values


def _seed(text):
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a decimal integer, got {text!r}") from None
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _modulation(text):
    try:
        return an.ModulationSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser():
    parser = _Parser(prog="vblastlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--rx", type=int, default=2, help="receive antennas n (>= 2)")
        p.add_argument("--modulation", type=_modulation, default=an.BPSK,
                       help="bpsk | bfsk | coherent:<alpha>,<beta> | noncoherent:<alpha>,<beta>")
        p.add_argument("--out", default="-", help="output path, '-' for stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("curves", help="analytic BER/BLER curves")
    common(p)
    p.add_argument("--snr-db", default="0:30:1", help="start:stop:step in dB (inclusive)")
    p.add_argument("--outage-threshold-db", default=None,
                   help="comma list of absolute SNR thresholds for outage columns")

    p = sub.add_parser("simulate", help="Monte Carlo BER/BLER sweep")
    common(p)
    p.add_argument("--snr-db", default="0:20:5")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--mode", choices=("genie", "propagate"), default="genie")
    p.add_argument("--estimator", choices=("symbol", "semianalytic"), default="symbol")
    p.add_argument("--ordering", choices=("optimal", "fixed"), default="optimal",
                   help="'fixed' is a diagnostic baseline without analytic counterpart")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("validate", help="run the self-check suite")
    p.add_argument("--trials", type=int, default=validation.DEFAULT_TRIALS)
    p.add_argument("--seed", type=_seed, default=validation.DEFAULT_SEED)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--no-statistical", action="store_true", help="skip Monte Carlo checks")
    p.add_argument("--perturb-a1", type=float, default=0.0,
                   help="add this offset to the n = 2 first-step coefficient (fault injection)")
    p.add_argument("--out", default="-", help="report path, '-' for stdout")
    return parser


# -- output ----------------------------------------------------------------

def _render(columns, rows, fmt):
    if fmt == "json":
        records = [dict(zip(columns, row)) for row in rows]
        return json.dumps({"columns": columns, "rows": records}, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def _write(path, text, manifest):
    if path == "-":
        sys.stdout.write(text)
        return
    data = text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    manifest = dict(manifest, data_file=path, sha256=hashlib.sha256(data).hexdigest())
    with open(f"{path}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _manifest(command, config, seed=None, checks=None):
    return {
        "command": command,
        "tool": "vblastlab",
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "config": config,
        "checks": checks or {},
    }


def _modulation_echo(mod):
    return {"name": mod.name, "family": mod.family, "alpha": mod.alpha, "beta": mod.beta}


# -- commands ----------------------------------------------------------------

def cmd_curves(args):
    if args.rx < 2:
        raise UsageError("--rx must be at least 2")
    grid = parse_snr_grid(args.snr_db)
    thresholds = ()
    if args.outage_threshold_db:
        thresholds = parse_snr_grid(args.outage_threshold_db)
    mod, n = args.modulation, args.rx

    columns = ["snr_db", "gamma0"]
    for t in thresholds:
        columns += [f"f1_at_{t:g}dB", f"f2_at_{t:g}dB"]
    columns += ["ber1", "ber2", "bler", "ber1_asym", "ber2_asym"]
    rows = []
    for snr_db in grid:
        g = float(db_to_linear(snr_db))
        pt = an.performance_point(mod, n, g)
        row = [snr_db, g]
        for t in thresholds:
            x = float(db_to_linear(t)) / g
            row += [an.outage_cdf_step1(n, x), an.outage_cdf_step2(n, x)]
        row += [pt.pe_step1, pt.pe_step2, pt.bler, pt.pe_step1_asymptote, pt.pe_step2_asymptote]
        rows.append(row)

    config = {"rx": n, "tx": 2, "modulation": _modulation_echo(mod), "snr_db": list(grid),
              "outage_threshold_db": list(thresholds), "format": args.format}
    _write(args.out, _render(columns, rows, args.format), _manifest("curves", config))
    return EXIT_OK


SIM_COLUMNS = ["snr_db", "trials",
               "ber1_mc", "ber1_lo", "ber1_hi",
               "ber2_mc", "ber2_lo", "ber2_hi",
               "bler_mc", "bler_lo", "bler_hi",
               "ber1_an", "ber2_an", "bler_an"]


def cmd_simulate(args):
    if args.rx < 2:
        raise UsageError("--rx must be at least 2")
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.estimator == "symbol" and args.modulation != an.BPSK:
        raise UsageError("symbol-level simulation supports --modulation bpsk only; "
                         "use --estimator semianalytic")
    grid = parse_snr_grid(args.snr_db)
    config = mc.SimConfig(args.rx, grid, args.trials, seed=args.seed, modulation=args.modulation,
                          mode=args.mode, estimator=args.estimator, ordering=args.ordering,
                          workers=args.workers)
    result = mc.simulate(config)

    rows = []
    for p in result.points:
        pt = an.performance_point(args.modulation, args.rx, p.gamma0)
        rows.append([p.snr_db, p.trials,
                     p.ber1.value, p.ber1.lo, p.ber1.hi,
                     p.ber2.value, p.ber2.lo, p.ber2.hi,
                     p.bler.value, p.bler.lo, p.bler.hi,
                     pt.pe_step1, pt.pe_step2, pt.bler])
    echo = {"rx": args.rx, "tx": 2, "modulation": _modulation_echo(args.modulation),
            "snr_db": list(grid), "trials": args.trials, "mode": args.mode,
            "estimator": args.estimator, "ordering": args.ordering,
            "partition_size": mc.PARTITION_SIZE, "workers": args.workers,
            "format": args.format}
    checks = {"skipped_degenerate_trials": {"value": result.skipped,
                                            "passed": result.skipped == 0}}
    _write(args.out, _render(SIM_COLUMNS, rows, args.format),
           _manifest("simulate", echo, args.seed, checks))
    return EXIT_OK


def cmd_validate(args):
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    overrides = None
    if args.perturb_a1:
        c = an.coefficients(2)
        overrides = {2: c.with_a(1, c.a[1] + args.perturb_a1)}
    report = validation.run_validation(args.trials, args.seed, args.workers, overrides,
                                       statistical=not args.no_statistical)
    text = report.to_json() + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    for check in report.failures:
        print(f"FAILED {check.name}: value={check.value:.6g} "
              f"{check.relation} {check.threshold}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK


COMMANDS = {"curves": cmd_curves, "simulate": cmd_simulate, "validate": cmd_validate}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"vblastlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (an.DomainError, ValueError) as exc:
        print(f"vblastlab: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"vblastlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
