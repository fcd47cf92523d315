"""Command-line entry point: ``hybridmac run|sweep|preset``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import engine
from .model import (DAT_SWEEP, DL_SWEEP, ConfigError, InvariantViolation, default_load_grid,
                    dumps_scenario, load_scenario, preset_scenario, save_scenario)
from .sweep import (SCHEMES, build_cells, parse_loads, parse_seeds, run_scheme, run_sweep,
                    write_rows)

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _schemes(text):
    if text == "all":
        return list(SCHEMES)
    names = [s.strip() for s in text.split(",")]
    for s in names:
        if s not in SCHEMES:
            raise argparse.ArgumentTypeError(f"unknown scheme {s!r}")
    return names


def _add_common(p):
    p.add_argument("--preset", "--group", dest="preset", choices=["group1", "group2", "group3"])
    p.add_argument("--warmup", type=int, default=0, metavar="SLOTS")
    p.add_argument("--slots", type=int, default=100_000, help="simulated slots per run")
    p.add_argument("--allow-any-dat", action="store_true",
                   help="accept DAT / DL values outside the published sweep")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="hybridmac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate one scenario")
    _add_common(run)
    run.add_argument("--scenario", metavar="FILE", help="scenario file instead of a preset")
    run.add_argument("--dat", type=int, default=23)
    run.add_argument("--dl", type=int, default=8)
    run.add_argument("--load", type=float, default=0.01, help="per-slot arrival probability")
    run.add_argument("--seed", "--seeds", dest="seed", type=int, default=0)
    run.add_argument("--scheme", choices=SCHEMES, default="hybrid")
    run.add_argument("--trace", nargs="?", const="trace.csv", metavar="FILE",
                     help="dump per-slot/frame/message trace (hybrid only)")

    sw = sub.add_parser("sweep", help="run a (scheme x DAT x DL x load x seed) grid")
    _add_common(sw)
    sw.add_argument("--dat", type=_int_list, default=list(DAT_SWEEP))
    sw.add_argument("--dl", type=_int_list, default=list(DL_SWEEP))
    sw.add_argument("--loads", default=None, help="'default', a list, or geom:LO:HI:N")
    sw.add_argument("--load", type=float, default=None, help="single load point")
    sw.add_argument("--seeds", default="5", help="seed count N (0..N-1) or a list")
    sw.add_argument("--scheme", type=_schemes, default=["hybrid"])
    sw.add_argument("--workers", type=int, default=1)

    pre = sub.add_parser("preset", help="write a preset as a scenario file")
    _add_common(pre)
    pre.add_argument("--dat", type=int, default=23)
    pre.add_argument("--dl", type=int, default=8)
    pre.add_argument("--load", type=float, default=0.01)
    pre.add_argument("--seed", type=int, default=0)
    return parser


def _open_out(path):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _scenario_from_args(args):
    if getattr(args, "scenario", None):
        sc = load_scenario(args.scenario)
        if args.warmup:
            sc = sc.with_(warmup_slots=args.warmup)
        return sc
    if not args.preset:
        raise ConfigError("need --preset or --scenario")
    sc = preset_scenario(args.preset, args.dat, args.dl, args.load, args.seed,
                         sim_slots=args.slots, allow_off_grid=args.allow_any_dat)
    return sc.with_(warmup_slots=args.warmup) if args.warmup else sc


def cmd_run(args) -> int:
    sc = _scenario_from_args(args)
    if args.trace and args.scheme == "hybrid":
        trace = engine.simulate(sc, "hybrid")
        engine.check_invariants(trace, sc)
        engine.write_trace(trace, args.trace)
        report = engine.compute_metrics(trace, sc.frame, sc.warmup_slots)
    else:
        report = run_scheme(sc, args.scheme, check=args.scheme == "hybrid")

    group = sc.sensors[0].group.value if sc.sensors else ""
    row = {"scheme": args.scheme, "group": group, "dat_nominal": sc.frame.dat_nominal,
           "data_length": sc.frame.data_length, "arrival_prob": sc.arrival_prob_per_slot,
           "seed": sc.seed, "error": ""}
    row.update(report.as_row())

    delay = report.mean_delay_slots
    print(f"{args.scheme} | {sc.label or group} | DAT {sc.frame.dat_nominal} DL {sc.frame.data_length} "
          f"| load {sc.arrival_prob_per_slot:g} | seed {sc.seed}")
    print(f"  G = {report.offered_load_G:.4f}   S = {report.throughput_S:.4f}   "
          f"delay = {'n/a' if delay is None else f'{delay:.2f} slots ({report.mean_delay_s * 1e3:.1f} ms)'}")
    print(f"  arrivals {report.arrivals}  completed {report.completions}  in flight {report.in_flight}  "
          f"discarded {report.discarded}  collisions {report.collisions}")

    fh, close = _open_out(args.out)
    try:
        write_rows([row], fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.preset:
        raise ConfigError("sweep needs --preset")
    if args.load is not None:
        loads = [args.load]
    elif args.loads in (None, "default"):
        loads = default_load_grid(args.preset)
    else:
        loads = parse_loads(args.loads)
    cells = build_cells(args.preset, args.dat, args.dl, loads, parse_seeds(args.seeds), args.scheme,
                        sim_slots=args.slots, warmup_slots=args.warmup,
                        allow_off_grid=args.allow_any_dat)
    if not args.allow_any_dat:
        bad = sorted({c.dat_nominal for c in cells} - set(DAT_SWEEP)) + \
            sorted({c.data_length for c in cells} - set(DL_SWEEP))
        if bad:
            raise ConfigError(f"dat/dl values {bad} not in sweep set; pass --allow-any-dat")
    rows = run_sweep(cells, workers=args.workers)
    fh, close = _open_out(args.out)
    try:
        write_rows(rows, fh)
    finally:
        if close:
            fh.close()
    failed = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} rows written to {args.out}" + (f" ({failed} failed cells)" if failed else ""),
          file=sys.stderr)
    return EXIT_OK


def cmd_preset(args) -> int:
    sc = _scenario_from_args(args)
    if args.out == "-":
        sys.stdout.write(dumps_scenario(sc))
    else:
        save_scenario(sc, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "preset": cmd_preset}[args.command]
    try:
        return handler(args)
    except InvariantViolation as exc:
        print(f"hybridmac: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except FileNotFoundError as exc:
        print(f"hybridmac: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"hybridmac: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
