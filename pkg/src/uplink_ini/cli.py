"""Command-line front end: ``uplink-ini validate | ini | sir-cdf | optimize``.

Exit codes: 0 success, 1 validation failure, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path

from . import experiments
from .config import ConfigError, load_scenario
from .numerology import ScenarioError
from .optimizer import InfeasibleFloorsError

log = logging.getLogger("uplink_ini")


def _write_csv(rows, columns, out):
    if out in (None, "-"):
        writer = csv.DictWriter(sys.stdout, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _sibling(out, suffix):
    if out in (None, "-"):
        return None
    p = Path(out)
    return str(p.with_name(p.stem + suffix + p.suffix))


def cmd_validate(args) -> int:
    loaded = load_scenario(args.scenario)
    sc = loaded.scenario
    print(f"{args.scenario}: ok ({len(sc.ues)} UEs, "
          + ", ".join(f"UE {u.id}: M={u.M} N={u.N} df={u.delta_f / 1e3:g} kHz" for u in sc.ues) + ")")
    return 0


def cmd_ini(args) -> int:
    loaded = load_scenario(args.scenario)
    analytic, measured = args.analytic, args.measured
    if not analytic and not measured:
        analytic = measured = True
    rows = experiments.run_ini(loaded, analytic, measured, trials=args.trials, seed=args.seed,
                               victim=args.victim, domain=args.domain, threads=args.threads)
    _write_csv(rows, experiments.INI_COLUMNS, args.out)
    return 0


def cmd_sir_cdf(args) -> int:
    loaded = load_scenario(args.scenario)
    rows = experiments.run_sir_cdf(loaded, powers_mw=args.powers, samples=args.samples,
                                   seed=args.seed, fixed_channel=args.fixed_channel)
    _write_csv(rows, experiments.SIR_COLUMNS, args.out)
    return 0


def cmd_optimize(args) -> int:
    loaded = load_scenario(args.scenario)
    summary, cands, trace = experiments.run_optimize(
        loaded, powers_mw=args.powers, draws=args.draws, seed=args.seed, threads=args.threads,
        compare_uniform=args.compare_uniform)
    _write_csv(summary, experiments.OPT_COLUMNS, args.out)
    cand_out = _sibling(args.out, "_candidates")
    if cand_out:
        _write_csv(cands, experiments.CANDIDATE_COLUMNS, cand_out)
        _write_csv(trace, experiments.TRACE_COLUMNS, _sibling(args.out, "_trace"))
    return 0


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands get SUPPRESS defaults so flags given before the subcommand survive
    def d(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=d(None), help="override the scenario seed")
    common.add_argument("--out", default=d(None), help="CSV output path (default: stdout)")
    common.add_argument("--threads", type=int, default=d(1), help="worker threads")
    common.add_argument("--verbose", "-v", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uplink-ini", parents=[_global_flags(False)],
                                     description="Multi-numerology DFT-s-OFDM uplink INI toolkit")
    common = _global_flags(True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="parse and validate a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ini", parents=[common], help="per-subcarrier INI profiles")
    p.add_argument("scenario")
    p.add_argument("--analytic", action="store_true")
    p.add_argument("--measured", action="store_true")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--victim", type=int, default=None)
    p.add_argument("--domain", choices=["symbol", "subcarrier"], default=None)
    p.set_defaults(func=cmd_ini)

    p = sub.add_parser("sir-cdf", parents=[common], help="CDF of UE 1 average SIR")
    p.add_argument("scenario")
    p.add_argument("--powers", type=float, nargs="+", default=None, help="per-subcarrier powers in mW")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--fixed-channel", action="store_true", help="use the scenario's fixed channel draw")
    p.set_defaults(func=cmd_sir_cdf)

    p = sub.add_parser("optimize", parents=[common], help="optimized vs uniform Lambda sweep")
    p.add_argument("scenario")
    p.add_argument("--powers", type=float, nargs="+", default=None, help="p_max sweep in mW")
    p.add_argument("--draws", type=int, default=None, help="channel draws per sweep point")
    p.add_argument("--compare-uniform", action="store_true")
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.filterwarnings("ignore", module="cvxpy")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError) as exc:
        errors = getattr(exc, "errors", [str(exc)])
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    except InfeasibleFloorsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
