"""``crypto-mine`` command line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness, oracle
from .huncc import build_pair_dataset, dataset_digest, write_dataset
from .mine import TrainingError
from .scenarios import PROFILES, PROBE_VIEWS, ConfigError, resolve, resolve_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _add_common(p: argparse.ArgumentParser, out_default: str = "results") -> None:
    p.add_argument("--profile", choices=sorted(PROFILES), default="quick")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: 0, or the seed stored in a JSON config)")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crypto-mine",
        description="Neural mutual-information estimation between plaintext and ciphertext.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a named scenario, preset group, or JSON config")
    run.add_argument("--scenario", required=True, help="preset name, group (fig1, fig2, probe) or .json file")
    _add_common(run)

    sweep = sub.add_parser("sweep", help="alpha sweep comparing HUNCC with AES CTR and ECB")
    sweep.add_argument("--spec", default="table1", help="'table1' or a JSON sweep spec file")
    sweep.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    sweep.add_argument("--profile", choices=sorted(PROFILES), default="quick")
    sweep.add_argument("--out", default="results")
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")

    probe = sub.add_parser("probe", help="HUNCC individual-secrecy probe")
    _add_common(probe)
    probe.add_argument("--view", choices=PROBE_VIEWS, default="fixed_message")
    probe.add_argument("--n-samples", type=int, default=None)

    orc = sub.add_parser("oracle", help="exact MI of a joint probability table")
    orc.add_argument("--table", required=True, help='JSON file {"p": [[...], ...]}')

    ds = sub.add_parser("dataset", help="write a scenario dataset in CMIN format")
    ds.add_argument("--scenario", required=True)
    ds.add_argument("--out", required=True, help="output .cmin file")
    ds.add_argument("--seed", type=int, default=None)
    ds.add_argument("--profile", choices=sorted(PROFILES), default="quick")
    ds.add_argument("--n-samples", type=int, default=None)
    return parser


def _print_reports(reports) -> None:
    for r in reports:
        print(f"{r.scenario}\tseed={r.seed}\tmi={r.final_mi_nats:.4f} nats\t"
              f"(ceiling {r.metadata['ceiling_nats']:.3f})")


def _resolve(name: str, seed: int | None):
    # an explicit --seed wins over the seed stored in a config file
    scenarios = resolve(name, seed=seed or 0)
    if seed is not None:
        scenarios = [s.with_seed(seed) for s in scenarios]
    return scenarios


def _cmd_run(args) -> int:
    scenarios = _resolve(args.scenario, args.seed)
    reports = [harness.run_scenario(scn, args.profile) for scn in scenarios]
    path = harness.write_outputs(reports, args.out, args.format)
    _print_reports(reports)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = resolve_sweep(args.spec)
    reports, errors = harness.sweep_alpha(spec, args.profile, jobs=args.jobs)
    path = harness.write_outputs(reports, args.out, args.format, stem="sweep")
    table = harness.sweep_table(reports)
    print("alpha\t" + "\t".join(spec.schemes))
    for a in spec.alphas:
        cells = [table.get((a, s)) for s in spec.schemes]
        print(f"{a:g}\t" + "\t".join("-" if c is None else f"{c:.4f}" for c in cells))
    print(f"wrote {path}")
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_RUNTIME if errors else EXIT_OK


def _cmd_probe(args) -> int:
    rep = harness.individual_secrecy_probe(n_samples=args.n_samples, seed=args.seed or 0,
                                           profile=args.profile, view=args.view)
    path = harness.write_outputs([rep], args.out, args.format, stem="probe")
    _print_reports([rep])
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    try:
        table = oracle.load_table(args.table)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from None
    print(json.dumps({"mi_nats": oracle.exact_mi(table)}))
    return EXIT_OK


def _cmd_dataset(args) -> int:
    scenarios = _resolve(args.scenario, args.seed)
    if len(scenarios) != 1:
        raise ConfigError("dataset needs a single scenario, not a group")
    scn = scenarios[0]
    n = args.n_samples or scn.resolved_samples(PROFILES[args.profile])
    ds = build_pair_dataset(scn, n)
    write_dataset(ds, Path(args.out))
    print(f"{args.out}\tN={ds.n} Dx={ds.dx} Dy={ds.dy}\tsha256={dataset_digest(ds)}")
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "probe": _cmd_probe,
    "oracle": _cmd_oracle,
    "dataset": _cmd_dataset,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (harness.ScenarioError, TrainingError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
