"""Command line entry point: ``run``, ``sweep`` and ``eluder`` subcommands."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

from .core import read_class
from .eluder import (
    DEFAULT_DOMAIN_BUDGET,
    EluderBudgetError,
    eluder_dim,
    format_certificate,
    replay_certificate,
)
from .environment import ConfigurationError
from .harness import audit_optimism, load_config, parse_seeds, run_once, run_sweep, write_run
from .policies import OPTIMISTIC


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.policy is not None:
        config = replace(config, policy=args.policy)
    result = run_once(config)
    path = write_run(result, args.out)
    s = result.summary
    print(f"wrote {path}")
    print(f"policy={s['policy']} seed={s['seed']} T={s['horizon']} "
          f"regret={s['final_regret']:.6g} width_sum={s['width_sum']:.6g} "
          f"optimism_clean={s['optimism_clean']} degeneracy={s['degeneracy_events']} "
          f"violations={s['invariant_violations']}")
    return 0 if result.ok else 1


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    seeds = parse_seeds(args.seeds)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    sweep = run_sweep(config, seeds, policies, parallel=args.parallel, out_dir=args.out)
    for row in sweep.table:
        if row["seed"] in ("median", "mean"):
            vals = " ".join(f"{k}={v:.6g}" for k, v in row.items() if k.startswith("cum_regret"))
            print(f"{row['policy']:>15} {row['seed']:>6} {vals}")
    # baselines keep no confidence set, so coverage means nothing for them
    audited = [r for r in sweep.results.values() if r.policy in OPTIMISTIC]
    for policy, frac in audit_optimism(audited).items():
        print(f"{policy:>15} optimism coverage {frac:.3f}")
    for (policy, seed), err in sorted(sweep.failures.items()):
        print(f"FAILED {policy} seed={seed}: {err}", file=sys.stderr)
    return 0 if sweep.ok else 1


def _cmd_eluder(args: argparse.Namespace) -> int:
    fclass = read_class(args.class_file)
    try:
        dim, cert = eluder_dim(fclass, epsilon=args.epsilon, budget=args.budget,
                               with_certificate=True)
    except EluderBudgetError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    print(f"eluder_dim = {dim}")
    print(format_certificate(cert))
    return 0 if replay_certificate(cert, fclass) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varbandit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one seeded replication")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--policy")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run policies x seeds and aggregate")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", required=True, help="a..b inclusive, or a comma list")
    p.add_argument("--policies", required=True, help="comma separated policy kinds")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("eluder", help="exact eluder dimension of a small class")
    p.add_argument("--class", dest="class_file", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--budget", type=int, default=DEFAULT_DOMAIN_BUDGET,
                   help="largest domain size searched exhaustively")
    p.set_defaults(func=_cmd_eluder)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
