"""Command-line entry point: ``evorobo <subcommand> ...`` or ``python -m evorobo``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .controllers import USELESS_BEHAVIORS
from .experiments import (
    VARIANTS,
    build_library,
    generalization_experiment,
    load_config,
    replay,
    run_experiment,
    sensitivity_experiment,
    stats,
)
from .sim import ConfigurationError, load_arena


def _load(args):
    config = load_config(args.config)
    changes = {}
    if getattr(args, "runs", None) is not None:
        changes["runs"] = args.runs
    if getattr(args, "seed", None) is not None:
        changes["evolution"] = replace(config.evolution, seed=args.seed)
    if getattr(args, "generations", None) is not None:
        evo = changes.get("evolution", config.evolution)
        changes["evolution"] = replace(evo, generations=args.generations)
    return replace(config, **changes) if changes else config


def _default_out(args, name: str) -> Path:
    return Path(args.out) if args.out else Path("runs") / name


def _print_summary(summary) -> None:
    for r in summary.runs:
        print(f"run {r.index:3d}  best {r.best_fitness:10.3f}  (generation {r.result.best.generation})")
    print(f"{summary.experiment}: {summary.mean:.3f} +- {summary.std:.3f} over {len(summary.runs)} runs")


def cmd_evolve(args) -> int:
    config = _load(args)
    out = _default_out(args, config.experiment)
    summary = run_experiment(config, out)
    _print_summary(summary)
    print(f"wrote {out}")
    return 0


def cmd_sensitivity(args) -> int:
    config = _load(args)
    out = _default_out(args, config.experiment + "-sensitivity")
    summary = sensitivity_experiment(config, tuple(args.extra), args.replication, out)
    _print_summary(summary)
    names = summary.behavior_names
    for r, rows in zip(summary.runs, summary.call_report()):
        last = rows[-1]["per_10000"]
        print(f"run {r.index:3d} final best calls/10000: " +
              ", ".join(f"{n}={v:.0f}" for n, v in zip(names, last)))
    print(f"wrote {out}")
    return 0


def cmd_replay(args) -> int:
    config = load_config(args.config)
    arena = load_arena(args.arena) if args.arena else None
    fitness, traces = replay(args.genotype, config, args.seed, args.out, arena, args.epochs, args.steps)
    for k, (t, f) in enumerate(zip(traces, fitness.per_epoch)):
        print(f"epoch {k:2d}  steps {len(t):5d}  {t.termination:17s}  fitness {f:.3f}")
    print(f"total {fitness.total:.3f}")
    return 0


def cmd_stats(args) -> int:
    report = stats(args.run_dirs)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        for d, r in report.items():
            print(f"{d}: {r['mean_best']:.3f} +- {r['std_best']:.3f} over {r['runs']} runs")
    return 0


def cmd_generalize(args) -> int:
    out = Path(args.out) if args.out else Path(args.run_dir) / f"generalize_{args.variant}.json"
    report = generalization_experiment(args.run_dir, args.variant, args.evals, args.continue_generations,
                                       out_path=out)
    for k, (o, m, c) in enumerate(zip(report.original.mean(1), report.modified.mean(1), report.relative_change)):
        print(f"run {k:3d}  original {o:10.3f}  {args.variant} {m:10.3f}  change {100 * c:+.1f}%")
    print(f"mean change {100 * report.relative_change.mean():+.1f}%")
    if report.continued:
        for k, res in enumerate(report.continued):
            print(f"run {k:3d} continued best {res.best.best:.3f}")
    print(f"wrote {out}")
    return 0


def cmd_build_library(args) -> int:
    path = Path(args.config)
    raw = yaml.safe_load(path.read_text())
    out = Path(args.out) if args.out else Path("runs") / "library"
    library = build_library(raw, out, path.parent)
    print(f"library {', '.join(library.names)} -> {out / 'manifest.txt'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evorobo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    def run_opts(s):
        s.add_argument("config")
        s.add_argument("--out", help="output directory (default runs/<experiment>)")
        s.add_argument("--runs", type=int, help="override the number of runs")
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--generations", type=int, help="override the generation count")

    s = sub.add_parser("evolve", help="run an experiment config")
    run_opts(s)
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("sensitivity", help="add useless behaviors to a supervisor config and run it")
    run_opts(s)
    s.add_argument("--extra", nargs="+", default=list(USELESS_BEHAVIORS), help="hand-coded behaviors to add")
    s.add_argument("--replication", type=int, default=1, help="copies of the added behaviors")
    s.set_defaults(func=cmd_sensitivity)

    s = sub.add_parser("replay", help="evaluate a stored genotype and write trace CSVs")
    s.add_argument("genotype")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--arena", help="replace the config's arena")
    s.add_argument("--epochs", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("stats", help="aggregate best fitness over run directories")
    s.add_argument("run_dirs", nargs="+")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("generalize", help="re-evaluate best genotypes in a modified environment")
    s.add_argument("run_dir")
    s.add_argument("--variant", required=True, choices=VARIANTS)
    s.add_argument("--continue", dest="continue_generations", type=int, default=0, metavar="N",
                   help="continue evolution for N generations in the new environment")
    s.add_argument("--evals", type=int, default=5, help="evaluations per genotype")
    s.add_argument("--out")
    s.set_defaults(func=cmd_generalize)

    s = sub.add_parser("build-library", help="evolve the basic behaviors listed in a library config")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (default runs/library)")
    s.set_defaults(func=cmd_build_library)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
