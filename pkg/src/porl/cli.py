"""Command line interface.

Subcommands: ``run`` executes a config, ``sweep`` varies one parameter,
``crossplay`` scores saved policies against each other, ``plot`` renders a
report CSV to a figure file.  Exit codes: 0 success, 2 config error,
3 convergence failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness, plotting
from .errors import ConfigError, ConvergenceError, ModelError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porl",
        description="Entropy-regularized game dynamics runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("--config", required=True)

    p_sweep = sub.add_parser("sweep", help="run a config across one axis")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated list, e.g. 10,5,2,1,0.1")

    p_cp = sub.add_parser("crossplay", help="pairwise cross-play of saved policies")
    p_cp.add_argument("--game", required=True,
                      help="registry name or path to a game JSON file")
    p_cp.add_argument("--policies", nargs="+", required=True)
    p_cp.add_argument("--names", nargs="*", default=None)
    p_cp.add_argument("--output", required=True)

    p_plot = sub.add_parser("plot", help="render a report CSV to a figure")
    p_plot.add_argument("--input", required=True)
    p_plot.add_argument("--output", required=True)
    p_plot.add_argument("--x", default="t")
    p_plot.add_argument("--columns", default=None,
                        help="comma-separated column names (default: all)")
    p_plot.add_argument("--logy", action="store_true")
    return parser


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _cmd_run(args) -> int:
    config = harness.load_config(args.config)
    report = harness.run(config)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"run {report.config_hash}: "
          f"final KL {report.final_kl_mean!r} +- {report.final_kl_se!r}, "
          f"final exploitability {report.final_expl_mean!r} "
          f"+- {report.final_expl_se!r}")
    print(f"reports in {report.output_dir}")
    return 0


def _cmd_sweep(args) -> int:
    config = harness.load_config(args.config)
    values = [_parse_value(v) for v in args.values.split(",") if v]
    reports = harness.sweep(config, args.axis, values)
    for value, rep in zip(values, reports):
        print(f"{args.axis}={value}: final KL {rep.final_kl_mean!r}, "
              f"final exploitability {rep.final_expl_mean!r}")
    print(f"sweep table in {config.output_dir / f'sweep_{args.axis}.csv'}")
    return 0


def _cmd_crossplay(args) -> int:
    game_arg = args.game
    if Path(game_arg).exists() or game_arg.endswith(".json"):
        game = harness.build_game({"path": game_arg, "type": "matrix"})
    else:
        game = harness.build_game({"name": game_arg})
    names = args.names or [Path(p).stem for p in args.policies]
    if len(names) != len(args.policies) or len(set(names)) != len(names):
        raise ConfigError("--names must be unique and match --policies")
    policies = {}
    for name, path in zip(names, args.policies):
        if not Path(path).exists():
            raise ConfigError(f"policy file does not exist: {path}")
        policies[name] = harness.load_joint_policy(path)
    rows = harness.crossplay_report(game, policies, args.output)
    for a, b, s in rows:
        print(f"{a} vs {b}: {s!r}")
    return 0


def _cmd_plot(args) -> int:
    table = harness.load_csv(args.input)
    columns = args.columns.split(",") if args.columns else None
    try:
        plotting.plot_columns(table, args.output, x=args.x, columns=columns,
                              logy=args.logy)
    except KeyError as exc:
        raise ConfigError(str(exc))
    print(f"wrote {args.output}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep,
                "crossplay": _cmd_crossplay, "plot": _cmd_plot}
    try:
        return handlers[args.command](args)
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
