"""Command-line entry points for experiments, map tooling, and exact solving."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .cmdp import ProblemSpec, exact_pareto_oracle
from .envs import DATASETS, load_dataset
from .envs.counterexample import cmdp_a
from .envs.gridworld import generate_map, save_map_dataset
from .harness import (
    parse_experiment_configs,
    read_summary_csv,
    run_experiment,
    write_episode_csv,
    write_summary_csv,
)


def _cmd_run(args) -> int:
    configs = parse_experiment_configs(Path(args.config).read_text())
    if args.seed is not None:
        configs = [dataclasses.replace(c, seed=args.seed) for c in configs]
    out_path = Path(args.out)
    summary_path = out_path.with_name(out_path.stem + "_summary" + out_path.suffix)
    summaries = []
    with out_path.open("w") as out:
        for i, config in enumerate(configs):
            records, summary = run_experiment(config, threads=args.threads)
            write_episode_csv(out, config, records, header=(i == 0))
            summaries.append(summary)
            print(
                f"{config.config_id}: r_hat={summary.r_hat:.4f} c_hat={summary.c_hat:.4f} "
                f"sat_m={int(summary.sat_m)} sat_w={int(summary.sat_w)}"
            )
    with summary_path.open("w") as out:
        write_summary_csv(out, summaries)
    print(f"wrote {out_path} and {summary_path}")
    return 0


def _cmd_gen_maps(args) -> int:
    maps = []
    comments = []
    for i in range(args.count):
        seed = args.seed + i
        maps.append(
            generate_map(
                args.width,
                args.height,
                args.gold,
                trap_density=args.trap_density,
                wall_density=args.wall_density,
                seed=seed,
            )
        )
        comments.append(
            f"width={args.width} height={args.height} gold_count={args.gold} "
            f"trap_density={args.trap_density} wall_density={args.wall_density} seed={seed}"
        )
    Path(args.out).write_text(save_map_dataset(maps, comments))
    print(f"wrote {args.count} maps to {args.out}")
    return 0


def _cmd_solve_exact(args) -> int:
    if args.env != "cmdp_a":
        raise SystemExit("only the built-in counterexample model is supported")
    model = cmdp_a()
    spec = ProblemSpec.for_model(model, horizon=args.horizon, gamma_r=args.gamma_r, gamma_c=args.gamma_c)
    curve = exact_pareto_oracle(model, spec, model.initial_state(), spec.horizon)
    for point in curve.vertices:
        print(f"cost={point.cost:.6f} reward={point.reward:.6f}")
    return 0


def _cmd_summarize(args) -> int:
    summaries = read_summary_csv(Path(args.csv).read_text())
    header = f"{'config_id':<24} {'algorithm':<8} {'r_hat':>9} {'c_hat':>9} {'cost_std':>9} sat_m sat_w"
    print(header)
    for s in summaries:
        print(
            f"{s.config_id:<24} {s.algorithm:<8} {s.r_hat:>9.4f} {s.c_hat:>9.4f} "
            f"{s.cost_std:>9.4f} {int(s.sat_m):>5} {int(s.sat_w):>5}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paretomcts", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiments in a config file")
    run.add_argument("--config", required=True, help="INI experiment file")
    run.add_argument("--out", required=True, help="episode CSV path (summary written alongside)")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed", type=int, default=None, help="override every config's base seed")
    run.set_defaults(func=_cmd_run)

    gen = sub.add_parser("gen-maps", help="generate a gridworld map dataset")
    gen.add_argument("--out", required=True)
    gen.add_argument("--count", type=int, default=16)
    gen.add_argument("--width", type=int, default=6)
    gen.add_argument("--height", type=int, default=6)
    gen.add_argument("--gold", type=int, default=5)
    gen.add_argument("--trap-density", type=float, default=0.15)
    gen.add_argument("--wall-density", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=_cmd_gen_maps)

    solve = sub.add_parser("solve-exact", help="print the exact root Pareto curve of a tiny model")
    solve.add_argument("--env", default="cmdp_a")
    solve.add_argument("--horizon", type=int, default=2)
    solve.add_argument("--gamma-r", type=float, default=1.0)
    solve.add_argument("--gamma-c", type=float, default=1.0)
    solve.set_defaults(func=_cmd_solve_exact)

    summ = sub.add_parser("summarize", help="print a metrics table from a summary CSV")
    summ.add_argument("--csv", required=True)
    summ.set_defaults(func=_cmd_summarize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
