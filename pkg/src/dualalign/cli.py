"""``dual-align`` command line: run, grid, saddle-demo, gen-data.

Exit codes: 0 on success (diverged runs are results, not failures),
1 on configuration errors, 2 on I/O errors.
"""

import argparse
import logging
import sys

from .config import load_config, parse_config
from .errors import ConfigError

log = logging.getLogger("dualalign")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="YAML experiment file")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. optimizer.lr_theta=0.5 (repeatable)")
    p.add_argument("--seed", type=int, help="same as --set seed=N")
    p.add_argument("--iterations", type=int, help="same as --set optimizer.iterations=N")
    p.add_argument("--objective", help="restrict the run to one objective")


def build_parser():
    parser = argparse.ArgumentParser(prog="dual-align", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="execute one experiment (or its grid)")
    _add_common(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for grid runs")
    p = sub.add_parser("grid", help="run a grid and rank objectives by success fraction")
    _add_common(p)
    p.add_argument("--jobs", type=int, default=1)
    p = sub.add_parser("saddle-demo", help="gradient steps on min_x max_y xy")
    _add_common(p, config_required=False)
    p.add_argument("--step", type=float, help="same as --set saddle.step=S")
    p.add_argument("--steps", type=int, help="same as --set saddle.steps=N")
    p = sub.add_parser("gen-data", help="write the configured point sets as CSV")
    _add_common(p)
    return parser


def _overrides(args):
    items = list(args.overrides)
    if args.seed is not None:
        items.append(f"seed={args.seed}")
    if args.iterations is not None:
        items.append(f"optimizer.iterations={args.iterations}")
    if args.objective is not None:
        items.append(f"objectives=[{args.objective}]")
    if getattr(args, "step", None) is not None:
        items.append(f"saddle.step={args.step}")
    if getattr(args, "steps", None) is not None:
        items.append(f"saddle.steps={args.steps}")
    return items


def main(argv=None):
    from . import experiments

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "saddle-demo" and not args.config:
            cfg = parse_config("experiment: saddle\n", _overrides(args))
        else:
            cfg = load_config(args.config, _overrides(args))
        if args.command == "saddle-demo" and cfg.experiment != "saddle":
            cfg = parse_config("experiment: saddle\n", _overrides(args))
        if args.out is not None:
            cfg.raw["output_dir"] = args.out
        if args.command == "saddle-demo":
            res = experiments.run_saddle(cfg)
            print(f"saddle: {res[0]['steps']} steps, final r^2 = {res[0]['final_r2']:.6g}")
        elif args.command == "gen-data":
            files = experiments.generate_data(cfg)
            print("wrote " + ", ".join(files) + f" to {cfg.output_dir}")
        elif args.command == "grid":
            per_obj = any("grid" in v for v in cfg.raw["objective_overrides"].values())
            if not cfg.raw.get("grid") and not per_obj:
                raise ConfigError("the grid command needs a 'grid' section")
            _, ranking = experiments.compare_grid(cfg, jobs=args.jobs)
            for r in ranking:
                print(f"{r['objective']:<12} {r['successes']}/{r['runs']} successful "
                      f"({r['success_fraction']:.3f})")
        else:
            rows = experiments.run_experiment(cfg, jobs=args.jobs)
            for r in rows:
                if "run_id" in r:
                    print(f"{r['run_id']:<20} {r['status']:<12} cov_gap_ratio={float(r['cov_gap_ratio']):.4g}")
                else:
                    print(f"saddle: {r['steps']} steps, final r^2 = {r['final_r2']:.6g}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
