"""Command-line entry point: ``fairmdp <mode> [--config file.toml] [overrides]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import EXIT_CONFIG, MODES, ConfigError, config_from_dict, load_config, run_experiment


def parse_seeds(text: str) -> list[int]:
    """``"3"``, ``"0,2,5"`` or an inclusive range ``"0-9"``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairmdp", description="Fair multi-agent tabular MDP experiments.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", help="TOML experiment config; flags below override it")
    p.add_argument("--fairness", help='"max-min", "proportional" or "alpha:<value>"')
    p.add_argument("--seeds", type=parse_seeds, help='e.g. "0-9" or "1,4,7"')
    p.add_argument("--out", help="output directory")
    p.add_argument("--mdp", dest="mdp_path", help="JSON instance to use instead of random generation")
    p.add_argument("--mdp-seed", type=int, help="use this random instance for every seed")
    p.add_argument("--episodes", type=int, help="online episodes K")
    p.add_argument("--delta", type=float, help="confidence level")
    p.add_argument("--width-scale", type=float, help="multiplier on the confidence widths")
    p.add_argument("--data", help="offline dataset (JSON lines)")
    p.add_argument("--dataset-size", type=int, help="episodes to log when no --data is given")
    p.add_argument("--fw-iters", type=int, help="Frank-Wolfe iteration cap")
    p.add_argument("--fw-tol", type=float, help="Frank-Wolfe duality-gap tolerance")
    p.add_argument("--fw-step", choices=("diminishing", "line_search"), help="Frank-Wolfe step rule")
    p.add_argument("--iters", type=int, help="policy-gradient iterations")
    p.add_argument("--batch", type=int, help="trajectories per policy-gradient step")
    p.add_argument("--step", type=float, help="policy-gradient step size")
    p.add_argument("--grid-step", type=float, help="oracle simplex grid step")
    p.add_argument("--parallelism", type=int, help="worker processes across seeds")
    p.add_argument("--dump-policy", action="store_true", default=None, help="write policy-<seed>.json")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_TOP = ("fairness", "seeds", "out", "mdp_path", "mdp_seed", "episodes", "delta", "width_scale", "data",
        "dataset_size", "grid_step", "parallelism", "dump_policy")
_NESTED = {
    "fw_iters": ("solver", "max_iterations"),
    "fw_tol": ("solver", "tolerance"),
    "fw_step": ("solver", "step_rule"),
    "iters": ("pg", "iterations"),
    "batch": ("pg", "batch_size"),
    "step": ("pg", "step_size"),
}


def overrides_from_args(args: argparse.Namespace) -> dict:
    out: dict = {"mode": args.mode}
    for name in _TOP:
        value = getattr(args, name)
        if value is not None:
            out[name] = value
    for name, (section, key) in _NESTED.items():
        value = getattr(args, name)
        if value is not None:
            out.setdefault(section, {})[key] = value
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = overrides_from_args(args)
    try:
        cfg = load_config(args.config, overrides) if args.config else config_from_dict(overrides)
    except ConfigError as exc:
        print(f"fairmdp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
