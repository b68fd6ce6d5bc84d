"""Command-line entry point for batch experiment runs.

Subcommands: moments, consistency, meanfield, therapy, validate-config.
All accept --config / --seed / --out / --preset plus per-command options;
defaults reproduce the standard setup without any configuration file.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import RunConfig, parse_config, ConfigError, PRESETS
from .params import validate
from .experiments import run_moments, run_consistency, run_meanfield, run_therapy


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", default=None,
                        help="key = value configuration file (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, default=None, help="master random seed")
    parser.add_argument("--out", metavar="DIR", default=None, help="output directory")
    parser.add_argument("--preset", choices=sorted(PRESETS), default=None,
                        help="initial-mean preset (fig1: moment runs, sec41: density runs)")
    parser.add_argument("--nu", type=float, default=None, help="therapy efficacy nu_control")
    parser.add_argument("--horizon", type=float, default=None, help="override time horizon")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdkinetics",
        description="Multi-scale simulation of the four-population cell-dynamics model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="integrate the closed moment systems")
    _common(p)

    p = sub.add_parser("consistency",
                       help="particle runs across the scaling-parameter list vs the moment ODEs")
    _common(p)
    p.add_argument("--epsilon", metavar="LIST", default=None,
                   help="comma-separated scaling parameters, e.g. 1e-3,1e-2,1e-1")
    p.add_argument("--particles", type=int, default=None, help="particles per population")
    p.add_argument("--engine", choices=("numba", "numpy"), default=None)

    p = sub.add_parser("meanfield", help="Fokker-Planck run with equilibrium metrics")
    _common(p)
    p.add_argument("--p", metavar="LIST", default=None, dest="p_list",
                   help="comma-separated distance exponents in (1/2, 1)")

    p = sub.add_parser("therapy", help="moment and mean-field runs with the control active")
    _common(p)

    p = sub.add_parser("validate-config", help="parse and check a configuration file")
    p.add_argument("--config", metavar="PATH", required=True)
    return parser


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config)
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        updates["out_dir"] = args.out
    if getattr(args, "preset", None) is not None:
        updates["preset"] = args.preset
    if getattr(args, "nu", None) is not None:
        updates["nu_control"] = args.nu
    if getattr(args, "horizon", None) is not None:
        updates["horizon"] = args.horizon
    if getattr(args, "epsilon", None):
        updates["epsilons"] = tuple(float(v) for v in args.epsilon.split(","))
    if getattr(args, "p_list", None):
        updates["p_exponents"] = tuple(float(v) for v in args.p_list.split(","))
    if getattr(args, "particles", None) is not None:
        updates["n_particles"] = args.particles
    if getattr(args, "engine", None) is not None:
        updates["engine"] = args.engine
    return replace(cfg, **updates) if updates else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            cfg = parse_config(args.config)
            report = validate(cfg.parameters())
            print(f"{args.config}: {report}")
            return 0 if report.ok else 1
        cfg = _load_config(args)
        if args.command == "moments":
            rep = run_moments(cfg)
        elif args.command == "consistency":
            rep = run_consistency(cfg)
        elif args.command == "meanfield":
            rep = run_meanfield(cfg)
        elif args.command == "therapy":
            rep = run_therapy(cfg, nu=cfg.nu_control if cfg.nu_control > 0 else 0.1)
        else:  # pragma: no cover
            raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    print(f"{rep.name}: wrote {len(rep.files)} files to {rep.out_dir}")
    for key, val in rep.metrics.items():
        if isinstance(val, (int, float, str)):
            print(f"  {key} = {val}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
