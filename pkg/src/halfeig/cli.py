"""Command-line entry point: ``halfeig <command> --config PATH --out DIR [--seed N]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .experiments import COMMANDS, EXIT_USAGE
from .grammar import ConfigError


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with config errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="halfeig", description="Principal half-eigenvalues of homogeneous "
                "fully nonlinear elliptic operators, Dirichlet solves, and property checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "eig": "both principal half-eigenpairs (eig.csv, phi_plus.csv, phi_minus.csv)",
        "solve": "Dirichlet problem F(u) = lambda u + f (solution.csv, report.txt)",
        "amp-sweep": "solutions just past the larger half-eigenvalue (amp.csv)",
        "scan": "1D shooting scan for the second eigenvalue (scan.csv, lambda2.txt)",
        "continuation": "half-eigenvalues along the homotopy to -Gamma*Laplacian (continuation.csv)",
        "verify": "run the property suite (verify.csv)",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", required=True, type=Path, help="TOML experiment config")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed (overrides run.seed)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, seed)
    except ConfigError as exc:
        print(f"halfeig: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
