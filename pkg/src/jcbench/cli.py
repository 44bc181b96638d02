"""Command-line interface.

    jcbench fig1   --config cfg.ini --out out/fig1
    jcbench fig2   --config cfg.ini --out out/fig2
    jcbench evolve --config cfg.ini --out out/run
    jcbench steady --config cfg.ini --out out/ss
    jcbench --check

Without --config, fig1 and fig2 use the built-in default scenarios.  Exit
codes: 0 success, 2 configuration error, 3 numerical failure, 1 anything
else.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import default_fig1_config, default_fig2_config, parse_config
from .errors import ConfigError, NumericsError
from .scenarios import RUNNERS, emit_outputs

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_NUMERICS = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jcbench",
        description="Exact vs non-Hermitian dynamics of the damped, pumped TLS-cavity model",
    )
    parser.add_argument("--version", action="version", version=f"jcbench {__version__}")
    parser.add_argument("--check", action="store_true",
                        help="run the built-in invariant suite and exit")
    sub = parser.add_subparsers(dest="command")
    for name, blurb in (
        ("fig1", "correlation sweep over the initial-condition parameter alpha"),
        ("fig2", "steady-state fidelity sweep over the pump rate"),
        ("evolve", "single trajectory of one solver"),
        ("steady", "single steady state of one method"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", default=None, help="scenario config file (INI)")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.check:
            from .checks import run_self_checks

            ok = run_self_checks(verbose=True)
            return EXIT_OK if ok else EXIT_NUMERICS
        if not args.command:
            _build_parser().print_help()
            return EXIT_CONFIG

        if args.config:
            cfg = parse_config(args.config)
            if cfg.kind != args.command:
                raise ConfigError(
                    f"config is a {cfg.kind!r} scenario but the {args.command!r} "
                    f"subcommand was invoked"
                )
        elif args.command == "fig1":
            cfg = default_fig1_config()
        elif args.command == "fig2":
            cfg = default_fig2_config()
        else:
            raise ConfigError(f"the {args.command!r} subcommand requires --config")

        result = RUNNERS[cfg.kind](cfg)
        out_dir = args.out or cfg.outputs
        paths = emit_outputs(result, out_dir)
        for path in paths:
            print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"jcbench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"jcbench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
