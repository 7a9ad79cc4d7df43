#!/usr/bin/env python3
"""
Toric Soliton Toolkit
Main entry point: polytopes, soliton vector fields, model checks and continuity paths
"""

import os
import sys
import argparse

# Make local src importable whether run as script or module
CURRENT_DIR = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, CURRENT_DIR)

from src.cli.commands import COMMAND_HANDLERS
from src.utils.config import COMMANDS, LOG_LEVELS, PREFACTORS, VERIFY_CASES, RunConfig
from src.utils.errors import ConfigError, ToricError, VerificationFailure
from src.utils.logger import set_level, setup_logger


class ToricSolitonApp:
    def __init__(self, config):
        self.logger = setup_logger("ToricSolitonApp")
        self.config = config

    # ---------------- UI helpers ----------------
    def display_banner(self):
        self.logger.info("=" * 60)
        self.logger.info(f"🔷 TORIC SOLITON TOOLKIT :: {self.config.command}")
        self.logger.info("=" * 60)

    # ---------------- Run ----------------
    def run(self):
        """Run the configured command; returns the written Report"""
        self.display_banner()
        handler = COMMAND_HANDLERS[self.config.command]
        report = handler(self.config)
        report.write(self.config.output_dir)
        report.print_summary()
        if not report.passed:
            name, detail = report.first_failure()
            raise VerificationFailure(name, detail or "")
        self.logger.info(f"✅ {self.config.command} finished")
        return report


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors raised as ConfigError (exit 64)"""

    def error(self, message):
        raise ConfigError(message)


def parse_arguments(argv=None):
    parser = _ArgumentParser(description="Toric shrinking Kähler-Ricci soliton toolkit")
    parser.add_argument("command", choices=COMMANDS, help="Command to run")
    parser.add_argument("--input", help="Fan/polyhedron JSON or run JSON")
    parser.add_argument("--out", default="out", help="Output directory (default: out)")
    parser.add_argument("--tol-grad", type=float, help="Relative gradient tolerance for minimize_F")
    parser.add_argument("--tol-newton", type=float, help="Residual sup-norm tolerance for the continuity Newton")
    parser.add_argument("--steps", type=int, help="Number of continuity steps (default: 20)")
    parser.add_argument("--grid-h", type=float, help="Grid spacing")
    parser.add_argument("--grid-span", type=float, nargs=2, metavar=("LO", "HI"), help="Grid span per axis")
    parser.add_argument("--truncation-R", dest="truncation_R", type=float,
                        help="Truncation radius for unbounded polyhedra (default: 60)")
    parser.add_argument("--cells", type=int, help="Quadrature cells per axis (default: 2000)")
    parser.add_argument("--prefactor", choices=PREFACTORS, help="Weighted volume prefactor (default: 1)")
    parser.add_argument("--case", choices=VERIFY_CASES, help="Verification suite for the verify command")
    parser.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS, help="Log level (default: INFO)")
    return parser.parse_args(argv)


def main(argv=None):
    logger = setup_logger("main")
    try:
        args = parse_arguments(argv)
        if args.log_level:
            set_level(args.log_level)
        config = RunConfig.from_arguments(args)
        ToricSolitonApp(config).run()
    except ToricError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("⚠️ interrupted by user")
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
