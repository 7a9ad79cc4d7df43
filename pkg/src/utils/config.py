"""
config.py - Run configuration for the command-line tool.

Values are layered lowest to highest: built-in defaults, the run JSON given
with --input (continuity and fhat runs), then explicit command-line flags.
"""

import json
import os
from dataclasses import dataclass, field

from src.utils.errors import ConfigError
from src.utils.logger import setup_logger

COMMANDS = ("polytope", "soliton-vector", "verify", "continuity", "fhat")
VERIFY_CASES = ("gaussian_xi", "gaussian_polytope", "brion_vs_oracle", "legendre_involution")
PREFACTORS = ("1", "2pi")
LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")

DEFAULT_TOLERANCES = {
    "grad": 1e-10,
    "newton": 1e-10,
    "verify": 1e-6,
}

DEFAULT_FLAGS = {
    "steps": 20,
    "grid_h": None,
    "grid_span": None,
    "truncation_R": 60.0,
    "cells": 2000,
    "prefactor": "1",
    "case": None,
    "log_level": "INFO",
}

# Keys a run JSON may carry, per command
RUN_KEYS = {
    "continuity": {"model", "dim", "bump", "steps", "tolerances", "grid", "geometry", "b"},
    "fhat": {"geometry", "b", "bump", "grid", "truncation_R"},
}
BUMP_KEYS = {"amplitude", "center", "width"}
GRID_KEYS = {"h", "span"}


# ---------------- Validators ----------------
def validate_tolerance(value):
    """Validate a tolerance: finite and strictly positive"""
    try:
        tol = float(value)
        return tol > 0 and tol == tol and tol != float("inf")
    except (TypeError, ValueError):
        return False


def validate_steps(value):
    """Validate a continuity step count"""
    try:
        return int(value) == value and int(value) >= 1
    except (TypeError, ValueError):
        return False


def validate_span(value):
    """Validate a grid span given as [lo, hi]"""
    try:
        lo, hi = (float(v) for v in value)
        return lo < hi
    except (TypeError, ValueError):
        return False


def check_keys(mapping, allowed, where):
    """Reject keys outside the allowed set"""
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def load_json(path, exact=False):
    """Read a JSON file; with exact=True, decimals stay strings for exact parsing"""
    if not path or not os.path.isfile(path):
        raise ConfigError(f"input file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            if exact:
                return json.load(handle, parse_float=str)
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e


# ---------------- RunConfig ----------------
@dataclass
class RunConfig:
    """Resolved configuration for one command"""
    command: str
    input_path: str = None
    output_dir: str = "out"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    flags: dict = field(default_factory=lambda: dict(DEFAULT_FLAGS))
    run: dict = field(default_factory=dict)

    def __post_init__(self):
        self.logger = setup_logger("RunConfig")

    @classmethod
    def from_arguments(cls, args):
        """Build and validate a config from parsed argparse arguments"""
        config = cls(command=args.command, input_path=args.input, output_dir=args.out)

        if config.command in RUN_KEYS and args.input:
            run = load_json(args.input, exact=False)
            # A bare fan/polyhedron is accepted wherever a run JSON is
            if isinstance(run, dict) and ("rays" in run or "halfspaces" in run):
                run = {"geometry": load_json(args.input, exact=True)}
            check_keys(run, RUN_KEYS[config.command], f"{config.command} input")
            config.apply_run(run)

        overrides = {
            "grad": args.tol_grad,
            "newton": args.tol_newton,
        }
        for key, value in overrides.items():
            if value is not None:
                config.tolerances[key] = value
        for key in DEFAULT_FLAGS:
            value = getattr(args, key, None)
            if value is not None:
                config.flags[key] = value

        config.validate()
        return config

    def apply_run(self, run):
        """Merge a run JSON into the defaults"""
        self.run = dict(run)
        if "tolerances" in run:
            check_keys(run["tolerances"], DEFAULT_TOLERANCES, "tolerances")
            self.tolerances.update(run["tolerances"])
        if "steps" in run:
            self.flags["steps"] = run["steps"]
        if "truncation_R" in run:
            self.flags["truncation_R"] = run["truncation_R"]
        if "grid" in run:
            check_keys(run["grid"], GRID_KEYS, "grid")
            if "h" in run["grid"]:
                self.flags["grid_h"] = run["grid"]["h"]
            if "span" in run["grid"]:
                self.flags["grid_span"] = list(run["grid"]["span"])
        if "bump" in run:
            check_keys(run["bump"], BUMP_KEYS, "bump")

    def validate(self):
        """Raise ConfigError on the first invalid value"""
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name, value in self.tolerances.items():
            if not validate_tolerance(value):
                raise ConfigError(f"tolerance {name} must be positive, got {value!r}")
        if not validate_steps(self.flags["steps"]):
            raise ConfigError(f"steps must be an integer >= 1, got {self.flags['steps']!r}")
        if self.flags["grid_h"] is not None and not validate_tolerance(self.flags["grid_h"]):
            raise ConfigError(f"grid-h must be positive, got {self.flags['grid_h']!r}")
        if self.flags["grid_span"] is not None and not validate_span(self.flags["grid_span"]):
            raise ConfigError(f"grid-span must be [lo, hi] with lo < hi, got {self.flags['grid_span']!r}")
        if not validate_tolerance(self.flags["truncation_R"]):
            raise ConfigError("truncation-R must be positive")
        if not validate_steps(self.flags["cells"]):
            raise ConfigError("cells must be an integer >= 1")
        if str(self.flags["prefactor"]) not in PREFACTORS:
            raise ConfigError(f"prefactor must be one of {PREFACTORS}")
        if str(self.flags["log_level"]).upper() not in LOG_LEVELS:
            raise ConfigError(f"unknown log level {self.flags['log_level']!r}")
        if self.command == "verify" and self.flags["case"] not in VERIFY_CASES:
            raise ConfigError(f"verify needs --case in {VERIFY_CASES}")
        if self.command in ("polytope", "soliton-vector") and not self.input_path:
            raise ConfigError(f"{self.command} needs --input")
        self.logger.debug(f"config validated for {self.command}")

    @property
    def prefactor_mode(self):
        return str(self.flags["prefactor"])

    def echo(self):
        """Plain-data view written into reports"""
        return {
            "command": self.command,
            "input": os.path.basename(self.input_path) if self.input_path else None,
            "tolerances": dict(sorted(self.tolerances.items())),
            "flags": {k: v for k, v in sorted(self.flags.items()) if k != "log_level"},
        }
