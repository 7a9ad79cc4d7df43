"""
report.py - Deterministic reports and CSV output.

Numbers are written with 17 significant digits so values round-trip exactly.
Wall time is logged only; it never enters report.json.
"""

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from src.utils.logger import setup_logger

NUMBER_FORMAT = "%.17g"


def format_number(value):
    """Render a number with 17 significant digits, '.' decimal"""
    return NUMBER_FORMAT % float(value)


def to_plain(value):
    """Convert numpy/sympy values into JSON-ready data with formatted floats"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return format_number(value)
    if value is None or isinstance(value, str):
        return value
    # sympy Rational and friends
    if hasattr(value, "p") and hasattr(value, "q"):
        return str(Fraction(int(value.p), int(value.q)))
    return str(value)


def inputs_digest(payload):
    """sha256 of the canonical JSON of the inputs"""
    canonical = json.dumps(to_plain(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class Report:
    """Command echo, inputs digest, results and named pass/fail checks"""
    command: dict
    inputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.logger = setup_logger("Report")
        self._started = time.perf_counter()

    def add(self, key, value):
        self.results[key] = value

    def check(self, name, passed, detail=None):
        """Record a named acceptance check"""
        self.checks[name] = {"passed": bool(passed)}
        if detail is not None:
            self.checks[name]["detail"] = detail
        if not passed:
            self.logger.warning(f"❌ check {name} failed ({detail})")
        return bool(passed)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    def first_failure(self):
        for name, c in self.checks.items():
            if not c["passed"]:
                return name, c.get("detail")
        return None

    def to_dict(self):
        return to_plain({
            "command": self.command,
            "inputs_digest": inputs_digest(self.inputs),
            "results": self.results,
            "checks": self.checks,
            "passed": self.passed,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, output_dir):
        """Write report.json and log the elapsed wall time"""
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(output_dir, "report.json")
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(self.to_json())
        elapsed = time.perf_counter() - self._started
        self.logger.info(f"✅ report written to {path} (wall time {elapsed:.3f} s)")
        return path

    def print_summary(self):
        """Print the results as key = value lines on stdout"""
        for key, value in sorted(to_plain(self.results).items()):
            print(f"{key} = {json.dumps(value)}")
        for name, c in sorted(self.checks.items()):
            print(f"{'✅' if c['passed'] else '❌'} {name}")


def write_csv(path, header, rows):
    """Write a numeric table with full precision"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    data = np.atleast_2d(np.asarray(rows, dtype=float))
    if data.size == 0:
        data = np.empty((0, len(header)))
    np.savetxt(path, data, fmt=NUMBER_FORMAT, delimiter=",", header=",".join(header), comments="")
    return path
