"""Measured vs predicted precession across methods and step sizes.

Writes results/precession_scan.json and prints the fitted convergence
slope per method.  The scan holds the physical time span fixed (100
revolutions of the reference orbit) so rates at different h are
comparable.
"""

import json
import math
import pathlib
import sys

from keplerlab import MethodId, convergence_slope
from keplerlab.cli import main

OUT = pathlib.Path(__file__).resolve().parent.parent / "results"
OUT.mkdir(exist_ok=True)
target = OUT / "precession_scan.json"

code = main([
    "scan",
    "--methods", "sv,mp,ml,lc,dec",
    "--h-list", "0.0625,0.125,0.25,0.5",
    "--format", "json",
    "--out", str(target),
])
if code != 0:
    sys.exit(code)

payload = json.loads(target.read_text())
by_method = {}
for row in payload["rows"]:
    if row["measuredRate"] is not None:
        by_method.setdefault(row["method"], []).append((row["h"], row["measuredRate"]))

print(f"wrote {target}")
print(f"{'method':>8} {'slope':>8}   rates by h")
for name in ("sv", "mp", "ml", "lc", "dec"):
    pts = sorted(by_method[name])
    slope = convergence_slope(pts)
    rates = "  ".join(f"{r:+.3e}" for _, r in pts)
    print(f"{name:>8} {slope:8.3f}   {rates}")
