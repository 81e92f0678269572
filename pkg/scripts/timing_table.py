"""Wall-clock and Newton-work comparison across all six methods.

Prints the bench table and writes results/timing_table.json.  Explicit
methods (sv, fr) must report zero implicit solves; the cyclic schemes
(lc, dec) solve once every third step; mp and ml solve every step.
"""

import json
import pathlib
import sys

from keplerlab.cli import main

OUT = pathlib.Path(__file__).resolve().parent.parent / "results"
OUT.mkdir(exist_ok=True)
target = OUT / "timing_table.json"

code = main([
    "bench",
    "--steps", "20000",
    "--h", "0.1",
    "--format", "json",
    "--out", str(target),
])
if code != 0:
    sys.exit(code)

payload = json.loads(target.read_text())
print(f"wrote {target}")
print(f"{'method':>8} {'steps':>7} {'wall s':>9} {'solves':>7} {'avg newton':>11}")
for row in payload["rows"]:
    print(f"{row['method']:>8} {row['steps']:>7} {row['wallSeconds']:>9.4f} "
          f"{row['implicitSolveCount']:>7} {row['avgNewtonIterations']:>11.2f}")
