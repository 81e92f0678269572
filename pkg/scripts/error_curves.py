"""Position-error curves against the exact orbit for every method.

Writes one CSV per method under results/ and prints the final error per
run.  The span is long enough (t = 500) to show the linear error growth
of the symplectic schemes against the quadratic growth a non-symplectic
method would produce.
"""

import pathlib
import sys

from keplerlab.cli import main

OUT = pathlib.Path(__file__).resolve().parent.parent / "results"
OUT.mkdir(exist_ok=True)

H = 0.1
T_END = 500.0

for name in ("sv", "mp", "ml", "lc", "dec", "fr"):
    target = OUT / f"error_curve_{name}.csv"
    code = main([
        "error-curve",
        "--method", name,
        "--h", str(H),
        "--t-end", str(T_END),
        "--out", str(target),
    ])
    if code != 0:
        sys.exit(code)
    last = target.read_text().rstrip("\n").rsplit("\n", 1)[-1]
    print(f"{name:>4}: wrote {target.name}, final row {last}")
