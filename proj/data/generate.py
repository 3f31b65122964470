#!/usr/bin/env python3
"""Regenerates the synthetic fixtures: benchmark CSVs + manifest and the
sharp-transition sweep spec. Deterministic, stdlib only."""

import json
import math
import os

ROOT = os.path.dirname(os.path.abspath(__file__))


def bnsl(a, b, c0, breaks, x):
    z = math.log(x)
    acc = math.log(b) - c0 * z
    for c, d, f in breaks:
        u = (z - math.log(d)) / f
        sp = u if u > 40.0 else math.log1p(math.exp(u))
        acc -= c * f * sp
    return a + math.exp(acc)


def log_grid(lo, hi, n):
    return [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]


def write_series(name, comment, fn, xs, n_test):
    path = os.path.join(ROOT, "synthetic", name)
    with open(path, "w") as out:
        out.write("# " + comment + "\n")
        out.write("x,y,split\n")
        for i, x in enumerate(xs):
            split = "test" if i >= len(xs) - n_test else "train"
            out.write(f"{x!r},{fn(x)!r},{split}\n")


def main():
    os.makedirs(os.path.join(ROOT, "synthetic"), exist_ok=True)
    os.makedirs(os.path.join(ROOT, "simulate"), exist_ok=True)

    xs = log_grid(1.0, 1e4, 36)
    write_series("power_law.csv", "y = 2 x^0.5", lambda x: 2.0 * x**0.5, xs, 6)
    write_series(
        "smooth_break.csv",
        "a=0 b=1.6 c0=0.35 breaks=[(0.85, 120, 0.4)]",
        lambda x: bnsl(0.0, 1.6, 0.35, [(0.85, 120.0, 0.4)], x),
        xs,
        6,
    )
    write_series(
        "sharp_break.csv",
        "a=0 b=1.0 c0=0.3 breaks=[(2.2, 300, 0.01)]",
        lambda x: bnsl(0.0, 1.0, 0.3, [(2.2, 300.0, 0.01)], x),
        xs,
        6,
    )
    write_series(
        "double_descent.csv",
        "a=0 b=0.5 c0=0.3 breaks=[(-0.7, 40, 0.25), (1.3, 800, 0.2)]",
        lambda x: bnsl(0.0, 0.5, 0.3, [(-0.7, 40.0, 0.25), (1.3, 800.0, 0.2)], x),
        xs,
        6,
    )

    manifest = {
        "tasks": [
            {"name": "power-law", "domain": "synthetic-pl", "path": "synthetic/power_law.csv"},
            {"name": "smooth-break", "domain": "synthetic-break", "path": "synthetic/smooth_break.csv"},
            {"name": "sharp-break", "domain": "synthetic-break", "path": "synthetic/sharp_break.csv"},
            {"name": "double-descent", "domain": "synthetic-dd", "path": "synthetic/double_descent.csv"},
        ]
    }
    with open(os.path.join(ROOT, "manifest.json"), "w") as out:
        json.dump(manifest, out, indent=2)
        out.write("\n")

    sweep = {
        "truth": {"a": 0.0, "b": 1.0, "c0": 0.3, "breaks": [{"c": 2.5, "d": 415.0, "f": 0.01}]},
        "xGrid": log_grid(10.0, 2000.0, 120),
        "fitMaxCandidates": [100, 200, 300, 400, 450, 600, 1000],
        "testRange": {"xLow": 2500.0, "xHigh": 25000.0, "count": 24},
        "successRmsle": 0.01,
    }
    with open(os.path.join(ROOT, "simulate", "sharp_transition.json"), "w") as out:
        json.dump(sweep, out, indent=2)
        out.write("\n")


if __name__ == "__main__":
    main()
