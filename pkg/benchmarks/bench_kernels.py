"""Timing of the hot kernels under the numba and the pure-numpy backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json PATH]

Every kernel is run once per backend before timing (numba compiles on first
call) and the outputs of the two backends are compared.
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from ncricci import kernels


def _cases(rng: np.random.Generator) -> dict:
    a = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    b = rng.normal(size=(25, 25)) + 1j * rng.normal(size=(25, 25))
    band = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    shifts = rng.uniform(-3, 3, size=(400, 3))
    ys = np.linspace(-40, 40, 321)
    return {
        "twisted_convolve 9x9 * 25x25": lambda: kernels.twisted_convolve(a, (-4, -4), b, (-12, -12), 0.37)[0],
        "left_mult_matrix radius 16": lambda: kernels.left_mult_matrix(band, (-2, -2), 0.37, 16, 16),
        "right_mult_matrix radius 16": lambda: kernels.right_mult_matrix(band, (-2, -2), 0.37, 16),
        "radial_trapezoid 400 x 321": lambda: kernels.radial_trapezoid(
            shifts, np.array([1.0, 2.0, 1.0]), 5, ys, ys[1] - ys[0]),
    }


def run(repeat: int = 5) -> list[dict]:
    backends = ["numpy"] + (["numba"] if kernels.have_numba() else [])
    start = kernels.backend()
    rows = []
    try:
        for name, fn in _cases(np.random.default_rng(0)).items():
            row = {"kernel": name}
            outputs = {}
            for be in backends:
                kernels.set_backend(be)
                outputs[be] = fn()
                row[be] = min(timeit.repeat(fn, number=1, repeat=repeat))
            if len(outputs) == 2:
                row["max_abs_difference"] = float(np.abs(outputs["numba"] - outputs["numpy"]).max())
                row["speedup"] = row["numpy"] / row["numba"]
            rows.append(row)
    finally:
        kernels.set_backend(start)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", metavar="PATH", help="also write the rows as JSON")
    args = ap.parse_args(argv)
    rows = run(args.repeat)
    print(f"{'kernel':32s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for r in rows:
        nb = r.get("numba")
        print(f"{r['kernel']:32s} {1e3 * r['numpy']:11.3f} "
              f"{(1e3 * nb if nb is not None else float('nan')):11.3f} "
              f"{r.get('speedup', float('nan')):8.1f} {r.get('max_abs_difference', float('nan')):11.1e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
