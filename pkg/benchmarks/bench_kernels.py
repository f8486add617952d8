"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Each kernel runs on the same seeded inputs under every available backend;
outputs are checked for agreement before timings are reported.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from sddr import kernels


def cases(rng):
    x = rng.exponential(size=4096)
    P, Q = rng.normal(size=(2000, 3)), rng.normal(size=(2000, 3))
    C = rng.random((300, 300))
    return {
        "os_cfar_1d (n=4096, guard 2, train 16)": (lambda: kernels.os_cfar_1d(x, 2, 16, 24, 3.0)),
        "nearest (2000 x 2000 points)": (lambda: kernels.nearest(P, Q)),
        "assignment (300 x 300)": (lambda: kernels.assignment(C)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    default = kernels.BACKEND
    results, outputs = {}, {}
    for b in backends:
        kernels.use_backend(b)
        for name, fn in cases(np.random.default_rng(0)).items():
            outputs.setdefault(name, []).append(fn())
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            results.setdefault(name, {})[b] = best
    kernels.use_backend(default)

    for name, outs in outputs.items():
        ref = outs[0]
        for o in outs[1:]:
            pairs = zip(ref, o) if isinstance(ref, tuple) else [(ref, o)]
            if not all(np.allclose(a, b) for a, b in pairs):
                print(f"backend outputs disagree on {name}", file=sys.stderr)
                return 1

    width = max(map(len, results))
    print(f"{'kernel':<{width}}  " + "  ".join(f"{b:>10}" for b in backends) + "   speedup")
    for name, t in results.items():
        row = "  ".join(f"{t[b] * 1e3:8.2f}ms" for b in backends)
        speed = f"{t['python'] / t['cython']:8.1f}x" if "cython" in t else "       n/a"
        print(f"{name:<{width}}  {row}  {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
