"""Compare the compiled kernels with their numpy twins.

    python benchmarks/bench_kernels.py [--repeat N] [--size S]

Prints per-call times for each kernel on both backends, then the wall time of
expanding a batch of images end to end under each backend (the backend is
chosen at import, so that part runs in subprocesses).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from divaug import _pykernels

try:
    from divaug import _kernels
except ImportError:
    _kernels = None

END_TO_END = """
import time, numpy as np
from divaug import kernels
from divaug.policy import expand
g = np.random.default_rng(0)
imgs = g.integers(0, 256, size=(64, {size}, {size}, 3), dtype=np.uint8)
t = time.perf_counter()
for i, im in enumerate(imgs):
    expand(im, 8, np.random.default_rng(i), imgs)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def cases(size):
    g = np.random.default_rng(0)
    img = g.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    base = g.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    c = size / 2
    return {
        "affine_nearest": lambda m: m.affine_nearest(img, 0.87, -0.5, c * 0.6, 0.5, 0.87, -c * 0.4, 128),
        "blend": lambda m: m.blend(base, img, 1.4),
        "smooth3x3": lambda m: m.smooth3x3(img),
        "grayscale": lambda m: m.grayscale(img),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--size", type=int, default=32)
    args = ap.parse_args(argv)

    backends = [("numpy", _pykernels)] + ([("cython", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled kernels not built; timing the numpy backend only")
    print(f"{'kernel':<16}" + "".join(f"{name:>14}" for name, _ in backends) + "   speedup")
    for name, fn in cases(args.size).items():
        times = [timeit.timeit(lambda: fn(mod), number=args.repeat) / args.repeat for _, mod in backends]
        speed = f"{times[0] / times[1]:9.1f}x" if len(times) == 2 else ""
        print(f"{name:<16}" + "".join(f"{t * 1e6:12.1f}us" for t in times) + speed)

    print("\nexpand(E=8) over 64 images:")
    for flag in ("1", ""):
        env = {**os.environ, "DIVAUG_PURE_PYTHON": flag}
        out = subprocess.run([sys.executable, "-c", END_TO_END.format(size=args.size)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:<8} {float(out[1]):.3f}s")


if __name__ == "__main__":
    main()
