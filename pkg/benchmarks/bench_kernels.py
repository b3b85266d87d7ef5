"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from dermseg import _kernels


def cases(size, seed=0):
    g = np.random.default_rng(seed)
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:] = (222, 184, 160)
    q = size // 4
    img[q:3 * q, q:3 * q] = (92, 58, 44)
    img = np.clip(img + g.integers(-3, 4, img.shape), 0, 255).astype(np.uint8)
    mask = g.random((size, size)) < 0.55
    pixels = img.reshape(-1, 3).astype(np.float64)
    centroids = pixels[g.choice(len(pixels), 5, replace=False)].copy()
    hair = np.zeros((size, size), dtype=bool)
    hair[:, size // 3:size // 3 + 3] = True
    return {
        "flood_fill": lambda k: k.flood_fill(img, size // 2, size // 2, 20, 4, False),
        "label_components": lambda k: k.label_components(mask, 8),
        "kmeans_assign": lambda k: k.kmeans_assign(pixels, centroids),
        "median_fill": lambda k: k.median_fill(img, hair, 2),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':18s}" + "".join(f"{name:>12s}" for name in sorted(backends)) + "     speedup")
    for name, fn in cases(args.size).items():
        times = {}
        for bname, mod in sorted(backends.items()):
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        row = f"{name:18s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in sorted(times))
        if "cython" in times:
            row += f"  {times['python'] / times['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
