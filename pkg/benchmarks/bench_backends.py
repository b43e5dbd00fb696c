#!/usr/bin/env python3
"""Compare the compiled and numpy kernel backends on the axial estimator.

Renders an inclined plane with mild depth noise at the requested
resolution (default 1242x375, the usual automotive camera crop), runs the
full estimate on each available backend, and reports per-image wall time
plus the agreement between the two outputs.

Run after building the extension:

    python setup.py build_ext --inplace
    python benchmarks/bench_backends.py
"""

import argparse
import math
import time

import numpy as np

from normalis import (
    CameraIntrinsics,
    EstimatorConfig,
    NoiseSpec,
    add_noise,
    estimate_normals,
    plane_from_view,
    render_depth,
)
from normalis import kernels


def time_backend(depth, intrinsics, backend, repeats):
    config = EstimatorConfig(estimator="sne+", backend=backend)
    estimate_normals(depth, intrinsics, config)  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = estimate_normals(depth, intrinsics, config)
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times)), result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--width", type=int, default=1242)
    parser.add_argument("--height", type=int, default=375)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    intrinsics = CameraIntrinsics(
        fx=720.0, fy=720.0, u0=args.width / 2.0, v0=args.height / 2.0,
        width=args.width, height=args.height,
    )
    scene = plane_from_view(math.radians(30.0), 0.7, 12.0)
    depth = add_noise(render_depth(scene, intrinsics),
                      NoiseSpec(sigma=0.002, mode="fraction", seed=11))

    print(f"image {args.width}x{args.height}, "
          f"{depth.valid_count()} valid pixels, median of {args.repeats} runs")
    results = {}
    for backend in kernels.available_backends():
        ms, normals = time_backend(depth, intrinsics, backend, args.repeats)
        results[backend] = (ms, normals)
        px_per_s = depth.valid_count() / (ms / 1e3)
        print(f"  {backend:>8}: {ms:8.2f} ms/image   ({px_per_s / 1e6:.1f} Mpx/s)")
    if len(results) == 2:
        (ms_c, a), (ms_n, b) = results["compiled"], results["numpy"]
        diff = np.max(np.abs(a.values - b.values))
        same_mask = np.array_equal(a.valid, b.valid)
        print(f"  speedup: {ms_n / ms_c:.1f}x; "
              f"max component diff {diff:.3e}; masks equal: {same_mask}")


if __name__ == "__main__":
    main()
