"""Backend agreement: the compiled extension against the numpy fallback."""

import numpy as np
import pytest

from normalis import (
    CENTRAL_DIFFERENCE,
    PREWITT,
    SOBEL,
    Neighborhood,
)
from normalis import kernels

needs_compiled = pytest.mark.skipif(
    "compiled" not in kernels.available_backends(),
    reason="compiled extension not built",
)


def random_raster(seed, shape=(23, 31), holes=0.15):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.05, 2.0, shape)
    valid = rng.uniform(size=shape) > holes
    return values, valid


@needs_compiled
class TestBackendParity:
    @pytest.mark.parametrize("kernel", [CENTRAL_DIFFERENCE, SOBEL, PREWITT])
    def test_stencil_gradients_bitwise(self, kernel):
        values, valid = random_raster(32)
        out_c = kernels.stencil_gradients(
            values, valid, kernel.horizontal, kernel.vertical,
            kernel.footprint, backend="compiled",
        )
        out_n = kernels.stencil_gradients(
            values, valid, kernel.horizontal, kernel.vertical,
            kernel.footprint, backend="numpy",
        )
        for a, b in zip(out_c, out_n):
            np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("radius", [1, 2])
    def test_sne_plus_bitwise(self, radius):
        values, valid = random_raster(33)
        grads = kernels.stencil_gradients(
            values, valid, CENTRAL_DIFFERENCE.horizontal,
            CENTRAL_DIFFERENCE.vertical, CENTRAL_DIFFERENCE.footprint,
        )
        offsets = Neighborhood.ring(radius).as_array()
        args = (1.0 / values, valid, grads[0], grads[1], grads[2],
                55.0, 60.0, 15.0, 11.0, offsets, 1e-12, 1e-12)
        out_c = kernels.sne_plus_normals(*args, backend="compiled")
        out_n = kernels.sne_plus_normals(*args, backend="numpy")
        np.testing.assert_array_equal(out_c[0], out_n[0])
        np.testing.assert_array_equal(out_c[1], out_n[1])
        np.testing.assert_array_equal(out_c[2], out_n[2])


class TestRowPartitioning:
    def test_slab_stitching_reproduces_full_frame(self, backend):
        # per-pixel independence: running the kernel on row slabs with a
        # one-row halo and stitching the interiors equals the full run
        intr = dict(fx=90.0, fy=95.0, u0=20.0, v0=14.0)
        values, valid = random_raster(34, shape=(28, 40), holes=0.1)
        grads = kernels.stencil_gradients(
            values, valid, CENTRAL_DIFFERENCE.horizontal,
            CENTRAL_DIFFERENCE.vertical, CENTRAL_DIFFERENCE.footprint,
            backend=backend,
        )
        offsets = Neighborhood.ring(1).as_array()
        z = 1.0 / values
        full = kernels.sne_plus_normals(
            z, valid, grads[0], grads[1], grads[2],
            intr["fx"], intr["fy"], intr["u0"], intr["v0"],
            offsets, 1e-12, 1e-12, backend=backend,
        )
        h = values.shape[0]
        stitched = np.zeros_like(full[0])
        stitched_valid = np.zeros_like(full[1])
        for r0 in range(0, h, 7):
            r1 = min(r0 + 7, h)
            lo = max(0, r0 - 1)
            hi = min(h, r1 + 1)
            # the slab sees shifted principal-point row coordinates
            slab = kernels.sne_plus_normals(
                z[lo:hi], valid[lo:hi], grads[0][lo:hi], grads[1][lo:hi],
                grads[2][lo:hi], intr["fx"], intr["fy"], intr["u0"],
                intr["v0"] - lo, offsets, 1e-12, 1e-12, backend=backend,
            )
            stitched[r0:r1] = slab[0][r0 - lo : r1 - lo]
            stitched_valid[r0:r1] = slab[1][r0 - lo : r1 - lo]
        np.testing.assert_array_equal(stitched_valid, full[1])
        np.testing.assert_array_equal(stitched, full[0])

    def test_force_fallback_env(self, monkeypatch):
        # the dispatch honors NORMALIS_FORCE_FALLBACK at import time
        import importlib

        monkeypatch.setenv("NORMALIS_FORCE_FALLBACK", "1")
        spec_mod = importlib.util.find_spec("normalis.kernels")
        fresh = importlib.util.module_from_spec(spec_mod)
        spec_mod.loader.exec_module(fresh)
        assert fresh.DEFAULT_BACKEND == "numpy"
        assert fresh.available_backends() == ("numpy",)
