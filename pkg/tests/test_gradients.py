import numpy as np
import pytest

from normalis import (
    CENTRAL_DIFFERENCE,
    PREWITT,
    SOBEL,
    GradientKernel,
    InverseDepthImage,
    compute_gradients,
    kernel_by_name,
)

from conftest import ramp_inverse_depth

ALL_KERNELS = [CENTRAL_DIFFERENCE, SOBEL, PREWITT]


class TestKernelDefinitions:
    @pytest.mark.parametrize("kernel", ALL_KERNELS)
    def test_zero_sum_and_unit_slope(self, kernel):
        du = np.arange(-1, 2)[None, :]
        dv = np.arange(-1, 2)[:, None]
        assert abs(kernel.horizontal.sum()) < 1e-15
        assert abs(kernel.vertical.sum()) < 1e-15
        assert abs((kernel.horizontal * du).sum() - 1.0) < 1e-15
        assert abs((kernel.vertical * dv).sum() - 1.0) < 1e-15

    def test_lookup_by_name(self):
        assert kernel_by_name("sobel") is SOBEL
        with pytest.raises(ValueError):
            kernel_by_name("scharr")

    def test_bad_custom_kernel_rejected(self):
        with pytest.raises(ValueError):
            GradientKernel(
                name="broken",
                horizontal=[[0, 0, 0], [-1, 0, 1], [0, 0, 0]],  # slope 2
                vertical=CENTRAL_DIFFERENCE.vertical,
                footprint=np.ones((3, 3), bool),
            )

    def test_footprint_must_cover_coefficients(self):
        fp = np.zeros((3, 3), bool)
        fp[1, 1] = True  # center only: misses the taps
        with pytest.raises(ValueError, match="cover"):
            GradientKernel(
                name="uncovered",
                horizontal=CENTRAL_DIFFERENCE.horizontal,
                vertical=CENTRAL_DIFFERENCE.vertical,
                footprint=fp,
            )


class TestComputeGradients:
    @pytest.mark.parametrize("kernel", ALL_KERNELS)
    def test_affine_ramp_exact(self, kernel, backend):
        img = InverseDepthImage(ramp_inverse_depth(a=0.1, bu=0.002, bv=-0.0005))
        field = compute_gradients(img, kernel, backend=backend)
        assert field.valid[1:-1, 1:-1].all()
        np.testing.assert_allclose(field.gu[field.valid], 0.002, rtol=0, atol=1e-15)
        np.testing.assert_allclose(field.gv[field.valid], -0.0005, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("kernel", ALL_KERNELS)
    def test_constant_field_zero(self, kernel, backend):
        # Prewitt's 1/6 weights are not dyadic, so cancellation leaves
        # machine-epsilon residue; the others cancel exactly
        img = InverseDepthImage(np.full((10, 12), 0.25))
        field = compute_gradients(img, kernel, backend=backend)
        np.testing.assert_allclose(field.gu[field.valid], 0.0, atol=1e-16)
        np.testing.assert_allclose(field.gv[field.valid], 0.0, atol=1e-16)

    def test_quadratic_symbolic_oracle(self, backend):
        # 1/z = a + c u^2: the analytic derivative is 2 c u; the central
        # stencil is exact on quadratics, Sobel/Prewitt average rows of
        # equal value and are exact here too
        width, height = 20, 10
        u = np.arange(width, dtype=np.float64)[None, :]
        c = 1e-4
        img = InverseDepthImage(0.05 + c * u * u + np.zeros((height, 1)))
        for kernel in ALL_KERNELS:
            field = compute_gradients(img, kernel, backend=backend)
            expected = np.broadcast_to(2 * c * u, (height, width))
            np.testing.assert_allclose(
                field.gu[field.valid], expected[field.valid], atol=1e-6
            )

    def test_gentle_sine_matches_derivative(self, backend):
        # genuinely curved field: central difference error is O(h^2 f''')
        width, height = 64, 8
        u = np.arange(width, dtype=np.float64)[None, :]
        freq = 0.02
        img = InverseDepthImage(0.2 + 0.01 * np.sin(freq * u) + np.zeros((height, 1)))
        field = compute_gradients(img, CENTRAL_DIFFERENCE, backend=backend)
        expected = np.broadcast_to(0.01 * freq * np.cos(freq * u), (height, width))
        assert np.max(np.abs(field.gu[field.valid] - expected[field.valid])) < 1e-6

    def test_linearity(self, backend):
        rng = np.random.default_rng(5)
        i1 = rng.uniform(0.1, 1.0, (12, 14))
        i2 = rng.uniform(0.1, 1.0, (12, 14))
        a, b = 0.7, -0.3
        for kernel in ALL_KERNELS:
            f1 = compute_gradients(InverseDepthImage(i1), kernel, backend=backend)
            f2 = compute_gradients(InverseDepthImage(i2), kernel, backend=backend)
            fc = compute_gradients(
                InverseDepthImage(a * i1 + b * i2, valid=np.ones((12, 14), bool)),
                kernel, backend=backend,
            )
            joint = f1.valid & f2.valid & fc.valid
            np.testing.assert_allclose(
                fc.gu[joint], a * f1.gu[joint] + b * f2.gu[joint], atol=1e-12
            )
            np.testing.assert_allclose(
                fc.gv[joint], a * f1.gv[joint] + b * f2.gv[joint], atol=1e-12
            )

    def test_kernels_agree_on_affine(self, backend):
        img = InverseDepthImage(ramp_inverse_depth(a=0.3, bu=-0.001, bv=0.0007))
        fields = [compute_gradients(img, k, backend=backend) for k in ALL_KERNELS]
        joint = fields[0].valid & fields[1].valid & fields[2].valid
        for f in fields[1:]:
            np.testing.assert_allclose(f.gu[joint], fields[0].gu[joint], atol=1e-15)
            np.testing.assert_allclose(f.gv[joint], fields[0].gv[joint], atol=1e-15)

    @pytest.mark.parametrize("kernel", ALL_KERNELS)
    def test_mask_is_erosion_by_footprint(self, kernel, backend):
        rng = np.random.default_rng(6)
        values = rng.uniform(0.1, 1.0, (15, 17))
        valid = rng.uniform(size=(15, 17)) > 0.2
        img = InverseDepthImage(values, valid)
        field = compute_gradients(img, kernel, backend=backend)
        # naive erosion oracle
        h, w = values.shape
        r = kernel.radius
        expected = np.zeros((h, w), bool)
        for i in range(h):
            for j in range(w):
                if not (r <= i < h - r and r <= j < w - r):
                    continue
                ok = True
                for di in range(-r, r + 1):
                    for dj in range(-r, r + 1):
                        if kernel.footprint[di + r, dj + r] and not img.valid[i + di, j + dj]:
                            ok = False
                expected[i, j] = ok
        np.testing.assert_array_equal(field.valid, expected)

    def test_too_small_image_rejected(self, backend):
        with pytest.raises(ValueError):
            compute_gradients(InverseDepthImage(np.ones((2, 5))),
                              CENTRAL_DIFFERENCE, backend=backend)
