import math

import numpy as np
import pytest

from normalis import (
    CameraIntrinsics,
    DepthImage,
    Neighborhood,
    azimuth,
    candidates_at,
    compute_gradients,
    division_candidates_at,
    ground_truth_normals,
    is_frontoparallel,
    plane_from_view,
    render_depth,
    to_inverse_depth,
)


def pixel_setup(depth_values, intrinsics=None, valid=None):
    h, w = np.asarray(depth_values).shape
    if intrinsics is None:
        intrinsics = CameraIntrinsics(fx=100.0, fy=100.0, u0=w / 2, v0=h / 2,
                                      width=w, height=h)
    depth = DepthImage(depth_values, valid)
    grads = compute_gradients(to_inverse_depth(depth))
    return depth, grads, intrinsics


class TestNeighborhood:
    def test_ring_radius_one(self):
        nb = Neighborhood.ring(1)
        assert nb.k == 8
        assert (0, 0) not in nb.offsets
        assert nb.offsets[0] == (-1, -1)  # row-major deterministic order

    def test_ring_radius_two(self):
        nb = Neighborhood.ring(2)
        assert nb.k == 16
        assert all(max(abs(du), abs(dv)) == 2 for du, dv in nb.offsets)

    def test_invalid_neighborhoods(self):
        with pytest.raises(ValueError):
            Neighborhood(())
        with pytest.raises(ValueError):
            Neighborhood(((0, 0), (1, 0)))
        with pytest.raises(ValueError):
            Neighborhood(((1, 0), (1, 0)))


class TestAzimuth:
    def test_along_u(self, intrinsics):
        assert azimuth(0.01, 0.0, intrinsics) == 0.0

    def test_along_v(self, intrinsics):
        assert azimuth(0.0, 0.01, intrinsics) == pytest.approx(math.pi / 2, abs=1e-15)

    def test_anisotropic_focal_vs_normalization_oracle(self):
        k = CameraIntrinsics(fx=200.0, fy=100.0, u0=10, v0=10, width=20, height=20)
        phi = azimuth(-0.01, -0.01, k)
        vec = np.array([k.fx * -0.01, k.fy * -0.01])
        vec /= np.linalg.norm(vec)
        oracle = math.atan2(vec[1], vec[0]) % (2 * math.pi)
        assert phi == pytest.approx(oracle, abs=1e-12)
        assert phi == pytest.approx(3.6052402625905993, abs=1e-12)

    def test_range(self, intrinsics):
        rng = np.random.default_rng(7)
        for gu, gv in rng.normal(scale=0.01, size=(200, 2)):
            phi = azimuth(gu, gv, intrinsics)
            assert 0.0 <= phi < 2 * math.pi

    def test_frontoparallel_flag(self, intrinsics):
        assert is_frontoparallel(0.0, 0.0, intrinsics)
        assert is_frontoparallel(1e-16, -1e-16, intrinsics)
        assert not is_frontoparallel(1e-3, 0.0, intrinsics)
        assert azimuth(0.0, 0.0, intrinsics) == 0.0


class TestCandidatesAt:
    def test_frontoparallel_plane_flagged_empty(self):
        depth, grads, k = pixel_setup(np.full((9, 9), 5.0))
        c = candidates_at((4, 4), depth, grads, k)
        assert c.frontoparallel
        assert c.count == 0
        assert c.phi == 0.0

    def test_inclined_plane_candidates_unanimous(self, intrinsics):
        scene = plane_from_view(math.radians(40), 0.8, 5.0)
        depth = render_depth(scene, intrinsics)
        grads = compute_gradients(to_inverse_depth(depth))
        gt = ground_truth_normals(scene, intrinsics)
        c = candidates_at((40, 30), depth, grads, intrinsics)
        assert not c.frontoparallel
        assert c.count == 8
        # all candidates carry the same axis: pairwise (|A|, |nz|) agree
        np.testing.assert_allclose(np.abs(c.a), np.abs(c.a[0]), atol=1e-9)
        np.testing.assert_allclose(np.abs(c.nz), np.abs(c.nz[0]), atol=1e-9)
        # and that axis is the scene normal's (A, nz) pair
        n = gt.values[30, 40]
        a_gt = n[0] * math.cos(c.phi) + n[1] * math.sin(c.phi)
        assert abs(abs(a_gt) - abs(c.a[0])) < 1e-9
        assert abs(abs(n[2]) - abs(c.nz[0])) < 1e-9

    def test_zero_dz_neighbor_gives_vertical_axis(self):
        # the neighbor above shares the pixel's depth while the central
        # v-gradient is nonzero: dz = 0, third component nonzero, so the
        # homogeneous form yields the axis (0, 0, +-1) without dividing
        values = np.array([
            [3.8, 4.0, 4.2],
            [3.9, 4.0, 4.1],
            [4.0, 4.4, 4.8],
        ])
        depth, grads, k = pixel_setup(values)
        c = candidates_at((1, 1), depth, grads, k,
                          Neighborhood(((0, -1),)))  # neighbor straight up
        assert c.count == 1
        assert abs(c.a[0]) < 1e-12
        assert abs(abs(c.nz[0]) - 1.0) < 1e-12

    def test_invalid_pixel_rejected(self):
        values = np.full((5, 5), 2.0)
        mask = np.ones((5, 5), bool)
        mask[2, 2] = False
        depth, grads, k = pixel_setup(values, valid=mask)
        with pytest.raises(ValueError):
            candidates_at((2, 2), depth, grads, k)

    def test_no_valid_neighbor_rejected(self, intrinsics):
        scene = plane_from_view(math.radians(30), 0.0, 5.0)
        depth = render_depth(scene, intrinsics)
        mask = depth.valid.copy()
        mask[29:32, 39] = False
        mask[29:32, 41] = False
        mask[29, 40] = False
        mask[31, 40] = False
        lonely = DepthImage(depth.values, mask)
        grads = compute_gradients(to_inverse_depth(depth))  # grads from full image
        with pytest.raises(ValueError):
            candidates_at((40, 30), lonely, grads, intrinsics)

    def test_unit_invariant(self, intrinsics):
        scene = plane_from_view(math.radians(25), 2.0, 4.0)
        depth = render_depth(scene, intrinsics)
        grads = compute_gradients(to_inverse_depth(depth))
        rng = np.random.default_rng(8)
        for _ in range(50):
            u = int(rng.integers(2, intrinsics.width - 2))
            v = int(rng.integers(2, intrinsics.height - 2))
            c = candidates_at((u, v), depth, grads, intrinsics)
            np.testing.assert_allclose(c.a**2 + c.nz**2, 1.0, atol=1e-9)


class TestHomogeneousEquivalence:
    def test_matches_division_form_oracle(self, intrinsics):
        # homogeneous candidates must be scalar multiples of the
        # explicit-division form whenever dz != 0: cross products vanish
        scene = plane_from_view(math.radians(35), 1.3, 6.0)
        depth = render_depth(scene, intrinsics)
        noisy = DepthImage(
            depth.values + np.random.default_rng(9).normal(0, 0.01, depth.shape),
            depth.valid,
        )
        grads = compute_gradients(to_inverse_depth(noisy))
        rng = np.random.default_rng(10)
        checked = 0
        for _ in range(50):
            u = int(rng.integers(2, intrinsics.width - 2))
            v = int(rng.integers(2, intrinsics.height - 2))
            if not (noisy.valid[v, u] and grads.valid[v, u]):
                continue
            c = candidates_at((u, v), noisy, grads, intrinsics)
            vecs, raw = division_candidates_at((u, v), noisy, grads, intrinsics)
            if c.frontoparallel or len(vecs) != c.count:
                continue  # some neighbor hit the dz guard; pairing differs
            phi = c.phi
            for (a, nz), dv in zip(zip(c.a, c.nz), vecs):
                full = np.array([a * math.cos(phi), a * math.sin(phi), nz])
                cross = np.linalg.norm(np.cross(full, dv))
                assert cross < 1e-9
                checked += 1
        assert checked > 50

    def test_dz_sign_flip_flips_candidate_globally(self, intrinsics):
        # on a monotonic plane the neighbors on opposite sides contribute
        # opposite-sign dz; their homogeneous candidates are exact global
        # flips of each other -- the same axis
        scene = plane_from_view(math.radians(40), 0.0, 5.0)
        depth = render_depth(scene, intrinsics)
        grads = compute_gradients(to_inverse_depth(depth))
        c = candidates_at((40, 30), depth, grads, intrinsics,
                          Neighborhood(((1, 0), (-1, 0))))
        assert c.count == 2
        assert abs(c.a[0] + c.a[1]) < 1e-9
        assert abs(c.nz[0] + c.nz[1]) < 1e-9
        # and both agree with the scene normal's axis
        gt = ground_truth_normals(scene, intrinsics).values[30, 40]
        a_gt = gt[0] * math.cos(c.phi) + gt[1] * math.sin(c.phi)
        assert min(abs(c.a[0] - a_gt), abs(c.a[0] + a_gt)) < 1e-9
