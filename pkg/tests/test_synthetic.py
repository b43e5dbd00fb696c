import math

import numpy as np
import pytest

from normalis import (
    CameraIntrinsics,
    DihedralScene,
    NoiseSpec,
    PlaneScene,
    SphereScene,
    add_noise,
    ground_truth_normals,
    plane_from_view,
    render_depth,
    surface_depth_at,
)


class TestPlaneScene:
    def test_normalizes_and_orients(self):
        scene = PlaneScene((0, 0, 2.0), -10.0)
        np.testing.assert_allclose(scene.normal, (0, 0, -1))
        assert scene.offset == pytest.approx(5.0)

    def test_through_camera_center_rejected(self):
        with pytest.raises(ValueError):
            PlaneScene((0, 0, 1.0), 0.0)

    def test_frontoparallel_render(self, intrinsics):
        depth = render_depth(plane_from_view(0.0, 0.0, 5.0), intrinsics)
        assert depth.valid.all()
        np.testing.assert_allclose(depth.values, 5.0, rtol=1e-14)

    def test_inverse_depth_affine_regression_oracle(self, intrinsics):
        # planes render to exactly affine inverse depth: the least-squares
        # residual of 1/z against (1, u, v) vanishes to rounding
        scene = plane_from_view(math.radians(40), 1.0, 5.0)
        depth = render_depth(scene, intrinsics)
        v, u = np.nonzero(depth.valid)
        inv = 1.0 / depth.values[depth.valid]
        design = np.column_stack([np.ones_like(u), u, v]).astype(np.float64)
        coeffs, *_ = np.linalg.lstsq(design, inv, rcond=None)
        residual = np.max(np.abs(design @ coeffs - inv))
        assert residual < 1e-12

    def test_partial_visibility_steep_plane(self):
        k = CameraIntrinsics(fx=100.0, fy=100.0, u0=80, v0=60, width=160, height=120)
        scene = plane_from_view(math.radians(74), 0.0, 5.0)
        depth = render_depth(scene, k)
        assert 0 < depth.valid_count() < depth.valid.size
        assert (depth.values[depth.valid] > 0).all()

    def test_invisible_scene_rejected(self, intrinsics):
        # plane whose front side faces away from every pixel
        scene = PlaneScene((0, 0, -1.0), -20.0)
        assert scene.normal == (0.0, 0.0, 1.0)  # oriented away: behind camera
        with pytest.raises(ValueError):
            render_depth(scene, intrinsics)


class TestSphereScene:
    def test_on_axis_center_depth(self, intrinsics):
        depth = render_depth(SphereScene((0, 0, 10.0), 2.0), intrinsics)
        assert depth.values[30, 40] == pytest.approx(8.0, abs=1e-12)

    def test_miss_pixels_invalid(self, intrinsics):
        depth = render_depth(SphereScene((0, 0, 10.0), 0.5), intrinsics)
        assert depth.valid[30, 40]
        assert not depth.valid[0, 0]

    def test_behind_camera_rejected(self):
        with pytest.raises(ValueError):
            SphereScene((0, 0, 1.0), 2.0)

    def test_center_pixel_normal(self, intrinsics):
        gt = ground_truth_normals(SphereScene((0, 0, 10.0), 2.0), intrinsics)
        np.testing.assert_allclose(gt.values[30, 40], [0, 0, -1], atol=1e-12)


class TestDihedralScene:
    def make_crease(self, intrinsics):
        return DihedralScene.crease(
            intrinsics, split_u=40.0, ridge_depth=5.0,
            opening_first=math.radians(30), opening_second=math.radians(-25),
            ridge_tilt=0.1,
        )

    def test_halves_carry_their_plane_normals(self, intrinsics):
        scene = self.make_crease(intrinsics)
        gt = ground_truth_normals(scene, intrinsics)
        assert np.allclose(gt.values[10, 10], scene.first.normal)
        assert np.allclose(gt.values[10, 70], scene.second.normal)
        assert not np.allclose(scene.first.normal, scene.second.normal)

    def test_depth_continuous_across_ridge(self, intrinsics):
        # both planes contain the 3D ridge line, so depth sampled on the
        # split line agrees between the halves to rounding
        scene = self.make_crease(intrinsics)
        v = np.linspace(5.0, 55.0, 11)
        za = surface_depth_at(scene.first, intrinsics, np.full_like(v, 40.0), v)
        zb = surface_depth_at(scene.second, intrinsics, np.full_like(v, 40.0), v)
        np.testing.assert_allclose(za, zb, rtol=1e-10)

    def test_ridge_pixels_follow_split_rule(self, intrinsics):
        scene = self.make_crease(intrinsics)
        gt = ground_truth_normals(scene, intrinsics)
        assert np.allclose(gt.values[30, 39], scene.first.normal)
        assert np.allclose(gt.values[30, 40], scene.second.normal)


class TestRenderGroundTruthConsistency:
    @pytest.mark.parametrize("scene_factory", [
        lambda: plane_from_view(math.radians(35), 1.0, 5.0),
        lambda: SphereScene((0.3, -0.2, 8.0), 1.5),
    ])
    def test_normal_orthogonal_to_surface_tangents(self, scene_factory, intrinsics):
        # sub-pixel finite differences of back-projected surface points
        # give tangent directions; the analytic normal must be orthogonal
        scene = scene_factory()
        gt = ground_truth_normals(scene, intrinsics)
        rng = np.random.default_rng(21)
        eps = 1e-4
        if isinstance(scene, SphereScene):
            cx, cy, cz = scene.center
            pu = intrinsics.u0 + intrinsics.fx * cx / cz
            pv = intrinsics.v0 + intrinsics.fy * cy / cz
            span = 0.6 * intrinsics.fx * scene.radius / cz
            ubox = (pu - span, pu + span)
            vbox = (pv - span, pv + span)
        else:
            ubox = (5, intrinsics.width - 5)
            vbox = (5, intrinsics.height - 5)
        checked = 0
        for _ in range(200):
            u = rng.uniform(*ubox)
            v = rng.uniform(*vbox)
            zc = surface_depth_at(scene, intrinsics, u, v)
            if not np.isfinite(zc):
                continue
            def point(uu, vv):
                z = surface_depth_at(scene, intrinsics, uu, vv)
                return np.array([
                    (uu - intrinsics.u0) / intrinsics.fx * z,
                    (vv - intrinsics.v0) / intrinsics.fy * z,
                    z,
                ])
            tu = point(u + eps, v) - point(u - eps, v)
            tv = point(u, v + eps) - point(u, v - eps)
            if not (np.all(np.isfinite(tu)) and np.all(np.isfinite(tv))):
                continue
            n = gt.values[int(round(v)), int(round(u))]
            if not gt.valid[int(round(v)), int(round(u))]:
                continue
            # compare against the normal at the probe point, not the pixel
            # center: rebuild it for the sphere
            if isinstance(scene, SphereScene):
                q = point(u, v)
                n = (q - np.asarray(scene.center)) / scene.radius
            assert abs(n @ (tu / np.linalg.norm(tu))) < 1e-6
            assert abs(n @ (tv / np.linalg.norm(tv))) < 1e-6
            checked += 1
        assert checked > 100

    def test_gt_normals_unit_and_camera_facing(self, intrinsics):
        for scene in (plane_from_view(math.radians(50), 2.0, 5.0),
                      SphereScene((0.2, 0.1, 9.0), 2.0)):
            gt = ground_truth_normals(scene, intrinsics)
            norms = np.linalg.norm(gt.values[gt.valid], axis=-1)
            np.testing.assert_allclose(norms, 1.0, atol=1e-9)
            assert gt.convention_violations() == 0


class TestNoise:
    def test_zero_sigma_identity(self, intrinsics):
        depth = render_depth(plane_from_view(0.3, 0.0, 5.0), intrinsics)
        noisy = add_noise(depth, NoiseSpec(sigma=0.0, mode="absolute", seed=1))
        np.testing.assert_array_equal(noisy.values, depth.values)
        np.testing.assert_array_equal(noisy.valid, depth.valid)

    def test_same_seed_identical(self, intrinsics):
        depth = render_depth(plane_from_view(0.3, 0.0, 5.0), intrinsics)
        spec = NoiseSpec(sigma=0.01, mode="fraction", seed=42)
        a = add_noise(depth, spec)
        b = add_noise(depth, spec)
        np.testing.assert_array_equal(a.values, b.values)

    def test_different_seed_differs(self, intrinsics):
        depth = render_depth(plane_from_view(0.3, 0.0, 5.0), intrinsics)
        a = add_noise(depth, NoiseSpec(sigma=0.01, mode="fraction", seed=1))
        b = add_noise(depth, NoiseSpec(sigma=0.01, mode="fraction", seed=2))
        assert not np.array_equal(a.values, b.values)

    def test_fractional_sigma_statistics(self):
        k = CameraIntrinsics(fx=100.0, fy=100.0, u0=200, v0=125,
                             width=400, height=250)
        depth = render_depth(plane_from_view(0.0, 0.0, 8.0), k)
        noisy = add_noise(depth, NoiseSpec(sigma=0.01, mode="fraction", seed=3))
        rel = noisy.values[noisy.valid] / depth.values[noisy.valid] - 1.0
        assert abs(rel.std() - 0.01) / 0.01 < 0.05

    def test_nonpositive_after_noise_invalid(self):
        k = CameraIntrinsics(fx=10.0, fy=10.0, u0=8, v0=8, width=16, height=16)
        depth = render_depth(plane_from_view(0.0, 0.0, 0.001), k)
        noisy = add_noise(depth, NoiseSpec(sigma=0.01, mode="absolute", seed=4))
        assert noisy.valid_count() < depth.valid_count()
        assert (noisy.values[noisy.valid] > 0).all()

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec(sigma=-0.1, mode="absolute", seed=0)
        with pytest.raises(ValueError):
            NoiseSpec(sigma=0.1, mode="percent", seed=0)
