"""Channel encoders: plain UV, inverse-projected XY, PE, normals."""

import math

import numpy as np
import pytest

from uvpose.errors import BadPEConfig, IntrinsicsMismatch, MissingPlane
from uvpose.geoimage import (
    GeoImage,
    PEConfig,
    blank_image,
    builtin_grid,
    encode_normals,
    encode_pe,
    encode_plain_uv,
    encode_xy,
)
from uvpose.geometry import CameraIntrinsics, backproject


def _k(w=8, h=6, fx=500.0, fy=500.0, cx=None, cy=None):
    return CameraIntrinsics(fx, fy, cx if cx is not None else (w - 1) / 2,
                            cy if cy is not None else (h - 1) / 2, w, h)


class TestGeoImage:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            GeoImage(d=np.zeros((4, 4)), u=np.zeros((3, 4)))

    def test_valid_follows_depth(self):
        d = np.zeros((2, 3))
        d[1, 2] = 0.8
        img = GeoImage(d=d)
        assert img.valid.sum() == 1
        assert img.valid[1, 2]

    def test_planes_are_frozen(self):
        img = blank_image(2, 2)
        with pytest.raises(ValueError):
            img.d[0, 0] = 1.0

    def test_require_missing(self):
        with pytest.raises(MissingPlane):
            blank_image(2, 2).require("u")


class TestPlainUV:
    def test_definition_4x4(self):
        img = encode_plain_uv(blank_image(4, 4))
        # U(col=2, row=1) = 2, V(col=2, row=1) = 1; planes index [row, col]
        assert img.u[1, 2] == 2
        assert img.v[1, 2] == 1

    def test_single_pixel(self):
        img = encode_plain_uv(blank_image(1, 1))
        assert img.u[0, 0] == 0
        assert img.v[0, 0] == 0

    def test_u_plane_sum_closed_form(self):
        # Oracle: brute-force double loop, equal to H*W*(W-1)/2.
        h, w = 5, 7
        img = encode_plain_uv(blank_image(h, w))
        brute = sum(c for r in range(h) for c in range(w))
        assert img.u.sum() == brute == h * w * (w - 1) / 2

    def test_other_planes_untouched(self):
        d = np.full((3, 3), 2.0)
        img = encode_plain_uv(GeoImage(d=d))
        np.testing.assert_array_equal(img.d, d)
        assert img.gt_abc is None


class TestEncodeXY:
    def test_principal_point_is_origin(self):
        K = _k(8, 6, cx=3.0, cy=2.0)
        img = blank_image(6, 8)
        d = np.array(img.d)
        d[2, 3] = 1.7
        img = encode_xy(encode_plain_uv(GeoImage(d=d)), K)
        assert img.x[2, 3] == 0.0
        assert img.y[2, 3] == 0.0

    def test_matches_backproject_example(self):
        K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
        d = np.zeros((480, 640))
        d[240, 420] = 1.0
        img = encode_xy(encode_plain_uv(GeoImage(d=d)), K)
        assert img.x[240, 420] == pytest.approx(0.2, abs=1e-15)
        assert img.y[240, 420] == 0.0

    def test_invalid_pixels_zeroed(self):
        K = _k(4, 4)
        img = encode_xy(encode_plain_uv(blank_image(4, 4)), K)
        np.testing.assert_array_equal(img.x, 0.0)
        np.testing.assert_array_equal(img.y, 0.0)

    def test_extent_mismatch(self):
        with pytest.raises(IntrinsicsMismatch):
            encode_xy(encode_plain_uv(blank_image(4, 4)), _k(8, 6))

    def test_requires_uv(self):
        with pytest.raises(MissingPlane):
            encode_xy(blank_image(4, 4), _k(4, 4))

    def test_agrees_with_scalar_backproject(self):
        rng = np.random.default_rng(31)
        K = _k(16, 12, fx=300.0, fy=280.0)
        d = rng.uniform(0.5, 3.0, size=(12, 16))
        d[rng.random((12, 16)) < 0.3] = 0.0
        img = encode_xy(encode_plain_uv(GeoImage(d=d)), K)
        for r in range(12):
            for c in range(16):
                if d[r, c] > 0:
                    cp = backproject(K, (c, r, d[r, c]))
                    assert abs(img.x[r, c] - cp.x) < 1e-12
                    assert abs(img.y[r, c] - cp.y) < 1e-12

    def test_fresh_encode_depth_identity(self):
        # backproject(K, (U, V, D)) at every valid pixel carries depth D exactly
        rng = np.random.default_rng(37)
        K = _k(10, 10)
        d = rng.uniform(0.2, 2.0, size=(10, 10))
        img = encode_xy(encode_plain_uv(GeoImage(d=d)), K)
        np.testing.assert_array_equal(img.d, d)


class TestEncodePE:
    def test_bad_channel_count(self):
        with pytest.raises(BadPEConfig):
            PEConfig(6)
        with pytest.raises(BadPEConfig):
            PEConfig(0)

    def test_requires_uv(self):
        with pytest.raises(MissingPlane):
            encode_pe(blank_image(2, 2), PEConfig(8))

    def test_u_zero_column(self):
        img = encode_pe(encode_plain_uv(blank_image(4, 4)), PEConfig(8))
        # at u=0 all u-driven sin planes are 0 and cos planes are 1
        for i in range(2):
            np.testing.assert_array_equal(img.pe[2 * i][:, 0], 0.0)
            np.testing.assert_array_equal(img.pe[2 * i + 1][:, 0], 1.0)
        # at v=0 the v-driven half behaves the same
        for j in range(2):
            np.testing.assert_array_equal(img.pe[4 + 2 * j][0, :], 0.0)
            np.testing.assert_array_equal(img.pe[4 + 2 * j + 1][0, :], 1.0)

    def test_direct_evaluation_d8(self):
        img = encode_pe(encode_plain_uv(blank_image(4, 4)), PEConfig(8))
        # D=8, i=0: PE[0] = sin(u), PE[1] = cos(u) at u=1
        assert img.pe[0][0, 1] == pytest.approx(math.sin(1.0), abs=1e-15)
        assert img.pe[1][0, 1] == pytest.approx(math.cos(1.0), abs=1e-15)
        # i=1 wavelength: base^(4*1/8) = 100
        assert img.pe[2][0, 3] == pytest.approx(math.sin(3.0 / 100.0), abs=1e-15)
        # v half: PE[D/2 + 2j] at row 2
        assert img.pe[4][2, 0] == pytest.approx(math.sin(2.0), abs=1e-15)
        assert img.pe[6][2, 0] == pytest.approx(math.sin(2.0 / 100.0), abs=1e-15)

    @pytest.mark.parametrize("d_pe", [4, 8, 16])
    def test_pythagorean_identity(self, d_pe):
        img = encode_pe(encode_plain_uv(blank_image(9, 13)), PEConfig(d_pe))
        for k in range(0, d_pe, 2):
            s2c2 = img.pe[k] ** 2 + img.pe[k + 1] ** 2
            np.testing.assert_allclose(s2c2, 1.0, atol=1e-12)

    def test_uses_uv_planes_not_builtin(self):
        # shift the U plane; PE must follow the channel values
        base = encode_plain_uv(blank_image(3, 3))
        shifted = GeoImage(d=base.d, u=np.asarray(base.u) + 10.0, v=base.v)
        img = encode_pe(shifted, PEConfig(4))
        assert img.pe[0][0, 0] == pytest.approx(math.sin(10.0), abs=1e-15)


class TestEncodeNormals:
    def test_frontoparallel_plane(self):
        K = _k(8, 8)
        img = encode_normals(GeoImage(d=np.full((8, 8), 1.5)), K)
        interior = img.nrm[:, 1:-1, 1:-1]
        np.testing.assert_allclose(interior[0], 0.0, atol=1e-12)
        np.testing.assert_allclose(interior[1], 0.0, atol=1e-12)
        np.testing.assert_allclose(interior[2], -1.0, atol=1e-12)

    def test_all_invalid_gives_zero(self):
        K = _k(6, 6)
        img = encode_normals(blank_image(6, 6), K)
        np.testing.assert_array_equal(img.nrm, 0.0)

    def test_border_and_holes_zeroed(self):
        K = _k(8, 8)
        d = np.full((8, 8), 1.0)
        d[4, 4] = 0.0
        img = encode_normals(GeoImage(d=d), K)
        # border pixels have no full neighborhood
        np.testing.assert_array_equal(img.nrm[:, 0, :], 0.0)
        np.testing.assert_array_equal(img.nrm[:, :, -1], 0.0)
        # the hole and its 4-neighbors are zeroed
        for r, c in [(4, 4), (3, 4), (5, 4), (4, 3), (4, 5)]:
            np.testing.assert_array_equal(img.nrm[:, r, c], 0.0)
        # a diagonal neighbor still gets a normal
        assert np.linalg.norm(img.nrm[:, 3, 3]) == pytest.approx(1.0, abs=1e-9)

    def test_unit_norm_on_random_smooth_surface(self):
        rng = np.random.default_rng(41)
        K = _k(16, 16, fx=400.0, fy=400.0)
        g = rng.uniform(0.8, 1.2, size=(4, 4))
        d = np.kron(g, np.ones((4, 4)))  # piecewise-constant, smooth enough
        img = encode_normals(GeoImage(d=d), K)
        norms = np.linalg.norm(img.nrm, axis=0)
        inner = norms[1:-1, 1:-1]
        assert np.all((np.abs(inner - 1.0) < 1e-9) | (inner == 0.0))

    def test_tilted_plane_matches_analytic_normal(self):
        # Depth of the plane z = d0 + k*x seen through the pinhole:
        # d(u) = d0 / (1 - k*(u - cx)/fx).  Analytic normal is
        # (k, 0, -1)/sqrt(1 + k^2), oriented toward the camera.
        w = h = 32
        K = _k(w, h, fx=600.0, fy=600.0)
        d0, k = 1.0, 0.3
        u, _ = builtin_grid(h, w)
        d = d0 / (1.0 - k * (u - K.cx) / K.fx)
        img = encode_normals(GeoImage(d=d), K)
        expect = np.array([k, 0.0, -1.0]) / math.hypot(k, 1.0)
        for r in range(1, h - 1):
            for c in range(1, w - 1):
                np.testing.assert_allclose(img.nrm[:, r, c], expect, atol=1e-3)
