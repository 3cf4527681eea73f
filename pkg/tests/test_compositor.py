import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from motionseed.compositor import (AffineTransform, PlacementSample, apply_affine, composite, extract_object,
                                   make_target_frame, mask_centroid, round_half_away, sample_placements)
from motionseed.errors import EmptyMask, NoValidPlacement, OutOfBounds

RED, BLUE = (255, 0, 0), (0, 0, 255)


def image(h, w, fill=0):
    return np.full((h, w, 3), fill, dtype=np.uint8)


def noise_image(rng, h, w):
    return rng.integers(0, 256, (h, w, 3), dtype=np.uint8)


def rect_mask(h, w, y0, x0, rh, rw):
    m = np.zeros((h, w), bool)
    m[y0:y0 + rh, x0:x0 + rw] = True
    return m


class TestRounding:
    def test_ties_away_from_zero(self):
        np.testing.assert_array_equal(round_half_away(np.array([0.5, 1.5, -0.5, -1.5, 2.4, -2.6])),
                                      [1, 2, -1, -2, 2, -3])


class TestTransform:
    def test_rotation_normalised(self):
        assert AffineTransform(rotation_deg=270).rotation_deg == -90
        assert AffineTransform(rotation_deg=-180).rotation_deg == 180
        assert AffineTransform(rotation_deg=540).rotation_deg == 180

    @pytest.mark.parametrize("scale", [0, -1, float("inf")])
    def test_scale_positive(self, scale):
        with pytest.raises(ValueError):
            AffineTransform(scale=scale)

    def test_pivot_is_fixed(self):
        tf = AffineTransform(0, 0, 33, 1.7, (4.0, 9.0))
        M = tf.forward_matrix()
        np.testing.assert_allclose(M @ [4.0, 9.0, 1.0], [4.0, 9.0], atol=1e-12)


class TestExtract:
    def test_top_left_block(self):
        m = rect_mask(4, 4, 0, 0, 2, 2)
        obj = extract_object(image(4, 4, 9), m)
        assert obj.rgba.shape == (2, 2, 4)
        assert obj.centroid == (0.5, 0.5)
        assert (obj.rgba[..., 3] == 255).all()

    def test_full_mask(self, rng):
        img = noise_image(rng, 5, 6)
        obj = extract_object(img, np.ones((5, 6), bool))
        np.testing.assert_array_equal(obj.rgba[..., :3], img)
        assert (obj.rgba[..., 3] == 255).all()
        assert obj.bbox == (0, 0, 6, 5)

    def test_l_shape(self):
        m = np.zeros((3, 3), bool)
        m[0, 0] = m[0, 1] = m[1, 0] = True
        obj = extract_object(image(3, 3, 1), m)
        assert obj.centroid == pytest.approx((1 / 3, 1 / 3))
        assert obj.bbox[2:] == (2, 2)
        assert obj.rgba[1, 1, 3] == 0 and not obj.rgba[1, 1, :3].any()

    def test_empty(self):
        with pytest.raises(EmptyMask):
            extract_object(image(3, 3), np.zeros((3, 3), bool))


class TestApplyAffine:
    def test_identity(self, rng, kernels):
        img = noise_image(rng, 10, 10)
        m = rect_mask(10, 10, 2, 3, 4, 5)
        obj = extract_object(img, m)
        placed = apply_affine(obj, AffineTransform(), kernels)
        np.testing.assert_array_equal(placed.rgba, obj.rgba)
        np.testing.assert_array_equal(placed.mask, obj.mask)
        assert placed.origin == obj.origin

    def test_quarter_turn_puts_red_below_blue(self, kernels):
        img = image(5, 5)
        img[2, 2] = RED
        img[2, 3] = BLUE
        obj = extract_object(img, rect_mask(5, 5, 2, 2, 1, 2))
        placed = apply_affine(obj, AffineTransform(rotation_deg=90), kernels)
        assert placed.mask.shape == (2, 1)
        assert placed.mask.all()
        assert tuple(placed.rgba[0, 0, :3]) == BLUE
        assert tuple(placed.rgba[1, 0, :3]) == RED

    @pytest.mark.parametrize("w,h", [(4, 4), (5, 3), (7, 6)])
    def test_scale_two(self, w, h, kernels):
        img = image(20, 20, 100)
        m = rect_mask(20, 20, 8, 8, h, w)
        placed = apply_affine(extract_object(img, m), AffineTransform(scale=2.0), kernels)
        ph, pw = placed.mask.shape
        assert pw in (2 * w - 1, 2 * w, 2 * w + 1)
        assert ph in (2 * h - 1, 2 * h, 2 * h + 1)
        assert abs(placed.mask.sum() - 4 * w * h) <= 0.05 * 4 * w * h

    def test_backends_agree(self, rng):
        from motionseed import _backend

        img = noise_image(rng, 30, 30)
        m = np.zeros((30, 30), bool)
        yy, xx = np.mgrid[:30, :30]
        m[(yy - 14) ** 2 + (xx - 15) ** 2 <= 36] = True
        obj = extract_object(img, m)
        tf = AffineTransform(2.3, -1.2, 23.0, 1.3)
        outs = [apply_affine(obj, tf, _backend.get(n)) for n in _backend.available()]
        for o in outs[1:]:
            np.testing.assert_array_equal(o.rgba, outs[0].rgba)
            assert o.origin == outs[0].origin

    def test_translation_is_integer_shift(self, rng):
        img = noise_image(rng, 12, 12)
        obj = extract_object(img, rect_mask(12, 12, 3, 3, 3, 4))
        placed = apply_affine(obj, AffineTransform(2.5, -1.5))
        assert placed.origin == (3 + 3, 3 - 2)
        np.testing.assert_array_equal(placed.rgba, obj.rgba)


class TestComposite:
    def test_round_trip(self, rng):
        img = noise_image(rng, 16, 16)
        m = rect_mask(16, 16, 4, 5, 6, 3)
        placed = apply_affine(extract_object(img, m), AffineTransform())
        out, mask = composite(img, placed)
        assert out.tobytes() == img.tobytes()
        np.testing.assert_array_equal(mask, m)

    def test_gray_background_untouched(self, rng):
        img = noise_image(rng, 16, 16)
        m = rect_mask(16, 16, 4, 5, 6, 3)
        gray = image(16, 16, 128)
        out, mask = composite(gray, apply_affine(extract_object(img, m), AffineTransform(3, 2)))
        assert (out[~mask] == 128).all()
        np.testing.assert_array_equal(out[mask], img[m])

    def test_red_block(self):
        src = image(4, 4)
        src[:2, :2] = RED
        obj = extract_object(src, rect_mask(4, 4, 0, 0, 2, 2))
        out, mask = composite(image(4, 4), apply_affine(obj, AffineTransform()), top_left=(1, 1))
        red = np.all(out == RED, axis=2)
        assert sorted(zip(*np.nonzero(red))) == [(1, 1), (1, 2), (2, 1), (2, 2)]
        np.testing.assert_array_equal(red, mask)

    def test_out_of_bounds(self):
        obj = extract_object(image(4, 4), rect_mask(4, 4, 0, 0, 2, 2))
        with pytest.raises(OutOfBounds):
            composite(image(4, 4), apply_affine(obj, AffineTransform()), top_left=(3, 0))

    def test_rgba_background(self, rng):
        bg = np.zeros((6, 6, 4), np.uint8)
        obj = extract_object(noise_image(rng, 6, 6), rect_mask(6, 6, 1, 1, 2, 2))
        out, mask = composite(bg, apply_affine(obj, AffineTransform()))
        assert (out[mask, 3] == 255).all() and (out[~mask] == 0).all()


class TestTargetFrame:
    def test_identity(self, rng):
        img = noise_image(rng, 20, 20)
        m = rect_mask(20, 20, 5, 6, 7, 8)
        out, mask = make_target_frame(img, m, img, AffineTransform())
        assert out.tobytes() == img.tobytes()
        np.testing.assert_array_equal(mask, m)

    @pytest.mark.parametrize("dx,dy", [(3, 4), (-2.5, 1.5), (0.4, -6.6)])
    def test_translation(self, rng, dx, dy):
        img = noise_image(rng, 24, 24)
        m = rect_mask(24, 24, 8, 8, 5, 6)
        m[9, 14] = False
        _, mask = make_target_frame(img, m, img, AffineTransform(dx, dy))
        sx, sy = int(round_half_away(dx)), int(round_half_away(dy))
        np.testing.assert_array_equal(mask, np.roll(np.roll(m, sy, 0), sx, 1))
        cx, cy = mask_centroid(m)
        nx, ny = mask_centroid(mask)
        assert abs(nx - cx - dx) <= 0.51 and abs(ny - cy - dy) <= 0.51

    def test_rotate_and_scale_square(self, kernels):
        img = image(64, 64, 50)
        m = rect_mask(64, 64, 20, 20, 12, 12)
        img[m] = (200, 10, 10)
        dx, dy = 5.0, -3.0
        _, mask = make_target_frame(img, m, img, AffineTransform(dx, dy, 10.0, 1.1))
        assert abs(mask.sum() - 1.21 * m.sum()) <= 0.05 * 1.21 * m.sum()
        cx, cy = mask_centroid(m)
        nx, ny = mask_centroid(mask)
        assert math.hypot(nx - cx - dx, ny - cy - dy) <= 1.0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(-10, 10), st.integers(-10, 10))
    def test_integer_translation_conserves_area(self, seed, dx, dy):
        r = np.random.default_rng(seed)
        m = r.random((20, 20)) < 0.3
        m[:, :10] = m[:10, :] = False
        m[:, -10:] = m[-10:, :] = False
        m[14, 14] = True
        img = noise_image(r, 40, 40)
        big = np.zeros((40, 40), bool)
        big[10:30, 10:30] = m
        _, mask = make_target_frame(img, big, img, AffineTransform(dx, dy))
        assert mask.sum() == big.sum()


class TestPlacements:
    def test_whole_frame_identity_ranges(self):
        obj = rect_mask(32, 32, 10, 10, 4, 4)
        (s,) = sample_placements(np.ones((32, 32), bool), obj, (1, 1), (0, 0), grid_step=1, count=1)
        assert s.valid and s.transform.scale == 1.0 and s.transform.rotation_deg == 0.0

    def test_corner_pixel_rejects_large_object(self):
        pm = np.zeros((32, 32), bool)
        pm[0, 0] = True
        with pytest.raises(NoValidPlacement) as info:
            sample_placements(pm, rect_mask(32, 32, 8, 8, 16, 16), grid_step=1, count=3)
        assert info.value.rejected
        assert {r.rejection_reason for r in info.value.rejected} == {"out_of_frame"}

    def test_deterministic(self):
        pm = rect_mask(64, 64, 24, 24, 16, 16)
        obj = rect_mask(64, 64, 4, 4, 8, 8)
        a = sample_placements(pm, obj, (0.8, 1.2), (-15, 15), grid_step=4, count=5, rng_seed=42)
        b = sample_placements(pm, obj, (0.8, 1.2), (-15, 15), grid_step=4, count=5, rng_seed=42)
        assert a == b
        assert len(a) == 5 and all(s.valid for s in a)
        for s in a:
            assert 0.8 <= s.transform.scale <= 1.2 and -15 <= s.transform.rotation_deg <= 15
        c = sample_placements(pm, obj, (0.8, 1.2), (-15, 15), grid_step=4, count=5, rng_seed=43)
        assert c != a

    def test_valid_samples_land_inside(self):
        pm = rect_mask(48, 48, 16, 16, 16, 16)
        obj = rect_mask(48, 48, 2, 2, 6, 6)
        img = image(48, 48, 30)
        for s in sample_placements(pm, obj, grid_step=2, count=10, rng_seed=1):
            _, mask = make_target_frame(img, obj, img, s.transform)
            cx, cy = mask_centroid(mask)
            assert pm[int(round_half_away(cy)), int(round_half_away(cx))]

    def test_rejections_reported_when_short(self):
        pm = rect_mask(32, 32, 0, 0, 32, 12)
        obj = rect_mask(32, 32, 10, 10, 6, 6)
        out = sample_placements(pm, obj, (1, 1), (0, 0), grid_step=4, count=50)
        valid = [s for s in out if s.valid]
        assert 0 < len(valid) < 50
        assert all(not s.valid and s.rejection_reason for s in out[len(valid):])

    def test_sample_invariant(self):
        with pytest.raises(ValueError):
            PlacementSample(AffineTransform(), True, "out_of_frame")

    def test_bad_ranges(self):
        with pytest.raises(ValueError):
            sample_placements(np.ones((8, 8), bool), rect_mask(8, 8, 0, 0, 2, 2), (1.2, 0.8))
