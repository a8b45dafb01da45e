import numpy as np
import pytest

from chromalign.errors import ValidationError
from chromalign.morphology import (
    h_maxima_regions,
    reconstruct_by_dilation,
    regional_maxima,
)

from oracles import (
    naive_h_maxima_regions,
    naive_reconstruct_by_dilation,
    naive_regional_maxima,
)


def gaussian_bump(shape=(32, 32), center=(16, 16), amp=100.0, width=3.0):
    rr, cc = np.mgrid[0 : shape[0], 0 : shape[1]]
    return amp * np.exp(
        -((rr - center[0]) ** 2 + (cc - center[1]) ** 2) / (2 * width**2)
    )


def test_reconstruct_marker_equals_mask_is_fixed_point():
    rng = np.random.default_rng(0)
    mask = rng.random((10, 12)) * 50
    out = reconstruct_by_dilation(mask, mask)
    np.testing.assert_array_equal(out, mask)


def test_reconstruct_uniformly_offset_marker_is_stable():
    # A constant-offset marker under a constant mask is already a fixed point
    # of geodesic dilation (dilating a constant changes nothing).
    mask = np.full((8, 8), 40.0)
    out = reconstruct_by_dilation(mask - 7.0, mask)
    np.testing.assert_array_equal(out, mask - 7.0)
    np.testing.assert_array_equal(
        out, naive_reconstruct_by_dilation(mask - 7.0, mask)
    )


def test_reconstruct_floods_flat_region_from_touch_point():
    # Once the marker reaches the mask anywhere on a flat region, geodesic
    # dilation floods the whole region up to the mask level.
    mask = np.full((8, 8), 40.0)
    marker = mask - 7.0
    marker[3, 3] = 40.0
    out = reconstruct_by_dilation(marker, mask)
    np.testing.assert_array_equal(out, mask)


def test_reconstruct_shape_mismatch():
    with pytest.raises(ValidationError):
        reconstruct_by_dilation(np.zeros((3, 3)), np.zeros((3, 4)))


def test_reconstruct_marker_above_mask_rejected():
    mask = np.zeros((3, 3))
    marker = mask.copy()
    marker[1, 1] = 1.0
    with pytest.raises(ValidationError):
        reconstruct_by_dilation(marker, mask)


def test_reconstruct_bounds():
    rng = np.random.default_rng(1)
    mask = rng.random((16, 16)) * 100
    marker = mask - rng.random((16, 16)) * 30
    out = reconstruct_by_dilation(marker, mask)
    assert (out >= marker).all()
    assert (out <= mask).all()


def test_reconstruct_matches_oracle_on_random_grids():
    rng = np.random.default_rng(2)
    for trial in range(60):
        conn = 4 if trial % 2 else 8
        mask = rng.integers(0, 256, size=(16, 16)).astype(float)
        marker = mask - float(rng.integers(1, 120))
        got = reconstruct_by_dilation(marker, mask, conn)
        want = naive_reconstruct_by_dilation(marker, mask, conn)
        np.testing.assert_array_equal(got, want)


def test_regional_maxima_constant_image_empty():
    assert not regional_maxima(np.full((6, 6), 3.0)).any()


def test_regional_maxima_matches_oracle():
    rng = np.random.default_rng(3)
    for trial in range(40):
        conn = 4 if trial % 2 else 8
        img = rng.integers(0, 40, size=(14, 14)).astype(float)
        got = regional_maxima(img, conn)
        want = naive_regional_maxima(img, conn)
        np.testing.assert_array_equal(got, want)


def test_h_maxima_single_bump_detected():
    img = gaussian_bump(amp=100.0)
    regions = h_maxima_regions(img, 30.0)
    assert regions.any()
    # all marked pixels near the apex
    rr, cc = np.nonzero(regions)
    assert np.abs(rr - 16).max() <= 8 and np.abs(cc - 16).max() <= 8


def test_h_maxima_suppressed_when_h_exceeds_amplitude():
    img = gaussian_bump(amp=50.0)
    assert not h_maxima_regions(img, 80.0).any()


def test_h_maxima_matches_oracle_random_32x32():
    rng = np.random.default_rng(4)
    for trial in range(20):
        conn = 4 if trial % 2 else 8
        img = rng.integers(0, 256, size=(32, 32)).astype(float)
        h = float(rng.integers(1, 100))
        got = h_maxima_regions(img, h, conn)
        want = naive_h_maxima_regions(img, h, conn)
        np.testing.assert_array_equal(got, want)


def test_h_maxima_monotone_in_h():
    # Growing h never creates new peaks: the region count is non-increasing
    # and every surviving region fully contains one of the smaller-h regions
    # (the surviving plateau widens, so pixel sets are not nested the other
    # way around).
    from scipy import ndimage

    rng = np.random.default_rng(5)
    eight = np.ones((3, 3))
    for _ in range(10):
        img = rng.integers(0, 256, size=(24, 24)).astype(float)
        prev_count = None
        prev_lab = None
        prev_n = 0
        for h in (10.0, 25.0, 45.0, 70.0, 110.0):
            regions = h_maxima_regions(img, h)
            lab, count = ndimage.label(regions, structure=eight)
            if prev_count is not None:
                assert count <= prev_count
                for k in range(1, count + 1):
                    comp = lab == k
                    contained = any(
                        ((prev_lab == kp) & ~comp).sum() == 0
                        for kp in range(1, prev_n + 1)
                    )
                    assert contained
            prev_count = count
            prev_lab = lab
            prev_n = count


def test_h_maxima_offset_invariant():
    rng = np.random.default_rng(6)
    img = rng.integers(0, 200, size=(20, 20)).astype(float)
    a = h_maxima_regions(img, 35.0)
    b = h_maxima_regions(img + 1234.5, 35.0)
    np.testing.assert_array_equal(a, b)


def test_h_maxima_rejects_bad_h():
    img = gaussian_bump()
    with pytest.raises(ValidationError):
        h_maxima_regions(img, 0.0)
    with pytest.raises(ValidationError):
        h_maxima_regions(img, -3.0)
