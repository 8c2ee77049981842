import math
from collections import deque

import numpy as np
import pytest

from meltpool import imageops


# ------------------------------------------------------------------ oracles


def bfs_flood_fill(image, seeds, tolerance):
    """Reference flood fill: 4-connected BFS from seeds, pixel admitted if
    its channel-space distance to the nearest seed color <= tolerance."""
    h, w = image.shape[:2]
    channels = image.reshape(h, w, -1)
    colors = [channels[r, c] for r, c in seeds]

    def in_range(r, c):
        return min(np.linalg.norm(channels[r, c] - col) for col in colors) <= tolerance

    out = np.zeros((h, w), bool)
    queue = deque()
    for r, c in seeds:
        if not out[r, c] and in_range(r, c):
            out[r, c] = True
            queue.append((r, c))
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and not out[rr, cc] and in_range(rr, cc):
                out[rr, cc] = True
                queue.append((rr, cc))
    return out


def union_find_components(mask):
    """Reference 8-connected component count and sizes."""
    h, w = mask.shape
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                parent[(r, c)] = (r, c)
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and mask[rr, cc]:
                        union((r, c), (rr, cc))
    roots = {}
    for key in parent:
        roots.setdefault(find(key), 0)
        roots[find(key)] += 1
    return sorted(roots.values(), reverse=True)


# ------------------------------------------------------------ gaussian blur


def test_blur_constant_field():
    field = np.full((20, 20), 3.7)
    assert np.allclose(imageops.gaussian_blur(field, 2.0), 3.7)


def test_blur_impulse_center_value():
    field = np.zeros((33, 33))
    field[16, 16] = 1.0
    out = imageops.gaussian_blur(field, 2.0)
    assert abs(out[16, 16] - 1.0 / (2 * math.pi * 4.0)) < 1e-3


def test_blur_preserves_sum_for_interior_impulse():
    field = np.zeros((41, 41))
    field[20, 20] = 1.0
    out = imageops.gaussian_blur(field, 3.0)
    assert abs(out.sum() - 1.0) < 1e-6


def test_blur_rejects_bad_sigma():
    with pytest.raises(ValueError):
        imageops.gaussian_blur(np.zeros((5, 5)), 0.0)


# ------------------------------------------------------------------- sobel


def test_sobel_constant_is_zero():
    assert np.allclose(imageops.sobel_magnitude(np.full((10, 10), 0.3)), 0.0)


def test_sobel_step_edge_magnitude():
    # Unit vertical step: hand-convolving the x kernel at a column adjacent
    # to the step sums the 1,2,1 weights = 4.
    field = np.zeros((9, 10))
    field[:, 5:] = 1.0
    out = imageops.sobel_magnitude(field)
    assert np.allclose(out[4, 4], 4.0)
    assert np.allclose(out[4, 5], 4.0)
    assert np.allclose(out[4, 2], 0.0)


def test_sobel_rotation_isotropy():
    rng = np.random.default_rng(0)
    field = rng.random((12, 12))
    rotated = np.rot90(field)
    assert np.allclose(np.rot90(imageops.sobel_magnitude(field)), imageops.sobel_magnitude(rotated))


def test_sobel_too_small():
    with pytest.raises(ValueError):
        imageops.sobel_magnitude(np.zeros((2, 5)))


# ----------------------------------------------------------------- energy


def test_energy_constant_image_is_one():
    img = np.full((16, 16), 0.5)
    assert np.allclose(imageops.inverse_gradient_energy(img, 100.0, 2.0), 1.0)


def test_energy_strong_edge_low_value():
    img = np.zeros((32, 32))
    img[:, 16:] = 1.0
    energy = imageops.inverse_gradient_energy(img, 1000.0, 1.0)
    assert energy[16, 16] < 0.2


def test_energy_range():
    rng = np.random.default_rng(1)
    energy = imageops.inverse_gradient_energy(rng.random((20, 20)), 500.0, 2.0)
    assert energy.min() > 0.0 and energy.max() <= 1.0


def test_energy_antitone_in_alpha():
    rng = np.random.default_rng(2)
    img = rng.random((16, 16))
    e1 = imageops.inverse_gradient_energy(img, 100.0, 2.0)
    e2 = imageops.inverse_gradient_energy(img, 500.0, 2.0)
    assert np.all(e2 <= e1 + 1e-12)


# --------------------------------------------------------------- flood fill


def test_flood_fill_uniform_zero_tolerance_selects_all():
    img = np.full((6, 8), 0.5)
    out = imageops.flood_fill_threshold(img, [(3, 3)], 0.0)
    assert out.all()


def test_flood_fill_two_regions_with_boundary():
    img = np.zeros((5, 5))
    img[:, 2] = 0.5
    img[:, 3:] = 1.0
    out = imageops.flood_fill_threshold(img, [(2, 0)], 0.2)
    assert np.array_equal(out, bfs_flood_fill(img, [(2, 0)], 0.2))
    assert out[:, :2].all() and not out[:, 2:].any()


def test_flood_fill_single_pixel():
    img = np.zeros((5, 5))
    img[2, 2] = 0.7
    out = imageops.flood_fill_threshold(img, [(2, 2)], 0.0)
    assert out.sum() == 1 and out[2, 2]


def test_flood_fill_out_of_bounds_seed():
    with pytest.raises(ValueError):
        imageops.flood_fill_threshold(np.zeros((4, 4)) + 0.5, [(4, 0)], 0.1)


def test_flood_fill_matches_bfs_oracle_randomized():
    rng = np.random.default_rng(3)
    for _ in range(40):
        img = np.round(rng.random((10, 10)) * 4) / 4
        seeds = [tuple(rng.integers(0, 10, 2))]
        if rng.random() < 0.5:
            seeds.append(tuple(rng.integers(0, 10, 2)))
        tol = float(rng.choice([0.0, 0.2, 0.3, 0.6]))
        got = imageops.flood_fill_threshold(img, seeds, tol)
        want = bfs_flood_fill(img, seeds, tol)
        assert np.array_equal(got, want)


def test_flood_fill_monotone_in_tolerance():
    rng = np.random.default_rng(4)
    img = rng.random((12, 12))
    seeds = [(5, 5), (2, 9)]
    previous = None
    for tol in (0.0, 0.1, 0.25, 0.5, 1.0):
        mask = imageops.flood_fill_threshold(img, seeds, tol)
        if previous is not None:
            assert np.all(previous <= mask)
        previous = mask


# --------------------------------------------------------------- components


def test_components_empty():
    labels, sizes = imageops.connected_components(np.zeros((4, 4), bool))
    assert sizes.size == 0 and labels.max() == 0


def test_components_diagonal_touch_is_one():
    mask = np.zeros((4, 4), bool)
    mask[1, 1] = mask[2, 2] = True
    _, sizes = imageops.connected_components(mask)
    assert list(sizes) == [2]


def test_components_three_blobs_hand_counted():
    mask = np.zeros((10, 12), bool)
    mask[1:3, 1:3] = True  # 4 px
    mask[6:9, 2:4] = True  # 6 px
    mask[4, 9] = True  # 1 px
    labels, sizes = imageops.connected_components(mask)
    assert sorted(sizes, reverse=True) == union_find_components(mask) == [6, 4, 1]
    # row-major discovery: the 4-px blob is seen first
    assert labels[1, 1] == 1 and labels[4, 9] == 2 and labels[6, 2] == 3


def test_components_match_union_find_randomized():
    rng = np.random.default_rng(5)
    for _ in range(30):
        mask = rng.random((rng.integers(4, 32), rng.integers(4, 32))) > 0.6
        _, sizes = imageops.connected_components(mask)
        assert sorted(sizes, reverse=True) == union_find_components(mask)


# --------------------------------------------------------------- fill holes


def disk_mask(side, radius, center=None):
    if center is None:
        center = (side / 2, side / 2)
    rows, cols = np.mgrid[0:side, 0:side]
    return (rows - center[0]) ** 2 + (cols - center[1]) ** 2 <= radius**2


def test_fill_holes_solid_disk_unchanged():
    mask = disk_mask(32, 10)
    assert np.array_equal(imageops.fill_holes(mask), mask)


def test_fill_holes_annulus_becomes_disk():
    outer = disk_mask(48, 18)
    inner = disk_mask(48, 8)
    annulus = outer & ~inner
    assert np.array_equal(imageops.fill_holes(annulus), outer)


def test_fill_holes_c_shape_unchanged():
    outer = disk_mask(48, 18)
    inner = disk_mask(48, 8)
    c_shape = (outer & ~inner).copy()
    c_shape[22:26, 24:] = False  # cut a channel from the hole to the border
    inner_region = inner.copy()
    assert np.array_equal(imageops.fill_holes(c_shape), c_shape)
    del inner_region


def test_fill_holes_idempotent_and_growing():
    rng = np.random.default_rng(6)
    for _ in range(20):
        mask = rng.random((16, 16)) > 0.55
        once = imageops.fill_holes(mask)
        assert np.all(mask <= once)
        assert np.array_equal(imageops.fill_holes(once), once)


def test_boundary_pixels_of_block():
    mask = np.zeros((6, 6), bool)
    mask[2:5, 2:5] = True
    boundary = imageops.boundary_pixels(mask)
    assert boundary.sum() == 8  # 3x3 block minus its center
    assert not boundary[3, 3]
