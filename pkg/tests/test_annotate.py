import numpy as np
import pytest

from meltpool import annotate, imageops, metrics
from meltpool.dataset import render_pool


def disk_image(side=128, radius=40):
    """White disk on black background plus its analytic mask."""
    rows, cols = np.mgrid[0:side, 0:side]
    mask = (rows - side / 2) ** 2 + (cols - side / 2) ** 2 <= radius**2
    image = np.where(mask, 0.9, 0.1)
    return image, mask


# ------------------------------------------------------------------ ellipse


def test_rasterize_unit_circle_is_plus_shape():
    seed = annotate.SeedEllipse(10, 10, 1.0, 1.0)
    mask = annotate.rasterize_ellipse(seed, (21, 21))
    expected = {(10, 10), (9, 10), (11, 10), (10, 9), (10, 11)}
    assert set(map(tuple, np.argwhere(mask))) == expected


def test_rasterize_tiny_ellipse_is_center_pixel():
    seed = annotate.SeedEllipse(10, 10, 0.4, 0.4)
    mask = annotate.rasterize_ellipse(seed, (21, 21))
    assert mask.sum() == 1 and mask[10, 10]


def test_rasterize_circle_rotation_invariant():
    # radius chosen so no pixel sits exactly on the boundary
    for rot in (0.0, 0.4, 1.2, 3.0):
        seed = annotate.SeedEllipse(12, 14, 4.7, 4.7, rotation=rot)
        mask = annotate.rasterize_ellipse(seed, (30, 30))
        base = annotate.rasterize_ellipse(annotate.SeedEllipse(12, 14, 4.7, 4.7), (30, 30))
        assert np.array_equal(mask, base)


def test_rasterize_out_of_bounds_rejected():
    with pytest.raises(ValueError):
        annotate.rasterize_ellipse(annotate.SeedEllipse(2, 2, 5.0, 5.0), (20, 20))


def test_ellipse_validation():
    with pytest.raises(ValueError):
        annotate.SeedEllipse(5, 5, 0.0, 1.0)


# --------------------------------------------------------------------- mgac


def test_evolve_no_force_is_identity():
    energy = np.full((32, 32), 0.8)
    init = annotate.rasterize_ellipse(annotate.SeedEllipse(16, 16, 4, 4), (32, 32))
    params = annotate.MgacParams(sigma=2, alpha=100, balloon=0, smoothing=0, iterations=1)
    out = annotate.evolve_mgac(energy, init, params)
    assert np.array_equal(out, init)


def test_evolve_flat_energy_grows_to_frame():
    energy = np.ones((40, 40))
    init = annotate.rasterize_ellipse(annotate.SeedEllipse(20, 20, 3, 3), (40, 40))
    params = annotate.MgacParams(
        sigma=2, alpha=100, balloon=1, smoothing=0, threshold=0.9, iterations=80
    )
    out = annotate.evolve_mgac(energy, init, params)
    assert out.all()


def test_evolve_balloon_growth_monotone_without_smoothing():
    energy = np.ones((32, 32))
    init = annotate.rasterize_ellipse(annotate.SeedEllipse(16, 16, 3, 3), (32, 32))
    params = annotate.MgacParams(
        sigma=2, alpha=100, balloon=1, smoothing=0, threshold=0.0, iterations=10
    )
    seen = [init.copy()]
    annotate.evolve_mgac(
        energy, init, params, iter_callback=lambda i, m: seen.append(m.astype(bool).copy())
    )
    for before, after in zip(seen, seen[1:]):
        assert np.all(before <= after)


def test_evolve_disk_converges_to_boundary():
    image, disk = disk_image()
    energy = imageops.inverse_gradient_energy(image, alpha=500, sigma=2)
    init = annotate.rasterize_ellipse(annotate.SeedEllipse(64, 64, 10, 10), (128, 128))
    params = annotate.MgacParams(sigma=2, alpha=500, iterations=200)
    out = annotate.evolve_mgac(energy, init, params)
    c = metrics.confusion(out, disk)
    assert metrics.iou(c) >= 0.95


def test_evolve_dimension_mismatch():
    with pytest.raises(ValueError):
        annotate.evolve_mgac(
            np.ones((10, 10)), np.zeros((8, 8), bool), annotate.MgacParams(2, 100)
        )


def test_evolve_empty_init():
    with pytest.raises(ValueError):
        annotate.evolve_mgac(
            np.ones((10, 10)), np.zeros((10, 10), bool), annotate.MgacParams(2, 100)
        )


def test_balloon_snapshots_recorded():
    energy = np.ones((32, 32))
    init = annotate.rasterize_ellipse(annotate.SeedEllipse(16, 16, 3, 3), (32, 32))
    params = annotate.MgacParams(
        sigma=2, alpha=100, balloon=1, smoothing=0, threshold=0.9, iterations=20
    )
    final, snaps = annotate.balloon_snapshots(energy, init, params, every=5)
    assert len(snaps) >= 2
    assert np.array_equal(snaps[-1], final) or snaps[-1].sum() <= final.sum()


# --------------------------------------------------------------- candidates


def test_default_presets_shape():
    presets = annotate.default_presets()
    assert len(presets) == 7
    assert all(p.balloon == 1 and p.threshold == 0.3 and p.iterations == 300 for p in presets)


def test_generate_candidates_count_and_size():
    image, _ = disk_image()
    seed = annotate.SeedEllipse(64, 64, 10, 10)
    result = annotate.generate_candidates(image, seed)
    assert len(result.candidates) == 7
    assert all(m.shape == (128, 128) for m in result.candidates)
    assert result.diagnostic.shape == (128, 128)


def test_generate_candidates_best_iou():
    image, disk = disk_image()
    seed = annotate.SeedEllipse(64, 64, 10, 10)
    result = annotate.generate_candidates(image, seed)
    best = max(metrics.iou(metrics.confusion(m, disk)) for m in result.candidates)
    assert best >= 0.95


def test_generate_candidates_deterministic():
    image, _ = disk_image()
    seed = annotate.SeedEllipse(64, 64, 10, 10)
    a = annotate.generate_candidates(image, seed)
    b = annotate.generate_candidates(image, seed)
    for m1, m2 in zip(a.candidates, b.candidates):
        assert np.array_equal(m1, m2)
    assert np.array_equal(a.diagnostic, b.diagnostic)


def test_candidate_set_requires_seven():
    with pytest.raises(ValueError):
        annotate.CandidateSet(candidates=[np.zeros((4, 4), bool)] * 6, params=[None] * 6)


# --------------------------------------------------------------------- wand


def two_tone_image():
    image = np.full((20, 20), 0.2)
    image[5:15, 3:12] = 0.8
    return image


def test_wand_empty_strokes_returns_existing():
    image = two_tone_image()
    existing = np.zeros((20, 20), bool)
    existing[0, 0] = True
    out = annotate.wand_select(image, [], 0.1, existing)
    assert np.array_equal(out, existing)


def test_wand_selects_whole_region():
    image = two_tone_image()
    stroke = annotate.BrushStroke(points=((10, 5), (10, 9)), radius=2)
    out = annotate.wand_select(image, [stroke], 0.1)
    expected = np.zeros((20, 20), bool)
    expected[5:15, 3:12] = True
    assert np.array_equal(out, expected)


def test_wand_accumulation_equals_union():
    rng = np.random.default_rng(0)
    image = np.round(rng.random((16, 16)) * 3) / 3
    s1 = annotate.BrushStroke(points=((4, 4),), radius=2)
    s2 = annotate.BrushStroke(points=((11, 12),), radius=2)
    tol = 0.21
    sequential = annotate.wand_select(
        image, [s2], tol, existing=annotate.wand_select(image, [s1], tol)
    )
    joint = annotate.wand_select(image, [s1, s2], tol)
    assert np.array_equal(sequential, joint)


def test_wand_contains_stroke_pixels():
    rng = np.random.default_rng(1)
    image = rng.random((24, 24))
    stroke = annotate.BrushStroke(points=((12, 12), (12, 16)), radius=3)
    out = annotate.wand_select(image, [stroke], 0.0)
    for r, c in annotate.stroke_seeds([stroke], (24, 24)):
        assert out[r, c]


def test_stroke_validation():
    with pytest.raises(ValueError):
        annotate.BrushStroke(points=(), radius=2)
    with pytest.raises(ValueError):
        annotate.BrushStroke(points=((1, 1),), radius=0)


# ------------------------------------------------------------ finalize_mask


def test_finalize_solid_disk_unchanged():
    _, disk = disk_image()
    assert np.array_equal(annotate.finalize_mask(disk), disk)


def test_finalize_drops_speck():
    _, disk = disk_image()
    with_speck = disk.copy()
    with_speck[2, 2] = True
    assert np.array_equal(annotate.finalize_mask(with_speck), disk)


def test_finalize_fills_hole():
    _, disk = disk_image()
    holed = disk.copy()
    holed[60:68, 60:68] = False
    assert np.array_equal(annotate.finalize_mask(holed), disk)


def test_finalize_empty_is_error():
    with pytest.raises(ValueError, match="no selection"):
        annotate.finalize_mask(np.zeros((8, 8), bool))


def test_finalize_single_component_no_holes():
    rng = np.random.default_rng(2)
    for _ in range(10):
        mask = rng.random((24, 24)) > 0.6
        if not mask.any():
            continue
        out = annotate.finalize_mask(mask)
        _, sizes = imageops.connected_components(out)
        assert len(sizes) == 1
        assert np.array_equal(imageops.fill_holes(out), out)


def test_wand_on_rendered_pool():
    image, mask = render_pool(96, 28, 8.0, surface_row=40.0, center_col=48.0)
    stroke = annotate.BrushStroke(points=((50, 40), (50, 56)), radius=2)
    out = annotate.wand_select(image, [stroke], 0.05)
    inner = mask & ~imageops.boundary_pixels(mask)
    # the interior shade is uniform, so the wand should cover most of it
    c = metrics.confusion(out & inner, inner)
    assert metrics.iou(c) > 0.8
