"""Melt-track geometry extraction from a binary segmentation.

Pipeline: suppress stray top-half components, keep the largest component and
fill interior pores, extract the per-column surface profile, fit the
substrate baseline, then measure width/height/depth and the wetting (alpha)
and wall (beta) angles at the two surface tangent points.

Angle conventions, in degrees:

* alpha is the interior angle between the baseline ray pointing into the
  pool and the above-surface boundary tangent ray pointing up the cap; it
  exceeds 90 for balling-style overhangs. When the pool has no cap at a
  tangent point (flush, bare-plate tracks) the boundary through the tangent
  point is single, and alpha falls back to that shared tangent's angle.
* beta is the acute angle between the below-surface boundary tangent line
  and the baseline line. Pools with nothing below the baseline report it
  as absent.

Tangents are estimated on the subpixel boundary contour: starting from the
tangent point, the contour branch heading into the requested region is
collected and a circle is fitted to it (Pratt fit, line fit for
near-straight boundaries); the tangent is read off the fitted circle where
it crosses the baseline. The branch span grows adaptively until the arc
carries enough sagitta for a stable curvature estimate, which keeps the
angles unbiased both by boundary curvature (short line fits tilt by half
the subtended arc) and by rasterization noise (short circle fits
underestimate the radius).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi
from skimage import measure as skmeasure

from . import imageops
from .raster import validate_mask


class MetrologyError(ValueError):
    """Raised when a measurement stage cannot proceed."""


@dataclass(frozen=True)
class Baseline:
    """Fitted substrate surface line: row = slope * col + intercept."""

    slope: float
    intercept: float
    fit_window: tuple[int, int]
    low_confidence: bool = False

    def row_at(self, col) -> np.ndarray:
        return self.slope * np.asarray(col, dtype=np.float64) + self.intercept


@dataclass
class SurfaceProfile:
    """Per-column topmost-metal row (subpixel) with validity flags."""

    rows: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class BBox:
    top: int
    bottom: int
    left: int
    right: int

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1


@dataclass
class MeltTrackMetrics:
    width_px: float
    height_px: float
    depth_px: float
    alpha_left: float | None
    alpha_right: float | None
    alpha_mean: float | None
    beta_left: float | None
    beta_right: float | None
    beta_mean: float | None
    tangent_left: tuple[float, float]
    tangent_right: tuple[float, float]
    baseline: Baseline
    area_px: float = 0.0
    scale_um_per_px: float | None = None
    flags: list[str] = field(default_factory=list)

    def scaled(self, name: str) -> float | None:
        """Value of width/height/depth/area converted to micrometers."""
        if self.scale_um_per_px is None:
            return None
        value = getattr(self, f"{name}_px")
        if name == "area":
            return value * self.scale_um_per_px**2
        return value * self.scale_um_per_px


def suppress_top_artifact(mask: np.ndarray) -> np.ndarray:
    """Drop stray components in the top half (another mounted sample).

    Triggered only when the top-half foreground fraction exceeds 0.25;
    components belonging to the largest blob are never clipped, so tall
    legitimate pools survive.
    """
    mask = validate_mask(mask)
    h = mask.shape[0]
    top = mask[: h // 2]
    if top.size == 0 or top.sum() / top.size <= 0.25:
        return mask.copy()
    labels, sizes = imageops.connected_components(mask)
    if sizes.size <= 1:
        return mask.copy()
    keep = int(np.argmax(sizes)) + 1
    top_labels = np.unique(labels[: h // 2])
    drop = [lab for lab in top_labels if lab > 0 and lab != keep]
    if not drop:
        return mask.copy()
    return mask & ~np.isin(labels, drop)


def extract_surface(mask: np.ndarray, sigma: float = 2.0) -> SurfaceProfile:
    """Topmost background-to-metal transition per column, subpixel refined.

    The raw transition is sharpened by blurring the mask as a scalar field
    and locating the peak vertical Sobel response near it (parabolic
    interpolation). Columns with no metal are flagged invalid.
    """
    mask = validate_mask(mask)
    if not mask.any():
        raise MetrologyError("cannot extract a surface from an empty mask")
    h, w = mask.shape
    valid = mask.any(axis=0)
    raw = np.where(valid, mask.argmax(axis=0), 0)

    response = ndi.sobel(imageops.gaussian_blur(mask.astype(np.float64), sigma), axis=0)
    rows = np.zeros(w, dtype=np.float64)
    for col in np.flatnonzero(valid):
        # Thickness of the topmost foreground run; when it is thinner than
        # the blur support the top and bottom edge responses merge and the
        # peak is biased, so the raw transition is the better estimate.
        run = int(np.argmin(mask[raw[col] :, col])) if not mask[raw[col] :, col].all() else (
            h - raw[col]
        )
        if run < 6:
            rows[col] = raw[col] - 0.5
            continue
        lo = max(0, raw[col] - 3)
        hi = min(h, raw[col] + 4)
        window = response[lo:hi, col]
        k = int(np.argmax(window))
        peak = lo + k
        # Parabolic subpixel refinement of the response peak.
        if 0 < peak < h - 1:
            y0, y1, y2 = response[peak - 1, col], response[peak, col], response[peak + 1, col]
            denom = y0 - 2 * y1 + y2
            offset = 0.5 * (y0 - y2) / denom if abs(denom) > 1e-12 else 0.0
            offset = float(np.clip(offset, -1.0, 1.0))
        else:
            offset = 0.0
        rows[col] = float(np.clip(peak + offset, 0, h - 1))
    return SurfaceProfile(rows=rows, valid=valid)


def melt_bbox(mask: np.ndarray) -> BBox:
    """Tight bounding box of the largest connected component."""
    component = imageops.largest_component(mask)
    if not component.any():
        raise MetrologyError("no melt pool found")
    rows, cols = np.nonzero(component)
    return BBox(int(rows.min()), int(rows.max()), int(cols.min()), int(cols.max()))


def fit_baseline(profile: SurfaceProfile, bbox: BBox, min_points: int = 10) -> Baseline:
    """Least-squares substrate line from profile points flanking the pool.

    Two windows of width max(20, bbox.width/2) immediately left and right of
    the bounding box are used; columns inside the box are excluded because a
    raised cap would bias the fit. When the flanks hold fewer than
    ``min_points`` valid columns (pool spans the image, or the mask contains
    nothing but the pool) the fit falls back to the horizontal line through
    the pool's shoulder medians that minimizes RMS, flagged low-confidence.
    """
    w = profile.rows.size
    flank = max(20, bbox.width // 2)
    cols = np.arange(w)
    in_left = (cols >= bbox.left - flank) & (cols < bbox.left)
    in_right = (cols > bbox.right) & (cols <= bbox.right + flank)
    use = (in_left | in_right) & profile.valid

    if int(use.sum()) >= min_points:
        x = cols[use].astype(np.float64)
        y = profile.rows[use]
        slope, intercept = np.polyfit(x, y, 1)
        baseline = Baseline(
            slope=float(slope),
            intercept=float(intercept),
            fit_window=(int(x.min()), int(x.max())),
        )
    else:
        # Shoulder columns: outer quarters of the bbox where the pool surface
        # sits at substrate level.
        quarter = max(2, bbox.width // 4)
        shoulder = np.zeros(w, dtype=bool)
        shoulder[bbox.left : bbox.left + quarter] = True
        shoulder[bbox.right - quarter + 1 : bbox.right + 1] = True
        shoulder &= profile.valid
        if not shoulder.any():
            raise MetrologyError("baseline fit failed: no valid surface columns")
        pts = profile.rows[shoulder]
        left_pts = profile.rows[shoulder & (cols <= (bbox.left + bbox.right) // 2)]
        right_pts = profile.rows[shoulder & (cols > (bbox.left + bbox.right) // 2)]
        candidates = [np.median(pts)]
        if left_pts.size:
            candidates.append(np.median(left_pts))
        if right_pts.size:
            candidates.append(np.median(right_pts))
        best = min(candidates, key=lambda c: float(np.sqrt(np.mean((pts - c) ** 2))))
        sc = cols[shoulder]
        baseline = Baseline(
            slope=0.0,
            intercept=float(best),
            fit_window=(int(sc.min()), int(sc.max())),
            low_confidence=True,
        )

    if abs(baseline.slope) >= 0.5:
        raise MetrologyError(
            f"baseline fit failed: slope {baseline.slope:.3f} is not near-horizontal"
        )
    return baseline


def dims(mask: np.ndarray, baseline: Baseline, bbox: BBox) -> tuple[float, float, float]:
    """(width, height, depth): bbox width and extreme signed row distances
    of pool pixels against the local baseline row at their column."""
    mask = validate_mask(mask)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise MetrologyError("no melt pool found")
    signed = baseline.row_at(cols) - rows  # positive above the baseline
    height = float(max(0.0, signed.max()))
    depth = float(max(0.0, -signed.min()))
    return float(bbox.width), height, depth


def tangent_points(
    mask: np.ndarray, profile: SurfaceProfile, bbox: BBox
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Leftmost and rightmost pool-boundary pixels on the true surface."""
    mask = validate_mask(mask)
    if bbox.width < 3:
        raise MetrologyError(f"pool too narrow for tangent points ({bbox.width} px)")
    boundary = imageops.boundary_pixels(mask)
    rows, cols = np.nonzero(boundary)
    on_surface = profile.valid[cols]
    for tol in (1.5, 3.0):
        near = on_surface & (np.abs(rows - profile.rows[cols]) <= tol)
        if near.any():
            break
    if not near.any():
        raise MetrologyError("surface does not intersect the melt pool boundary")
    r, c = rows[near], cols[near]
    left_i = int(np.lexsort((np.abs(r - profile.rows[c]), c))[0])
    right_i = int(np.lexsort((np.abs(r - profile.rows[c]), -c))[0])
    return (float(r[left_i]), float(c[left_i])), (float(r[right_i]), float(c[right_i]))


def _outer_contour(mask: np.ndarray) -> np.ndarray:
    """Longest closed subpixel contour of the mask (marching squares)."""
    contours = skmeasure.find_contours(mask.astype(np.float64), 0.5)
    if not contours:
        raise MetrologyError("mask has no boundary")
    contour = max(contours, key=len)
    if len(contour) > 1 and np.allclose(contour[0], contour[-1]):
        contour = contour[:-1]
    return contour


def _branch(
    contour: np.ndarray,
    at: np.ndarray,
    region: str,
    baseline: Baseline,
    span: float,
) -> np.ndarray | None:
    """Contour vertices walked from ``at`` along the branch entering ``region``.

    The walk starts at the vertex nearest the tangent point and follows the
    contour in the direction whose signed baseline distance reaches past
    +/-1.5 px into the region; it stops at ``span`` distance or where the
    branch crosses back over the baseline.
    """
    n = len(contour)
    i0 = int(np.argmin(np.linalg.norm(contour - at, axis=1)))
    want_above = region == "above"
    best = None
    for step in (1, -1):
        pts = []
        reach = 0.0
        path = 0.0
        prev = None
        for k in range(n):
            p = contour[(i0 + step * k) % n]
            if np.linalg.norm(p - at) > span:
                break
            if prev is not None:
                path += float(np.linalg.norm(p - prev))
            prev = p
            s = baseline.row_at(p[1]) - p[0]
            entered = reach > 1.5 if want_above else reach < -1.5
            # A genuine branch dives into its region right away; a walk that
            # hugs the interface is following the surface, not the wall/cap.
            if not entered and path > 10.0:
                break
            if entered and (s < 0.3 if want_above else s > -0.3):
                break
            pts.append(p)
            reach = max(reach, s) if want_above else min(reach, s)
        ok = reach > 1.5 if want_above else reach < -1.5
        if ok and (best is None or len(pts) > len(best)):
            best = pts
    if best is None or len(best) < 4:
        return None
    return np.vstack(best)


def _pratt_circle(pts: np.ndarray) -> tuple[tuple[float, float], float] | None:
    """Pratt algebraic circle fit; returns ((row, col), radius) or None."""
    x = pts[:, 1]
    y = pts[:, 0]
    xm, ym = x.mean(), y.mean()
    u, v = x - xm, y - ym
    z = u * u + v * v
    design = np.column_stack([z, u, v, np.ones_like(u)])
    moments = design.T @ design / len(pts)
    constraint = np.array(
        [[0, 0, 0, -2.0], [0, 1, 0, 0], [0, 0, 1, 0], [-2.0, 0, 0, 0]]
    )
    try:
        vals, vecs = np.linalg.eig(np.linalg.solve(constraint, moments))
    except np.linalg.LinAlgError:
        return None
    vals, vecs = np.real(vals), np.real(vecs)
    positive = vals > 1e-12
    if not positive.any():
        return None
    k = np.where(positive)[0][np.argmin(vals[positive])]
    a, b, c, d = vecs[:, k]
    if abs(a) < 1e-12:
        return None
    cx, cy = -b / (2 * a), -c / (2 * a)
    r2 = cx * cx + cy * cy - d / a
    if r2 <= 0 or not np.isfinite(r2):
        return None
    return (cy + ym, cx + xm), math.sqrt(r2)


# Spans used by the tangent estimator. The fit needs enough arc sagitta to
# pin the curvature against ~0.25 px contour noise, so the collected branch
# grows from FIT_SPAN toward sqrt(SAGITTA_TARGET * fitted radius), capped.
FIT_SPAN = 18.0
MAX_SPAN = 60.0
SAGITTA_TARGET = 48.0


def _branch_tangent(
    contour: np.ndarray,
    at: np.ndarray,
    region: str,
    baseline: Baseline,
    window: float,
) -> np.ndarray | None:
    """Unit tangent of the branch at its baseline crossing (sign unresolved)."""
    probe = None
    for w in (window, 5.0):
        probe = _branch(contour, at, region, baseline, w)
        if probe is not None:
            break
    if probe is None:
        return None

    def collect(span):
        pts = _branch(contour, at, region, baseline, span)
        if pts is None:
            return None
        # The tangent point lies on the boundary by definition; anchoring the
        # fit there stabilizes the center estimate of one-sided arcs.
        return np.vstack([pts, at])

    loc = collect(max(FIT_SPAN, 2 * window))
    if loc is None:
        loc = np.vstack([probe, at])
    fit = _pratt_circle(loc) if len(loc) >= 6 else None
    for _ in range(2):
        if fit is None:
            break
        target = float(np.clip(math.sqrt(SAGITTA_TARGET * fit[1]), FIT_SPAN, MAX_SPAN))
        span_now = float(np.linalg.norm(loc.max(axis=0) - loc.min(axis=0)))
        if target <= span_now + 2:
            break
        wider = collect(target)
        if wider is None or len(wider) <= len(loc):
            break
        loc = wider
        fit = _pratt_circle(loc) or fit

    def line_direction(pts):
        _, _, vt = np.linalg.svd(pts - pts.mean(axis=0), full_matrices=False)
        return vt[0]

    if fit is None:
        return line_direction(loc)
    (crow, ccol), radius = fit
    span = float(np.linalg.norm(loc.max(axis=0) - loc.min(axis=0)))
    if not np.isfinite(radius) or span * span / (8 * radius) < 1.0:
        # Not enough curvature to trust the circle; a plain line over the
        # short window is then essentially unbiased.
        short = collect(FIT_SPAN)
        return line_direction(loc if short is None else short)

    # Tangent at the circle's baseline crossing nearest the tangent point.
    s = baseline.slope
    qa = s * s + 1
    qb = 2 * (s * (baseline.intercept - crow) - ccol)
    qc = (baseline.intercept - crow) ** 2 + ccol * ccol - radius * radius
    disc = qb * qb - 4 * qa * qc
    center = np.array([crow, ccol])
    if disc >= 0:
        cols = [(-qb + math.sqrt(disc)) / (2 * qa), (-qb - math.sqrt(disc)) / (2 * qa)]
        col = min(cols, key=lambda cl: abs(cl - at[1]))
        crossing = np.array([baseline.row_at(col), col])
    else:
        v = at - center
        crossing = center + v / max(np.linalg.norm(v), 1e-9) * radius
    radial = crossing - center
    norm = np.linalg.norm(radial)
    if norm < 1e-9:
        return line_direction(loc)
    return np.array([-radial[1], radial[0]]) / norm


def angles(
    mask: np.ndarray,
    baseline: Baseline,
    tangents: tuple[tuple[float, float], tuple[float, float]],
    window: float = 9.0,
) -> dict[str, float | None]:
    """Wetting (alpha) and wall (beta) angles at both tangent points.

    ``window`` bounds the branch-presence test (shrinking to 5 px on tiny
    pools); the tangent fit itself spans further along the boundary, see
    module docstring.
    """
    mask = validate_mask(mask)
    contour = _outer_contour(imageops.largest_component(mask))

    norm = math.hypot(baseline.slope, 1.0)
    b_dir = np.array([baseline.slope, 1.0]) / norm  # along baseline, +col sense

    result: dict[str, float | None] = {}
    for side, at in (("left", tangents[0]), ("right", tangents[1])):
        at = np.asarray(at, dtype=np.float64)
        inward = b_dir if side == "left" else -b_dir

        above = _branch_tangent(contour, at, "above", baseline, window)
        below = _branch_tangent(contour, at, "below", baseline, window)

        alpha = beta = None
        if below is not None:
            # Acute angle between the wall tangent line and the baseline line.
            beta = math.degrees(math.acos(min(1.0, abs(float(below @ b_dir)))))
        if above is not None:
            t_up = above if above[0] <= 0 else -above  # point up (row decreasing)
            alpha = math.degrees(math.acos(float(np.clip(t_up @ inward, -1.0, 1.0))))
        elif below is not None:
            # Flush pool: one boundary through the tangent point, shared by
            # the wetting and wall directions.
            alpha = beta
        result[f"alpha_{side}"] = alpha
        result[f"beta_{side}"] = beta

    for name in ("alpha", "beta"):
        left, right = result[f"{name}_left"], result[f"{name}_right"]
        both = [v for v in (left, right) if v is not None]
        result[f"{name}_mean"] = float(np.mean(both)) if both else None
    return result


def measure(mask: np.ndarray, scale_um_per_px: float | None = None) -> MeltTrackMetrics:
    """Full measurement pipeline on one melt-pool mask."""
    mask = validate_mask(mask)
    if not mask.any():
        raise MetrologyError("no melt pool found")

    flags: list[str] = []

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MetrologyError as exc:
            raise MetrologyError(f"{name}: {exc}") from exc

    cleaned = stage("suppress_top_artifact", suppress_top_artifact, mask)
    pool = imageops.fill_holes(imageops.largest_component(cleaned))
    profile = stage("extract_surface", extract_surface, pool)
    bbox = stage("melt_bbox", melt_bbox, pool)
    baseline = stage("fit_baseline", fit_baseline, profile, bbox)
    if baseline.low_confidence:
        flags.append("low_confidence_baseline")
    width, height, depth = stage("dims", dims, pool, baseline, bbox)
    tangents = stage("tangent_points", tangent_points, pool, profile, bbox)
    angle_values = stage("angles", angles, pool, baseline, tangents)
    for key, value in angle_values.items():
        if value is None and not key.endswith("mean"):
            flags.append(f"missing_{key}")

    return MeltTrackMetrics(
        width_px=width,
        height_px=height,
        depth_px=depth,
        alpha_left=angle_values["alpha_left"],
        alpha_right=angle_values["alpha_right"],
        alpha_mean=angle_values["alpha_mean"],
        beta_left=angle_values["beta_left"],
        beta_right=angle_values["beta_right"],
        beta_mean=angle_values["beta_mean"],
        tangent_left=tangents[0],
        tangent_right=tangents[1],
        baseline=baseline,
        area_px=float(pool.sum()),
        scale_um_per_px=scale_um_per_px,
        flags=flags,
    )


def render_overlay(mask: np.ndarray, metrics: MeltTrackMetrics, image=None) -> np.ndarray:
    """RGB overlay: pool boundary in cyan, fitted baseline in red."""
    mask = validate_mask(mask)
    h, w = mask.shape
    if image is None:
        base = np.where(mask, 0.55, 0.15)
    else:
        from .raster import to_grayscale

        base = to_grayscale(image)
    rgb = np.stack([base, base, base], axis=2)
    boundary = imageops.boundary_pixels(imageops.largest_component(mask))
    rgb[boundary] = (0.0, 1.0, 1.0)
    cols = np.arange(w)
    rows = np.round(metrics.baseline.row_at(cols)).astype(int)
    ok = (rows >= 0) & (rows < h)
    rgb[rows[ok], cols[ok]] = (1.0, 0.0, 0.0)
    return rgb
