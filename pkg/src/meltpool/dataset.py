"""Dataset manifests and a synthetic melt-pool generator.

Manifests are JSON-lines files, one entry per line, append-friendly.

Synthetic items are circular-segment pools: a disk of radius r whose center
sits d pixels above the substrate surface, clipped to the region below the
surface (a bare-plate track, flush with the substrate). The closed forms

    width = 2 * sqrt(r^2 - d^2)
    depth = r - d
    height = 0
    alpha = beta = atan2(sqrt(r^2 - d^2), d)   (90 deg at d = 0)

make every generated item an exact oracle for the metrology pipeline. The
rendering mimics an etched micrograph: bright mount above the surface,
textured substrate, a darker textured pool interior with a dark boundary
line, plus additive noise.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import imageops
from .metrology import Baseline, MeltTrackMetrics

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    split: str
    mask: str | None = None
    scale: float | None = None
    source: str = ""


def save_manifest(entries: list[ManifestEntry], path: str | os.PathLike) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(asdict(entry)) + "\n")


def load_manifest(path: str | os.PathLike, check_files: bool = True) -> list[ManifestEntry]:
    """Read a manifest, validating splits, duplicates and referenced files."""
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            entry = ManifestEntry(**record)
            if entry.split not in SPLITS:
                raise ValueError(f"{path}:{lineno}: unknown split {entry.split!r}")
            if entry.image in seen:
                raise ValueError(f"{path}:{lineno}: duplicate image path {entry.image!r}")
            seen.add(entry.image)
            if check_files:
                for kind in ("image", "mask"):
                    ref = getattr(entry, kind)
                    if ref is None:
                        continue
                    resolved = ref if os.path.isabs(ref) else os.path.join(base, ref)
                    if not os.path.exists(resolved):
                        raise ValueError(
                            f"{path}:{lineno}: {kind} file missing for entry "
                            f"{entry.image!r}: {resolved}"
                        )
            entries.append(entry)
    return entries


def split_counts(entries: list[ManifestEntry]) -> dict[str, int]:
    counts = {split: 0 for split in SPLITS}
    for entry in entries:
        counts[entry.split] += 1
    return counts


def resolve_path(manifest_path: str, ref: str) -> str:
    if os.path.isabs(ref):
        return ref
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), ref)


@dataclass(frozen=True)
class SyntheticSpec:
    count: int = 16
    side: int = 128
    radius_range: tuple[float, float] = (20.0, 45.0)
    center_ratio_range: tuple[float, float] = (0.0, 0.75)  # d/r
    noise_level: float = 0.03
    texture_amplitude: float = 0.05
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.radius_range
        if not 0 < lo <= hi < self.side / 2:
            raise ValueError(f"radius range {self.radius_range} infeasible for side {self.side}")
        lo, hi = self.center_ratio_range
        if not 0.0 <= lo <= hi < 1.0:
            raise ValueError(f"center ratio range {self.center_ratio_range} must sit in [0, 1)")
        if self.noise_level < 0 or self.texture_amplitude < 0:
            raise ValueError("noise and texture levels must be >= 0")


def _smooth_noise(rng: np.random.Generator, shape, sigma: float = 3.0) -> np.ndarray:
    field = rng.standard_normal(shape)
    field = imageops.gaussian_blur(field, sigma)
    peak = np.abs(field).max()
    return field / peak if peak > 0 else field


def render_pool(
    side: int,
    radius: float,
    center_offset: float,
    surface_row: float,
    center_col: float,
    noise_level: float = 0.0,
    texture_amplitude: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Render one segment pool; returns (image, exact mask)."""
    if rng is None:
        rng = np.random.default_rng(0)
    rows, cols = np.mgrid[0:side, 0:side].astype(np.float64)
    center_row = surface_row - center_offset
    dist = np.hypot(rows - center_row, cols - center_col)
    below = rows >= surface_row
    mask = (dist <= radius) & below

    image = np.full((side, side), 0.85)
    image[below] = 0.60
    image[mask] = 0.50
    # etched boundary line, drawn inside the pool so the noiseless image
    # thresholds exactly to the mask
    ring = (dist >= radius - 2.5) & mask
    image[ring] = 0.22
    if texture_amplitude > 0:
        texture = _smooth_noise(rng, (side, side)) * texture_amplitude
        image[below] += texture[below]
    if noise_level > 0:
        image += rng.standard_normal((side, side)) * noise_level
    return np.clip(image, 0.0, 1.0), mask


def analytic_metrics(
    radius: float, center_offset: float, surface_row: float, center_col: float
) -> MeltTrackMetrics:
    """Closed-form geometry of a rendered segment pool."""
    half_chord = math.sqrt(radius**2 - center_offset**2)
    angle = math.degrees(math.atan2(half_chord, center_offset))
    return MeltTrackMetrics(
        width_px=2 * half_chord,
        height_px=0.0,
        depth_px=radius - center_offset,
        alpha_left=angle,
        alpha_right=angle,
        alpha_mean=angle,
        beta_left=angle,
        beta_right=angle,
        beta_mean=angle,
        tangent_left=(surface_row, center_col - half_chord),
        tangent_right=(surface_row, center_col + half_chord),
        baseline=Baseline(0.0, surface_row, (0, 0)),
        area_px=radius**2 * math.acos(center_offset / radius) - center_offset * half_chord,
    )


def synth_generate(
    spec: SyntheticSpec,
) -> list[tuple[np.ndarray, np.ndarray, MeltTrackMetrics]]:
    """Deterministic list of (image, exact mask, analytic metrics) items."""
    rng = np.random.default_rng(spec.seed)
    items = []
    for _ in range(spec.count):
        radius = rng.uniform(*spec.radius_range)
        ratio = rng.uniform(*spec.center_ratio_range)
        offset = radius * ratio
        # Keep the whole pool and some flanking surface inside the frame.
        depth = radius - offset
        surface_row = rng.uniform(0.35, 0.55) * spec.side
        surface_row = min(surface_row, spec.side - depth - 4)
        half_chord = math.sqrt(radius**2 - offset**2)
        margin = half_chord + 4
        center_col = rng.uniform(margin, spec.side - margin)
        image, mask = render_pool(
            spec.side,
            radius,
            offset,
            surface_row=float(np.round(surface_row)),
            center_col=center_col,
            noise_level=spec.noise_level,
            texture_amplitude=spec.texture_amplitude,
            rng=rng,
        )
        truth = analytic_metrics(radius, offset, float(np.round(surface_row)), center_col)
        items.append((image, mask, truth))
    return items
