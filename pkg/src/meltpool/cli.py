"""Command-line pipeline: annotation, augmentation, training, evaluation,
prediction, metrology and synthetic data generation.

All numeric CSV output is fixed at 4 decimal places so runs diff cleanly.
Worker parallelism for batch subcommands is capped by MELT_METRICS_THREADS.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import annotate, augment, dataset, metrics, metrology, raster, unet


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _worker_count() -> int:
    env = os.environ.get("MELT_METRICS_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _mgac_presets(config: dict) -> list[annotate.MgacParams] | None:
    raw = config.get("mgac_presets")
    if raw is None:
        return None
    return [annotate.MgacParams(**p) for p in raw]


def _augment_config(config: dict) -> augment.AugmentationConfig:
    section = dict(config.get("augment", {}))
    for key in ("zoom_range", "gamma_range"):
        if key in section:
            section[key] = tuple(section[key])
    return augment.AugmentationConfig(**section)


def _unet_config(config: dict, **overrides) -> unet.UNetConfig:
    section = dict(config.get("unet", {}))
    section.update({k: v for k, v in overrides.items() if v is not None})
    return unet.UNetConfig(**section)


def _train_config(config: dict, **overrides) -> unet.TrainConfig:
    section = dict(config.get("train", {}))
    section.update({k: v for k, v in overrides.items() if v is not None})
    return unet.TrainConfig(**section)


def _parse_ellipse(spec: str) -> annotate.SeedEllipse:
    parts = [float(v) for v in spec.split(",")]
    if len(parts) not in (4, 5):
        raise ValueError("--ellipse expects cx,cy,a,b[,rot]")
    cx, cy, a, b = parts[:4]
    rot = parts[4] if len(parts) == 5 else 0.0
    return annotate.SeedEllipse(
        center_row=cy, center_col=cx, semi_axis_a=a, semi_axis_b=b, rotation=rot
    )


def _load_pairs(manifest_path: str, split: str) -> list[tuple[np.ndarray, np.ndarray]]:
    entries = dataset.load_manifest(manifest_path)
    pairs = []
    for entry in entries:
        if entry.split != split:
            continue
        if entry.mask is None:
            raise ValueError(f"entry {entry.image} has no mask")
        image = raster.load_raster(dataset.resolve_path(manifest_path, entry.image))
        mask = raster.load_mask(dataset.resolve_path(manifest_path, entry.mask))
        pairs.append((image, mask))
    return pairs


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------- subcommands


def cmd_candidates(args) -> int:
    config = load_config_file(args.config)
    image = raster.load_raster(args.image)
    seed = _parse_ellipse(args.ellipse)
    result = annotate.generate_candidates(image, seed, _mgac_presets(config))
    os.makedirs(args.out, exist_ok=True)
    for k, mask in enumerate(result.candidates):
        raster.save_mask(mask, os.path.join(args.out, f"candidate_{k}.png"))
    raster.save_mask(result.diagnostic, os.path.join(args.out, "diagnostic.png"))
    for k, preset in enumerate(result.params):
        print(f"candidate_{k}.png  {preset.label}")
    return 0


def cmd_wand(args) -> int:
    image = raster.load_raster(args.image)
    with open(args.strokes, encoding="utf-8") as fh:
        raw = json.load(fh)
    strokes = [
        annotate.BrushStroke(
            points=tuple((int(y), int(x)) for x, y in stroke["points"]),
            radius=int(stroke.get("radius", 3)),
        )
        for stroke in raw
    ]
    existing = raster.load_mask(args.existing) if args.existing else None
    mask = annotate.wand_select(image, strokes, args.tolerance, existing)
    raster.save_mask(mask, args.out)
    print(args.out)
    return 0


def cmd_annotate(args) -> int:
    from . import service

    config = load_config_file(args.config)
    print(f"annotation service on http://127.0.0.1:{args.port}")
    service.serve(port=args.port, presets=_mgac_presets(config))
    return 0


def cmd_augment(args) -> int:
    config = load_config_file(args.config)
    aug_config = _augment_config(config)
    entries = dataset.load_manifest(args.manifest)
    os.makedirs(args.out_dir, exist_ok=True)
    out_entries = list(entries)
    pair_index = 0
    for entry in entries:
        if entry.split != "train" or entry.mask is None:
            continue
        image = raster.load_raster(dataset.resolve_path(args.manifest, entry.image))
        mask = raster.load_mask(dataset.resolve_path(args.manifest, entry.mask))
        stem = os.path.splitext(os.path.basename(entry.image))[0]
        for j in range(args.per_image):
            sampled = augment.sample(aug_config, [args.seed, pair_index, j])
            aug_image, aug_mask = augment.apply(image, mask, sampled)
            image_name = f"{stem}_aug{j:02d}.png"
            mask_name = f"{stem}_aug{j:02d}_mask.png"
            raster.save_image(aug_image, os.path.join(args.out_dir, image_name))
            raster.save_mask(aug_mask, os.path.join(args.out_dir, mask_name))
            out_entries.append(
                dataset.ManifestEntry(
                    image=os.path.join(args.out_dir, image_name),
                    mask=os.path.join(args.out_dir, mask_name),
                    split="train",
                    scale=entry.scale,
                    source=f"augmented:{entry.image}",
                )
            )
        pair_index += 1
    dataset.save_manifest(out_entries, args.out_manifest)
    counts = dataset.split_counts(out_entries)
    print(f"wrote {args.out_manifest}: {counts}")
    return 0


def cmd_train(args) -> int:
    config = load_config_file(args.config)
    unet_config = _unet_config(config, input_side=args.input_side)
    train_config = _train_config(
        config,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
    )
    train_pairs = _load_pairs(args.manifest, "train")
    val_pairs = _load_pairs(args.manifest, "val")
    model = unet.build(unet_config, seed=train_config.seed)
    model, history = unet.train(
        model, train_pairs, val_pairs, train_config, checkpoint_path=args.out
    )
    for epoch, (tl, ta) in enumerate(zip(history.train_loss, history.train_accuracy)):
        vl = history.val_loss[epoch] if history.val_loss else float("nan")
        vf = history.val_f1[epoch] if history.val_f1 else float("nan")
        print(f"epoch {epoch}: train_loss {tl:.4f} acc {ta:.4f} val_loss {vl:.4f} val_f1 {vf:.4f}")
    print(f"checkpoint: {args.out}")
    return 0


def cmd_grid(args) -> int:
    config = load_config_file(args.config)
    unet_config = _unet_config(config, input_side=args.input_side)
    train_pairs = _load_pairs(args.manifest, "train")
    val_pairs = _load_pairs(args.manifest, "val")
    if not val_pairs:  # manifests without a val split score against test
        val_pairs = _load_pairs(args.manifest, "test")
    cells = unet.grid_search(
        train_pairs,
        val_pairs,
        unet_config,
        epochs=args.epochs,
        base_seed=args.seed or 0,
    )
    header = ["batch_size", "learning_rate", "val_accuracy", "val_f1", "diverged"]
    rows = [
        [c.batch_size, c.learning_rate, c.val_accuracy, c.val_f1, int(c.diverged)]
        for c in cells
    ]
    print("  ".join(header))
    for row in rows:
        print("  ".join(_fmt(v) for v in row))
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    model, _ = unet.load_checkpoint(args.checkpoint)
    pairs = _load_pairs(args.manifest, args.split)
    entries = [
        e for e in dataset.load_manifest(args.manifest) if e.split == args.split
    ]
    rows = []
    per_image = []
    for entry, (image, truth) in zip(entries, pairs):
        pred = unet.predict_mask(model, image)
        scores = metrics.evaluate_pair(pred, truth)
        per_image.append(scores)
        rows.append([entry.image, scores["accuracy"], scores["f1"], scores["iou"]])
    if per_image:
        means = {k: float(np.mean([m[k] for m in per_image])) for k in per_image[0]}
        rows.append(["mean", means["accuracy"], means["f1"], means["iou"]])
    _write_csv(args.out, ["image", "accuracy", "f1", "iou"], rows)
    print(f"wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    model, _ = unet.load_checkpoint(args.checkpoint)
    os.makedirs(args.out_dir, exist_ok=True)

    def one(path):
        image = raster.load_raster(path)
        mask = unet.predict_mask(model, image)
        out = os.path.join(
            args.out_dir, os.path.splitext(os.path.basename(path))[0] + "_mask.png"
        )
        raster.save_mask(mask, out)
        return out

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        for out in pool.map(one, args.images):
            print(out)
    return 0


MEASURE_HEADER = [
    "image",
    "width_px",
    "height_px",
    "depth_px",
    "alpha_left_deg",
    "alpha_right_deg",
    "alpha_mean_deg",
    "beta_left_deg",
    "beta_right_deg",
    "beta_mean_deg",
    "baseline_slope",
    "baseline_intercept_px",
    "area_px",
    "flags",
]
MEASURE_UM = ["width_um", "height_um", "depth_um", "area_um2"]


def _measure_row(name: str, m: metrology.MeltTrackMetrics, scale) -> list:
    row = [
        name,
        m.width_px,
        m.height_px,
        m.depth_px,
        m.alpha_left,
        m.alpha_right,
        m.alpha_mean,
        m.beta_left,
        m.beta_right,
        m.beta_mean,
        m.baseline.slope,
        m.baseline.intercept,
        m.area_px,
        ";".join(m.flags),
    ]
    if scale is not None:
        row += [m.scaled("width"), m.scaled("height"), m.scaled("depth"), m.scaled("area")]
    return row


def cmd_measure(args) -> int:
    scale = args.scale_um_per_px
    model = None
    if args.checkpoint:
        model, _ = unet.load_checkpoint(args.checkpoint)
    inputs = args.masks or args.images
    if not inputs:
        raise ValueError("measure needs --masks or --checkpoint with --images")
    if args.overlay_dir:
        os.makedirs(args.overlay_dir, exist_ok=True)

    def one(path):
        if model is None:
            mask = raster.load_mask(path)
        else:
            mask = unet.predict_mask(model, raster.load_raster(path))
        m = metrology.measure(mask, scale_um_per_px=scale)
        if args.overlay_dir:
            overlay = metrology.render_overlay(mask, m)
            out = os.path.join(
                args.overlay_dir,
                os.path.splitext(os.path.basename(path))[0] + "_overlay.png",
            )
            raster.save_image(overlay, out)
        return _measure_row(os.path.basename(path), m, scale)

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        rows = list(pool.map(one, inputs))
    header = MEASURE_HEADER + (MEASURE_UM if scale is not None else [])
    _write_csv(args.out, header, rows)
    print(f"wrote {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = dataset.SyntheticSpec(
        count=args.count,
        side=args.side,
        radius_range=tuple(float(v) for v in args.radius_range.split(",")),
        center_ratio_range=tuple(float(v) for v in args.ratio_range.split(",")),
        noise_level=args.noise,
        texture_amplitude=args.texture,
        seed=args.seed or 0,
    )
    items = dataset.synth_generate(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    entries = []
    rows = []
    n_train = int(round(args.count * 0.8))
    for i, (image, mask, truth) in enumerate(items):
        image_name = f"synth_{i:04d}.png"
        mask_name = f"synth_{i:04d}_mask.png"
        raster.save_image(image, os.path.join(args.out_dir, image_name))
        raster.save_mask(mask, os.path.join(args.out_dir, mask_name))
        split = "train" if i < n_train else "test"
        entries.append(
            dataset.ManifestEntry(
                image=image_name, mask=mask_name, split=split, source="synthetic"
            )
        )
        rows.append(_measure_row(image_name, truth, None))
    dataset.save_manifest(entries, os.path.join(args.out_dir, "manifest.jsonl"))
    _write_csv(os.path.join(args.out_dir, "metrics.csv"), MEASURE_HEADER, rows)
    print(f"wrote {args.count} items to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meltpool",
        description="Melt-track cross-section segmentation and metrology pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("candidates", help="MGAC candidate masks from a seed ellipse")
    p.add_argument("--image", required=True)
    p.add_argument("--ellipse", required=True, help="cx,cy,a,b[,rot]")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config")
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("wand", help="flood-fill selection from a stroke file")
    p.add_argument("--image", required=True)
    p.add_argument("--strokes", required=True, help="JSON stroke list")
    p.add_argument("--tolerance", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--existing")
    p.set_defaults(func=cmd_wand)

    p = sub.add_parser("annotate", help="launch the annotation service + UI")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--config")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("augment", help="expand a manifest with augmented pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--per-image", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the segmentation network")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--input-side", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="batch-size x learning-rate grid search")
    p.add_argument("--manifest", required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--input-side", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=dataset.SPLITS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict masks for images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("measure", help="extract melt-pool geometry to CSV")
    p.add_argument("--masks", nargs="*")
    p.add_argument("--images", nargs="*")
    p.add_argument("--checkpoint")
    p.add_argument("--scale-um-per-px", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--overlay-dir")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("synth", help="generate synthetic pools + manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--side", type=int, default=128)
    p.add_argument("--radius-range", default="20,45")
    p.add_argument("--ratio-range", default="0,0.75")
    p.add_argument("--noise", type=float, default=0.03)
    p.add_argument("--texture", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (ValueError, OSError, metrology.MetrologyError, raster.RasterError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
