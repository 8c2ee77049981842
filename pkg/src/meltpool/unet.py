"""U-Net model, binary cross entropy loss, training loop, grid search.

The network: an encoder of ``levels`` stages (two padded 3x3 convolutions +
ReLU, then 2x2 max-pool), doubling channels from ``base_channels`` up to a
two-convolution bottleneck; a mirrored decoder (upsample, 3x3 convolution
halving channels, skip concatenation, two 3x3 convolutions); then a head of
one 3x3 convolution down to two channels and a 1x1 convolution to a single
sigmoid output channel. Defaults give the 64 -> 1024 -> 64 channel ladder
on 512x512 inputs.

Training uses RMSprop (decay 0.9, no momentum, eps 1e-8) on mean pixel BCE,
with deterministic shuffling per seed and the best-validation-F1 state
retained alongside the final weights.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn as nn

from . import imageops, metrics, raster


@dataclass(frozen=True)
class UNetConfig:
    input_side: int = 512
    in_channels: int = 1
    base_channels: int = 64
    levels: int = 4
    kernel: int = 3
    pool: int = 2
    out_channels: int = 1
    up_mode: str = "nearest"  # "nearest" (upsample + conv) or "transpose"

    def __post_init__(self):
        if self.input_side % (self.pool**self.levels) != 0:
            raise ValueError(
                f"input_side {self.input_side} not divisible by "
                f"pool^levels = {self.pool ** self.levels}"
            )
        if self.up_mode not in ("nearest", "transpose"):
            raise ValueError(f"unknown up_mode {self.up_mode!r}")

    @property
    def bottleneck_channels(self) -> int:
        return self.base_channels * 2**self.levels


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-4
    epochs: int = 100
    seed: int = 0
    init_scale: float = 1.0  # multiplies initial weights (grid stress runs)

    def __post_init__(self):
        if self.batch_size < 1 or self.learning_rate <= 0 or self.epochs < 0:
            raise ValueError("invalid training configuration")


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    val_f1: list[float] = field(default_factory=list)
    best_epoch: int | None = None


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, step: int):
        super().__init__(f"non-finite loss at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step


def _double_conv(in_ch: int, out_ch: int, kernel: int) -> nn.Sequential:
    pad = kernel // 2
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel, padding=pad),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, kernel, padding=pad),
        nn.ReLU(inplace=True),
    )


class UNet(nn.Module):
    def __init__(self, config: UNetConfig):
        super().__init__()
        self.config = config
        k, p = config.kernel, config.pool

        self.encoders = nn.ModuleList()
        ch = config.in_channels
        for i in range(config.levels):
            out = config.base_channels * 2**i
            self.encoders.append(_double_conv(ch, out, k))
            ch = out
        self.pool = nn.MaxPool2d(p)
        self.bottleneck = _double_conv(ch, ch * 2, k)
        ch *= 2

        self.ups = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for _ in range(config.levels):
            if config.up_mode == "nearest":
                up = nn.Sequential(
                    nn.Upsample(scale_factor=p, mode="nearest"),
                    nn.Conv2d(ch, ch // 2, k, padding=k // 2),
                )
            else:
                up = nn.ConvTranspose2d(ch, ch // 2, p, stride=p)
            self.ups.append(up)
            self.decoders.append(_double_conv(ch, ch // 2, k))
            ch //= 2

        self.head = nn.Sequential(
            nn.Conv2d(ch, 2, k, padding=k // 2),
            nn.ReLU(inplace=True),
            nn.Conv2d(2, config.out_channels, 1),
        )

        # He initialization keeps activation scale roughly constant through
        # the ReLU stack; torch's default shrinks it several-fold per layer,
        # which at this depth leaves the network a near-constant function
        # with vanishing gradients. The 2-channel head additionally gets a
        # positive bias so neither of its channels starts dead.
        for module in self.modules():
            if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
                nn.init.kaiming_normal_(module.weight, nonlinearity="relu")
                nn.init.zeros_(module.bias)
        with torch.no_grad():
            self.head[0].bias.fill_(0.1)

    def forward_logits(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        for encoder in self.encoders:
            x = encoder(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, decoder, skip in zip(self.ups, self.decoders, reversed(skips)):
            x = up(x)
            x = decoder(torch.cat([x, skip], dim=1))
        return self.head(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.forward_logits(x))


def build(config: UNetConfig | None = None, seed: int = 0) -> UNet:
    """Construct a U-Net with seed-deterministic initialization."""
    if config is None:
        config = UNetConfig()
    torch.manual_seed(seed)
    return UNet(config)


def bce_terms(logit: float, label: float) -> tuple[float, float]:
    """(sigmoid(logit), per-pixel BCE) for a single logit/label pair."""
    g = 1.0 / (1.0 + math.exp(-logit))
    eps = 1e-7
    g = min(max(g, eps), 1.0 - eps)
    return g, -(label * math.log(g) + (1.0 - label) * math.log(1.0 - g))


def bce_loss(probabilities: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean per-pixel binary cross entropy on sigmoid outputs."""
    if probabilities.shape != labels.shape:
        raise ValueError(
            f"shape mismatch: {tuple(probabilities.shape)} vs {tuple(labels.shape)}"
        )
    eps = 1e-7
    g = probabilities.clamp(eps, 1.0 - eps)
    return -(labels * torch.log(g) + (1.0 - labels) * torch.log(1.0 - g)).mean()


def pairs_to_tensors(
    pairs: list[tuple[np.ndarray, np.ndarray]], config: UNetConfig
) -> tuple[torch.Tensor, torch.Tensor]:
    """Resize and stack (image, mask) pairs into network-ready tensors."""
    images, masks = [], []
    for image, mask in pairs:
        if config.in_channels == 1:
            image = raster.to_grayscale(image)
        image, mask = raster.resize_pair(image, mask, config.input_side)
        images.append(torch.from_numpy(image.astype(np.float32))[None])
        masks.append(torch.from_numpy(mask.astype(np.float32))[None])
    return torch.stack(images), torch.stack(masks)


@torch.no_grad()
def _evaluate(model: UNet, images: torch.Tensor, labels: torch.Tensor, batch: int = 8):
    """(loss, accuracy, f1) over a tensor dataset."""
    model.eval()
    total_loss = 0.0
    counts = metrics.ConfusionCounts(0, 0, 0, 0)
    for i in range(0, len(images), batch):
        logits = model.forward_logits(images[i : i + batch])
        total_loss += nn.functional.binary_cross_entropy_with_logits(
            logits, labels[i : i + batch]
        ).item() * len(images[i : i + batch])
        pred = logits >= 0.0  # sigmoid(x) >= 0.5
        truth = labels[i : i + batch] >= 0.5
        counts = counts + metrics.ConfusionCounts(
            tp=int((pred & truth).sum()),
            tn=int((~pred & ~truth).sum()),
            fp=int((pred & ~truth).sum()),
            fn=int((~pred & truth).sum()),
        )
    model.train()
    return (
        total_loss / max(len(images), 1),
        metrics.accuracy(counts),
        metrics.f1(counts),
        metrics.iou(counts),
    )


def train(
    model: UNet,
    train_pairs: list[tuple[np.ndarray, np.ndarray]],
    val_pairs: list[tuple[np.ndarray, np.ndarray]],
    config: TrainConfig,
    checkpoint_path: str | None = None,
) -> tuple[UNet, TrainingHistory]:
    """RMSprop training over shuffled mini-batches; deterministic per seed.

    The best-validation-F1 state is kept alongside the final weights; when
    ``checkpoint_path`` is given both are written (best as ``*.best.pt``).
    """
    if not train_pairs:
        raise ValueError("training set is empty")
    images, labels = pairs_to_tensors(train_pairs, model.config)
    if val_pairs:
        val_images, val_labels = pairs_to_tensors(val_pairs, model.config)
    else:
        val_images = val_labels = None

    if config.init_scale != 1.0:
        with torch.no_grad():
            for p in model.parameters():
                p.mul_(config.init_scale)

    optimizer = torch.optim.RMSprop(
        model.parameters(), lr=config.learning_rate, alpha=0.9, eps=1e-8, momentum=0.0
    )
    rng = np.random.default_rng(config.seed)
    history = TrainingHistory()
    best_f1 = -1.0
    best_state = None

    model.train()
    for epoch in range(config.epochs):
        order = rng.permutation(len(images))
        epoch_loss = 0.0
        correct = 0
        seen = 0
        for step, start in enumerate(range(0, len(order), config.batch_size)):
            idx = torch.from_numpy(order[start : start + config.batch_size].copy())
            batch_images, batch_labels = images[idx], labels[idx]
            # Same per-pixel BCE as bce_loss, computed from logits so the
            # gradient survives sigmoid saturation.
            logits = model.forward_logits(batch_images)
            loss = nn.functional.binary_cross_entropy_with_logits(logits, batch_labels)
            if not torch.isfinite(loss):
                raise TrainingDiverged(epoch, step)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(idx)
            correct += int(((logits >= 0.0) == (batch_labels >= 0.5)).sum())
            seen += batch_labels.numel()
        history.train_loss.append(epoch_loss / len(images))
        history.train_accuracy.append(correct / max(seen, 1))

        if val_images is not None:
            vloss, vacc, vf1, viou = _evaluate(model, val_images, val_labels)
        else:
            vloss = vacc = vf1 = viou = float("nan")
        history.val_loss.append(vloss)
        history.val_accuracy.append(vacc)
        history.val_f1.append(vf1)
        if val_images is not None and vf1 > best_f1:
            best_f1 = vf1
            best_metrics = {"val_accuracy": vacc, "val_f1": vf1, "val_iou": viou}
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            history.best_epoch = epoch

    if checkpoint_path is not None:
        if val_images is not None and config.epochs > 0:
            vloss, vacc, vf1, viou = _evaluate(model, val_images, val_labels)
            final_metrics = {"val_accuracy": vacc, "val_f1": vf1, "val_iou": viou}
        else:
            final_metrics = {"val_accuracy": None, "val_f1": None, "val_iou": None}
        save_checkpoint(
            model, checkpoint_path, train_config=config,
            extra={"epoch": config.epochs, **final_metrics},
        )
        if best_state is not None:
            best_model = UNet(model.config)
            best_model.load_state_dict(best_state)
            root, ext = os.path.splitext(checkpoint_path)
            save_checkpoint(
                best_model,
                root + ".best" + (ext or ".pt"),
                train_config=config,
                extra={"epoch": history.best_epoch, **best_metrics},
            )
    return model, history


def save_checkpoint(
    model: UNet,
    path: str | os.PathLike,
    train_config: TrainConfig | None = None,
    extra: dict | None = None,
) -> None:
    """Weights file plus a sidecar JSON with configs and evaluation numbers."""
    path = os.fspath(path)
    torch.save(model.state_dict(), path)
    meta = {
        "unet": asdict(model.config),
        "train": asdict(train_config) if train_config else None,
    }
    if extra:
        meta.update(extra)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)


def load_checkpoint(path: str | os.PathLike) -> tuple[UNet, dict]:
    path = os.fspath(path)
    with open(path + ".json", encoding="utf-8") as fh:
        meta = json.load(fh)
    model = UNet(UNetConfig(**meta["unet"]))
    model.load_state_dict(torch.load(path, weights_only=True))
    model.eval()
    return model, meta


@torch.no_grad()
def predict_probabilities(model: UNet, image: np.ndarray) -> np.ndarray:
    """Raw sigmoid output resized back to the input resolution (bilinear)."""
    model.eval()
    h, w = image.shape[:2]
    if model.config.in_channels == 1:
        image = raster.to_grayscale(image)
    resized, _ = raster.resize_pair(image, None, model.config.input_side)
    probs = model(torch.from_numpy(resized.astype(np.float32))[None, None])[0, 0]
    return raster.resize_image(probs.numpy().astype(np.float64).clip(0, 1), w, h)


@torch.no_grad()
def predict_mask(model: UNet, image: np.ndarray) -> np.ndarray:
    """Threshold at 0.5 (>= is foreground), resize back nearest-neighbor,
    keep the largest component and fill interior pores."""
    model.eval()
    h, w = image.shape[:2]
    gray = raster.to_grayscale(image) if model.config.in_channels == 1 else image
    resized, _ = raster.resize_pair(gray, None, model.config.input_side)
    probs = model(torch.from_numpy(resized.astype(np.float32))[None, None])[0, 0]
    small = (probs >= 0.5).numpy()
    mask = raster.resize_mask(small, w, h)
    if not mask.any():
        return mask
    return imageops.fill_holes(imageops.largest_component(mask))


@dataclass(frozen=True)
class GridCell:
    batch_size: int
    learning_rate: float
    val_accuracy: float
    val_f1: float
    diverged: bool = False


def grid_search(
    train_pairs,
    val_pairs,
    unet_config: UNetConfig,
    epochs: int,
    batch_sizes: tuple[int, ...] = (8, 16, 32),
    learning_rates: tuple[float, ...] = (1e-5, 1e-4, 1e-3),
    base_seed: int = 0,
    make_train_config=None,
) -> list[GridCell]:
    """One training run per (batch size, learning rate) combination.

    Each cell gets a fresh seed-derived initialization. Divergent cells
    (non-finite loss) are recorded with zero scores instead of aborting the
    grid. Rows come back sorted by validation F1, descending.
    """
    if make_train_config is None:

        def make_train_config(batch, lr):
            return TrainConfig(batch_size=batch, learning_rate=lr, epochs=epochs)

    cells = []
    for bi, batch in enumerate(batch_sizes):
        for li, lr in enumerate(learning_rates):
            seed = int(np.random.SeedSequence([base_seed, bi, li]).generate_state(1)[0])
            model = build(unet_config, seed=seed)
            config = make_train_config(batch, lr)
            try:
                model, history = train(model, train_pairs, val_pairs, config)
                cells.append(
                    GridCell(batch, lr, history.val_accuracy[-1], history.val_f1[-1])
                )
            except TrainingDiverged:
                cells.append(GridCell(batch, lr, 0.0, 0.0, diverged=True))
    return sorted(cells, key=lambda c: c.val_f1, reverse=True)
