import math

import numpy as np
import pytest
import torch

from meltpool import dataset, unet


MINI = unet.UNetConfig(input_side=16, base_channels=2, levels=2)


def synth_pairs(n, side=32, seed=0):
    spec = dataset.SyntheticSpec(
        count=n, side=side, radius_range=(6, 12), center_ratio_range=(0.0, 0.5),
        noise_level=0.02, texture_amplitude=0.03, seed=seed,
    )
    return [(img, mask) for img, mask, _ in dataset.synth_generate(spec)]


def test_config_invariants():
    cfg = unet.UNetConfig()
    assert cfg.bottleneck_channels == 1024
    with pytest.raises(ValueError):
        unet.UNetConfig(input_side=100)  # not divisible by 16


def test_default_channel_ladder():
    model = unet.build(unet.UNetConfig(), seed=0)
    encoder_out = [enc[2].out_channels for enc in model.encoders]
    assert encoder_out == [64, 128, 256, 512]
    assert model.bottleneck[2].out_channels == 1024
    assert [dec[2].out_channels for dec in model.decoders] == [512, 256, 128, 64]
    head_out = [layer.out_channels for layer in model.head if hasattr(layer, "out_channels")]
    assert head_out == [2, 1]


def test_default_forward_shape_and_range():
    model = unet.build(unet.UNetConfig(), seed=0)
    with torch.no_grad():
        out = model(torch.rand(1, 1, 512, 512))
    assert out.shape == (1, 1, 512, 512)
    assert out.min() > 0.0 and out.max() < 1.0


def test_encoder_feature_map_sides():
    model = unet.build(unet.UNetConfig(), seed=0)
    sides = [512]
    x = torch.rand(1, 1, 512, 512)
    with torch.no_grad():
        for enc in model.encoders:
            x = model.pool(enc(x))
            sides.append(x.shape[-1])
    assert sides == [512, 256, 128, 64, 32]


def test_shape_law_other_sizes():
    for side in (32, 64):
        cfg = unet.UNetConfig(input_side=side, base_channels=4, levels=3)
        model = unet.build(cfg, seed=0)
        with torch.no_grad():
            out = model(torch.rand(2, 1, side, side))
        assert out.shape == (2, 1, side, side)


def test_transpose_up_mode():
    cfg = unet.UNetConfig(input_side=32, base_channels=4, levels=2, up_mode="transpose")
    model = unet.build(cfg, seed=0)
    with torch.no_grad():
        out = model(torch.rand(1, 1, 32, 32))
    assert out.shape == (1, 1, 32, 32)


# ----------------------------------------------------------------- bce loss


def test_bce_perfect_prediction():
    labels = torch.tensor([[0.0, 1.0], [1.0, 0.0]])
    probs = labels.clone()
    assert unet.bce_loss(probs, labels).item() <= 1.3e-7


def test_bce_half_is_ln2():
    labels = (torch.rand(8, 8) > 0.5).float()
    probs = torch.full((8, 8), 0.5)
    assert unet.bce_loss(probs, labels).item() == pytest.approx(math.log(2), rel=1e-6)


def test_bce_logit_example():
    g, loss = unet.bce_terms(1.0, 0.0)
    assert g == pytest.approx(0.7311, abs=1e-4)
    assert loss == pytest.approx(1.3133, abs=1e-4)


def test_bce_matches_logits_path():
    rng = torch.Generator().manual_seed(0)
    logits = torch.randn(4, 4, generator=rng) * 3
    labels = (torch.rand(4, 4, generator=rng) > 0.5).float()
    a = unet.bce_loss(torch.sigmoid(logits), labels).item()
    b = torch.nn.functional.binary_cross_entropy_with_logits(logits, labels).item()
    assert a == pytest.approx(b, rel=1e-5)


def test_bce_shape_mismatch():
    with pytest.raises(ValueError):
        unet.bce_loss(torch.rand(2, 2), torch.rand(3, 3))


# ----------------------------------------------------------------- training


def test_train_zero_epochs_is_noop():
    pairs = synth_pairs(2)
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)
    model = unet.build(cfg, seed=0)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    model, history = unet.train(model, pairs, [], unet.TrainConfig(epochs=0))
    assert history.train_loss == []
    for k, v in model.state_dict().items():
        assert torch.equal(before[k], v)


def test_train_deterministic_given_seed():
    pairs = synth_pairs(4)
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)
    runs = []
    for _ in range(2):
        model = unet.build(cfg, seed=9)
        _, history = unet.train(
            model, pairs[:3], pairs[3:], unet.TrainConfig(batch_size=2, epochs=3, seed=4)
        )
        runs.append(history)
    assert runs[0].train_loss == runs[1].train_loss
    assert runs[0].val_f1 == runs[1].val_f1


def test_train_empty_dataset_rejected():
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)
    with pytest.raises(ValueError):
        unet.train(unet.build(cfg), [], [], unet.TrainConfig(epochs=1))


def test_train_divergence_detected():
    pairs = synth_pairs(2)
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)
    model = unet.build(cfg, seed=0)
    with pytest.raises(unet.TrainingDiverged):
        unet.train(
            model, pairs, [],
            unet.TrainConfig(batch_size=1, learning_rate=1e-3, epochs=3, init_scale=1e18),
        )


def test_checkpoint_round_trip(tmp_path):
    pairs = synth_pairs(3)
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)
    model = unet.build(cfg, seed=0)
    path = tmp_path / "model.pt"
    model, history = unet.train(
        model, pairs[:2], pairs[2:], unet.TrainConfig(batch_size=1, epochs=2),
        checkpoint_path=str(path),
    )
    loaded, meta = unet.load_checkpoint(str(path))
    assert meta["unet"]["base_channels"] == 2
    assert meta["train"]["epochs"] == 2
    for key in ("val_accuracy", "val_f1", "val_iou"):
        assert key in meta and meta[key] is not None
    with torch.no_grad():
        x = torch.rand(1, 1, 32, 32)
        assert torch.equal(model(x), loaded(x))
    assert (tmp_path / "model.best.pt").exists()
    assert (tmp_path / "model.best.pt.json").exists()


def test_predict_full_frame_with_stub():
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)
    model = unet.build(cfg, seed=0)
    with torch.no_grad():
        model.head[2].weight.zero_()
        model.head[2].bias.fill_(10.0)  # probability ~1 everywhere
    mask = unet.predict_mask(model, np.full((48, 48), 0.5))
    assert mask.all()


def test_predict_threshold_is_ge():
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)
    model = unet.build(cfg, seed=0)
    with torch.no_grad():
        model.head[2].weight.zero_()
        model.head[2].bias.zero_()  # probability exactly 0.5
    mask = unet.predict_mask(model, np.full((32, 32), 0.5))
    assert mask.all()


def test_predict_resizes_back():
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)
    model = unet.build(cfg, seed=0)
    mask = unet.predict_mask(model, np.full((70, 90), 0.5))
    assert mask.shape == (70, 90)


# ------------------------------------------------------------ gradient check


def test_gradient_check_miniature_network():
    torch.manual_seed(3)
    model = unet.build(MINI, seed=3).double()
    # perturb away from the structured zero-init so every path carries signal
    with torch.no_grad():
        for p in model.parameters():
            p.add_(torch.randn_like(p) * 0.05)
    gen = torch.Generator().manual_seed(11)
    x = torch.rand(2, 1, 16, 16, dtype=torch.float64, generator=gen)
    z = (torch.rand(2, 1, 16, 16, generator=gen) > 0.5).double()

    def loss_fn():
        return unet.bce_loss(model(x), z)

    grads = torch.autograd.grad(loss_fn(), list(model.parameters()))
    eps = 1e-6
    worst = 0.0
    with torch.no_grad():
        for p, g in zip(model.parameters(), grads):
            flat, gflat = p.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = loss_fn().item()
                flat[i] = orig - eps
                down = loss_fn().item()
                flat[i] = orig
                fd = (up - down) / (2 * eps)
                rel = abs(gflat[i].item() - fd) / max(abs(gflat[i].item()), abs(fd), 1e-6)
                worst = max(worst, rel)
    assert worst <= 1e-3


# ---------------------------------------------------------------- grid search


def test_grid_search_dimensions_and_divergence():
    pairs = synth_pairs(4)
    cfg = unet.UNetConfig(input_side=32, base_channels=2, levels=2)

    def configs(batch, lr):
        scale = 1e18 if (batch, lr) == (2, 1e-3) else 1.0
        return unet.TrainConfig(batch_size=batch, learning_rate=lr, epochs=1, init_scale=scale)

    cells = unet.grid_search(
        pairs[:3], pairs[3:], cfg, epochs=1,
        batch_sizes=(1, 2), learning_rates=(1e-4, 1e-3),
        make_train_config=configs,
    )
    assert len(cells) == 4
    diverged = [c for c in cells if c.diverged]
    assert len(diverged) == 1
    assert diverged[0].val_accuracy == 0.0 and diverged[0].val_f1 == 0.0
    f1s = [c.val_f1 for c in cells]
    assert f1s == sorted(f1s, reverse=True)
