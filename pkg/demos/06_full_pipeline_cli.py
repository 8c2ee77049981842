"""The whole pipeline through the command line:

synth -> train -> predict -> measure, all at desk scale.
"""

import json
import os
import subprocess
import sys

out_dir = os.path.join(os.path.dirname(__file__), "output", "pipeline")
os.makedirs(out_dir, exist_ok=True)


def run(*args):
    print("$ meltpool", " ".join(args))
    subprocess.run([sys.executable, "-m", "meltpool.cli", *args], check=True)


data = os.path.join(out_dir, "data")
run("synth", "--out-dir", data, "--count", "20", "--side", "96", "--seed", "4")

config = os.path.join(out_dir, "config.json")
with open(config, "w") as fh:
    json.dump({"unet": {"input_side": 96, "base_channels": 12, "levels": 4}}, fh)

ckpt = os.path.join(out_dir, "model.pt")
run("train", "--manifest", os.path.join(data, "manifest.jsonl"), "--out", ckpt,
    "--batch-size", "1", "--lr", "3e-4", "--epochs", "8", "--seed", "3", "--config", config)

test_images = sorted(
    os.path.join(data, f) for f in os.listdir(data)
    if f.endswith(".png") and "mask" not in f
)[-4:]
masks_dir = os.path.join(out_dir, "predicted")
run("predict", "--checkpoint", ckpt, "--out-dir", masks_dir, *test_images)

predicted = sorted(os.path.join(masks_dir, f) for f in os.listdir(masks_dir))
run("measure", "--masks", *predicted, "--scale-um-per-px", "2.0",
    "--out", os.path.join(out_dir, "geometry.csv"),
    "--overlay-dir", os.path.join(out_dir, "overlays"))
print("geometry ->", os.path.join(out_dir, "geometry.csv"))
