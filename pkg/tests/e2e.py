"""Scripted end-to-end CLI run on tiny inputs, shared by the CLI tests."""

import hashlib
from pathlib import Path

import numpy as np

from fpcnet import cli
from fpcnet.dehazing import smooth_transmission, synthesize_hazy_image
from fpcnet.netpbm import ppm_write


def make_inputs(root: Path, images) -> None:
    """Clear images, plus hazy/clear pairs for ``eval-dh --pairs``."""
    clear = root / "clear"
    clear.mkdir(parents=True)
    for i, img in enumerate(images):
        ppm_write(img, clear / f"img{i}.ppm")
    rng = np.random.default_rng(0)
    for sub in ("hazy", "clear"):
        (root / "pairs" / sub).mkdir(parents=True)
    for i, img in enumerate(images[:2]):
        t = smooth_transmission(img.shape[1:], rng, (0.3, 0.9), sigma=8)
        ppm_write(synthesize_hazy_image(img, t, 0.9), root / "pairs" / "hazy" / f"p{i}.ppm")
        ppm_write(img, root / "pairs" / "clear" / f"p{i}.ppm")


def commands(root: Path) -> list[list[str]]:
    r = str(root)
    return [
        ["count", "--model", "fpcnet-dh", "--out", f"{r}/count.txt"],
        ["verify-equivalence", "--image", f"{r}/clear/img0.ppm", "--k", "3", "--trials", "50", "--seed", "7",
         "--out", f"{r}/eq.csv"],
        ["synth-cc", "--clear", f"{r}/clear", "--out", f"{r}/cc", "--casts-per-image", "2"],
        ["train-cc", "--data", f"{r}/cc", "--out", f"{r}/cc_model.json", "--width-div", "8",
         "--iterations", "4", "--batch-size", "4"],
        ["eval-cc", "--data", f"{r}/cc", "--model", f"{r}/cc_model.json", "--ensembles", "4",
         "--out", f"{r}/cc_metrics.csv"],
        ["correct", "--in", f"{r}/cc/images/img0_c0.ppm", "--model", f"{r}/cc_model.json", "--ensembles", "4",
         "--out", f"{r}/corrected.ppm"],
        ["synth-dh", "--clear", f"{r}/clear", "--patches", "200", "--out", f"{r}/dh.bin"],
        ["train-dh", "--data", f"{r}/dh.bin", "--out", f"{r}/dh_model.json", "--iterations", "20",
         "--batch-size", "16"],
        ["eval-dh", "--model", f"{r}/dh_model.json", "--data", f"{r}/dh.bin", "--pairs", f"{r}/pairs",
         "--out", f"{r}/dh_metrics.csv"],
        ["dehaze", "--in", f"{r}/pairs/hazy/p0.ppm", "--model", f"{r}/dh_model.json", "--out", f"{r}/dehazed.ppm"],
        ["inspect-cc", "--model", f"{r}/cc_model.json", "--data", f"{r}/cc", "--ensembles", "2", "--bins", "8",
         "--out-prefix", f"{r}/cc_hist"],
        ["inspect-dh", "--model", f"{r}/dh_model.json", "--clear", f"{r}/clear", "--bins", "8",
         "--out-prefix", f"{r}/dh_hist"],
        ["gradcheck", "--model", "fpcnet-dh", "--samples", "20", "--out", f"{r}/grad.json"],
    ]


def run_all(root: Path, images) -> dict[str, str]:
    """Run every command with ``--threads 1``; return sha256 of each output file."""
    make_inputs(root, images)
    for argv in commands(root):
        code = cli.main(argv + ["--threads", "1", "--run-json", f"{root}/{argv[0]}.run.json"])
        if code != 0:
            raise RuntimeError(f"{argv[0]} exited with {code}")
    inputs = {root / "clear", root / "pairs"}
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and not any(d in p.parents for d in inputs):
            # sidecars embed the run directory; hash them with it removed
            data = p.read_bytes().replace(str(root).encode(), b"ROOT")
            out[str(p.relative_to(root))] = hashlib.sha256(data).hexdigest()
    return out
