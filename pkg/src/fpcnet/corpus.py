"""A small corpus of clear natural photographs for desk-scale experiments.

The photos are the colour images bundled with scikit-image and
scikit-learn (no download needed). Both packages are optional; install
the ``corpus`` extra to use this module.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

PHOTOS = ("astronaut", "chelsea", "coffee", "motorcycle", "rocket", "china", "flower")


def load_photo(name: str) -> np.ndarray:
    """One bundled photo as a ``(3, H, W)`` array in ``[0, 1]``."""
    if name in ("china", "flower"):
        from sklearn.datasets import load_sample_image

        rgb = load_sample_image(f"{name}.jpg")
    elif name == "motorcycle":
        from skimage import data

        rgb = data.stereo_motorcycle()[0]
    else:
        from skimage import data

        rgb = getattr(data, name)()
    rgb = np.asarray(rgb)[..., :3]
    return np.transpose(rgb, (2, 0, 1)).astype(np.float64) / 255.0


def tiles(tile: int = 128, photos=PHOTOS) -> list[tuple[str, np.ndarray]]:
    """Non-overlapping ``tile x tile`` crops of every photo, named ``<photo>_<r>_<c>``."""
    out = []
    for name in photos:
        img = load_photo(name)
        _, h, w = img.shape
        for r in range(h // tile):
            for c in range(w // tile):
                out.append((f"{name}_{r}_{c}", img[:, r * tile:(r + 1) * tile, c * tile:(c + 1) * tile].copy()))
    return out


def write_corpus(directory, tile: int = 128, photos=PHOTOS) -> list[Path]:
    """Write the tiles as 8-bit PPM files into ``directory``."""
    from .netpbm import ppm_write

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, img in tiles(tile, photos):
        path = directory / f"{name}.ppm"
        ppm_write(img, path)
        paths.append(path)
    return paths
