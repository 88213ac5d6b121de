"""Pixel-ensembles: shuffled pixel blocks that keep their source positions.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``. Every ensemble ``i`` drawn with seed ``s`` uses its own
stream ``default_rng([s, i])``, so ensembles can be generated in any order
or in parallel without changing the result.

Several ensembles from one image are drawn independently: each is a
uniform sample without replacement of ``h*w`` source pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PixelEnsemble:
    """A ``(C, h, w)`` block of pixels and where each one came from.

    ``permutation[k]`` is the ``(row, col)`` in the source image of the
    pixel at flat position ``k`` of the block.
    """

    pixels: np.ndarray
    permutation: np.ndarray
    source_shape: tuple[int, int]

    @property
    def size(self) -> int:
        return self.pixels.shape[1] * self.pixels.shape[2]

    def scatter(self, values=None) -> np.ndarray:
        """Place ensemble values back at their source positions.

        With ``values=None`` the pixels themselves are scattered into a
        ``(C, H, W)`` array; otherwise ``values`` (one per ensemble
        position) go into an ``(H, W)`` map. Unsampled positions are 0.
        """
        rows, cols = self.permutation[:, 0], self.permutation[:, 1]
        if values is None:
            c = self.pixels.shape[0]
            out = np.zeros((c,) + tuple(self.source_shape))
            out[:, rows, cols] = self.pixels.reshape(c, -1)
            return out
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size != self.size:
            raise ValueError(f"{values.size} values for an ensemble of {self.size} pixels")
        out = np.zeros(tuple(self.source_shape))
        np.add.at(out, (rows, cols), values)
        return out

    def gather(self, source_map) -> np.ndarray:
        """Inverse of :meth:`scatter`: read a per-source-pixel map at the ensemble positions."""
        source_map = np.asarray(source_map)
        rows, cols = self.permutation[:, 0], self.permutation[:, 1]
        return source_map[..., rows, cols].reshape(source_map.shape[:-2] + self.pixels.shape[1:])


@dataclass
class SubsetStats:
    channel_means: np.ndarray
    subset_size: int


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    """The generator used for ensemble ``index`` under ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


def _check_image(image) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.size == 0:
        raise ValueError(f"expected a nonempty (C, H, W) image, got shape {image.shape}")
    return image


def _draw(image: np.ndarray, positions: np.ndarray, size: tuple[int, int]) -> PixelEnsemble:
    c, h, w = image.shape
    rows, cols = np.divmod(positions, w)
    pixels = image.reshape(c, -1)[:, positions].reshape(c, *size)
    return PixelEnsemble(pixels, np.stack([rows, cols], axis=1).astype(np.intp), (h, w))


def shuffle_image(image, seed: int) -> PixelEnsemble:
    """Randomly permute all pixels of ``image`` (shape is kept)."""
    image = _check_image(image)
    _, h, w = image.shape
    positions = rng_for(seed, 0).permutation(h * w)
    return _draw(image, positions, (h, w))


def sample_ensemble(image, size: tuple[int, int], rng: np.random.Generator) -> PixelEnsemble:
    image = _check_image(image)
    _, h, w = image.shape
    eh, ew = size
    if eh * ew > h * w or eh < 1 or ew < 1:
        raise ValueError(f"ensemble size {eh}x{ew} exceeds image of {h}x{w} pixels")
    positions = rng.choice(h * w, size=eh * ew, replace=False)
    return _draw(image, positions, (eh, ew))


def sample_ensembles(image, count: int, size: tuple[int, int] = (32, 32),
                     seed: int = 0) -> list[PixelEnsemble]:
    """``count`` independent ensembles of ``size`` pixels, each without replacement."""
    return [sample_ensemble(image, size, rng_for(seed, i)) for i in range(count)]


def _block_shape(subset_size, eh, ew) -> tuple[int, int]:
    if isinstance(subset_size, (tuple, list)):
        bh, bw = subset_size
    else:
        n = int(subset_size)
        side = math.isqrt(n)
        if side * side == n and side <= min(eh, ew):
            bh, bw = side, side
        else:
            # Most square factorisation that fits the ensemble.
            candidates = [(a, n // a) for a in range(1, n + 1) if n % a == 0]
            candidates = [(a, b) for a, b in candidates if a <= eh and b <= ew]
            if not candidates:
                raise ValueError(f"no {n}-pixel block fits a {eh}x{ew} ensemble")
            bh, bw = min(candidates, key=lambda ab: abs(ab[0] - ab[1]))
    if bh > eh or bw > ew or bh < 1 or bw < 1:
        raise ValueError(f"block {bh}x{bw} does not fit a {eh}x{ew} ensemble")
    return bh, bw


def subset_mean_check(e: PixelEnsemble, subset_size, trials: int = 100,
                      seed: int = 0) -> np.ndarray:
    """Largest per-channel gap between a random contiguous sub-block's mean and the ensemble mean.

    ``subset_size`` is a pixel count (square blocks when it is a perfect
    square) or an explicit ``(rows, cols)`` block shape.
    """
    c, eh, ew = e.pixels.shape
    bh, bw = _block_shape(subset_size, eh, ew)
    full = e.pixels.reshape(c, -1).mean(axis=1)
    rng = np.random.default_rng(seed)
    worst = np.zeros(c)
    for _ in range(trials):
        r = rng.integers(0, eh - bh + 1)
        q = rng.integers(0, ew - bw + 1)
        sub = e.pixels[:, r:r + bh, q:q + bw].reshape(c, -1).mean(axis=1)
        worst = np.maximum(worst, np.abs(sub - full))
    return worst


def subset_stats(e: PixelEnsemble, rows: slice, cols: slice) -> SubsetStats:
    block = e.pixels[:, rows, cols]
    return SubsetStats(block.reshape(block.shape[0], -1).mean(axis=1),
                       block.shape[1] * block.shape[2])


def edge_augment(image) -> np.ndarray:
    """Per-channel gradient magnitude ``sqrt(dx**2 + dy**2)``.

    Forward differences; the last row/column repeats its neighbour, so the
    difference there is zero.
    """
    image = _check_image(image)
    if image.shape[1] < 2 or image.shape[2] < 2:
        raise ValueError("edge_augment needs at least 2x2 pixels")
    dx = np.zeros_like(image)
    dy = np.zeros_like(image)
    dx[:, :, :-1] = image[:, :, 1:] - image[:, :, :-1]
    dy[:, :-1, :] = image[:, 1:, :] - image[:, :-1, :]
    return np.sqrt(dx * dx + dy * dy)
