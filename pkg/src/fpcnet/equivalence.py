"""Kernel collapse: k x k convolution + pooling versus a 1x1 convolution.

For an input of ``(2k-1) x (2k-1)`` pixels, a stride-1 k x k convolution
produces ``k x k`` responses; averaging them (the *exact* path) equals a
weighted sum of the input pixels. If the pixels are i.i.d., every k x k
sub-block has the same mean, and the exact output is approximated by the
*collapsed* path: the global pixel mean per channel times the per-channel
kernel sum ``K_c``.

The two paths agree exactly on constant inputs. On other inputs the gap is
reported, never asserted.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .tensor_nn import KernelWeights, avg_pool_forward, conv2d_forward, pointwise_conv_forward

CSV_COLUMNS = ("k", "channels", "trials", "shuffled_mean_diff", "unshuffled_mean_diff",
               "p95_shuffled", "p95_unshuffled")


def _as_kernel(K) -> KernelWeights:
    if isinstance(K, KernelWeights):
        return K
    K = np.asarray(K, dtype=np.float64)
    if K.ndim == 3:
        K = K[None]
    return KernelWeights(K, np.zeros(K.shape[0]))


def collapse_kernel(K) -> np.ndarray:
    """Per-channel kernel sums, shape ``(out, in)``."""
    return _as_kernel(K).weights.sum(axis=(2, 3))


@dataclass
class EquivalenceReport:
    exact_output: np.ndarray
    collapsed_output: np.ndarray
    abs_diff: np.ndarray
    rel_diff: np.ndarray
    meta: dict = field(default_factory=dict)


def exact_output(image, K) -> np.ndarray:
    """Average of the k*k stride-1 responses of kernel ``K`` over ``image``."""
    kw = _as_kernel(K)
    k = kw.kernel[0]
    resp = conv2d_forward(image, KernelWeights(kw.weights, np.zeros(kw.out_channels)))
    return avg_pool_forward(resp, k)[:, 0, 0]


def collapsed_output(image, K) -> np.ndarray:
    """Global pixel mean per channel dotted with the collapsed kernel."""
    kw = _as_kernel(K)
    ones = KernelWeights(collapse_kernel(kw)[:, :, None, None], np.zeros(kw.out_channels))
    resp = pointwise_conv_forward(image, ones)
    return resp.reshape(resp.shape[0], -1).mean(axis=1)


def verify_equivalence(image, K, **meta) -> EquivalenceReport:
    """Compare both paths on a ``C x (2k-1) x (2k-1)`` input and a square ``k x k`` kernel."""
    image = np.asarray(image, dtype=np.float64)
    kw = _as_kernel(K)
    kh, kk = kw.kernel
    if kh != kk:
        raise ValueError(f"kernel must be square, got {kh}x{kk}")
    side = 2 * kh - 1
    if image.ndim != 3 or image.shape[1:] != (side, side):
        raise ValueError(f"input must be C x {side} x {side} for k={kh}, got {image.shape}")
    if image.shape[0] != kw.in_channels:
        raise ValueError(f"input has {image.shape[0]} channels, kernel expects {kw.in_channels}")
    ex = exact_output(image, kw)
    co = collapsed_output(image, kw)
    diff = np.abs(ex - co)
    scale = np.maximum(np.abs(ex), np.abs(co))
    rel = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)
    meta.setdefault("k", kh)
    meta.setdefault("channels", image.shape[0])
    return EquivalenceReport(ex, co, diff, rel, meta)


def paired_trials(image, k: int, trials: int, seed: int = 0):
    """Abs diffs on ``trials`` random patches, unshuffled and with their pixels shuffled.

    Each trial uses one random ``(2k-1)``-square patch, one kernel drawn
    from U(-1, 1), and one permutation of the patch's pixels; the same
    kernel is applied to both versions of the patch.

    Returns ``(shuffled_diffs, unshuffled_diffs)``.
    """
    image = np.asarray(image, dtype=np.float64)
    c, h, w = image.shape
    side = 2 * k - 1
    if k < 2:
        raise ValueError("k must be >= 2")
    if side > h or side > w:
        raise ValueError(f"image {h}x{w} too small for k={k}")
    shuffled = np.empty(trials)
    plain = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, k, t])
        r = rng.integers(0, h - side + 1)
        q = rng.integers(0, w - side + 1)
        patch = image[:, r:r + side, q:q + side]
        K = rng.uniform(-1.0, 1.0, size=(1, c, k, k))
        perm = rng.permutation(side * side)
        mixed = patch.reshape(c, -1)[:, perm].reshape(patch.shape)
        plain[t] = verify_equivalence(patch, K).abs_diff[0]
        shuffled[t] = verify_equivalence(mixed, K).abs_diff[0]
    return shuffled, plain


def sweep_equivalence(image, ks=(2, 3), trials: int = 1000, seed: int = 0) -> list[dict]:
    """One row per ``k`` with mean and 95th-percentile diffs for shuffled vs unshuffled patches."""
    image = np.asarray(image, dtype=np.float64)
    rows = []
    for k in ks:
        sh, pl = paired_trials(image, k, trials, seed)
        rows.append({
            "k": int(k),
            "channels": int(image.shape[0]),
            "trials": int(trials),
            "shuffled_mean_diff": float(sh.mean()),
            "unshuffled_mean_diff": float(pl.mean()),
            "p95_shuffled": float(np.percentile(sh, 95)),
            "p95_unshuffled": float(np.percentile(pl, 95)),
        })
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
