"""Dehazing: haze synthesis, transmission estimation, recovery and metrics.

Image model: ``I_c = J_c * t + A_c * (1 - t)``. Transmission maps are
clamped to ``[T_MIN, 1]`` before recovery. The dark-channel prior (DCP)
helpers are the baseline the learned model is compared with.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .models import NetworkSpec, ParamStore, check_params, forward

T_MIN = 0.1
PSNR_CAP = 99.0
DCP_OMEGA = 0.95
DCP_WINDOW = 15

MAGIC = b"FPCH"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBHIHH")  # magic, version, dtype code, reserved, count, channels, size
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


class DatasetFormatError(ValueError):
    pass


def _airlight(A, channels: int = 3) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64).reshape(-1)
    if A.size == 1:
        A = np.repeat(A, channels)
    if A.size != channels:
        raise ValueError(f"airlight needs 1 or {channels} values, got {A.size}")
    return A


def synthesize_hazy_patch(J, t: float, A) -> np.ndarray:
    """``I = J t + A (1 - t)`` for a scalar ``t`` in ``(0, 1]``."""
    if not 0 < t <= 1:
        raise ValueError(f"transmission must be in (0, 1], got {t}")
    J = np.asarray(J, dtype=np.float64)
    A = _airlight(A, J.shape[0])
    return J * t + A[:, None, None] * (1.0 - t)


def synthesize_hazy_image(J, t_map, A) -> np.ndarray:
    """Per-pixel version of :func:`synthesize_hazy_patch`."""
    J = np.asarray(J, dtype=np.float64)
    t = np.asarray(t_map, dtype=np.float64)
    if np.any(t <= 0) or np.any(t > 1):
        raise ValueError("transmission values must be in (0, 1]")
    A = _airlight(A, J.shape[0])[:, None, None]
    return J * t + A * (1.0 - t)


def recover_clear(I, t_map, A, t_min: float = T_MIN) -> np.ndarray:
    """``J = (I - A) / max(t, t_min) + A``; not clipped (clip on export)."""
    I = np.asarray(I, dtype=np.float64)
    A = _airlight(A, I.shape[0])[:, None, None]
    if np.any(A <= 0):
        raise ValueError("airlight must be positive")
    t = np.maximum(np.asarray(t_map, dtype=np.float64), t_min)
    return (I - A) / t + A


def predict_transmission(spec: NetworkSpec, params: ParamStore, patch) -> float | np.ndarray:
    """Network transmission for one ``(3, 16, 16)`` patch or a batch of them."""
    if len(spec.outputs) != 1:
        raise ValueError(f"{spec.name} has {len(spec.outputs)} outputs; a transmission model needs 1")
    out = forward(spec, params, patch)
    return float(out[0]) if out.ndim == 1 else out[:, 0]


def window_starts(size: int, patch: int, stride: int) -> list[int]:
    """Window offsets along one axis; the last window is flush with the edge."""
    if size < patch:
        raise ValueError(f"image side {size} smaller than patch {patch}")
    starts = list(range(0, size - patch + 1, stride))
    if starts[-1] != size - patch:
        starts.append(size - patch)
    return starts


def coverage(shape, patch: int = 16, stride: int = 8) -> np.ndarray:
    """How many windows cover each pixel."""
    h, w = shape
    rows, cols = window_starts(h, patch, stride), window_starts(w, patch, stride)
    count = np.zeros((h, w))
    for r in rows:
        for c in cols:
            count[r:r + patch, c:c + patch] += 1
    return count


def transmission_map(image, spec: NetworkSpec, params: ParamStore, patch: int = 16, stride: int = 8,
                     t_min: float = T_MIN, batch: int = 512) -> np.ndarray:
    """Per-pixel mean of the predictions of every window covering the pixel."""
    image = np.asarray(image, dtype=np.float64)
    check_params(spec, params)
    if tuple(spec.input_shape) != (image.shape[0], patch, patch):
        raise ValueError(f"model input {spec.input_shape} does not match {image.shape[0]}x{patch}x{patch} windows")
    _, h, w = image.shape
    rows, cols = window_starts(h, patch, stride), window_starts(w, patch, stride)
    where = [(r, c) for r in rows for c in cols]
    preds = np.empty(len(where))
    for i in range(0, len(where), batch):
        chunk = np.stack([image[:, r:r + patch, c:c + patch] for r, c in where[i:i + batch]])
        preds[i:i + len(chunk)] = predict_transmission(spec, params, chunk)
    total = np.zeros((h, w))
    count = np.zeros((h, w))
    for (r, c), p in zip(where, preds):
        total[r:r + patch, c:c + patch] += p
        count[r:r + patch, c:c + patch] += 1
    return np.clip(total / count, t_min, 1.0)


def dark_channel(I, window: int = DCP_WINDOW) -> np.ndarray:
    """Channel minimum followed by a ``window`` square local minimum (edges replicated)."""
    I = np.asarray(I, dtype=np.float64)
    return ndimage.minimum_filter(I.min(axis=0), size=window, mode="nearest")


def estimate_atmospheric_light(I, fraction: float = 0.001, window: int = DCP_WINDOW) -> np.ndarray:
    """Per-channel maximum over the brightest ``fraction`` of the dark channel.

    Every pixel tied with the cut-off value is a candidate too.
    """
    I = np.asarray(I, dtype=np.float64)
    dark = dark_channel(I, window).reshape(-1)
    n = max(1, math.ceil(fraction * dark.size))
    cutoff = np.partition(dark, dark.size - n)[dark.size - n]
    cand = dark >= cutoff
    A = I.reshape(I.shape[0], -1)[:, cand].max(axis=1)
    return np.maximum(A, 1e-6)


def dcp_transmission(I, A, omega: float = DCP_OMEGA, window: int = DCP_WINDOW,
                     t_min: float = T_MIN) -> np.ndarray:
    """``t = 1 - omega * dark_channel(I / A)``, clamped to ``[t_min, 1]``."""
    I = np.asarray(I, dtype=np.float64)
    A = _airlight(A, I.shape[0])
    if np.any(A <= 0):
        raise ValueError("airlight must be positive")
    t = 1.0 - omega * dark_channel(I / A[:, None, None], window)
    return np.clip(t, t_min, 1.0)


def dcp_patch_transmission(patches, A, omega: float = DCP_OMEGA, t_min: float = T_MIN) -> np.ndarray:
    """DCP estimate for whole patches: the window is the patch itself.

    ``patches`` is ``(N, C, H, W)``; ``A`` is ``(N, C)`` or broadcastable.
    """
    patches = np.asarray(patches, dtype=np.float64)
    A = np.broadcast_to(np.asarray(A, dtype=np.float64), patches.shape[:2])
    ratio = patches / A[:, :, None, None]
    t = 1.0 - omega * ratio.reshape(len(patches), -1).min(axis=1)
    return np.clip(t, t_min, 1.0)


def dcp_dehaze(I, omega: float = DCP_OMEGA, window: int = DCP_WINDOW, t_min: float = T_MIN):
    """Baseline pipeline. Returns ``(J, t, A)``."""
    A = estimate_atmospheric_light(I, window=window)
    t = dcp_transmission(I, A, omega, window, t_min)
    return recover_clear(I, t, A, t_min), t, A


def dehaze(I, spec: NetworkSpec, params: ParamStore, t_min: float = T_MIN, stride: int = 8):
    """Learned pipeline. Returns ``(J, t, A)``."""
    A = estimate_atmospheric_light(I)
    t = transmission_map(I, spec, params, patch=spec.input_shape[1], stride=stride, t_min=t_min)
    return recover_clear(I, t, A, t_min), t, A


def psnr(a, b) -> float:
    """``10 log10(1 / MSE)`` in dB, capped at 99 dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return psnr_from_mse(float(np.mean((a - b) ** 2)))


def psnr_from_mse(mse: float) -> float:
    """PSNR in dB for a data range of 1, capped at 99 dB."""
    if mse < 1e-10:
        return PSNR_CAP
    return min(PSNR_CAP, -10.0 * math.log10(mse))


def ssim(a, b, sigma: float = 1.5, radius: int = 5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Gaussian-window SSIM averaged over channels, data range 1.

    Statistics use population (not sample) covariance and pixels within
    ``radius`` of the border are excluded from the mean.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    if min(a.shape[1:]) <= 2 * radius:
        raise ValueError(f"images must be larger than {2 * radius + 1} pixels per side")
    c1, c2 = k1 ** 2, k2 ** 2
    truncate = radius / sigma

    def blur(x):
        return ndimage.gaussian_filter(x, sigma, truncate=truncate)

    vals = []
    for x, y in zip(a, b):
        mx, my = blur(x), blur(y)
        vx = blur(x * x) - mx * mx
        vy = blur(y * y) - my * my
        cov = blur(x * y) - mx * my
        s = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        vals.append(s[radius:-radius, radius:-radius].mean())
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Synthetic patch dataset


@dataclass
class DHDataset:
    """Hazy patches with their ground truth.

    ``split`` holds 0 for training records and 1 for held-out records.
    """

    patches: np.ndarray  # (N, C, S, S)
    t: np.ndarray  # (N,)
    A: np.ndarray  # (N, C)
    split: np.ndarray  # (N,) uint8

    def __len__(self) -> int:
        return len(self.t)

    def subset(self, which: str) -> "DHDataset":
        code = {"train": 0, "test": 1}[which]
        m = self.split == code
        return DHDataset(self.patches[m], self.t[m], self.A[m], self.split[m])

    def equals(self, other: "DHDataset") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("patches", "t", "A", "split"))


def synthesize_dh_dataset(clear, n_patches: int = 30000, t_range=(0.1, 1.0), A_range=(0.7, 1.0),
                          seed: int = 0, patch: int = 16, test_fraction: float = 0.2) -> DHDataset:
    """Random clear patches hazed with a uniform ``t`` each and a gray ``A`` per image.

    ``clear`` is a list of ``(name, image)`` or a directory of ``*.ppm``.
    Patches are spread evenly over the images; the split is by image.
    """
    from .color_constancy import _load_clear, split_names

    for lo, hi, label in ((*t_range, "t"), (*A_range, "A")):
        if not 0 < lo <= hi <= 1:
            raise ValueError(f"{label} range must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})")
    clear = _load_clear(clear)
    held_out = split_names([n for n, _ in clear], test_fraction, seed)
    per = np.full(len(clear), n_patches // len(clear))
    per[:n_patches % len(clear)] += 1
    c = clear[0][1].shape[0]
    patches = np.empty((n_patches, c, patch, patch))
    ts = np.empty(n_patches)
    As = np.empty((n_patches, c))
    split = np.empty(n_patches, dtype=np.uint8)
    k = 0
    for i, (name, J) in enumerate(clear):
        rng = np.random.default_rng([seed, 13, i])
        _, h, w = J.shape
        if h < patch or w < patch:
            raise ValueError(f"image {name} is smaller than the patch size {patch}")
        A = rng.uniform(*A_range)
        for _ in range(per[i]):
            r = rng.integers(0, h - patch + 1)
            q = rng.integers(0, w - patch + 1)
            t = rng.uniform(*t_range)
            patches[k] = synthesize_hazy_patch(J[:, r:r + patch, q:q + patch], t, A)
            ts[k] = t
            As[k] = A
            split[k] = 1 if name in held_out else 0
            k += 1
    return DHDataset(patches, ts, As, split)


def _record_dtype(c: int, s: int, dt: np.dtype) -> np.dtype:
    return np.dtype([("patch", dt, (c, s, s)), ("t", dt), ("A", dt, (c,)), ("split", "u1")])


def dh_dumps(ds: DHDataset, dtype: str = "float64") -> bytes:
    """Little-endian binary layout.

    Header (16 bytes): magic ``FPCH``, version u8, dtype code u8 (1 f32,
    2 f64), reserved u16, count u32, channels u16, patch size u16. Then
    ``count`` records of ``patch[C][S][S], t, A[C]`` in the chosen float
    type followed by a u8 split flag (0 train, 1 test).
    """
    code = {"float32": 1, "float64": 2}[dtype]
    n, c, s, _ = ds.patches.shape
    rec = np.empty(n, dtype=_record_dtype(c, s, _DTYPES[code]))
    rec["patch"], rec["t"], rec["A"], rec["split"] = ds.patches, ds.t, ds.A, ds.split
    return _HEADER.pack(MAGIC, FORMAT_VERSION, code, 0, n, c, s) + rec.tobytes()


def dh_loads(data: bytes) -> DHDataset:
    if len(data) < _HEADER.size:
        raise DatasetFormatError(f"expected a {_HEADER.size}-byte header, found {len(data)} bytes")
    magic, version, code, _, n, c, s = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DatasetFormatError(f"byte 0: expected magic {MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"byte 4: unsupported version {version}")
    if code not in _DTYPES:
        raise DatasetFormatError(f"byte 5: unknown dtype code {code}")
    dt = _record_dtype(c, s, _DTYPES[code])
    need = n * dt.itemsize
    have = len(data) - _HEADER.size
    if have != need:
        raise DatasetFormatError(f"expected {need} record bytes for {n} records, found {have}")
    rec = np.frombuffer(data, dtype=dt, count=n, offset=_HEADER.size)
    return DHDataset(rec["patch"].astype(np.float64), rec["t"].astype(np.float64),
                     rec["A"].astype(np.float64), rec["split"].copy())


def dh_save(path, ds: DHDataset, dtype: str = "float64") -> None:
    Path(path).write_bytes(dh_dumps(ds, dtype))


def dh_load(path) -> DHDataset:
    return dh_loads(Path(path).read_bytes())


class PatchProvider:
    """Training provider over a pre-generated :class:`DHDataset`."""

    def __init__(self, ds: DHDataset):
        self.ds = ds

    def __len__(self) -> int:
        return len(self.ds)

    def batch(self, indices, rng):
        return self.ds.patches[indices], self.ds.t[indices, None]


def transmission_mse(spec: NetworkSpec, params: ParamStore, ds: DHDataset, batch: int = 1024) -> float:
    preds = np.concatenate([predict_transmission(spec, params, ds.patches[i:i + batch])
                            for i in range(0, len(ds), batch)])
    return float(np.mean((preds - ds.t) ** 2))


def dcp_mse(ds: DHDataset) -> float:
    return float(np.mean((dcp_patch_transmission(ds.patches, ds.A) - ds.t) ** 2))


def smooth_transmission(shape, rng: np.random.Generator, t_range=(0.2, 1.0), sigma: float = 16.0) -> np.ndarray:
    """A random smooth transmission field spanning ``t_range``."""
    field = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="reflect")
    lo, hi = field.min(), field.max()
    field = (field - lo) / (hi - lo) if hi > lo else np.ones(shape)
    return t_range[0] + field * (t_range[1] - t_range[0])


def metrics_csv(rows: dict[str, dict[str, float]]) -> str:
    """``Method, MSE(x10^-2), PSNR, SSIM``; missing values are left blank."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Method", "MSE(x10^-2)", "PSNR", "SSIM"])
    for name, m in rows.items():
        w.writerow([name, *("" if m.get(k) is None else f"{m[k]:.4f}" for k in ("mse_e2", "psnr", "ssim"))])
    return buf.getvalue()
