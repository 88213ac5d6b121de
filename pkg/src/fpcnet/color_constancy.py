"""Colour constancy: casts, correction, illuminant estimation and metrics.

Image model: ``I_c = J_c * E_c``. Illuminants are stored as strictly
positive 3-vectors with unit L2 norm. Networks regress the normalised
illuminant directly (MSE on the 3-vector) and are evaluated by angular
error.

Statistics conventions: the median is the lower median for even counts,
quartiles are nearest-rank, and the 95% quantile is nearest-rank too.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import edge_augment, rng_for, sample_ensemble, sample_ensembles
from .models import NetworkSpec, ParamStore, check_params, forward

METRIC_COLUMNS = ("Mean", "Med.", "Tri.", "Best 25%", "Worst 25%", "95% Quant.")
POSITIVE_FLOOR = 1e-6


class IlluminantError(ValueError):
    pass


def normalize_illuminant(E) -> np.ndarray:
    E = np.asarray(E, dtype=np.float64).reshape(-1)
    if E.shape != (3,):
        raise IlluminantError(f"illuminant must have 3 components, got {E.shape}")
    if np.any(E <= 0) or not np.all(np.isfinite(E)):
        raise IlluminantError(f"illuminant components must be positive and finite, got {E}")
    return E / np.linalg.norm(E)


def _check_E(E) -> np.ndarray:
    E = np.asarray(E, dtype=np.float64).reshape(-1)
    if E.shape != (3,) or np.any(E <= 0):
        raise IlluminantError(f"illuminant must be 3 positive values, got {E}")
    return E


def apply_cast(J, E) -> np.ndarray:
    """``I_c = J_c * E_c`` (no clipping)."""
    E = _check_E(E)
    return np.asarray(J, dtype=np.float64) * E[:, None, None]


def correct_image(I, E) -> np.ndarray:
    """Undo a cast: ``J_c = I_c / E_c`` with ``E`` rescaled to ``E_G = 1``."""
    E = _check_E(E)
    E = E / E[1]
    return np.asarray(I, dtype=np.float64) / E[:, None, None]


def angular_error(E_est, E_gt) -> float:
    """Angle in degrees between two illuminant vectors."""
    a = np.asarray(E_est, dtype=np.float64).reshape(-1)
    b = np.asarray(E_gt, dtype=np.float64).reshape(-1)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise IlluminantError("angular error of a zero vector is undefined")
    cos = np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)
    return math.degrees(math.acos(cos))


def gray_world(image) -> np.ndarray:
    """Illuminant proportional to the per-channel image mean."""
    image = np.asarray(image, dtype=np.float64)
    means = image.reshape(image.shape[0], -1).mean(axis=1)
    if not np.any(means > 0):
        raise IlluminantError("gray world is undefined on an all-black image")
    return normalize_illuminant(np.maximum(means, POSITIVE_FLOOR))


def _lower_median(values: np.ndarray, axis=0) -> np.ndarray:
    s = np.sort(values, axis=axis)
    n = s.shape[axis]
    return np.take(s, (n - 1) // 2, axis=axis)


def estimate_illuminant(image, spec: NetworkSpec, params: ParamStore, n_ensembles: int = 128,
                        seed: int = 0, batch: int = 128) -> np.ndarray:
    """Median-pool the network's predictions over ``n_ensembles`` pixel-ensembles.

    Non-positive pooled components are floored at 1e-6 before normalising.
    """
    if len(spec.outputs) != 3:
        raise ValueError(f"{spec.name} has {len(spec.outputs)} outputs; a colour-constancy model needs 3")
    check_params(spec, params)
    size = spec.input_shape[1:]
    ens = sample_ensembles(image, n_ensembles, size, seed)
    stack = np.stack([e.pixels for e in ens])
    preds = np.concatenate([forward(spec, params, stack[i:i + batch])
                            for i in range(0, len(stack), batch)])
    pooled = _lower_median(preds, axis=0)
    return normalize_illuminant(np.maximum(pooled, POSITIVE_FLOOR))


@dataclass
class CCMetrics:
    mean: float
    median: float
    trimean: float
    best25: float
    worst25: float
    q95: float

    def row(self) -> list[float]:
        return [self.mean, self.median, self.trimean, self.best25, self.worst25, self.q95]


def _nearest_rank(s: np.ndarray, q: float) -> float:
    return float(s[max(1, math.ceil(q * s.size)) - 1])


def cc_metrics(errors) -> CCMetrics:
    s = np.sort(np.asarray(errors, dtype=np.float64).reshape(-1))
    if s.size == 0:
        raise ValueError("no errors to summarise")
    q1 = _nearest_rank(s, 0.25)
    q2 = _nearest_rank(s, 0.5)
    q3 = _nearest_rank(s, 0.75)
    k = max(1, math.ceil(s.size / 4))
    return CCMetrics(
        mean=float(s.mean()),
        median=q2,
        trimean=(q1 + 2 * q2 + q3) / 4,
        best25=float(s[:k].mean()),
        worst25=float(s[-k:].mean()),
        q95=_nearest_rank(s, 0.95),
    )


def metrics_csv(rows: dict[str, CCMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Method", *METRIC_COLUMNS])
    for name, m in rows.items():
        w.writerow([name, *(f"{v:.4f}" for v in m.row())])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Synthetic data


@dataclass
class CastImage:
    name: str
    image: np.ndarray  # cast image I
    illuminant: np.ndarray  # unit-norm E
    split: str


@dataclass
class CCDataset:
    items: list[CastImage]

    def split(self, which: str) -> list[CastImage]:
        return [it for it in self.items if it.split == which]


def draw_illuminant(rng: np.random.Generator, e_range=(0.4, 2.5)) -> np.ndarray:
    """``E = (R/G, 1, B/G)`` with both ratios uniform in ``e_range``."""
    lo, hi = e_range
    if not 0 < lo <= hi:
        raise ValueError(f"invalid illuminant range {e_range}")
    rg, bg = rng.uniform(lo, hi, size=2)
    return np.array([rg, 1.0, bg])


def split_names(names, test_fraction: float, seed: int) -> set[str]:
    """Deterministic set of held-out names (at least one when ``test_fraction > 0``)."""
    names = sorted(names)
    n_test = int(round(test_fraction * len(names)))
    if test_fraction > 0:
        n_test = max(1, n_test)
    order = np.random.default_rng([seed, 7]).permutation(len(names))
    return {names[i] for i in order[:n_test]}


def synthesize_cc_dataset(clear, casts_per_image: int = 4, e_range=(0.4, 2.5), seed: int = 0,
                          test_fraction: float = 0.2) -> CCDataset:
    """Cast every clear image ``casts_per_image`` times.

    ``clear`` is a list of ``(name, image)`` or a directory of ``*.ppm``.
    Casts are scaled so their largest component is 1, which keeps cast
    images inside ``[0, 1]``. The train/test split is by clear image, so
    no clear image contributes to both.
    """
    clear = _load_clear(clear)
    held_out = split_names([n for n, _ in clear], test_fraction, seed)
    items = []
    for i, (name, J) in enumerate(clear):
        rng = np.random.default_rng([seed, 11, i])
        for k in range(casts_per_image):
            E = draw_illuminant(rng, e_range)
            I = apply_cast(J, E / E.max())
            items.append(CastImage(f"{name}_c{k}", I, normalize_illuminant(E),
                                   "test" if name in held_out else "train"))
    return CCDataset(items)


def _load_clear(clear) -> list[tuple[str, np.ndarray]]:
    if isinstance(clear, (str, Path)):
        from .netpbm import ppm_read

        paths = sorted(Path(clear).glob("*.ppm"))
        if not paths:
            raise FileNotFoundError(f"no .ppm images in {clear}")
        return [(p.stem, ppm_read(p)) for p in paths]
    return [(n, np.asarray(img, dtype=np.float64)) for n, img in clear]


class EnsembleProvider:
    """Training provider drawing one fresh ensemble per item per batch.

    With ``edge_fraction > 0`` that share of samples is drawn from the
    gradient-magnitude image instead (same target illuminant).
    """

    def __init__(self, items: list[CastImage], size=(32, 32), edge_fraction: float = 0.0):
        self.items = items
        self.size = tuple(size)
        self.edge_fraction = edge_fraction
        self._edges = [edge_augment(it.image) for it in items] if edge_fraction > 0 else None

    def __len__(self) -> int:
        return len(self.items)

    def batch(self, indices, rng):
        xs = np.empty((len(indices), 3) + self.size)
        ys = np.empty((len(indices), 3))
        use_edges = (rng.random(len(indices)) < self.edge_fraction) if self._edges else None
        for k, i in enumerate(indices):
            item = self.items[i]
            src = self._edges[i] if use_edges is not None and use_edges[k] else item.image
            xs[k] = sample_ensemble(src, self.size, rng).pixels
            ys[k] = item.illuminant
        return xs, ys


def evaluate(items: list[CastImage], spec: NetworkSpec | None = None, params: ParamStore | None = None,
             n_ensembles: int = 128, seed: int = 0) -> dict[str, np.ndarray]:
    """Angular errors per method (gray world always; the network when given)."""
    out = {"Gray-World": np.array([angular_error(gray_world(it.image), it.illuminant) for it in items])}
    if spec is not None:
        errs = []
        for i, it in enumerate(items):
            E = estimate_illuminant(it.image, spec, params, n_ensembles, seed=int(rng_for(seed, i).integers(2**31)))
            errs.append(angular_error(E, it.illuminant))
        out[spec.name] = np.array(errs)
    return out
