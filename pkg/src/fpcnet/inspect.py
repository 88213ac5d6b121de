"""Which pixels does a trained network look at?

Activation weights are channel-averaged responses of a pooling layer,
spread back to input resolution. A pooled response is shared uniformly
by the input positions of its window; where windows overlap, a pixel
gets the mean of the responses covering it. Layers below the probed one
are traced the same way, so any pooling layer (or strided conv) maps back
to the network input.

Histograms are plain bin arrays plus skip counters, so partial results
from several workers merge by addition.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .ensemble import PixelEnsemble
from .models import INPUT, NetworkSpec, ParamStore, forward


@dataclass
class WeightedHistogram:
    """Accumulated weights over a 1-D or 2-D grid.

    ``skipped`` counts pixels left out (zero G, out of range) and
    ``skipped_mass`` their weight.
    """

    mass: np.ndarray
    edges: list[np.ndarray]
    skipped: int = 0
    skipped_mass: float = 0.0
    labels: tuple[str, ...] = field(default=())

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def cumulative(self) -> np.ndarray:
        if self.mass.ndim != 1:
            raise ValueError("cumulative form is defined for 1-D histograms")
        return np.cumsum(self.mass)

    def merge(self, other: "WeightedHistogram") -> "WeightedHistogram":
        if self.mass.shape != other.mass.shape or not all(
                np.array_equal(a, b) for a, b in zip(self.edges, other.edges)):
            raise ValueError("histograms have different bins")
        return WeightedHistogram(self.mass + other.mass, self.edges, self.skipped + other.skipped,
                                 self.skipped_mass + other.skipped_mass, self.labels)

    __add__ = merge

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.mass.ndim == 2:
            ex, ey = self.edges
            w.writerow(["bin_x", "bin_y", "mass"])
            for i in range(self.mass.shape[0]):
                for j in range(self.mass.shape[1]):
                    w.writerow([repr((ex[i] + ex[i + 1]) / 2), repr((ey[j] + ey[j + 1]) / 2),
                                repr(float(self.mass[i, j]))])
        else:
            (e,) = self.edges
            w.writerow(["bin", "mass", "cumulative"])
            for i, (m, c) in enumerate(zip(self.mass, self.cumulative())):
                w.writerow([repr((e[i] + e[i + 1]) / 2), repr(float(m)), repr(float(c))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Activation weights


def _pool_geometry(node):
    layer = node.layer
    if layer.kind in ("max_pool", "avg_pool"):
        return layer.kernel, layer.pad, layer.stride
    if layer.kind == "conv2d" and (layer.kernel != (1, 1) or layer.stride != 1):
        return layer.kernel, layer.pad, layer.stride
    return None


def _spread(resp: np.ndarray, in_hw, kernel, pad, stride) -> np.ndarray:
    """Mean of the responses of all windows covering each input position."""
    h, w = in_hw
    kh, kw = kernel
    oh, ow = resp.shape[-2:]
    total = np.zeros(resp.shape[:-2] + (h, w))
    count = np.zeros((h, w))
    for i in range(oh):
        r0, r1 = max(0, i * stride - pad), min(h, i * stride - pad + kh)
        for j in range(ow):
            c0, c1 = max(0, j * stride - pad), min(w, j * stride - pad + kw)
            total[..., r0:r1, c0:c1] += resp[..., i, j, None, None]
            count[r0:r1, c0:c1] += 1
    return np.divide(total, count, out=np.zeros_like(total), where=count > 0)


def probe_layers(spec: NetworkSpec) -> list[str]:
    """Node ids usable with :func:`activation_weights`."""
    return [n.id for n in spec.nodes if n.layer.kind in ("max_pool", "avg_pool")]


def activation_map(spec: NetworkSpec, params: ParamStore, x, layer_id: str) -> np.ndarray:
    """Per-pixel weights for a batch ``(N, C, H, W)``; returns ``(N, H, W)``."""
    if layer_id not in probe_layers(spec):
        raise KeyError(f"{layer_id!r} is not a pooling layer of {spec.name}; choose from {probe_layers(spec)}")
    x = np.asarray(x, dtype=np.float64)
    _, acts = forward(spec, params, x, keep_activations=True)
    resp = acts[layer_id].mean(axis=1)
    node = spec.node(layer_id)
    while True:
        geom = _pool_geometry(node)
        src = node.inputs[0]
        if geom is not None:
            in_hw = spec.input_shape[1:] if src == INPUT else spec.shapes[src][1:]
            resp = _spread(resp, in_hw, *geom)
        if src == INPUT:
            break
        node = spec.node(src)
    return np.maximum(resp, 0.0)


def activation_weights(spec: NetworkSpec, params: ParamStore, ensemble, layer_id: str) -> np.ndarray:
    """Nonnegative weights, one per ensemble position (flattened row-major)."""
    x = ensemble.pixels if isinstance(ensemble, PixelEnsemble) else ensemble
    return activation_map(spec, params, np.asarray(x)[None], layer_id)[0].reshape(-1)


def reproject(weights, ensemble: PixelEnsemble) -> np.ndarray:
    """Scatter weights onto the source image; unsampled pixels get 0."""
    return ensemble.scatter(weights)


# ---------------------------------------------------------------------------
# Histograms


def _pairs(items):
    for item in items:
        if isinstance(item, tuple):
            img, w = item
        else:
            img, w = item, None
        img = np.asarray(img, dtype=np.float64)
        w = np.ones(img.shape[1:]) if w is None else np.asarray(w, dtype=np.float64).reshape(img.shape[1:])
        yield img, w


def weighted_chroma_histogram(items, bins: int = 64, value_range=(0.0, 2.0)) -> WeightedHistogram:
    """2-D histogram of ``(R/G, B/G)`` accumulating per-pixel weights.

    ``items`` are images or ``(image, weights)`` pairs. Pixels with zero
    G or a ratio outside ``value_range`` are skipped and counted.
    """
    lo, hi = value_range
    edges = np.linspace(lo, hi, bins + 1)
    mass = np.zeros((bins, bins))
    skipped, skipped_mass = 0, 0.0
    for img, w in _pairs(items):
        r, g, b = img[0].ravel(), img[1].ravel(), img[2].ravel()
        wv = w.ravel()
        ok = g > 0
        rg = np.divide(r, g, out=np.full_like(r, -1.0), where=ok)
        bg = np.divide(b, g, out=np.full_like(b, -1.0), where=ok)
        ok &= (rg >= lo) & (rg <= hi) & (bg >= lo) & (bg <= hi)
        skipped += int((~ok).sum())
        skipped_mass += float(wv[~ok].sum())
        h, _, _ = np.histogram2d(rg[ok], bg[ok], bins=[edges, edges], weights=wv[ok])
        mass += h
    return WeightedHistogram(mass, [edges, edges], skipped, skipped_mass, ("R/G", "B/G"))


def min_channel_histogram(items, bins: int = 64, value_range=(0.0, 1.0)) -> WeightedHistogram:
    """1-D histogram of ``min(R, G, B)`` accumulating per-pixel weights."""
    lo, hi = value_range
    edges = np.linspace(lo, hi, bins + 1)
    mass = np.zeros(bins)
    skipped, skipped_mass = 0, 0.0
    for img, w in _pairs(items):
        v = img.min(axis=0).ravel()
        wv = w.ravel()
        ok = (v >= lo) & (v <= hi)
        skipped += int((~ok).sum())
        skipped_mass += float(wv[~ok].sum())
        h, _ = np.histogram(v[ok], bins=edges, weights=wv[ok])
        mass += h
    return WeightedHistogram(mass, [edges], skipped, skipped_mass, ("min(R,G,B)",))


# ---------------------------------------------------------------------------
# SVG


def _svg(width, height, body: list[str]) -> str:
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        *body,
        "</svg>",
    ]) + "\n"


def heatmap_svg(hist: WeightedHistogram, cell: int = 6, margin: int = 40) -> str:
    """Log-scaled grayscale heatmap; x is the first axis, y grows upward."""
    if hist.mass.ndim != 2:
        raise ValueError("heatmap needs a 2-D histogram")
    nx, ny = hist.mass.shape
    peak = np.log1p(hist.mass.max()) if hist.mass.max() > 0 else 1.0
    body = []
    for i in range(nx):
        for j in range(ny):
            m = hist.mass[i, j]
            if m <= 0:
                continue
            shade = int(round(255 * (1 - np.log1p(m) / peak)))
            y = margin + (ny - 1 - j) * cell
            body.append(f'<rect x="{margin + i * cell}" y="{y}" width="{cell}" height="{cell}" '
                        f'fill="rgb({shade},{shade},{shade})"/>')
    w, h = 2 * margin + nx * cell, 2 * margin + ny * cell
    body.append(f'<rect x="{margin}" y="{margin}" width="{nx * cell}" height="{ny * cell}" '
                'fill="none" stroke="black"/>')
    ex, ey = hist.edges
    xl, yl = hist.labels or ("x", "y")
    body.append(f'<text x="{w / 2}" y="{h - 8}" text-anchor="middle" font-size="12">'
                f'{xl} [{ex[0]:g}, {ex[-1]:g}]</text>')
    body.append(f'<text x="12" y="{h / 2}" font-size="12" transform="rotate(-90 12 {h / 2})" '
                f'text-anchor="middle">{yl} [{ey[0]:g}, {ey[-1]:g}]</text>')
    return _svg(w, h, body)


def curve_svg(curves: dict[str, np.ndarray], edges: np.ndarray, width: int = 400, height: int = 300,
              margin: int = 40) -> str:
    """Polylines of normalised cumulative distributions over shared bins."""
    colors = ["black", "#d62728", "#1f77b4", "#2ca02c"]
    x = edges[1:]
    span = x[-1] - edges[0] or 1.0
    body = [f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" height="{height - 2 * margin}" '
            'fill="none" stroke="black"/>']
    for k, (name, cum) in enumerate(curves.items()):
        cum = np.asarray(cum, dtype=np.float64)
        top = cum[-1] if cum.size and cum[-1] > 0 else 1.0
        pts = " ".join(
            f"{margin + (xi - edges[0]) / span * (width - 2 * margin):.2f},"
            f"{height - margin - c / top * (height - 2 * margin):.2f}" for xi, c in zip(x, cum))
        color = colors[k % len(colors)]
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}"/>')
        body.append(f'<text x="{margin + 8}" y="{margin + 16 * (k + 1)}" font-size="12" fill="{color}">{name}</text>')
    return _svg(width, height, body)
