"""Slow, obviously-correct reference implementations used as test oracles."""

import math

import numpy as np


def conv2d(x, w, b, pad, stride):
    c, h, wd = x.shape
    o, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((o, oh, ow))
    for oc in range(o):
        for i in range(oh):
            for j in range(ow):
                s = b[oc]
                for ic in range(c):
                    for m in range(kh):
                        for n in range(kw):
                            r, q = i * stride - pad + m, j * stride - pad + n
                            if 0 <= r < h and 0 <= q < wd:
                                s += x[ic, r, q] * w[oc, ic, m, n]
                out[oc, i, j] = s
    return out


def pool(x, k, pad, stride, mode):
    c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    out = np.zeros((c, oh, ow))
    for ch in range(c):
        for i in range(oh):
            for j in range(ow):
                vals = []
                for m in range(k):
                    for n in range(k):
                        r, q = i * stride - pad + m, j * stride - pad + n
                        if 0 <= r < h and 0 <= q < w:
                            vals.append(x[ch, r, q])
                out[ch, i, j] = max(vals) if mode == "max" else sum(vals) / len(vals)
    return out


def maxout(x, group):
    c, h, w = x.shape
    out = np.zeros((c // group, h, w))
    for g in range(c // group):
        for i in range(h):
            for j in range(w):
                out[g, i, j] = max(x[g * group + t, i, j] for t in range(group))
    return out


def angular_error(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return math.degrees(math.acos(max(-1.0, min(1.0, dot / (na * nb)))))


def numeric_grad(f, arr, h=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    g = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b, floor=1e-8):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))
