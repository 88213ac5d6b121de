"""Network graphs for BaseNet, FPCNet-CC and FPCNet-DH.

A :class:`NetworkSpec` is a small DAG of :class:`Node` objects in
topological order. Colour-constancy models end in three per-channel heads
(R, G, B), each producing one scalar; the dehazing model has one head.

Parameter counts report weights only (no biases), which is how the
published tables arrive at 288 for FPCNet-DH. Layers still carry a bias
at runtime.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor_nn import (
    KernelWeights,
    LayerSpec,
    LayerState,
    ShapeError,
    backward,
    layer_forward,
    layer_output_shape,
    pointwise_max_pool_backward,
    pointwise_max_pool_forward,
)

INPUT = "input"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file could not be parsed."""


@dataclass(frozen=True)
class Node:
    id: str
    layer: LayerSpec
    inputs: tuple[str, ...]
    label: str = ""
    head: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "layer": self.layer.to_dict(),
            "inputs": list(self.inputs),
            "label": self.label,
            "head": self.head,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        return cls(d["id"], LayerSpec.from_dict(d["layer"]), tuple(d["inputs"]),
                   d.get("label", ""), d.get("head"))


@dataclass
class NetworkSpec:
    name: str
    input_shape: tuple[int, int, int]
    nodes: list[Node]
    outputs: list[str]
    shapes: dict[str, tuple[int, int, int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        self.shapes = self._trace()

    def _trace(self) -> dict:
        shapes = {INPUT: self.input_shape}
        seen = set()
        for node in self.nodes:
            if node.id in shapes:
                raise ValueError(f"duplicate node id {node.id!r}")
            for src in node.inputs:
                if src not in shapes:
                    raise ValueError(f"node {node.id!r} reads {src!r} before it is defined")
            if node.layer.kind != "concat" and len(node.inputs) != 1:
                raise ValueError(f"node {node.id!r}: {node.layer.kind} takes exactly one input")
            try:
                shapes[node.id] = layer_output_shape(node.layer, [shapes[s] for s in node.inputs])
            except ShapeError as exc:
                raise ShapeError(f"node {node.id!r}: {exc}") from None
            seen.update(node.inputs)
        for out in self.outputs:
            if out not in shapes:
                raise ValueError(f"unknown output node {out!r}")
            if shapes[out] != (1, 1, 1):
                raise ShapeError(f"output {out!r} has shape {shapes[out]}, expected (1, 1, 1)")
        return shapes

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def parametric_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.layer.parametric]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "nodes": [n.to_dict() for n in self.nodes],
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["name"], tuple(d["input_shape"]),
                   [Node.from_dict(n) for n in d["nodes"]], list(d["outputs"]))

    def shape_table(self) -> list[tuple[str, tuple, tuple]]:
        """``(label, input shape, output shape)`` per node, in order."""
        rows = []
        for n in self.nodes:
            ins = [self.shapes[s] for s in n.inputs]
            rows.append((n.label or n.id, ins[0] if len(ins) == 1 else tuple(ins), self.shapes[n.id]))
        return rows


def _conv(cin, cout, k=1, pad=0, stride=1) -> LayerSpec:
    if k == 1 and pad == 0 and stride == 1:
        return LayerSpec("pointwise_conv", cin, cout)
    return LayerSpec("conv2d", cin, cout, (k, k), pad, stride)


def _pool(k, pad=0, stride=None) -> LayerSpec:
    return LayerSpec("max_pool", kernel=(k, k), pad=pad, stride=stride or k)


RELU = LayerSpec("relu")
HEADS = ("R", "G", "B")


def _width(channels: int, width_div: int) -> int:
    if width_div < 1 or channels % width_div:
        raise ValueError(f"width divisor {width_div} must divide {channels}")
    return channels // width_div


def build_fpcnet_cc(width_div: int = 1) -> NetworkSpec:
    """FPCNet-CC: two parallel point-wise branches with 8x8 and 10x10 pooling.

    ReLUs follow the first two conv levels. They are placed after the max
    pool rather than before it; the two orders compute the same function
    and pooling first is ~64x cheaper.
    """
    c1 = _width(240, width_div)
    c2 = _width(80, width_div)
    nodes = [
        Node("conv1_1", _conv(3, c1), (INPUT,), "Conv1-1"),
        Node("pool1_1", _pool(8, 0, 8), ("conv1_1",), "Maxpool1-1"),
        Node("relu1_1", RELU, ("pool1_1",), "ReLU1-1"),
        Node("conv1_2", _conv(3, c1), (INPUT,), "Conv1-2"),
        Node("pool1_2", _pool(10, 1, 8), ("conv1_2",), "Maxpool1-2"),
        Node("relu1_2", RELU, ("pool1_2",), "ReLU1-2"),
        Node("concat1", LayerSpec("concat"), ("relu1_1", "relu1_2"), "Concat1"),
    ]
    outputs = []
    for h in HEADS:
        nodes += [
            Node(f"conv2_{h}", _conv(2 * c1, c2), ("concat1",), f"Conv2-{h}", h),
            Node(f"pool2_{h}", _pool(4, 0, 4), (f"conv2_{h}",), f"Maxpool2-{h}", h),
            Node(f"relu2_{h}", RELU, (f"pool2_{h}",), f"ReLU2-{h}", h),
            Node(f"conv3_{h}", _conv(c2, 1), (f"relu2_{h}",), f"Conv3-{h}", h),
        ]
        outputs.append(f"conv3_{h}")
    name = "fpcnet-cc" if width_div == 1 else f"fpcnet-cc-w{width_div}"
    return NetworkSpec(name, (3, 32, 32), nodes, outputs)


def build_basenet(width_div: int = 1) -> NetworkSpec:
    """BaseNet: parallel 1x1 and 3x3 convs, 8x8 pool, per-channel 4x4/s4 heads."""
    c1 = _width(240, width_div)
    c2 = _width(40, width_div)
    nodes = [
        Node("conv1_1x1", _conv(3, c1), (INPUT,), "Conv1-1x1"),
        Node("conv1_3x3", _conv(3, c1, 3, 1, 1), (INPUT,), "Conv1-3x3"),
        Node("concat1", LayerSpec("concat"), ("conv1_1x1", "conv1_3x3"), "Concat1"),
        Node("pool1", _pool(8, 0, 8), ("concat1",), "Maxpool1"),
        Node("relu1", RELU, ("pool1",), "ReLU1"),
    ]
    outputs = []
    for h in HEADS:
        nodes += [
            Node(f"conv2_{h}", _conv(2 * c1, c2, 4, 0, 4), ("relu1",), f"Conv2-{h}", h),
            Node(f"relu2_{h}", RELU, (f"conv2_{h}",), f"ReLU2-{h}", h),
            Node(f"conv3_{h}", _conv(c2, 1), (f"relu2_{h}",), f"Conv3-{h}", h),
        ]
        outputs.append(f"conv3_{h}")
    name = "basenet" if width_div == 1 else f"basenet-w{width_div}"
    return NetworkSpec(name, (3, 32, 32), nodes, outputs)


def build_fpcnet_dh() -> NetworkSpec:
    """FPCNet-DH: 1x1 conv, maxout(4), 2x2 pool, 1x1 conv, 8x8 pool, 1x1 conv, BReLU."""
    nodes = [
        Node("conv1", _conv(3, 16), (INPUT,), "Conv1"),
        Node("maxout", LayerSpec("maxout", 16, 4, maxout_group=4), ("conv1",), "Maxout"),
        Node("pool1", _pool(2, 0, 2), ("maxout",), "Maxpool1"),
        Node("conv2", _conv(4, 48), ("pool1",), "Conv2"),
        Node("pool2", _pool(8, 0, 8), ("conv2",), "Maxpool2"),
        Node("conv3", _conv(48, 1), ("pool2",), "Conv3"),
        Node("brelu", LayerSpec("brelu"), ("conv3",), "BReLU"),
    ]
    return NetworkSpec("fpcnet-dh", (3, 16, 16), nodes, ["brelu"])


BUILDERS = {
    "fpcnet-cc": build_fpcnet_cc,
    "basenet": build_basenet,
    "fpcnet-dh": build_fpcnet_dh,
}


def build(name: str, width_div: int = 1) -> NetworkSpec:
    if name not in BUILDERS:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(BUILDERS)}")
    if name == "fpcnet-dh":
        if width_div != 1:
            raise ValueError("fpcnet-dh has no width option")
        return build_fpcnet_dh()
    return BUILDERS[name](width_div)


def count_params(spec: NetworkSpec | None) -> int:
    """Number of convolution weights (biases excluded)."""
    if spec is None:
        return 0
    total = 0
    for n in spec.parametric_nodes:
        kh, kw = n.layer.kernel
        total += n.layer.out_channels * n.layer.in_channels * kh * kw
    return total


def count_flops(spec: NetworkSpec | None) -> int:
    """Multiply-adds: one per weight application per output position."""
    if spec is None:
        return 0
    total = 0
    for n in spec.parametric_nodes:
        kh, kw = n.layer.kernel
        _, oh, ow = spec.shapes[n.id]
        total += n.layer.out_channels * n.layer.in_channels * kh * kw * oh * ow
    return total


# ---------------------------------------------------------------------------
# Parameters


@dataclass
class ParamStore:
    weights: dict[str, KernelWeights]
    scheme: str = "uniform"
    seed: int | None = None

    def __getitem__(self, key: str) -> KernelWeights:
        return self.weights[key]

    def __iter__(self):
        return iter(self.weights)

    def items(self):
        return self.weights.items()

    def copy(self) -> "ParamStore":
        return ParamStore({k: w.copy() for k, w in self.weights.items()}, self.scheme, self.seed)

    def equals(self, other: "ParamStore") -> bool:
        """Bit-exact comparison."""
        if self.weights.keys() != other.weights.keys():
            return False
        return all(
            np.array_equal(w.weights, other[k].weights) and np.array_equal(w.bias, other[k].bias)
            for k, w in self.weights.items()
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.weights.ravel(), w.bias]) for w in self.weights.values()])


def init_params(spec: NetworkSpec, scheme: str = "uniform", seed: int = 0) -> ParamStore:
    """Initialise weights.

    ``uniform``: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero bias,
    except a conv feeding a BReLU, whose bias starts at 0.5 so the
    output begins inside the unsaturated range.
    ``zeros``: everything zero.
    """
    if scheme not in ("uniform", "zeros"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    feeds_brelu = {n.inputs[0] for n in spec.nodes if n.layer.kind == "brelu"}
    out = {}
    for i, n in enumerate(spec.parametric_nodes):
        kh, kw = n.layer.kernel
        shape = (n.layer.out_channels, n.layer.in_channels, kh, kw)
        if scheme == "zeros":
            w = np.zeros(shape)
        else:
            rng = np.random.default_rng([seed, i])
            bound = 1.0 / math.sqrt(n.layer.in_channels * kh * kw)
            w = rng.uniform(-bound, bound, size=shape)
        bias = np.full(shape[0], 0.5 if scheme == "uniform" and n.id in feeds_brelu else 0.0)
        out[n.id] = KernelWeights(w, bias)
    return ParamStore(out, scheme, seed)


def check_params(spec: NetworkSpec, params: ParamStore) -> None:
    for n in spec.parametric_nodes:
        if n.id not in params.weights:
            raise ShapeError(f"missing weights for node {n.id!r}")
        kh, kw = n.layer.kernel
        want = (n.layer.out_channels, n.layer.in_channels, kh, kw)
        if params[n.id].weights.shape != want:
            raise ShapeError(f"node {n.id!r}: weights {params[n.id].weights.shape} != {want}")


# ---------------------------------------------------------------------------
# Execution


def _fusable_pairs(spec: NetworkSpec) -> dict[str, str]:
    """Map pool id -> conv id for every 1x1 conv whose only consumer is a max pool."""
    consumers: dict[str, list[str]] = {}
    for n in spec.nodes:
        for src in n.inputs:
            consumers.setdefault(src, []).append(n.id)
    pairs = {}
    for n in spec.nodes:
        if n.layer.kind != "pointwise_conv" or n.id in spec.outputs:
            continue
        users = consumers.get(n.id, [])
        if len(users) == 1 and spec.node(users[0]).layer.kind == "max_pool":
            pairs[users[0]] = n.id
    return pairs


def forward(spec: NetworkSpec, params: ParamStore, x, keep_state: bool = False,
            keep_activations: bool = False):
    """Evaluate the network.

    ``x`` is ``(C, H, W)`` or ``(N, C, H, W)``. Returns outputs of shape
    ``(len(spec.outputs),)`` or ``(N, len(spec.outputs))``. With
    ``keep_state`` also returns the per-node states for
    :func:`network_backward`; with ``keep_activations`` a dict of every
    node's output.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    xb = x[None] if single else x
    if xb.ndim != 4 or tuple(xb.shape[1:]) != spec.input_shape:
        raise ShapeError(f"input shape {x.shape} does not match network input {spec.input_shape}")
    # Fusing skips the full-resolution conv output, so it is off when
    # the caller wants every activation.
    fused = {} if keep_activations else _fusable_pairs(spec)
    fused_convs = set(fused.values())
    acts = {INPUT: xb}
    states = {}
    for n in spec.nodes:
        if n.id in fused_convs:
            continue
        if n.id in fused:
            conv = spec.node(fused[n.id])
            src = acts[conv.inputs[0]]
            acts[n.id], idx = pointwise_max_pool_forward(
                src, params[conv.id], n.layer.kernel, n.layer.pad, n.layer.stride)
            if keep_state:
                states[n.id] = LayerState(n.layer, [src], {"fused_conv": conv.id, "indices": idx})
            continue
        inp = [acts[s] for s in n.inputs] if n.layer.kind == "concat" else acts[n.inputs[0]]
        w = params[n.id] if n.layer.parametric else None
        acts[n.id], st = layer_forward(n.layer, inp, w, keep_state=keep_state)
        if keep_state:
            states[n.id] = st
    out = np.concatenate([acts[o].reshape(xb.shape[0], 1) for o in spec.outputs], axis=1)
    if single:
        out = out[0]
    extras = []
    if keep_state:
        extras.append(states)
    if keep_activations:
        extras.append(acts)
    return (out, *extras) if extras else out


def network_backward(spec: NetworkSpec, params: ParamStore, states: dict, d_out) -> dict:
    """Gradients of a scalar loss w.r.t. every weight, given ``dL/d(outputs)``.

    ``d_out`` has shape ``(N, n_outputs)``. Returns ``{node_id: KernelWeights}``.
    """
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.ndim == 1:
        d_out = d_out[None]
    grads_act: dict[str, np.ndarray] = {}
    for i, o in enumerate(spec.outputs):
        grads_act[o] = d_out[:, i].reshape(-1, 1, 1, 1).copy()
    wgrads = {}
    for n in reversed(spec.nodes):
        dy = grads_act.pop(n.id, None)
        if dy is None:
            continue
        st = states.get(n.id)
        if st is not None and "fused_conv" in st.extra:
            conv = spec.node(st.extra["fused_conv"])
            need_input = conv.inputs[0] != INPUT
            dx, wgrads[conv.id] = pointwise_max_pool_backward(
                st.inputs[0], params[conv.id], st.extra["indices"], dy, need_input)
            n = conv
        else:
            need_input = any(s != INPUT for s in n.inputs)
            w = params[n.id] if n.layer.parametric else None
            dx, dw = backward(n.layer, st, dy, w, need_input_grad=need_input)
            if dw is not None:
                wgrads[n.id] = dw
        if not need_input:
            continue
        dxs = dx if n.layer.kind == "concat" else [dx]
        for src, g in zip(n.inputs, dxs):
            if src == INPUT:
                continue
            if src in grads_act:
                grads_act[src] = grads_act[src] + g
            else:
                grads_act[src] = g
    for n in spec.parametric_nodes:
        if n.id not in wgrads:
            w = params[n.id]
            wgrads[n.id] = KernelWeights(np.zeros_like(w.weights), np.zeros_like(w.bias))
    return wgrads


# ---------------------------------------------------------------------------
# Serialisation


def dumps(spec: NetworkSpec, params: ParamStore) -> str:
    check_params(spec, params)
    doc = {
        "format": "fpcnet-model",
        "version": FORMAT_VERSION,
        "name": spec.name,
        "spec": spec.to_dict(),
        "init": {"scheme": params.scheme, "seed": params.seed},
        "layers": [
            {
                "id": n.id,
                "shape": list(params[n.id].weights.shape),
                "weights": params[n.id].weights.ravel().tolist(),
                "bias": params[n.id].bias.tolist(),
            }
            for n in spec.parametric_nodes
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def loads(text: str) -> tuple[NetworkSpec, ParamStore]:
    try:
        doc = json.loads(text)
        if doc.get("format") != "fpcnet-model":
            raise ModelFormatError("not an fpcnet model file")
        spec = NetworkSpec.from_dict(doc["spec"])
        weights = {}
        for layer in doc["layers"]:
            shape = tuple(layer["shape"])
            w = np.array(layer["weights"], dtype=np.float64)
            if w.size != math.prod(shape):
                raise ModelFormatError(f"layer {layer['id']!r}: {w.size} weights for shape {shape}")
            weights[layer["id"]] = KernelWeights(w.reshape(shape), np.array(layer["bias"], dtype=np.float64))
        params = ParamStore(weights, doc["init"]["scheme"], doc["init"]["seed"])
        check_params(spec, params)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    return spec, params


def save(path, spec: NetworkSpec, params: ParamStore) -> None:
    Path(path).write_text(dumps(spec, params) + "\n")


def load(path) -> tuple[NetworkSpec, ParamStore]:
    return loads(Path(path).read_text())
