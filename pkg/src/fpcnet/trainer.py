"""Mini-batch SGD with momentum and an MSE loss.

A *provider* is any object with ``__len__`` and
``batch(indices, rng) -> (inputs, targets)``. ``indices`` index the
provider's items; ``rng`` is a generator derived from ``(seed,
iteration)`` that providers may use for on-the-fly sampling. Data order
is a fresh permutation per epoch drawn from ``(seed, epoch)``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Protocol

import numpy as np

from .models import NetworkSpec, ParamStore, forward, init_params, network_backward
from .tensor_nn import KernelWeights

log = logging.getLogger(__name__)


class NumericAbort(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, iteration: int, lr: float, loss: float):
        super().__init__(f"non-finite loss {loss} at iteration {iteration} (lr={lr})")
        self.iteration = iteration
        self.lr = lr
        self.loss = loss


class Provider(Protocol):
    def __len__(self) -> int: ...

    def batch(self, indices: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass
class TrainConfig:
    batch_size: int = 128
    iterations: int = 1000
    learning_rate: float = 0.005
    momentum: float = 0.9
    lr_decay_factor: float = 0.5
    lr_decay_interval: int | None = None  # default: a quarter of the iterations
    seed: int = 0
    loss: str = "mse"
    eval_interval: int = 0
    log_interval: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.loss != "mse":
            raise ValueError(f"unsupported loss {self.loss!r}")

    def lr_at(self, iteration: int) -> float:
        interval = self.lr_decay_interval or max(1, self.iterations // 4)
        return self.learning_rate * self.lr_decay_factor ** (iteration // interval)


@dataclass
class TrainReport:
    losses: list[tuple[int, float]] = field(default_factory=list)
    evals: list[tuple[int, float]] = field(default_factory=list)
    params: ParamStore | None = None
    wall_clock: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.losses[-1][1] if self.losses else math.nan

    def to_csv(self) -> str:
        evals = dict(self.evals)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "loss", "eval"])
        for it, loss in self.losses:
            ev = evals.get(it)
            w.writerow([it, repr(loss), "" if ev is None else repr(ev)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "iterations": len(self.losses),
            "final_loss": self.final_loss,
            "evals": [list(e) for e in self.evals],
        }


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient ``2 (pred - target) / n``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    n = diff.size
    return float(np.mean(diff * diff)), 2.0 * diff / n


@dataclass
class MomentumState:
    velocity: dict[str, KernelWeights] = field(default_factory=dict)


def sgd_step(params: ParamStore, grads: dict, state: MomentumState, lr: float,
             momentum: float) -> ParamStore:
    """Classical momentum, in place: ``v = momentum*v - lr*g; w += v``."""
    for key, g in grads.items():
        w = params[key]
        v = state.velocity.get(key)
        if v is None:
            v = KernelWeights(np.zeros_like(w.weights), np.zeros_like(w.bias))
            state.velocity[key] = v
        v.weights *= momentum
        v.weights -= lr * g.weights
        v.bias *= momentum
        v.bias -= lr * g.bias
        w.weights += v.weights
        w.bias += v.bias
    return params


def _loss(spec, params, x, y) -> float:
    pred = forward(spec, params, x)
    return mse_loss(pred, np.asarray(y).reshape(pred.shape))[0]


def loss_and_grads(spec: NetworkSpec, params: ParamStore, x, y):
    pred, states = forward(spec, params, x, keep_state=True)
    loss, d_out = mse_loss(pred, np.asarray(y).reshape(pred.shape))
    return loss, network_backward(spec, params, states, d_out)


def train(spec: NetworkSpec, provider: Provider, config: TrainConfig,
          params: ParamStore | None = None,
          eval_fn: Callable[[ParamStore], float] | None = None) -> TrainReport:
    """Run ``config.iterations`` SGD steps; returns the report with the trained params.

    ``params`` is updated in place when given; otherwise weights are
    initialised from ``config.seed``. Raises :class:`NumericAbort` on a
    NaN/inf loss.
    """
    if params is None:
        params = init_params(spec, seed=config.seed)
    n = len(provider)
    if n == 0:
        raise ValueError("empty training set")
    state = MomentumState()
    report = TrainReport(params=params)
    start = time.perf_counter()
    order = np.empty(0, dtype=np.intp)
    cursor = 0
    epoch = 0
    for it in range(config.iterations):
        idx = []
        need = config.batch_size
        while need:
            if cursor >= order.size:
                order = np.random.default_rng([config.seed, 0, epoch]).permutation(n)
                epoch += 1
                cursor = 0
            take = order[cursor:cursor + need]
            idx.append(take)
            cursor += take.size
            need -= take.size
        indices = np.concatenate(idx)
        x, y = provider.batch(indices, np.random.default_rng([config.seed, 1, it]))
        lr = config.lr_at(it)
        loss, grads = loss_and_grads(spec, params, x, y)
        if not math.isfinite(loss):
            raise NumericAbort(it, lr, loss)
        sgd_step(params, grads, state, lr, config.momentum)
        report.losses.append((it, loss))
        if config.log_interval and (it + 1) % config.log_interval == 0:
            recent = np.mean([l for _, l in report.losses[-config.log_interval:]])
            log.info("iter %d loss %.6g lr %.3g", it + 1, recent, lr)
        if eval_fn is not None and config.eval_interval and (it + 1) % config.eval_interval == 0:
            report.evals.append((it, float(eval_fn(params))))
    report.wall_clock = time.perf_counter() - start
    return report


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    worst: tuple[str, int] | None

    def to_dict(self) -> dict:
        return asdict(self)


def grad_check(spec: NetworkSpec, params: ParamStore, x, y, samples: int = 200,
               step: float = 1e-5, seed: int = 0, floor: float = 1e-8) -> GradCheckReport:
    """Compare analytic gradients with central differences on random weights.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``. Biases are
    included in the sample pool.
    """
    _, grads = loss_and_grads(spec, params, x, y)
    pool = []
    for key in params:
        w = params[key]
        pool += [(key, "w", i) for i in range(w.weights.size)]
        pool += [(key, "b", i) for i in range(w.bias.size)]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pool), size=min(samples, len(pool)), replace=False)
    worst, worst_at = 0.0, None
    for p in picks:
        key, kind, i = pool[p]
        arr = params[key].weights.reshape(-1) if kind == "w" else params[key].bias
        g = grads[key].weights.reshape(-1)[i] if kind == "w" else grads[key].bias[i]
        old = arr[i]
        arr[i] = old + step
        lp = _loss(spec, params, x, y)
        arr[i] = old - step
        lm = _loss(spec, params, x, y)
        arr[i] = old
        num = (lp - lm) / (2 * step)
        err = abs(g - num) / max(abs(g), abs(num), floor)
        if err > worst:
            worst, worst_at = err, (f"{key}.{kind}", int(i))
    return GradCheckReport(worst, len(picks), worst_at)


def report_json(report: TrainReport, config: TrainConfig) -> str:
    return json.dumps({"config": asdict(config), **report.summary()}, sort_keys=True, indent=2)
