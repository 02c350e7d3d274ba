"""AdamW training with warmup, cosine restarts and snapshot ensembling."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .data import Dataset
from .net import (
    GeneratedLinearModel,
    ModelParams,
    NetConfig,
    generate_linear,
    init_params,
    loss_and_grad,
    predict_logits,
    softmax,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    peak_lr: float = 0.01
    weight_decay: float = 0.01
    warmup_epochs: int = 5
    lambda_l1: float = 0.1
    n_cycles: int = 5
    min_lr: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError("warmup_epochs must be smaller than epochs")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if (self.epochs - self.warmup_epochs) % self.n_cycles:
            raise ValueError("epochs - warmup_epochs must be divisible by n_cycles")
        if self.lambda_l1 < 0:
            raise ValueError("lambda_l1 must be non-negative")

    @property
    def cycle_epochs(self) -> int:
        return (self.epochs - self.warmup_epochs) // self.n_cycles


def lr_at(step: int, steps_per_epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for optimizer step ``step`` (0-based).

    Linear warmup reaches ``peak_lr`` on the last warmup step; every cosine
    cycle then starts again at ``peak_lr``.
    """
    if step < 0:
        raise ValueError("step must be non-negative")
    warmup = cfg.warmup_epochs * steps_per_epoch
    if step < warmup:
        return cfg.peak_lr * (step + 1) / warmup
    cycle = cfg.cycle_epochs * steps_per_epoch
    t = (step - warmup) % cycle
    return cfg.min_lr + 0.5 * (cfg.peak_lr - cfg.min_lr) * (1.0 + math.cos(math.pi * t / cycle))


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "OptimizerState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.arrays.items()},
            v={k: np.zeros_like(a) for k, a in params.arrays.items()},
        )


def _decays(name: str) -> bool:
    return name.rsplit(".", 1)[-1].startswith("W")


def step(
    params: ModelParams,
    state: OptimizerState,
    grads: Mapping[str, np.ndarray],
    lr: float,
    weight_decay: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ModelParams, OptimizerState]:
    """One AdamW update; weight decay is decoupled and skips biases."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in layer {name}")
    t = state.t + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.arrays.items():
        g = grads[name]
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        update = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        if _decays(name):
            update = update + lr * weight_decay * p
        new_params[name] = p - update
        new_m[name], new_v[name] = m, v
    return params.replace(new_params), OptimizerState(new_m, new_v, t)


@dataclass
class SnapshotEnsemble:
    """Parameter snapshots whose generated linear models are averaged."""

    config: NetConfig
    snapshots: list[ModelParams]
    history: list[dict[str, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.snapshots:
            raise ValueError("an ensemble needs at least one snapshot")
        if any(s.config != self.config for s in self.snapshots):
            raise ValueError("all snapshots must share one NetConfig")

    def generate(self, X: np.ndarray) -> GeneratedLinearModel:
        return ensemble_generate(self, X)

    def logits(self, X: np.ndarray) -> np.ndarray:
        return predict_logits(self.generate(X), X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.logits(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        z = self.logits(X)
        return z[..., 0] if self.config.n_classes == 1 else np.argmax(z, axis=-1)

    def to_dict(self) -> dict[str, Any]:
        return {"format_version": 1, "snapshots": [s.to_dict() for s in self.snapshots]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SnapshotEnsemble":
        snaps = [ModelParams.from_dict(s) for s in d["snapshots"]]
        return cls(snaps[0].config, snaps)


def ensemble_generate(ens: SnapshotEnsemble, x: np.ndarray) -> GeneratedLinearModel:
    weights, bias = None, None
    for params in ens.snapshots:
        lin, _ = generate_linear(params, x)
        weights = lin.weights if weights is None else weights + lin.weights
        bias = lin.bias if bias is None else bias + lin.bias
    k = len(ens.snapshots)
    return GeneratedLinearModel(weights / k, bias / k)


def train(
    train_set: Dataset,
    cfg: TrainConfig,
    net_cfg: NetConfig,
    on_epoch: Callable[[dict[str, float]], None] | None = None,
) -> SnapshotEnsemble:
    """Mini-batch AdamW; snapshot the parameters at the end of every cosine cycle."""
    if train_set.n_features != net_cfg.input_dim:
        raise ValueError(f"dataset has {train_set.n_features} features, net expects {net_cfg.input_dim}")
    expected_c = 1 if train_set.task == "regression" else train_set.n_classes
    if expected_c != net_cfg.n_classes:
        raise ValueError(f"dataset has {expected_c} output(s), net expects {net_cfg.n_classes}")

    rng = np.random.default_rng(cfg.seed)
    params = init_params(net_cfg)
    opt = OptimizerState.zeros_like(params)
    X, y = train_set.X, train_set.y
    n = len(X)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    snapshots: list[ModelParams] = []
    history: list[dict[str, float]] = []
    global_step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        lr = cfg.peak_lr
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            lr = lr_at(global_step, steps_per_epoch, cfg)
            loss, grads = loss_and_grad(params, X[idx], y[idx], cfg.lambda_l1, rng)
            if not math.isfinite(loss):
                raise FloatingPointError(f"training diverged at epoch {epoch + 1}")
            params, opt = step(params, opt, grads, lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps)
            total += loss * len(idx)
            global_step += 1
        record = {"epoch": epoch + 1, "lr": lr, "train_loss": total / n}
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        done = epoch + 1 - cfg.warmup_epochs
        if done > 0 and done % cfg.cycle_epochs == 0:
            snapshots.append(params)
            logger.debug("snapshot %d at epoch %d", len(snapshots), epoch + 1)
    return SnapshotEnsemble(net_cfg, snapshots, history)


def net_config_for(dataset: Dataset, **overrides: Any) -> NetConfig:
    n_classes = 1 if dataset.task == "regression" else dataset.n_classes
    return NetConfig(input_dim=dataset.n_features, n_classes=n_classes, **overrides)


def checkpoint_dict(ens: SnapshotEnsemble, cfg: TrainConfig, **extra: Any) -> dict[str, Any]:
    return {"format_version": 1, "train_config": asdict(cfg), "ensemble": ens.to_dict(), **extra}


def dumps_checkpoint(ens: SnapshotEnsemble, cfg: TrainConfig, **extra: Any) -> str:
    return json.dumps(checkpoint_dict(ens, cfg, **extra), sort_keys=True)
