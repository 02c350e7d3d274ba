"""Residual MLP hypernetwork that emits a linear model per input row.

Layout: ``h = gelu(x @ W_in + b_in)``, then per block
``h = h + drop(gelu(gelu(h @ W1 + b1) @ W2 + b2))``, and a head
``h @ W_out + b_out`` reshaped row-major into ``C`` rows of ``M`` weights
followed by one bias. Everything runs in float64.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass
from typing import Any, Iterator, Mapping

import numpy as np
from scipy.special import ndtr

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    n_classes: int = 2
    n_blocks: int = 2
    hidden_width: int = 128
    dropout_p: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.n_classes < 1 or self.hidden_width < 1:
            raise ValueError("input_dim, n_classes and hidden_width must be positive")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")

    @property
    def head_width(self) -> int:
        return self.n_classes * (self.input_dim + 1)

    def layer_shapes(self) -> dict[str, tuple[int, ...]]:
        M, H = self.input_dim, self.hidden_width
        shapes: dict[str, tuple[int, ...]] = {"input.W": (M, H), "input.b": (H,)}
        for k in range(self.n_blocks):
            shapes[f"block{k}.W1"] = (H, H)
            shapes[f"block{k}.b1"] = (H,)
            shapes[f"block{k}.W2"] = (H, H)
            shapes[f"block{k}.b2"] = (H,)
        shapes["head.W"] = (H, self.head_width)
        shapes["head.b"] = (self.head_width,)
        return shapes


@dataclass(frozen=True)
class ModelParams:
    config: NetConfig
    arrays: Mapping[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def replace(self, arrays: Mapping[str, np.ndarray]) -> "ModelParams":
        """Copy with the named arrays swapped in; unnamed arrays are shared."""
        return ModelParams(self.config, {**self.arrays, **arrays})

    def to_dict(self) -> dict[str, Any]:
        layers = {}
        for name, a in self.arrays.items():
            raw = np.ascontiguousarray(a, dtype="<f8").tobytes()
            layers[name] = {"shape": list(a.shape), "dtype": "<f8", "data": base64.b64encode(raw).decode("ascii")}
        return {"format_version": 1, "config": asdict(self.config), "layers": layers}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelParams":
        if d.get("format_version") != 1:
            raise ValueError(f"unsupported checkpoint format {d.get('format_version')!r}")
        config = NetConfig(**d["config"])
        expected = config.layer_shapes()
        arrays = {}
        for name, shape in expected.items():
            layer = d["layers"][name]
            if tuple(layer["shape"]) != shape:
                raise ValueError(f"layer {name}: shape {layer['shape']} does not match config {shape}")
            raw = base64.b64decode(layer["data"])
            arrays[name] = np.frombuffer(raw, dtype=layer["dtype"]).astype(np.float64).reshape(shape)
        return cls(config, arrays)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass
class GeneratedLinearModel:
    """Per-row linear weights ``(..., C, M)`` and biases ``(..., C)``."""

    weights: np.ndarray
    bias: np.ndarray


def init_params(config: NetConfig) -> ModelParams:
    """Glorot-uniform weights and zero biases, drawn in layer order from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    arrays = {}
    for name, shape in config.layer_shapes().items():
        if len(shape) == 1:
            arrays[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            arrays[name] = rng.uniform(-limit, limit, shape)
    return ModelParams(config, arrays)


def gelu(x: np.ndarray) -> np.ndarray:
    return x * ndtr(x)


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return ndtr(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _dropout_rng(dropout: int | np.random.Generator | None) -> np.random.Generator | None:
    if dropout is None:
        return None
    return np.random.default_rng(dropout)


def generate_linear(
    params: ModelParams, x: np.ndarray, dropout: int | np.random.Generator | None = None
) -> tuple[GeneratedLinearModel, dict[str, Any]]:
    """Run the hypernetwork on ``x`` (one row or a batch).

    ``dropout`` is ``None`` for eval mode, otherwise a seed or generator that
    draws the inverted-dropout masks. Returns the generated model and the
    forward trace consumed by :func:`loss_and_grad`.
    """
    cfg = params.config
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != cfg.input_dim:
        raise ValueError(f"expected inputs with {cfg.input_dim} features, got shape {x.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input")
    rng = _dropout_rng(dropout)
    p = cfg.dropout_p

    trace: dict[str, Any] = {"X": X}
    a = X @ params["input.W"] + params["input.b"]
    h = gelu(a)
    trace["input.a"] = a
    for k in range(cfg.n_blocks):
        trace[f"block{k}.h"] = h
        a1 = h @ params[f"block{k}.W1"] + params[f"block{k}.b1"]
        u = gelu(a1)
        a2 = u @ params[f"block{k}.W2"] + params[f"block{k}.b2"]
        r = gelu(a2)
        if rng is not None and p > 0:
            mask = (rng.random(r.shape) >= p) / (1.0 - p)
            r = r * mask
            trace[f"block{k}.mask"] = mask
        trace[f"block{k}.a1"], trace[f"block{k}.u"], trace[f"block{k}.a2"] = a1, u, a2
        h = h + r
    trace["head.h"] = h
    out = h @ params["head.W"] + params["head.b"]
    out = out.reshape(len(X), cfg.n_classes, cfg.input_dim + 1)
    lin = GeneratedLinearModel(weights=out[..., :-1], bias=out[..., -1])
    if single:
        lin = GeneratedLinearModel(lin.weights[0], lin.bias[0])
    return lin, trace


def predict_logits(lin: GeneratedLinearModel, x: np.ndarray) -> np.ndarray:
    """``z_c = sum_m weights[c, m] * x_m + bias[c]``, accumulated in feature order."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(lin.weights)
    if w.shape[-1] != x.shape[-1]:
        raise ValueError("generated model and input disagree on the feature count")
    z = np.array(lin.bias, dtype=np.float64, copy=True)
    for m in range(x.shape[-1]):
        z += w[..., m] * x[..., None, m]
    return z


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def predict_proba(params: ModelParams, X: np.ndarray) -> np.ndarray:
    lin, _ = generate_linear(params, X)
    return softmax(predict_logits(lin, X))


def _data_loss(z: np.ndarray, y: np.ndarray, regression: bool) -> tuple[float, np.ndarray]:
    """Mean loss and its gradient with respect to the logits."""
    B = len(z)
    if regression:
        resid = z[:, 0] - y
        return float(np.mean(resid**2)), (2.0 / B) * resid[:, None]
    shifted = z - z.max(axis=1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(B)
    loss = -float(np.mean(log_p[rows, y]))
    dz = np.exp(log_p)
    dz[rows, y] -= 1.0
    return loss, dz / B


def batch_loss(
    params: ModelParams,
    X: np.ndarray,
    y: np.ndarray,
    lambda_l1: float,
    dropout: int | np.random.Generator | None = None,
) -> tuple[float, dict[str, Any]]:
    """Mean data loss plus ``lambda_l1`` times the mean L1 norm of the generated models."""
    if lambda_l1 < 0:
        raise ValueError("lambda_l1 must be non-negative")
    lin, trace = generate_linear(params, np.atleast_2d(X), dropout)
    z = predict_logits(lin, trace["X"])
    regression = params.config.n_classes == 1
    loss, dz = _data_loss(z, np.asarray(y), regression)
    penalty = float(np.mean(np.abs(lin.weights).sum(axis=(1, 2)) + np.abs(lin.bias).sum(axis=1)))
    trace.update(lin=lin, z=z, dz=dz, data_loss=loss, penalty=penalty)
    return loss + lambda_l1 * penalty, trace


def loss_and_grad(
    params: ModelParams,
    X: np.ndarray,
    y: np.ndarray,
    lambda_l1: float,
    dropout: int | np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    loss, trace = batch_loss(params, X, y, lambda_l1, dropout)
    return loss, _backward(params, trace, lambda_l1)


def grad(
    params: ModelParams,
    X: np.ndarray,
    y: np.ndarray,
    lambda_l1: float,
    dropout: int | np.random.Generator | None = None,
) -> dict[str, np.ndarray]:
    return loss_and_grad(params, X, y, lambda_l1, dropout)[1]


def _backward(params: ModelParams, trace: Mapping[str, Any], lambda_l1: float) -> dict[str, np.ndarray]:
    cfg = params.config
    X, lin, dz = trace["X"], trace["lin"], trace["dz"]
    B = len(X)
    # sign(0) = 0 gives the zero subgradient of |.| at the origin
    d_weights = dz[:, :, None] * X[:, None, :] + (lambda_l1 / B) * np.sign(lin.weights)
    d_bias = dz + (lambda_l1 / B) * np.sign(lin.bias)
    d_out = np.concatenate([d_weights, d_bias[:, :, None]], axis=2).reshape(B, cfg.head_width)

    g: dict[str, np.ndarray] = {}
    h = trace["head.h"]
    g["head.W"] = h.T @ d_out
    g["head.b"] = d_out.sum(axis=0)
    dh = d_out @ params["head.W"].T
    for k in reversed(range(cfg.n_blocks)):
        dr = dh
        mask = trace.get(f"block{k}.mask")
        if mask is not None:
            dr = dr * mask
        da2 = dr * gelu_grad(trace[f"block{k}.a2"])
        g[f"block{k}.W2"] = trace[f"block{k}.u"].T @ da2
        g[f"block{k}.b2"] = da2.sum(axis=0)
        da1 = (da2 @ params[f"block{k}.W2"].T) * gelu_grad(trace[f"block{k}.a1"])
        g[f"block{k}.W1"] = trace[f"block{k}.h"].T @ da1
        g[f"block{k}.b1"] = da1.sum(axis=0)
        dh = dh + da1 @ params[f"block{k}.W1"].T
    da = dh * gelu_grad(trace["input.a"])
    g["input.W"] = X.T @ da
    g["input.b"] = da.sum(axis=0)
    return {name: g[name] for name in params.arrays}
