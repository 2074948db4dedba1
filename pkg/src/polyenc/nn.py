"""A closed set of numpy layers with hand-written backward passes.

Each functional op returns ``(output, cache)`` and has a matching
``*_backward(dout, cache)``. The ``Module`` classes wrap those ops, own their
parameters and accumulate gradients in ``grads`` on ``backward``.

Arrays are float64 throughout. 1D feature maps are laid out ``(B, C, L)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

CIRCULAR = "circular"
ZERO = "zero"
NONE = "none"


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# functional ops

def dense(x, W, b):
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ValueError(f"dense shape mismatch: x {x.shape}, W {W.shape}, b {b.shape}")
    return x @ W + b, (x, W)


def dense_backward(dy, cache):
    x, W = cache
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def _pad1d(x, p: int, mode: str):
    if p == 0:
        return x
    if mode == CIRCULAR:
        L = x.shape[-1]
        idx = np.arange(-p, L + p) % L
        return x[..., idx]
    if mode == ZERO:
        return np.pad(x, [(0, 0)] * (x.ndim - 1) + [(p, p)])
    raise ValueError(f"unknown padding {mode!r}")


def _unpad1d(dxp, p: int, L: int, mode: str):
    if p == 0:
        return dxp
    dx = dxp[..., p:p + L].copy()
    if mode == CIRCULAR:
        idx = np.arange(-p, L + p) % L
        np.add.at(dx, (..., idx[:p]), dxp[..., :p])
        np.add.at(dx, (..., idx[p + L:]), dxp[..., p + L:])
    return dx


def conv1d(x, W, b=None, stride: int = 1, pad: str = CIRCULAR):
    """Cross-correlation with odd kernel width and ``width // 2`` padding.

    Output length is ``ceil(L / stride)``. ``W`` is ``(C_out, C_in, K)``.
    """
    B, C, L = x.shape
    O, Ci, K = W.shape
    if Ci != C:
        raise ValueError(f"conv1d expects {Ci} input channels, got {C}")
    if L < K:
        raise ValueError(f"conv1d input length {L} shorter than kernel {K}")
    p = K // 2
    xp = _pad1d(x, p, pad)
    starts = np.arange(0, L, stride)
    idx = starts[:, None] + np.arange(K)[None, :]
    cols = xp[:, :, idx].transpose(0, 2, 1, 3).reshape(B * len(starts), C * K)
    y = (cols @ W.reshape(O, C * K).T).reshape(B, len(starts), O).transpose(0, 2, 1)
    if b is not None:
        y = y + b[None, :, None]
    return y, (cols, W, x.shape, stride, pad, starts, b is not None)


def conv1d_backward(dy, cache):
    cols, W, (B, C, L), stride, pad, starts, has_bias = cache
    O, _, K = W.shape
    p = K // 2
    dyr = dy.transpose(0, 2, 1).reshape(-1, O)
    dW = (dyr.T @ cols).reshape(W.shape)
    db = dy.sum(axis=(0, 2)) if has_bias else None
    dcols = (dyr @ W.reshape(O, C * K)).reshape(B, len(starts), C, K)
    dxp = np.zeros((B, C, L + 2 * p))
    for k in range(K):
        dxp[:, :, starts + k] += dcols[:, :, :, k].transpose(0, 2, 1)
    return _unpad1d(dxp, p, L, pad), dW, db


def maxpool1d(x, k: int, stride: int, pad: str = CIRCULAR):
    """Windowed max; windows start at ``i * stride``.

    ``circular`` wraps indices past the end and ``zero`` reads zeros there
    (both give ``ceil(L / stride)`` outputs); ``none`` keeps only full windows.
    """
    B, C, L = x.shape
    if pad == NONE:
        if k > L:
            raise ValueError(f"pool window {k} larger than input length {L}")
        starts = np.arange(0, L - k + 1, stride)
    else:
        if k > L + k - 1:
            raise ValueError("pool window larger than padded input")
        starts = np.arange(0, L, stride)
    idx = starts[:, None] + np.arange(k)[None, :]
    if pad == CIRCULAR:
        idx = idx % L
        xe = x
    elif pad == ZERO:
        idx = np.minimum(idx, L)
        xe = np.concatenate([x, np.zeros((B, C, 1))], axis=2)
    elif pad == NONE:
        xe = x
    else:
        raise ValueError(f"unknown padding {pad!r}")
    win = xe[:, :, idx]
    arg = win.argmax(axis=-1)
    y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    src = idx[np.arange(len(starts))[None, None, :], arg]
    return y, (src, xe.shape, L)


def maxpool1d_backward(dy, cache):
    src, shape, L = cache
    B, C, Le = shape
    flat = (np.arange(B * C)[:, None] * Le + src.reshape(B * C, -1)).ravel()
    dxe = np.bincount(flat, weights=dy.ravel(), minlength=B * C * Le).reshape(B, C, Le)
    return dxe[:, :, :L]


def global_maxpool(x):
    if x.shape[-1] == 0:
        raise ValueError("global pooling over an empty axis")
    arg = x.argmax(axis=-1)
    return np.take_along_axis(x, arg[..., None], axis=-1)[..., 0], (arg, x.shape)


def global_maxpool_backward(dy, cache):
    arg, shape = cache
    dx = np.zeros(shape)
    np.put_along_axis(dx, arg[..., None], dy[..., None], axis=-1)
    return dx


def global_avgpool(x):
    if x.shape[-1] == 0:
        raise ValueError("global pooling over an empty axis")
    return x.mean(axis=-1), x.shape


def global_avgpool_backward(dy, shape):
    return np.broadcast_to(dy[..., None] / shape[-1], shape).copy()


BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def batch_norm1d(x, gamma, beta, train: bool, running_mean, running_var,
                 eps: float = BN_EPS, momentum: float = BN_MOMENTUM):
    """Per-channel normalization over batch (and length for 3D input).

    In train mode ``running_mean``/``running_var`` are updated in place
    (the variance with the unbiased estimate).
    """
    axes = (0, 2) if x.ndim == 3 else (0,)
    shape = (1, -1, 1) if x.ndim == 3 else (1, -1)
    if train:
        if x.shape[0] < 2:
            raise ValueError("batch_norm1d needs a batch of at least 2 in train mode")
        n = x.size // x.shape[1]
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * n / max(n - 1, 1)
    else:
        mean, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean.reshape(shape)) * inv.reshape(shape)
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return y, (xhat, inv, gamma, axes, shape, train)


def batch_norm1d_backward(dy, cache):
    xhat, inv, gamma, axes, shape, train = cache
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma.reshape(shape)
    if not train:
        return dxhat * inv.reshape(shape), dgamma, dbeta
    n = dy.size // dy.shape[1]
    s1 = dxhat.sum(axis=axes).reshape(shape)
    s2 = (dxhat * xhat).sum(axis=axes).reshape(shape)
    dx = inv.reshape(shape) / n * (n * dxhat - s1 - xhat * s2)
    return dx, dgamma, dbeta


LN_EPS = 1e-5


def layer_norm(x, gamma, beta, eps: float = LN_EPS):
    if x.shape[-1] == 0:
        raise ValueError("layer_norm over an empty feature axis")
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv
    return gamma * xhat + beta, (xhat, inv, gamma)


def layer_norm_backward(dy, cache):
    xhat, inv, gamma = cache
    n = xhat.shape[-1]
    lead = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=lead)
    dbeta = dy.sum(axis=lead)
    dxhat = dy * gamma
    dx = inv / n * (n * dxhat - dxhat.sum(-1, keepdims=True)
                    - xhat * (dxhat * xhat).sum(-1, keepdims=True))
    return dx, dgamma, dbeta


def relu(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy, mask):
    return dy * mask


def dropout(x, p: float, rng: np.random.Generator | None, train: bool):
    """Inverted dropout; identity in eval mode or when ``p == 0``."""
    if not 0 <= p < 1:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not train or p == 0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient w.r.t. ``logits``."""
    labels = np.asarray(labels)
    B, K = logits.shape
    if labels.shape != (B,) or labels.min(initial=0) < 0 or labels.max(initial=0) >= K:
        raise ValueError(f"labels must be {B} integers in [0, {K})")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(B), labels]))
    grad = np.exp(z - logsum[:, None])
    grad[np.arange(B), labels] -= 1
    return loss, grad / B


# ---------------------------------------------------------------------------
# modules

class Module:
    """Parameter container with forward/backward; children are walked in insertion order."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.children: dict[str, Module] = {}

    def add(self, name: str, module: "Module") -> "Module":
        self.children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for k, v in self.params.items():
            yield prefix + k, v
        for name, child in self.children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_grads(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for k in self.params:
            yield prefix + k, self.grads.get(k, np.zeros_like(self.params[k]))
        for name, child in self.children.items():
            yield from child.named_grads(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for k, v in self.buffers.items():
            yield prefix + k, v
        for name, child in self.children.items():
            yield from child.named_buffers(f"{prefix}{name}.")

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {f"param/{k}": v for k, v in self.named_parameters()}
        out.update({f"buffer/{k}": v for k, v in self.named_buffers()})
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = self.state_dict()
        missing = sorted(set(own) - set(state))
        if missing:
            raise KeyError(f"state is missing {missing}")
        for k, arr in own.items():
            src = np.asarray(state[k], dtype=np.float64)
            if src.shape != arr.shape:
                raise ValueError(f"{k}: shape {src.shape} != {arr.shape}")
            arr[...] = src

    def zero_grad(self) -> None:
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)
        for child in self.children.values():
            child.zero_grad()

    def _acc(self, name: str, g) -> None:
        if name in self.grads:
            self.grads[name] = self.grads[name] + g
        else:
            self.grads[name] = np.array(g, dtype=np.float64)

    def forward(self, x, train: bool = False, rng=None):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    __call__ = forward


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.params["W"] = glorot_uniform(rng, (n_in, n_out), n_in, n_out)
        self.params["b"] = np.zeros(n_out)

    def forward(self, x, train=False, rng=None):
        lead = x.shape[:-1]
        y, self._cache = dense(x.reshape(-1, x.shape[-1]), self.params["W"], self.params["b"])
        self._lead = lead
        return y.reshape(*lead, -1)

    def backward(self, dy):
        dx, dW, db = dense_backward(dy.reshape(-1, dy.shape[-1]), self._cache)
        self._acc("W", dW)
        self._acc("b", db)
        return dx.reshape(*self._lead, -1)


class Conv1d(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, kernel: int = 3,
                 stride: int = 1, padding: str = CIRCULAR, bias: bool = True):
        super().__init__()
        self.params["W"] = glorot_uniform(rng, (c_out, c_in, kernel), c_in * kernel, c_out * kernel)
        if bias:
            self.params["b"] = np.zeros(c_out)
        self.stride = stride
        self.padding = padding

    def forward(self, x, train=False, rng=None):
        y, self._cache = conv1d(x, self.params["W"], self.params.get("b"), self.stride, self.padding)
        return y

    def backward(self, dy):
        dx, dW, db = conv1d_backward(dy, self._cache)
        self._acc("W", dW)
        if db is not None:
            self._acc("b", db)
        return dx


class BatchNorm1d(Module):
    def __init__(self, channels: int):
        super().__init__()
        self.params["gamma"] = np.ones(channels)
        self.params["beta"] = np.zeros(channels)
        self.buffers["running_mean"] = np.zeros(channels)
        self.buffers["running_var"] = np.ones(channels)

    def forward(self, x, train=False, rng=None):
        y, self._cache = batch_norm1d(
            x, self.params["gamma"], self.params["beta"], train,
            self.buffers["running_mean"], self.buffers["running_var"],
        )
        return y

    def backward(self, dy):
        dx, dg, db = batch_norm1d_backward(dy, self._cache)
        self._acc("gamma", dg)
        self._acc("beta", db)
        return dx


class LayerNorm(Module):
    def __init__(self, n: int):
        super().__init__()
        self.params["gamma"] = np.ones(n)
        self.params["beta"] = np.zeros(n)

    def forward(self, x, train=False, rng=None):
        y, self._cache = layer_norm(x, self.params["gamma"], self.params["beta"])
        return y

    def backward(self, dy):
        dx, dg, db = layer_norm_backward(dy, self._cache)
        self._acc("gamma", dg)
        self._acc("beta", db)
        return dx


class ReLU(Module):
    def forward(self, x, train=False, rng=None):
        y, self._mask = relu(x)
        return y

    def backward(self, dy):
        return relu_backward(dy, self._mask)


class Dropout(Module):
    def __init__(self, p: float):
        super().__init__()
        if not 0 <= p < 1:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.p = p

    def forward(self, x, train=False, rng=None):
        y, self._mask = dropout(x, self.p, rng, train)
        return y

    def backward(self, dy):
        return dropout_backward(dy, self._mask)


class MaxPool1d(Module):
    def __init__(self, k: int, stride: int, padding: str = CIRCULAR):
        super().__init__()
        self.k, self.stride, self.padding = k, stride, padding

    def forward(self, x, train=False, rng=None):
        y, self._cache = maxpool1d(x, self.k, self.stride, self.padding)
        return y

    def backward(self, dy):
        return maxpool1d_backward(dy, self._cache)


class GlobalMaxPool(Module):
    def forward(self, x, train=False, rng=None):
        y, self._cache = global_maxpool(x)
        return y

    def backward(self, dy):
        return global_maxpool_backward(dy, self._cache)


class GlobalAvgPool(Module):
    def forward(self, x, train=False, rng=None):
        y, self._shape = global_avgpool(x)
        return y

    def backward(self, dy):
        return global_avgpool_backward(dy, self._shape)


class Sequential(Module):
    def __init__(self, *named: tuple[str, Module]):
        super().__init__()
        for name, m in named:
            self.add(name, m)

    def forward(self, x, train=False, rng=None):
        for m in self.children.values():
            x = m.forward(x, train, rng)
        return x

    def backward(self, dy):
        for m in reversed(list(self.children.values())):
            dy = m.backward(dy)
        return dy


class ResidualBlock1d(Module):
    """``relu(x + bn(conv(relu(bn(conv(x))))))`` with stride-1 kernel-3 convolutions."""

    def __init__(self, channels: int, rng: np.random.Generator, padding: str = CIRCULAR):
        super().__init__()
        self.body = Sequential(
            ("conv1", Conv1d(channels, channels, rng, padding=padding, bias=False)),
            ("bn1", BatchNorm1d(channels)),
            ("relu", ReLU()),
            ("conv2", Conv1d(channels, channels, rng, padding=padding, bias=False)),
            ("bn2", BatchNorm1d(channels)),
        )
        self.add("body", self.body)
        self.out = ReLU()

    def forward(self, x, train=False, rng=None):
        return self.out.forward(x + self.body.forward(x, train, rng))

    def backward(self, dy):
        d = self.out.backward(dy)
        return d + self.body.backward(d)


class ResidualDense(Module):
    """``layer_norm(relu(dense(x)) + skip(x))``; the skip is a learned
    projection when the widths differ."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.fc = self.add("fc", Dense(n_in, n_out, rng))
        self.act = ReLU()
        self.proj = self.add("proj", Dense(n_in, n_out, rng)) if n_in != n_out else None
        self.norm = self.add("norm", LayerNorm(n_out))

    def forward(self, x, train=False, rng=None):
        h = self.act.forward(self.fc.forward(x))
        skip = self.proj.forward(x) if self.proj is not None else x
        return self.norm.forward(h + skip)

    def backward(self, dy):
        d = self.norm.backward(dy)
        dx = self.fc.backward(self.act.backward(d))
        return dx + (self.proj.backward(d) if self.proj is not None else d)


def residual_block1d(x, block: ResidualBlock1d, train: bool = False, rng=None):
    return block.forward(x, train, rng)


def mlp(n_in: int, hidden: int, n_out: int, n_hidden_layers: int,
        rng: np.random.Generator) -> Sequential:
    """``n_hidden_layers`` residual dense layers of width ``hidden`` then a linear output."""
    layers = []
    width = n_in
    for i in range(n_hidden_layers):
        layers.append((f"layer{i}", ResidualDense(width, hidden, rng)))
        width = hidden
    layers.append(("out", Dense(width, n_out, rng)))
    return Sequential(*layers)


# ---------------------------------------------------------------------------
# optimizers

@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> None:
    """In-place bias-corrected Adam update of every array in ``params``."""
    state.step += 1
    t = state.step
    c1 = 1 - state.beta1 ** t
    c2 = 1 - state.beta2 ** t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"{k}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = state.m.setdefault(k, np.zeros_like(p))
        v = state.v.setdefault(k, np.zeros_like(p))
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def sgd_step(params: dict, grads: dict, state, lr: float) -> None:
    for k, p in params.items():
        p -= lr * grads[k]


# ---------------------------------------------------------------------------
# finite-difference verification

def relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numeric_grad(loss: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss()`` w.r.t. every entry of ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = loss()
        x[i] = old - eps
        down = loss()
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def grad_check(module: Module, x: np.ndarray, train: bool = True, seed: int = 0,
               eps: float = 1e-5, inputs: bool = True) -> float:
    """Max relative error between backward and central differences.

    The scalar probed is ``sum(module(x) * R)`` for a fixed random ``R``;
    every parameter and (optionally) every input coordinate is checked.
    Dropout masks and batch statistics are replayed identically per call.
    """
    buffers = {k: v.copy() for k, v in module.named_buffers()}

    def restore():
        for k, v in module.named_buffers():
            v[...] = buffers[k]

    def run():
        restore()
        return module.forward(x, train, np.random.default_rng(seed))

    out = run()
    probe = np.random.default_rng(seed + 1).standard_normal(out.shape)

    def loss():
        return float(np.sum(run() * probe))

    module.zero_grad()
    run()
    dx = module.backward(probe)
    analytic = dict(module.named_grads())
    worst = 0.0
    for name, p in module.named_parameters():
        worst = max(worst, relative_error(analytic[name], numeric_grad(loss, p, eps)))
    if inputs:
        worst = max(worst, relative_error(dx, numeric_grad(loss, x, eps)))
    restore()
    return worst
