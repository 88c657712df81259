"""Dense kernels with explicit backward passes, NLL loss, Adam, and a
finite-difference gradient oracle.

Everything is double precision. Inputs to the linear kernels may be scipy
sparse matrices; outputs are always dense ndarrays. A first-layer input
column that is identically zero yields a bitwise-zero gradient row, which is
the starvation effect the flip mechanism exists to remove.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DivergenceError


def _as_dense(x) -> np.ndarray:
    if sp.issparse(x):
        return np.asarray(x.todense(), dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def linear_forward(x, w: np.ndarray) -> np.ndarray:
    """X @ W for dense or sparse X."""
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"inner dimensions mismatch: {x.shape} @ {w.shape}")
    out = x @ w
    return np.asarray(out, dtype=np.float64)


def linear_backward(x, w: np.ndarray, d_out: np.ndarray):
    """Backward of X @ W: returns (dX, dW) = (dOut @ W^T, X^T @ dOut)."""
    if d_out.shape != (x.shape[0], w.shape[1]):
        raise ValueError(f"upstream shape {d_out.shape} mismatches {x.shape} @ {w.shape}")
    dw = np.asarray(x.T @ d_out, dtype=np.float64)
    dx = np.asarray(d_out @ w.T, dtype=np.float64)
    return dx, dw


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(d_out: np.ndarray, pre: np.ndarray) -> np.ndarray:
    return d_out * (pre > 0.0)


def dropout_forward(x: np.ndarray, p: float, rng, training: bool):
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Returns (out, mask); at eval time (or p == 0) the mask is None and the
    input passes through unchanged.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must be in [0, 1)")
    if not training or p == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(d_out: np.ndarray, mask) -> np.ndarray:
    if mask is None:
        return d_out
    return d_out * mask


def logsoftmax_nll(logits: np.ndarray, labels: np.ndarray, mask):
    """Mean negative log-likelihood over the masked rows of log-softmax(logits).

    Returns (loss, dLogits) with dLogits = (softmax - onehot) / |mask| on
    masked rows and 0 elsewhere. Stabilized by row-max subtraction.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("loss mask must be non-empty")
    labels = np.asarray(labels, dtype=np.int64)
    rows = logits[mask]
    y = labels[mask]
    if y.min() < 0 or y.max() >= logits.shape[1]:
        raise ValueError("label out of range for logit width")
    shifted = rows - rows.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    loss = -logp[np.arange(y.size), y].mean()
    softmax = np.exp(logp)
    softmax[np.arange(y.size), y] -= 1.0
    d_logits = np.zeros_like(logits)
    d_logits[mask] = softmax / y.size
    return loss, d_logits


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ModelParams:
    """Trainable tensors. ``w1`` is always the unpadded shared block; when
    flipping is enabled the padded per-space views are derived, never stored.
    Biases (off by default) are shared across spaces and never flipped.
    """

    w1: np.ndarray
    w2: np.ndarray
    b1: np.ndarray = None
    b2: np.ndarray = None

    def named(self) -> dict:
        out = {"w1": self.w1, "w2": self.w2}
        if self.b1 is not None:
            out["b1"] = self.b1
        if self.b2 is not None:
            out["b2"] = self.b2
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            w1=self.w1.copy(),
            w2=self.w2.copy(),
            b1=None if self.b1 is None else self.b1.copy(),
            b2=None if self.b2 is None else self.b2.copy(),
        )


def glorot_init(in_dim: int, out_dim: int, rng) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(in_dim, out_dim))


def init_params(in_dim: int, hidden_dim: int, out_dim: int, rng, bias: bool = False) -> ModelParams:
    return ModelParams(
        w1=glorot_init(in_dim, hidden_dim, rng),
        w2=glorot_init(hidden_dim, out_dim, rng),
        b1=np.zeros(hidden_dim) if bias else None,
        b2=np.zeros(out_dim) if bias else None,
    )


class AdamState:
    """Adam with bias correction; weight decay enters as an L2 gradient term.

    Gradient scaling by the per-space factor happens in the caller, before
    the decay term is added, so decay strength is independent of the scale.
    """

    def __init__(self, params: ModelParams, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.named().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.named().items()}

    def step(self, params: ModelParams, grads: dict) -> None:
        tensors = params.named()
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for key, p in tensors.items():
            g = grads[key]
            if not np.all(np.isfinite(g)):
                raise DivergenceError(f"non-finite gradient for {key}")
            if self.weight_decay:
                g = g + self.weight_decay * p
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            m_hat = self.m[key] / bc1
            v_hat = self.v[key] / bc2
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def fd_gradcheck(loss_fn, params, analytic, eps: float = 1e-5) -> float:
    """Max relative error between central differences and analytic gradients.

    ``loss_fn`` must be deterministic (dropout off) and read the arrays in
    ``params`` in place. Relative error uses max(|a|, |f|, 1e-8) as the
    denominator.
    """
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.ravel()
        grad = np.asarray(a, dtype=np.float64).ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()
            flat[i] = orig - eps
            down = loss_fn()
            flat[i] = orig
            fd = (up - down) / (2.0 * eps)
            denom = max(abs(fd), abs(grad[i]), 1e-8)
            worst = max(worst, abs(fd - grad[i]) / denom)
    return worst
