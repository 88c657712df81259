"""Forward/backward definitions for the MLP, two-layer GCN, and APPNP heads.

All three share the structure

    hidden = relu(sign * prop1(X @ W1) + b1)
    logits = prop2(dropout(hidden) @ W2) + b2

and differ only in where the propagation operator appears: the MLP uses the
identity twice, the GCN applies it around both projections, and APPNP applies
a truncated personalized-PageRank power iteration after the second
projection. ``sign`` is +1 in the original space and -1 in the flipped space,
where the first pre-activation must be negated before the nonlinearity.
Log-softmax lives in the loss, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NormalizedGraph, spmm
from . import nn

KINDS = ("mlp", "gcn", "appnp")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "gcn"
    hidden_dim: int = 64
    dropout: float = 0.5
    appnp_iterations: int = 10
    appnp_teleport: float = 0.1
    bias: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.appnp_iterations < 1:
            raise ValueError("appnp_iterations must be >= 1")
        if not 0.0 < self.appnp_teleport <= 1.0:
            raise ValueError("appnp_teleport must be in (0, 1]")


def _propagate(prop, h: np.ndarray) -> np.ndarray:
    if prop is None:
        return h
    return spmm(prop, h)


@dataclass
class Tape:
    """Intermediates recorded by forward for the matching backward."""

    spec: ModelSpec
    prop: NormalizedGraph
    x_in: object
    w1: np.ndarray
    w2: np.ndarray
    sign: float
    pre1: np.ndarray
    hidden_dropped: np.ndarray
    drop_mask: object
    has_bias: bool = False
    consumed: bool = False


@dataclass
class ParamGrads:
    """Gradients with the same shapes as the weights used in the pass; ``w1``
    covers whichever (padded or unpadded) first-layer matrix was supplied."""

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


def forward(spec: ModelSpec, params: nn.ModelParams, prop, x_in, *,
            sign: float = 1.0, training: bool = False, rng=None):
    """Run one pass; returns (logits, tape). ``x_in`` may be sparse."""
    if x_in.shape[1] != params.w1.shape[0]:
        raise ValueError(
            f"input width {x_in.shape[1]} mismatches W1 rows {params.w1.shape[0]}"
        )
    pre1 = nn.linear_forward(x_in, params.w1)
    if spec.kind == "gcn":
        pre1 = _propagate(prop, pre1)
    pre1 = sign * pre1
    if params.b1 is not None:
        pre1 = pre1 + params.b1
    hidden = nn.relu_forward(pre1)
    dropped, mask = nn.dropout_forward(hidden, spec.dropout, rng, training)

    out = nn.linear_forward(dropped, params.w2)
    if spec.kind == "gcn":
        out = _propagate(prop, out)
    elif spec.kind == "appnp":
        z = out
        for _ in range(spec.appnp_iterations):
            z = (1.0 - spec.appnp_teleport) * _propagate(prop, z) + spec.appnp_teleport * out
        out = z
    if params.b2 is not None:
        out = out + params.b2
    tape = Tape(spec=spec, prop=prop, x_in=x_in, w1=params.w1, w2=params.w2,
                sign=sign, pre1=pre1, hidden_dropped=dropped, drop_mask=mask,
                has_bias=params.b1 is not None)
    return out, tape


def backward(spec: ModelSpec, tape: Tape, d_logits: np.ndarray) -> ParamGrads:
    """Exact gradients for the pass recorded in ``tape``. The propagation
    matrix is symmetric, so its transpose reuses the same sparse product."""
    if tape.consumed:
        raise ValueError("tape already consumed; rerun forward before backward")
    tape.consumed = True
    if spec.kind != tape.spec.kind:
        raise ValueError("tape does not match model kind")

    db2 = d_logits.sum(axis=0) if tape.has_bias else None

    if spec.kind == "gcn":
        d_out = _propagate(tape.prop, d_logits)
    elif spec.kind == "appnp":
        g = d_logits
        d_out = np.zeros_like(d_logits)
        for _ in range(spec.appnp_iterations):
            d_out = d_out + spec.appnp_teleport * g
            g = (1.0 - spec.appnp_teleport) * _propagate(tape.prop, g)
        d_out = d_out + g
    else:
        d_out = d_logits

    d_dropped, dw2 = nn.linear_backward(tape.hidden_dropped, tape.w2, d_out)
    d_hidden = nn.dropout_backward(d_dropped, tape.drop_mask)
    d_pre1 = nn.relu_backward(d_hidden, tape.pre1)
    db1 = d_pre1.sum(axis=0) if tape.has_bias else None

    d_lin1 = tape.sign * d_pre1
    if spec.kind == "gcn":
        d_lin1 = _propagate(tape.prop, d_lin1)
    dw1 = np.asarray(tape.x_in.T @ d_lin1, dtype=np.float64)
    return ParamGrads(w1=dw1, w2=dw2, b1=db1, b2=db2)


def predict_logits(spec: ModelSpec, params: nn.ModelParams, prop, x_in,
                   sign: float = 1.0) -> np.ndarray:
    logits, _ = forward(spec, params, prop, x_in, sign=sign, training=False)
    return logits


def predict(spec: ModelSpec, params: nn.ModelParams, prop, x_in,
            sign: float = 1.0) -> np.ndarray:
    """Argmax class per node; ties resolve to the lowest class id."""
    return np.argmax(predict_logits(spec, params, prop, x_in, sign=sign), axis=1)
