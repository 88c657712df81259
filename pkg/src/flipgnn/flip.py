"""Point-reflection augmentation of features and the first hyperplane.

Features in [0, 1]^F are reflected through a point p1 (the hypercube center
by default) and padded with a constant 1; the shared first weight block W1 is
padded with -2d, where d is the columnwise inner product of p1 with W1. The
two views then satisfy

    X_o @ W_o = -(X_f @ W_f)

exactly, so negating the flipped first-layer output reproduces the original
hidden state while every feature dimension of the flipped input is nonzero
and therefore receives gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import FeatureRangeError
from .graph import spmm
from .nn import relu_forward

GRAD_MODES = ("direct", "chain_through_d")


@dataclass(frozen=True)
class FlipContext:
    """Cached padded views of the feature matrix for both spaces.

    ``x_o`` keeps the sparse layout with an all-zero pad column; ``x_f`` is
    dense by construction (the reflection fills in the zeros -- that is the
    point) with an all-ones pad column, roughly doubling feature memory.
    """

    p1: np.ndarray
    x_o: sp.csr_matrix
    x_f: np.ndarray

    @property
    def n(self) -> int:
        return self.x_o.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.x_o.shape[1] - 1


@dataclass(frozen=True)
class FlippedPlaneView:
    """Derived first-layer weights for the flipped space: the shared block
    with a -2d pad row. Recomputed from the current weights before every
    flipped pass; the pad row is never a free parameter."""

    w_f: np.ndarray
    d: np.ndarray

    @property
    def pad_row(self) -> np.ndarray:
        return self.w_f[-1]


def _feature_csr(features) -> sp.csr_matrix:
    if sp.issparse(features):
        return features.tocsr()
    if hasattr(features, "csr"):
        return features.csr
    return sp.csr_matrix(np.asarray(features, dtype=np.float64))


def make_flip_context(features, p1=None) -> FlipContext:
    """Build the padded original and reflected views of the features.

    ``p1`` defaults to the hypercube center (0.5, ..., 0.5); a custom vector
    in (0, 1)^F is accepted for experimentation.
    """
    x = _feature_csr(features)
    n, dim = x.shape
    if x.nnz and (x.data.min() < 0.0 or x.data.max() > 1.0):
        bad = x.data.min() if x.data.min() < 0 else x.data.max()
        raise FeatureRangeError(
            f"flipping requires features in [0, 1]; found {bad} "
            "(rescale the dataset, e.g. with minmax scaling)"
        )
    if p1 is None:
        p1 = np.full(dim, 0.5)
    else:
        p1 = np.asarray(p1, dtype=np.float64)
        if p1.shape != (dim,):
            raise ValueError(f"p1 must have length {dim}, got {p1.shape}")
        if p1.min() <= 0.0 or p1.max() >= 1.0:
            raise ValueError("p1 entries must lie strictly inside (0, 1)")
    x_o = sp.hstack([x, sp.csr_matrix((n, 1))], format="csr")
    x_f = np.empty((n, dim + 1))
    x_f[:, :dim] = 2.0 * p1 - x.toarray()
    x_f[:, dim] = 1.0
    return FlipContext(p1=p1, x_o=x_o, x_f=x_f)


def pad_original(w1: np.ndarray) -> np.ndarray:
    """Zero-pad the shared block for the original space: [W1; 0]."""
    return np.vstack([w1, np.zeros((1, w1.shape[1]))])


def flip_hyperplane(w1: np.ndarray, p1: np.ndarray) -> FlippedPlaneView:
    """Derive the flipped first hyperplane [W1; -2d] with d = p1^T W1."""
    if p1.shape[0] != w1.shape[0]:
        raise ValueError("p1 length must match W1 rows")
    d = p1 @ w1
    return FlippedPlaneView(w_f=np.vstack([w1, -2.0 * d]), d=d)


def first_layer_flipped(prop, ctx: FlipContext, view: FlippedPlaneView) -> np.ndarray:
    """Flipped-space first layer: relu of the negated propagated projection.

    Equals the original-space first layer for the same shared weights when
    dropout is off.
    """
    pre = ctx.x_f @ view.w_f
    if prop is not None:
        pre = spmm(prop, pre)
    return relu_forward(-pre)


def assemble_flipped_grads(dw_f: np.ndarray, p1: np.ndarray,
                           mode: str = "direct") -> np.ndarray:
    """Map the (F+1)-row flipped-space gradient onto the shared F-row block.

    ``direct`` drops the pad-row gradient, treating the flipped rows as free
    parameters; ``chain_through_d`` additionally propagates the pad row back
    through d = p1^T W1, giving the exact derivative of the shared
    parameterization: dW1[i, j] = dWf[i, j] - 2 * p1[i] * dWf[F, j].
    """
    if mode not in GRAD_MODES:
        raise ValueError(f"unknown grad mode {mode!r}")
    if dw_f.shape[0] != p1.shape[0] + 1:
        raise ValueError("flipped gradient must have F+1 rows")
    block = dw_f[:-1]
    if mode == "direct":
        return block.copy()
    return block - 2.0 * np.outer(p1, dw_f[-1])
