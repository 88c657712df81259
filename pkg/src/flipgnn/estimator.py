"""Scikit-learn style front end for the node classifiers.

The task is transductive, so ``fit`` takes a :class:`~flipgnn.data.Dataset`
(graph + features + labels + split) rather than an (X, y) pair; prediction
addresses nodes of the fitted graph. Hyperparameters follow the sklearn
convention of being stored verbatim by ``__init__`` so ``get_params`` /
``set_params`` / ``clone`` compose with the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import Dataset
from .models import KINDS, ModelSpec
from .train import (EVAL_SPACES, TrainConfig, predict_proba, train_flip,
                    train_plain)


class FlipNodeClassifier(BaseEstimator):
    """Semi-supervised node classifier with optional flip augmentation.

    Parameters
    ----------
    model : {'mlp', 'gcn', 'appnp'}
        Backbone architecture.
    flip : bool
        Alternate training between the original and reflected feature spaces.
        Requires features in [0, 1].
    alpha, beta : float
        Gradient scale applied in the original / flipped half of each epoch
        (flip mode only).
    hidden_dim, dropout, learning_rate, weight_decay, epochs : training
        hyperparameters shared by all backbones.
    grad_mode : {'direct', 'chain_through_d'}
        How the flipped-space first-layer gradient maps onto the shared block.
    eval_space : {'original', 'flipped'}
        Space used for evaluation and prediction; results agree either way.
    random_state : int
        Seed for initialization and dropout.

    Attributes
    ----------
    best_val_score_, test_score_ : float
        Best validation accuracy and the test accuracy recorded at it.
    history_ : list of EpochRecord
        Per-half loss/validation/test trace.
    """

    def __init__(self, model="gcn", flip=True, alpha=1.0, beta=0.1,
                 hidden_dim=64, dropout=0.5, learning_rate=1e-3,
                 weight_decay=5e-4, epochs=1000, grad_mode="direct",
                 eval_space="original", appnp_iterations=10,
                 appnp_teleport=0.1, bias=False, reflection_value=0.5,
                 random_state=0):
        self.model = model
        self.flip = flip
        self.alpha = alpha
        self.beta = beta
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.grad_mode = grad_mode
        self.eval_space = eval_space
        self.appnp_iterations = appnp_iterations
        self.appnp_teleport = appnp_teleport
        self.bias = bias
        self.reflection_value = reflection_value
        self.random_state = random_state

    def _build_config(self) -> TrainConfig:
        if self.model not in KINDS:
            raise ValueError(f"model must be one of {KINDS}, got {self.model!r}")
        if self.eval_space not in EVAL_SPACES:
            raise ValueError(f"eval_space must be one of {EVAL_SPACES}")
        spec = ModelSpec(kind=self.model, hidden_dim=self.hidden_dim,
                         dropout=self.dropout,
                         appnp_iterations=self.appnp_iterations,
                         appnp_teleport=self.appnp_teleport, bias=self.bias)
        return TrainConfig(model=spec, flip_enabled=bool(self.flip),
                           alpha=self.alpha, beta=self.beta,
                           learning_rate=self.learning_rate,
                           weight_decay=self.weight_decay, epochs=self.epochs,
                           seed=self.random_state, grad_mode=self.grad_mode,
                           eval_space=self.eval_space,
                           reflection_value=self.reflection_value)

    def fit(self, dataset: Dataset, y=None):
        if not isinstance(dataset, Dataset):
            raise TypeError("fit expects a flipgnn.data.Dataset")
        cfg = self._build_config()
        state = train_flip(cfg, dataset) if cfg.flip_enabled else train_plain(cfg, dataset)
        self.config_ = cfg
        self.dataset_ = dataset
        self.state_ = state
        self.classes_ = np.arange(dataset.num_classes)
        self.n_features_in_ = dataset.feature_dim
        self.best_val_score_ = state.best_val
        self.test_score_ = state.test_at_best
        self.history_ = state.log
        return self

    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise NotFittedError("call fit before predicting")

    def _node_ids(self, nodes) -> np.ndarray:
        if nodes is None:
            return np.arange(self.dataset_.n)
        ids = np.asarray(nodes, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.dataset_.n):
            raise ValueError("node id out of range for the fitted graph")
        return ids

    def predict_proba(self, nodes=None) -> np.ndarray:
        """Class probabilities of the best-validation weights."""
        self._check_fitted()
        probs = predict_proba(self.config_, self.dataset_, self.state_.best_params)
        return probs[self._node_ids(nodes)]

    def predict(self, nodes=None) -> np.ndarray:
        self._check_fitted()
        return np.argmax(self.predict_proba(nodes), axis=1)

    def score(self, nodes=None, split: str = "test") -> float:
        """Accuracy against the dataset labels, on ``nodes`` if given, else on
        the requested split."""
        self._check_fitted()
        if nodes is None:
            nodes = getattr(self.dataset_.split, split)
        ids = self._node_ids(nodes)
        preds = self.predict(ids)
        return float((preds == self.dataset_.labels[ids]).mean())
