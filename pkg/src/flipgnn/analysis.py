"""Dataset diagnostics: nonzero-dimension ratio, edge homophily, and the
hop-based feature-type partition used in gradient-coverage reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureMatrix
from .graph import khop_nodes

T1, T2, T3, T4 = 1, 2, 3, 4


@dataclass(frozen=True)
class AnalysisReport:
    z_by_hop: dict
    homophily: float
    n: int
    m: int
    feature_dim: int
    num_classes: int

    def to_dict(self) -> dict:
        return {
            "z_by_hop": {str(k): v for k, v in self.z_by_hop.items()},
            "homophily": self.homophily,
            "n": self.n,
            "m": self.m,
            "F": self.feature_dim,
            "C": self.num_classes,
        }


@dataclass(frozen=True)
class FeatureTypePartition:
    """Per-dimension tag: 1 = active on a training node, 2/3 = first active on
    a 1-hop/2-hop neighbor of one, 4 = unreachable within two hops."""

    type_of_dim: np.ndarray

    def dims(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.type_of_dim == tag)

    def counts(self) -> dict:
        return {t: int((self.type_of_dim == t).sum()) for t in (T1, T2, T3, T4)}


def _active_dims(features: FeatureMatrix, nodes: np.ndarray) -> np.ndarray:
    """Dimensions whose summed value over ``nodes`` is exactly nonzero."""
    if nodes.size == 0:
        return np.zeros(0, dtype=np.int64)
    col_sums = np.asarray(features.csr[nodes].sum(axis=0)).ravel()
    return np.flatnonzero(col_sums != 0.0)


def z_value(dataset: Dataset, seeds, hop: int) -> float:
    """Fraction of feature dimensions nonzero over the <=hop neighborhood of
    ``seeds``: sum the feature rows and count exact-nonzero entries."""
    seeds = np.asarray(list(seeds), dtype=np.int64)
    if seeds.size == 0:
        raise ValueError("seed set must be non-empty")
    nodes = khop_nodes(dataset.graph, seeds, hop)
    return _active_dims(dataset.features, nodes).size / dataset.feature_dim


def homophily(dataset: Dataset) -> float:
    """Fraction of undirected edges whose endpoints share a label (each edge
    counted once)."""
    g = dataset.graph
    if g.m == 0:
        raise ValueError("homophily undefined on an edgeless graph")
    coo = g.to_csr().tocoo()
    upper = coo.row < coo.col
    same = dataset.labels[coo.row[upper]] == dataset.labels[coo.col[upper]]
    return float(same.mean())


def partition_feature_types(dataset: Dataset) -> FeatureTypePartition:
    train = dataset.split.train
    tags = np.full(dataset.feature_dim, T4, dtype=np.int8)
    for tag, hop in ((T3, 2), (T2, 1), (T1, 0)):
        nodes = khop_nodes(dataset.graph, train, hop)
        tags[_active_dims(dataset.features, nodes)] = tag
    return FeatureTypePartition(type_of_dim=tags)


def shift_features(features: FeatureMatrix, s: float) -> FeatureMatrix:
    """Add a constant to every feature entry. Densifies; only used by the
    shift-degradation study."""
    if s < 0:
        raise ValueError("shift must be non-negative")
    if s == 0:
        return features
    return FeatureMatrix.from_dense(features.dense + s)


def analyze(dataset: Dataset, hops=(0, 1, 2)) -> AnalysisReport:
    """Diagnostics over the training split as seed set."""
    z = {int(k): z_value(dataset, dataset.split.train, int(k)) for k in hops}
    return AnalysisReport(
        z_by_hop=z,
        homophily=homophily(dataset),
        n=dataset.n,
        m=dataset.m,
        feature_dim=dataset.feature_dim,
        num_classes=dataset.num_classes,
    )
