"""Dataset container, on-disk TSV/JSON format, and a synthetic benchmark generator.

Directory layout (UTF-8, LF, tab-separated, 0-indexed node ids):

    meta.json       {"name": str, "n": int, "F": int, "C": int}
    edges.tsv       one "u\\tv" per undirected edge, u < v, sorted by (u, v)
    features.tsv    "node\\tdim\\tvalue" triplets, sorted by (node, dim)
    labels.tsv      "node\\tlabel", one line per node, sorted by node
    splits.tsv      "node\\trole" with role in {train, val, test}

Omitted feature entries are zero; explicit zeros are dropped at load time so
"nonzero" is unambiguous for the sparsity diagnostics. Converters from public
benchmark graphs are one-page scripts against this contract and are not part
of the package.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DatasetFormatError
from .graph import Graph, NodeSplit, build_graph

ROLES = ("train", "val", "test")


@dataclass(frozen=True)
class FeatureMatrix:
    """Node features held as a canonical CSR matrix with a cached dense view."""

    csr: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.csr.shape[0]

    @property
    def dim(self) -> int:
        return self.csr.shape[1]

    @cached_property
    def dense(self) -> np.ndarray:
        return np.asarray(self.csr.todense(), dtype=np.float64)

    def triplets(self):
        coo = self.csr.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    @classmethod
    def from_triplets(cls, n: int, dim: int, rows, cols, values) -> "FeatureMatrix":
        csr = sp.csr_matrix(
            (np.asarray(values, dtype=np.float64), (rows, cols)), shape=(n, dim)
        )
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(csr=csr)

    @classmethod
    def from_dense(cls, arr) -> "FeatureMatrix":
        csr = sp.csr_matrix(np.asarray(arr, dtype=np.float64))
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(csr=csr)


@dataclass(frozen=True)
class Dataset:
    """A graph, node features, labels, and a train/val/test split."""

    name: str
    graph: Graph
    features: FeatureMatrix
    labels: np.ndarray
    split: NodeSplit
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        n = self.graph.n
        if self.features.n != n or labels.shape != (n,):
            raise ValueError("graph, features, and labels disagree on node count")
        if labels.min(initial=0) < 0 or (labels.size and labels.max() >= self.num_classes):
            raise ValueError("label out of range")
        if not np.all(np.isfinite(self.features.csr.data)):
            raise ValueError("non-finite feature value")
        self.split.validate_against(n)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def feature_dim(self) -> int:
        return self.features.dim

    def meta(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "F": self.feature_dim,
            "C": self.num_classes,
        }

    def with_train_nodes(self, train_ids) -> "Dataset":
        split = NodeSplit(train=np.asarray(train_ids, dtype=np.int64),
                          val=self.split.val, test=self.split.test)
        return replace(self, split=split)


def _read_lines(directory: str, filename: str):
    path = os.path.join(directory, filename)
    if not os.path.isfile(path):
        raise DatasetFormatError(f"missing dataset file: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line:
                yield path, lineno, line.split("\t")


def _parse_int(token: str, path: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise DatasetFormatError(f"{path}:{lineno}: bad {what} {token!r}") from None


def load_dataset(directory: str, scale: str = "none") -> Dataset:
    """Load a dataset directory; ``scale='minmax'`` maps each feature dimension
    to [0, 1] (constant dimensions map to 0)."""
    if scale not in ("none", "minmax"):
        raise ValueError(f"unknown scale mode {scale!r}")
    meta_path = os.path.join(directory, "meta.json")
    if not os.path.isfile(meta_path):
        raise DatasetFormatError(f"missing dataset file: {meta_path}")
    with open(meta_path, encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{meta_path}: invalid JSON ({exc})") from None
    for key in ("name", "n", "F", "C"):
        if key not in meta:
            raise DatasetFormatError(f"{meta_path}: missing key {key!r}")
    n, dim, classes = int(meta["n"]), int(meta["F"]), int(meta["C"])

    edges = []
    for path, lineno, parts in _read_lines(directory, "edges.tsv"):
        if len(parts) != 2:
            raise DatasetFormatError(f"{path}:{lineno}: expected 'u\\tv'")
        u = _parse_int(parts[0], path, lineno, "node id")
        v = _parse_int(parts[1], path, lineno, "node id")
        if not (0 <= u < n and 0 <= v < n):
            raise DatasetFormatError(f"{path}:{lineno}: node id out of range")
        if u >= v:
            raise DatasetFormatError(f"{path}:{lineno}: edges must satisfy u < v")
        edges.append((u, v))
    graph = build_graph(edges, n)

    rows, cols, vals = [], [], []
    seen = set()
    for path, lineno, parts in _read_lines(directory, "features.tsv"):
        if len(parts) != 3:
            raise DatasetFormatError(f"{path}:{lineno}: expected 'node\\tdim\\tvalue'")
        node = _parse_int(parts[0], path, lineno, "node id")
        d = _parse_int(parts[1], path, lineno, "dimension")
        try:
            value = float(parts[2])
        except ValueError:
            raise DatasetFormatError(f"{path}:{lineno}: bad value {parts[2]!r}") from None
        if not (0 <= node < n):
            raise DatasetFormatError(f"{path}:{lineno}: node id out of range")
        if not (0 <= d < dim):
            raise DatasetFormatError(f"{path}:{lineno}: dimension out of range")
        if not math.isfinite(value):
            raise DatasetFormatError(f"{path}:{lineno}: non-finite value")
        if (node, d) in seen:
            raise DatasetFormatError(f"{path}:{lineno}: duplicate entry ({node}, {d})")
        seen.add((node, d))
        rows.append(node)
        cols.append(d)
        vals.append(value)
    features = FeatureMatrix.from_triplets(n, dim, rows, cols, vals)

    labels = np.full(n, -1, dtype=np.int64)
    for path, lineno, parts in _read_lines(directory, "labels.tsv"):
        if len(parts) != 2:
            raise DatasetFormatError(f"{path}:{lineno}: expected 'node\\tlabel'")
        node = _parse_int(parts[0], path, lineno, "node id")
        label = _parse_int(parts[1], path, lineno, "label")
        if not (0 <= node < n):
            raise DatasetFormatError(f"{path}:{lineno}: node id out of range")
        if label < 0 or label >= classes:
            raise DatasetFormatError(f"{path}:{lineno}: label {label} >= C={classes}")
        if labels[node] != -1:
            raise DatasetFormatError(f"{path}:{lineno}: duplicate label for node {node}")
        labels[node] = label
    if np.any(labels < 0):
        missing = int(np.flatnonzero(labels < 0)[0])
        raise DatasetFormatError(
            f"{os.path.join(directory, 'labels.tsv')}: no label for node {missing}"
        )

    roles: dict[str, list] = {role: [] for role in ROLES}
    assigned = {}
    for path, lineno, parts in _read_lines(directory, "splits.tsv"):
        if len(parts) != 2:
            raise DatasetFormatError(f"{path}:{lineno}: expected 'node\\trole'")
        node = _parse_int(parts[0], path, lineno, "node id")
        role = parts[1]
        if role not in ROLES:
            raise DatasetFormatError(f"{path}:{lineno}: unknown role {role!r}")
        if not (0 <= node < n):
            raise DatasetFormatError(f"{path}:{lineno}: node id out of range")
        if node in assigned:
            raise DatasetFormatError(
                f"{path}:{lineno}: node {node} already assigned to {assigned[node]}"
            )
        assigned[node] = role
        roles[role].append(node)
    split = NodeSplit(
        train=np.array(roles["train"], dtype=np.int64),
        val=np.array(roles["val"], dtype=np.int64),
        test=np.array(roles["test"], dtype=np.int64),
    )

    if scale == "minmax":
        features = minmax_scale(features)

    return Dataset(
        name=str(meta["name"]),
        graph=graph,
        features=features,
        labels=labels,
        split=split,
        num_classes=classes,
    )


def minmax_scale(features: FeatureMatrix) -> FeatureMatrix:
    """Per-dimension (x - min) / (max - min); constant dimensions map to 0."""
    dense = features.dense
    lo = dense.min(axis=0)
    hi = dense.max(axis=0)
    span = hi - lo
    out = np.zeros_like(dense)
    live = span > 0
    out[:, live] = (dense[:, live] - lo[live]) / span[live]
    return FeatureMatrix.from_dense(out)


def save_dataset(dataset: Dataset, directory: str) -> None:
    """Write the five dataset files. Round-trips exactly through load_dataset."""
    os.makedirs(directory, exist_ok=True)
    meta = {
        "name": dataset.name,
        "n": dataset.n,
        "F": dataset.feature_dim,
        "C": dataset.num_classes,
    }
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    g = dataset.graph
    with open(os.path.join(directory, "edges.tsv"), "w", encoding="utf-8") as fh:
        for u in range(g.n):
            for v in g.neighbors(u):
                if u < v:
                    fh.write(f"{u}\t{v}\n")

    rows, cols, vals = dataset.features.triplets()
    with open(os.path.join(directory, "features.tsv"), "w", encoding="utf-8") as fh:
        for r, c, x in zip(rows, cols, vals):
            fh.write(f"{r}\t{c}\t{x!r}\n")

    with open(os.path.join(directory, "labels.tsv"), "w", encoding="utf-8") as fh:
        for node, label in enumerate(dataset.labels):
            fh.write(f"{node}\t{label}\n")

    with open(os.path.join(directory, "splits.tsv"), "w", encoding="utf-8") as fh:
        entries = [(int(node), role) for role in ROLES
                   for node in getattr(dataset.split, role)]
        for node, role in sorted(entries):
            fh.write(f"{node}\t{role}\n")


@dataclass(frozen=True)
class SynthSpec:
    """Stochastic-block-model benchmark with class-wise feature signatures.

    Each class owns ``signature_dims_per_class`` disjoint feature dimensions.
    Every node turns on each dimension of its class signature independently
    with probability ``activation_p`` -- except training nodes, which only see
    the first ``train_dim_fraction`` of their signature, so the nonzero-ratio
    over the training set is controlled and test nodes exercise dimensions the
    training nodes never activate. ``distractor_dims`` extra dimensions stay
    zero everywhere.
    """

    n: int = 400
    classes: int = 4
    signature_dims_per_class: int = 42
    train_per_class: int = 20
    intra_p: float = 0.04
    inter_p: float = 0.008
    train_dim_fraction: float = 0.25
    activation_p: float = 0.2
    distractor_dims: int = 8
    feature_dim: int = None
    name: str = "synthetic"
    seed: int = 0

    def __post_init__(self):
        for p in (self.intra_p, self.inter_p, self.activation_p):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must be in [0, 1]")
        if not 0.0 < self.train_dim_fraction <= 1.0:
            raise ValueError("train_dim_fraction must be in (0, 1]")
        needed = self.classes * self.signature_dims_per_class + self.distractor_dims
        if self.feature_dim is None:
            object.__setattr__(self, "feature_dim", needed)
        elif needed > self.feature_dim:
            raise ValueError(
                f"signature dims ({needed}) exceed feature budget ({self.feature_dim})"
            )
        if self.n < self.classes * self.train_per_class:
            raise ValueError("not enough nodes for the requested training split")


def benchmark_spec(seed: int = 0) -> SynthSpec:
    """The default low-coverage benchmark used by the verification suite."""
    return SynthSpec(seed=seed)


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Deterministic synthetic dataset; independent RNG streams for edges,
    splits, and features so each component reproduces on its own."""
    root = np.random.SeedSequence(spec.seed)
    edge_ss, split_ss, feat_ss = root.spawn(3)
    n, classes = spec.n, spec.classes

    # contiguous class blocks; remainder nodes go to the leading classes
    base, extra = divmod(n, classes)
    sizes = [base + (1 if c < extra else 0) for c in range(classes)]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    labels = np.zeros(n, dtype=np.int64)
    for c in range(classes):
        labels[bounds[c]:bounds[c + 1]] = c

    edge_rng = np.random.default_rng(edge_ss)
    edges = []
    for a in range(classes):
        ia = np.arange(bounds[a], bounds[a + 1])
        for b in range(a, classes):
            ib = np.arange(bounds[b], bounds[b + 1])
            p = spec.intra_p if a == b else spec.inter_p
            draw = edge_rng.random((ia.size, ib.size)) < p
            if a == b:
                draw = np.triu(draw, k=1)
            us, vs = np.nonzero(draw)
            edges.extend(zip(ia[us], ib[vs]))
    graph = build_graph(edges, n)

    split_rng = np.random.default_rng(split_ss)
    train = []
    for c in range(classes):
        members = np.arange(bounds[c], bounds[c + 1])
        train.extend(split_rng.choice(members, size=spec.train_per_class, replace=False))
    train = np.sort(np.array(train, dtype=np.int64))
    rest = np.setdiff1d(np.arange(n), train)
    rest = split_rng.permutation(rest)
    half = rest.size // 2
    split = NodeSplit(train=train, val=np.sort(rest[:half]), test=np.sort(rest[half:]))

    feat_rng = np.random.default_rng(feat_ss)
    sig = spec.signature_dims_per_class
    visible = max(1, math.ceil(spec.train_dim_fraction * sig - 1e-9))
    train_mask = np.zeros(n, dtype=bool)
    train_mask[train] = True
    rows, cols = [], []
    for node in range(n):
        start = labels[node] * sig
        width = visible if train_mask[node] else sig
        active = np.flatnonzero(feat_rng.random(width) < spec.activation_p)
        rows.extend([node] * active.size)
        cols.extend(start + active)
    features = FeatureMatrix.from_triplets(
        n, spec.feature_dim, rows, cols, np.ones(len(rows))
    )

    return Dataset(
        name=spec.name,
        graph=graph,
        features=features,
        labels=labels,
        split=split,
        num_classes=classes,
    )
