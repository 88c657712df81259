"""Full-batch training loops: plain single-space optimization and the
alternating two-space schedule, plus the experiment harnesses built on them
(grid search, gradient-coverage statistics, prediction-variance report,
label-budget and feature-shift studies).

A flip-enabled epoch runs two halves. The original half trains on the
zero-padded views (X_o, [W1; 0]); the flipped half rebuilds the reflected
hyperplane from the current weights, trains on (X_f, [W1; -2d]) with the
sign-corrected first layer, and maps the (F+1)-row gradient back onto the
shared block. Each half scales its data gradient by its own factor (alpha
originally, beta flipped) before the shared Adam step, and each half is
followed by evaluation with strict best-validation tracking, so the reported
test score is the one recorded at the best validation score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import partition_feature_types, shift_features, z_value
from .data import Dataset
from .errors import DivergenceError
from .flip import assemble_flipped_grads, flip_hyperplane, make_flip_context, pad_original
from .graph import renormalize
from .models import ModelSpec, backward, forward, predict_logits
from .nn import AdamState, ModelParams, init_params, logsoftmax_nll, softmax

EVAL_SPACES = ("original", "flipped")


@dataclass(frozen=True)
class TrainConfig:
    model: ModelSpec
    flip_enabled: bool = False
    alpha: float = 1.0
    beta: float = 0.1
    learning_rate: float = 1e-3
    weight_decay: float = 5e-4
    epochs: int = 1000
    seed: int = 0
    grad_mode: str = "direct"
    eval_space: str = "original"
    reflection_value: float = 0.5
    scale_first_layer_only: bool = False

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.grad_mode not in ("direct", "chain_through_d"):
            raise ValueError(f"unknown grad_mode {self.grad_mode!r}")
        if self.eval_space not in EVAL_SPACES:
            raise ValueError(f"unknown eval_space {self.eval_space!r}")
        if not 0.0 < self.reflection_value < 1.0:
            raise ValueError("reflection_value must be in (0, 1)")


@dataclass
class EpochRecord:
    epoch: int
    half: str
    loss: float
    val_acc: float
    test_acc: float


@dataclass
class TrainState:
    params: ModelParams
    adam: AdamState
    epoch: int = 0
    best_val: float = 0.0
    test_at_best: float = 0.0
    best_params: ModelParams = None
    log: list = field(default_factory=list)

    def combined_epoch_losses(self) -> np.ndarray:
        """Summed loss per epoch across the halves recorded in the log."""
        totals: dict[int, float] = {}
        for rec in self.log:
            totals[rec.epoch] = totals.get(rec.epoch, 0.0) + rec.loss
        return np.array([totals[e] for e in sorted(totals)])


def _accuracy(preds: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    if idx.size == 0:
        return 0.0
    return float((preds[idx] == labels[idx]).mean())


def build_propagation(cfg: TrainConfig, dataset: Dataset):
    if cfg.model.kind in ("gcn", "appnp"):
        return renormalize(dataset.graph)
    return None


def _check_loss(loss: float, epoch: int) -> None:
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)


def _scaled(grads, factor: float, first_layer_only: bool) -> dict:
    named = grads if isinstance(grads, dict) else grads.named()
    out = {}
    for key, g in named.items():
        scale = factor if (key in ("w1", "b1") or not first_layer_only) else 1.0
        out[key] = g * scale
    return out


def _record(state: TrainState, epoch: int, half: str, loss: float,
            val_acc: float, test_acc: float) -> None:
    state.log.append(EpochRecord(epoch, half, loss, val_acc, test_acc))
    if val_acc > state.best_val:
        state.best_val = val_acc
        state.test_at_best = test_acc
        state.best_params = state.params.copy()


def train_plain(cfg: TrainConfig, dataset: Dataset) -> TrainState:
    """Single-space full-batch training with per-epoch evaluation."""
    if cfg.flip_enabled:
        raise ValueError("train_plain requires flip_enabled=False")
    init_rng, drop_rng = (np.random.default_rng(s)
                          for s in np.random.SeedSequence(cfg.seed).spawn(2))
    prop = build_propagation(cfg, dataset)
    x = dataset.features.csr
    params = init_params(dataset.feature_dim, cfg.model.hidden_dim,
                         dataset.num_classes, init_rng, bias=cfg.model.bias)
    adam = AdamState(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    state = TrainState(params=params, adam=adam)
    labels, split = dataset.labels, dataset.split

    for epoch in range(1, cfg.epochs + 1):
        logits, tape = forward(cfg.model, params, prop, x, training=True, rng=drop_rng)
        loss, d_logits = logsoftmax_nll(logits, labels, split.train)
        _check_loss(loss, epoch)
        grads = backward(cfg.model, tape, d_logits)
        adam.step(params, grads.named())

        preds = np.argmax(predict_logits(cfg.model, params, prop, x), axis=1)
        _record(state, epoch, "o", loss,
                _accuracy(preds, labels, split.val),
                _accuracy(preds, labels, split.test))
        state.epoch = epoch
    if state.best_params is None:
        state.best_params = params.copy()
    return state


def _space_view(params: ModelParams, p1: np.ndarray, space: str) -> ModelParams:
    if space == "original":
        w = pad_original(params.w1)
    else:
        w = flip_hyperplane(params.w1, p1).w_f
    return ModelParams(w1=w, w2=params.w2, b1=params.b1, b2=params.b2)


def _eval_flip(cfg: TrainConfig, params: ModelParams, prop, ctx, labels, split):
    space = cfg.eval_space
    view = _space_view(params, ctx.p1, space)
    x_in = ctx.x_o if space == "original" else ctx.x_f
    sign = 1.0 if space == "original" else -1.0
    preds = np.argmax(predict_logits(cfg.model, view, prop, x_in, sign=sign), axis=1)
    return (_accuracy(preds, labels, split.val), _accuracy(preds, labels, split.test))


def train_flip(cfg: TrainConfig, dataset: Dataset, grad_observer=None) -> TrainState:
    """Alternating two-space training.

    Each epoch: (a) original-space pass, gradients scaled by alpha, Adam step,
    evaluation with best tracking; (b) flipped views rebuilt from the current
    weights, flipped-space pass, gradient mapped back per ``grad_mode`` and
    scaled by beta, Adam step, evaluation with best tracking. A single Adam
    state is stepped by both halves.

    ``grad_observer(epoch, space, dw1)`` receives the unscaled data gradient
    of the shared first-layer block after each half.
    """
    if not cfg.flip_enabled:
        raise ValueError("train_flip requires flip_enabled=True")
    init_rng, drop_rng = (np.random.default_rng(s)
                          for s in np.random.SeedSequence(cfg.seed).spawn(2))
    prop = build_propagation(cfg, dataset)
    p1 = np.full(dataset.feature_dim, cfg.reflection_value)
    ctx = make_flip_context(dataset.features, p1)
    params = init_params(dataset.feature_dim, cfg.model.hidden_dim,
                         dataset.num_classes, init_rng, bias=cfg.model.bias)
    adam = AdamState(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    state = TrainState(params=params, adam=adam)
    labels, split = dataset.labels, dataset.split

    for epoch in range(1, cfg.epochs + 1):
        # original space
        view = _space_view(params, ctx.p1, "original")
        logits, tape = forward(cfg.model, view, prop, ctx.x_o,
                               sign=1.0, training=True, rng=drop_rng)
        loss_o, d_logits = logsoftmax_nll(logits, labels, split.train)
        _check_loss(loss_o, epoch)
        grads = backward(cfg.model, tape, d_logits)
        dw1 = grads.w1[:-1]  # pad-row gradient is identically zero
        if grad_observer is not None:
            grad_observer(epoch, "original", dw1)
        named = {**grads.named(), "w1": dw1}
        adam.step(params, _scaled(named, cfg.alpha, cfg.scale_first_layer_only))
        val, test = _eval_flip(cfg, params, prop, ctx, labels, split)
        _record(state, epoch, "o", loss_o, val, test)

        # flipped space, views rebuilt from the just-updated weights
        view = _space_view(params, ctx.p1, "flipped")
        logits, tape = forward(cfg.model, view, prop, ctx.x_f,
                               sign=-1.0, training=True, rng=drop_rng)
        loss_f, d_logits = logsoftmax_nll(logits, labels, split.train)
        _check_loss(loss_f, epoch)
        grads = backward(cfg.model, tape, d_logits)
        dw1 = assemble_flipped_grads(grads.w1, ctx.p1, cfg.grad_mode)
        if grad_observer is not None:
            grad_observer(epoch, "flipped", dw1)
        named = {**grads.named(), "w1": dw1}
        adam.step(params, _scaled(named, cfg.beta, cfg.scale_first_layer_only))
        val, test = _eval_flip(cfg, params, prop, ctx, labels, split)
        _record(state, epoch, "f", loss_f, val, test)
        state.epoch = epoch
    if state.best_params is None:
        state.best_params = params.copy()
    return state


def train(cfg: TrainConfig, dataset: Dataset) -> TrainState:
    return train_flip(cfg, dataset) if cfg.flip_enabled else train_plain(cfg, dataset)


def predict_proba(cfg: TrainConfig, dataset: Dataset, params: ModelParams,
                  space: str = None) -> np.ndarray:
    """Softmax class probabilities for every node under the given weights."""
    prop = build_propagation(cfg, dataset)
    if not cfg.flip_enabled:
        logits = predict_logits(cfg.model, params, prop, dataset.features.csr)
    else:
        space = space or cfg.eval_space
        p1 = np.full(dataset.feature_dim, cfg.reflection_value)
        ctx = make_flip_context(dataset.features, p1)
        view = _space_view(params, p1, space)
        x_in = ctx.x_o if space == "original" else ctx.x_f
        sign = 1.0 if space == "original" else -1.0
        logits = predict_logits(cfg.model, view, prop, x_in, sign=sign)
    return softmax(logits)


# ---------------------------------------------------------------------------
# Experiment harnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridCell:
    alpha: float
    beta: float
    mean_val: float
    mean_test: float
    std_test: float
    diverged: int


def _grid_cell(cfg: TrainConfig, dataset: Dataset, alpha: float, beta: float,
               seeds) -> GridCell:
    vals, tests, diverged = [], [], 0
    for seed in seeds:
        run_cfg = replace(cfg, alpha=alpha, beta=beta, seed=seed)
        try:
            state = train_flip(run_cfg, dataset)
        except DivergenceError:
            diverged += 1
            continue
        vals.append(state.best_val)
        tests.append(state.test_at_best)
    if not vals:
        return GridCell(alpha, beta, float("nan"), float("nan"), float("nan"), diverged)
    return GridCell(alpha, beta, float(np.mean(vals)), float(np.mean(tests)),
                    float(np.std(tests)), diverged)


def grid_search(cfg: TrainConfig, dataset: Dataset, alphas, betas, seeds,
                jobs: int = 1) -> list:
    """Full (alpha, beta) cross product, each cell averaged over seeds.

    Rows come back in deterministic (alpha, beta) order; a diverged run is
    recorded in its cell rather than aborting the sweep. The winner is the
    cell with the highest mean validation accuracy.
    """
    if not alphas or not betas or not seeds:
        raise ValueError("alpha, beta, and seed grids must be non-empty")
    cells = [(a, b) for a in alphas for b in betas]
    if jobs > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs)(
            delayed(_grid_cell)(cfg, dataset, a, b, seeds) for a, b in cells
        )
    else:
        results = [_grid_cell(cfg, dataset, a, b, seeds) for a, b in cells]
    return list(results)


def best_grid_cell(table) -> GridCell:
    finite = [c for c in table if math.isfinite(c.mean_val)]
    if not finite:
        raise DivergenceError("every grid cell diverged")
    return max(finite, key=lambda c: c.mean_val)


@dataclass(frozen=True)
class GradStatRecord:
    epoch: int
    space: str
    feature_type: int
    mean_abs_grad: float
    std: float


@dataclass
class GradStats:
    """Per-epoch, per-space magnitude statistics of the first-layer gradient
    grouped by feature type (unscaled data gradients, no decay term)."""

    records: list

    def type_means(self, space: str) -> dict:
        sums: dict[int, list] = {}
        for rec in self.records:
            if rec.space == space:
                sums.setdefault(rec.feature_type, []).append(rec.mean_abs_grad)
        return {t: float(np.mean(v)) for t, v in sorted(sums.items())}

    def cross_type_dispersion(self, space: str) -> float:
        means = list(self.type_means(space).values())
        return float(np.std(means))


def grad_stats(cfg: TrainConfig, dataset: Dataset) -> GradStats:
    """Train with flipping and record |dW1| statistics per feature type.

    Empty feature types produce no records.
    """
    partition = partition_feature_types(dataset)
    groups = {t: partition.dims(t) for t in (1, 2, 3, 4)}
    records = []

    def observer(epoch, space, dw1):
        row_mag = np.abs(dw1).mean(axis=1)
        for t, dims in groups.items():
            if dims.size:
                vals = row_mag[dims]
                records.append(GradStatRecord(epoch, space, t,
                                              float(vals.mean()), float(vals.std())))

    train_flip(cfg, dataset, grad_observer=observer)
    return GradStats(records=records)


@dataclass(frozen=True)
class MethodVariance:
    name: str
    mean_acc: float
    std_acc: float
    mean_cov_trace: float


@dataclass(frozen=True)
class VarianceReport:
    """Across-seed spread of test-node class probabilities per method: the
    mean over test nodes of the trace of the output covariance."""

    methods: tuple

    def to_dict(self) -> dict:
        return {m.name: {"mean_acc": m.mean_acc, "std_acc": m.std_acc,
                         "mean_cov_trace": m.mean_cov_trace}
                for m in self.methods}

    def trace(self, name: str) -> float:
        for m in self.methods:
            if m.name == name:
                return m.mean_cov_trace
        raise KeyError(name)


def variance_report(cfg_plain: TrainConfig, cfg_flip: TrainConfig,
                    dataset: Dataset, seeds) -> VarianceReport:
    """Train each method once per seed and compare output covariance traces,
    using the probabilities of the best-validation weights on test nodes."""
    if len(seeds) < 1:
        raise ValueError("at least one seed required")
    test = dataset.split.test
    methods = []
    for name, cfg in (("plain", cfg_plain), ("flip", cfg_flip)):
        accs, probs = [], []
        for seed in seeds:
            run_cfg = replace(cfg, seed=seed)
            state = train(run_cfg, dataset)
            accs.append(state.test_at_best)
            probs.append(predict_proba(run_cfg, dataset, state.best_params)[test])
        stack = np.stack(probs)  # (seeds, test, C)
        if stack.shape[0] > 1:
            trace = float(np.var(stack, axis=0, ddof=1).sum(axis=1).mean())
        else:
            trace = 0.0
        methods.append(MethodVariance(name, float(np.mean(accs)),
                                      float(np.std(accs)), trace))
    return VarianceReport(methods=tuple(methods))


@dataclass(frozen=True)
class BudgetRow:
    labels_per_class: int
    z_train: float
    plain_mean: float
    plain_std: float
    flip_mean: float
    flip_std: float

    @property
    def relative_gain(self) -> float:
        return (self.flip_mean - self.plain_mean) / self.plain_mean


def resample_train_split(dataset: Dataset, labels_per_class: int, rng) -> Dataset:
    """Class-stratified train split drawn from nodes outside val/test."""
    reserved = np.concatenate([dataset.split.val, dataset.split.test])
    pool = np.setdiff1d(np.arange(dataset.n), reserved)
    chosen = []
    for c in range(dataset.num_classes):
        members = pool[dataset.labels[pool] == c]
        if members.size < labels_per_class:
            raise ValueError(
                f"class {c} has {members.size} nodes outside val/test; "
                f"{labels_per_class} requested"
            )
        chosen.extend(rng.choice(members, size=labels_per_class, replace=False))
    return dataset.with_train_nodes(np.sort(np.array(chosen, dtype=np.int64)))


def label_budget_sweep(cfg: TrainConfig, dataset: Dataset, labels_per_class,
                       seeds=None) -> list:
    """Accuracy of the plain and flipped variants under resampled training
    budgets; the flip advantage is expected to shrink as coverage grows."""
    seeds = list(seeds) if seeds else [cfg.seed]
    rows = []
    for budget in labels_per_class:
        plain_accs, flip_accs, zs = [], [], []
        for seed in seeds:
            rng = np.random.default_rng([seed, budget])
            d_b = resample_train_split(dataset, budget, rng)
            zs.append(z_value(d_b, d_b.split.train, 0))
            plain = train_plain(replace(cfg, flip_enabled=False, seed=seed), d_b)
            flip = train_flip(replace(cfg, flip_enabled=True, seed=seed), d_b)
            plain_accs.append(plain.test_at_best)
            flip_accs.append(flip.test_at_best)
        rows.append(BudgetRow(budget, float(np.mean(zs)),
                              float(np.mean(plain_accs)), float(np.std(plain_accs)),
                              float(np.mean(flip_accs)), float(np.std(flip_accs))))
    return rows


@dataclass(frozen=True)
class ShiftRow:
    shift: float
    mean_acc: float
    std_acc: float


def shift_study(cfg: TrainConfig, dataset: Dataset, shifts, seeds=None) -> list:
    """Plain training on features shifted by a constant; larger shifts are
    expected to degrade accuracy since the projection is not shift-invariant."""
    if cfg.flip_enabled:
        raise ValueError("the shift study trains plain models only")
    seeds = list(seeds) if seeds else [cfg.seed]
    rows = []
    for s in shifts:
        shifted = replace(dataset, features=shift_features(dataset.features, float(s)))
        accs = [train_plain(replace(cfg, seed=seed), shifted).test_at_best
                for seed in seeds]
        rows.append(ShiftRow(float(s), float(np.mean(accs)), float(np.std(accs))))
    return rows
