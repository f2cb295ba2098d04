"""Synthetic long-tail sandbox: data generation, training, and bound audit.

Class counts follow a Zipf prior with largest-remainder rounding, features
are isotropic Gaussian blobs around class means spread on random directions,
and background samples (label -1) come from a broad Gaussian at the origin.
A deliberately small trainer (per-class binary heads, plain mini-batch
gradient descent) exercises the bce / ecm / focal_ecm kernels; evaluation
builds one ScoreSet per class and audits the measured AP against the
closed-form bounds at each saved checkpoint.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .bounds import ap_lower, ap_upper, audit_interval, slope_m, SLOPE_MODES
from .ecm_loss import _ecm_value_grad, _focal_value_grad, log_weight_ratio
from .errors import NumericalError, ValidationError
from .margins import MarginWeights, optimal_margins, weights
from .metrics import ScoreSet, average_precision, ranking_error
from .priors import ClassStats

log = logging.getLogger(__name__)

BACKGROUND_LABEL = -1
LOSSES = ("bce", "ecm", "focal_ecm")
MODELS = ("linear", "mlp")

_TEMPERATURE = 20.0
_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class SyntheticConfig:
    """Long-tail dataset recipe; every field is part of the deterministic seed."""

    num_classes: int = 20
    total_samples: int = 20000
    zipf_exponent: float = 1.5
    feature_dim: int = 16
    class_separation: float = 2.0
    noise_sigma: float = 1.0
    background_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.total_samples < 1:
            raise ValidationError(f"total_samples must be >= 1, got {self.total_samples}")
        if self.zipf_exponent < 0:
            raise ValidationError(f"zipf_exponent must be >= 0, got {self.zipf_exponent}")
        if self.feature_dim < 2:
            raise ValidationError(f"feature_dim must be >= 2, got {self.feature_dim}")
        if self.class_separation <= 0:
            raise ValidationError(f"class_separation must be > 0, got {self.class_separation}")
        if self.noise_sigma <= 0:
            raise ValidationError(f"noise_sigma must be > 0, got {self.noise_sigma}")
        if not 0.0 <= self.background_fraction < 1.0:
            raise ValidationError(
                f"background_fraction must lie in [0,1), got {self.background_fraction}"
            )


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "ecm"
    m_mode: str = "unit"
    epochs: int = 30
    learning_rate: float = 0.1
    batch_size: int = 256
    model: str = "linear"
    hidden: int = 32
    temperature_head: bool = False
    seed: int = 0
    checkpoint_every: int = 5
    holdout_fraction: float = 0.0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValidationError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.m_mode not in SLOPE_MODES:
            raise ValidationError(f"m_mode must be one of {SLOPE_MODES}, got {self.m_mode!r}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate < 0:
            raise ValidationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.model not in MODELS:
            raise ValidationError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.model == "mlp" and self.hidden < 1:
            raise ValidationError(f"hidden must be >= 1, got {self.hidden}")
        if self.checkpoint_every < 1:
            raise ValidationError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValidationError(
                f"holdout_fraction must lie in [0,1), got {self.holdout_fraction}"
            )


def zipf_class_counts(num_classes: int, total: int, exponent: float) -> tuple[int, ...]:
    """Integer class counts from the Zipf prior p_c ~ (c+1)^-exponent.

    Largest-remainder rounding: floors first, then one extra sample to each
    of the largest fractional parts (ties broken toward smaller class ids)
    until the counts sum to total.
    """
    if num_classes > total:
        raise ValidationError(
            f"{num_classes} classes cannot share {total} foreground samples"
        )
    ranks = np.arange(1, num_classes + 1, dtype=np.float64)
    p = ranks ** (-float(exponent))
    p /= p.sum()
    quota = p * total
    counts = np.floor(quota).astype(np.int64)
    remainder = int(total - counts.sum())
    if remainder > 0:
        # stable sort keeps the smaller class id first among equal remainders
        order = np.argsort(-(quota - counts), kind="stable")
        counts[order[:remainder]] += 1
    if counts.min() < 1:
        worst = int(np.argmin(counts))
        raise ValidationError(
            f"class {worst} receives 0 samples under this prior; "
            f"increase total_samples or lower zipf_exponent"
        )
    return tuple(int(c) for c in counts)


@dataclass(frozen=True)
class Dataset:
    """Generated samples; labels use class ids 0..K-1 and -1 for background."""

    features: np.ndarray
    labels: np.ndarray
    class_counts: tuple[int, ...]
    config: SyntheticConfig

    @property
    def num_classes(self) -> int:
        return len(self.class_counts)

    @property
    def n_background(self) -> int:
        return int(self.labels.size - sum(self.class_counts))


def generate(config: SyntheticConfig) -> Dataset:
    """Deterministic synthetic long-tail dataset for the given config."""
    n_fg = int(math.floor(config.total_samples * (1.0 - config.background_fraction) + 0.5))
    n_bg = config.total_samples - n_fg
    if config.num_classes > n_fg:
        raise ValidationError(
            f"num_classes {config.num_classes} exceeds the {n_fg} foreground "
            f"samples left by background_fraction {config.background_fraction}"
        )
    counts = zipf_class_counts(config.num_classes, n_fg, config.zipf_exponent)

    rng = np.random.default_rng(config.seed)
    directions = rng.standard_normal((config.num_classes, config.feature_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = config.class_separation * directions

    features = np.empty((config.total_samples, config.feature_dim))
    labels = np.empty(config.total_samples, dtype=np.int64)
    row = 0
    for c, n_c in enumerate(counts):
        features[row : row + n_c] = means[c] + config.noise_sigma * rng.standard_normal(
            (n_c, config.feature_dim)
        )
        labels[row : row + n_c] = c
        row += n_c
    # broad background blob at the origin, twice the class noise scale
    features[row:] = 2.0 * config.noise_sigma * rng.standard_normal(
        (n_bg, config.feature_dim)
    )
    labels[row:] = BACKGROUND_LABEL
    return Dataset(features=features, labels=labels, class_counts=counts, config=config)


def measured_background_ratio(dataset: Dataset) -> float:
    """Background-to-foreground sample ratio observed in the dataset."""
    n_fg = sum(dataset.class_counts)
    if n_fg < 1:
        raise ValidationError("dataset has no foreground samples")
    return dataset.n_background / n_fg


def dataset_stats(dataset: Dataset) -> dict[int, ClassStats]:
    """Per-class (n+, n-, alpha) with all other samples (incl. background) negative."""
    total = int(dataset.labels.size)
    out = {}
    for c, n_c in enumerate(dataset.class_counts):
        out[c] = ClassStats(n_plus=n_c, n_minus=total - n_c, alpha=(total - n_c) / n_c)
    return out


def default_margin_weights(dataset: Dataset) -> dict[int, MarginWeights]:
    """Optimal margin weights for every class from the dataset's own counts."""
    return {c: weights(optimal_margins(st)) for c, st in dataset_stats(dataset).items()}


@dataclass(frozen=True)
class Model:
    """Trained parameters plus the artifacts the report needs.

    ``checkpoints`` holds (epoch, params) snapshots including initialization
    (epoch 0) and the final epoch; ``loss_curve`` holds (epoch, mean loss)
    with the mean taken over all training samples of that epoch.
    """

    kind: str
    params: dict[str, np.ndarray]
    temperature: float | None
    loss_curve: tuple[tuple[int, float], ...]
    checkpoints: tuple[tuple[int, dict[str, np.ndarray]], ...]
    train_indices: np.ndarray
    eval_indices: np.ndarray

    def logits(self, features: np.ndarray) -> np.ndarray:
        return _forward(self.kind, self.params, self.temperature, features)[0]


def _copy_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def _init_params(kind, hidden, num_classes, dim, temperature, rng):
    params = {}
    if kind == "mlp":
        params["w1"] = rng.standard_normal((dim, hidden)) / math.sqrt(dim)
        params["b1"] = np.zeros(hidden)
        head_in = hidden
    else:
        head_in = dim
    if temperature is None:
        params["w"] = np.zeros((head_in, num_classes))
    else:
        # cosine head cannot start at exactly zero norm
        params["w"] = 0.01 * rng.standard_normal((head_in, num_classes))
    return params


def _head_forward(h, w, temperature):
    if temperature is None:
        return h @ w, None
    hn = np.maximum(np.linalg.norm(h, axis=1, keepdims=True), _NORM_FLOOR)
    wn = np.maximum(np.linalg.norm(w, axis=0, keepdims=True), _NORM_FLOOR)
    hu = h / hn
    wu = w / wn
    cos = hu @ wu
    return temperature * cos, (hu, wu, hn, wn, cos)


def _forward(kind, params, temperature, x):
    """Logits plus the caches backward needs; cache is None outside training."""
    if kind == "mlp":
        pre = x @ params["w1"] + params["b1"]
        h = np.tanh(pre)
    else:
        h = x
    f, head_cache = _head_forward(h, params["w"], temperature)
    return f, (h, head_cache)


def _backward(kind, params, temperature, x, cache, g):
    """Parameter gradients for d(batch loss)/d(logits) = g."""
    h, head_cache = cache
    grads = {}
    if temperature is None:
        grads["w"] = h.T @ g
        dh = g @ params["w"].T
    else:
        hu, wu, hn, wn, cos = head_cache
        col = np.sum(g * cos, axis=0)
        grads["w"] = temperature * (hu.T @ g - wu * col) / wn
        row = np.sum(g * cos, axis=1, keepdims=True)
        dh = temperature * (g @ wu.T - hu * row) / hn
    if kind == "mlp":
        dpre = dh * (1.0 - h * h)
        grads["w1"] = x.T @ dpre
        grads["b1"] = dpre.sum(axis=0)
    return grads


def _batch_loss_grads(logits, is_pos, tcfg, delta, m):
    """Per-logit loss values and gradients for the configured loss."""
    if tcfg.loss == "bce":
        return _ecm_value_grad(2.0 * logits, is_pos, 1.0)
    z = 2.0 * logits - delta
    if tcfg.loss == "ecm":
        return _ecm_value_grad(z, is_pos, m)
    return _focal_value_grad(z, is_pos, m, 2.0, 0.25)


def _split_indices(dataset: Dataset, tcfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-class proportional holdout split; evaluation = training when off."""
    n = dataset.labels.size
    if tcfg.holdout_fraction == 0.0:
        idx = np.arange(n)
        return idx, idx
    rng = np.random.default_rng(np.random.SeedSequence((tcfg.seed, 0x5B17)))
    train_parts, eval_parts = [], []
    for label in [*range(dataset.num_classes), BACKGROUND_LABEL]:
        members = np.flatnonzero(dataset.labels == label)
        members = members[rng.permutation(members.size)]
        n_hold = int(math.floor(members.size * tcfg.holdout_fraction + 0.5))
        eval_parts.append(members[:n_hold])
        train_parts.append(members[n_hold:])
    train_idx = np.sort(np.concatenate(train_parts))
    eval_idx = np.sort(np.concatenate(eval_parts))
    if train_idx.size == 0:
        raise ValidationError("holdout_fraction leaves no training samples")
    return train_idx, eval_idx


def train(
    dataset: Dataset, tcfg: TrainConfig, margins: dict[int, MarginWeights]
) -> Model:
    """Mini-batch gradient descent on per-class binary heads.

    The batch loss is the mean of the per-class terms over batch elements
    and heads; heads start at zero so the epoch-0 checkpoint scores every
    sample 0.5.  Deterministic for a fixed config: one shuffling stream,
    fixed batch order, fixed summation order.
    """
    num_classes = dataset.num_classes
    missing = [c for c in range(num_classes) if c not in margins]
    if missing:
        raise ValidationError(f"margins missing for classes {missing}")

    stats = dataset_stats(dataset)
    delta = np.array([log_weight_ratio(margins[c]) for c in range(num_classes)])
    m = np.array([slope_m(stats[c].alpha, tcfg.m_mode) for c in range(num_classes)])

    temperature = _TEMPERATURE if tcfg.temperature_head else None
    rng = np.random.default_rng(tcfg.seed)
    params = _init_params(
        tcfg.model, tcfg.hidden, num_classes, dataset.config.feature_dim, temperature, rng
    )
    train_idx, eval_idx = _split_indices(dataset, tcfg)
    x_all = dataset.features[train_idx]
    y_all = dataset.labels[train_idx]
    class_ids = np.arange(num_classes)

    checkpoints = [(0, _copy_params(params))]
    loss_curve = []
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(train_idx.size)
        loss_sum = 0.0
        for start in range(0, order.size, tcfg.batch_size):
            batch = order[start : start + tcfg.batch_size]
            x = x_all[batch]
            is_pos = y_all[batch, None] == class_ids[None, :]
            logits, cache = _forward(tcfg.model, params, temperature, x)
            values, grad_f = _batch_loss_grads(logits, is_pos, tcfg, delta, m)
            denom = batch.size * num_classes
            batch_loss = float(values.sum()) / denom
            if not math.isfinite(batch_loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            loss_sum += float(values.sum()) / num_classes
            grads = _backward(tcfg.model, params, temperature, x, cache, grad_f / denom)
            for key, grad in grads.items():
                params[key] -= tcfg.learning_rate * grad
        loss_curve.append((epoch, loss_sum / order.size))
        if epoch % tcfg.checkpoint_every == 0 or epoch == tcfg.epochs:
            checkpoints.append((epoch, _copy_params(params)))

    return Model(
        kind=tcfg.model,
        params=params,
        temperature=temperature,
        loss_curve=tuple(loss_curve),
        checkpoints=tuple(checkpoints),
        train_indices=train_idx,
        eval_indices=eval_idx,
    )


@dataclass(frozen=True)
class PerClassReport:
    class_id: int
    n_plus: int
    n_minus: int
    ap: float
    ranking_error: float
    det_error: float
    ap_lower: float
    ap_upper: float
    within_bounds: bool


@dataclass(frozen=True)
class TrainReport:
    per_class: tuple[PerClassReport, ...]
    mean_ap: float
    loss_curve: tuple[tuple[int, float], ...]

    def to_dict(self) -> dict:
        return {
            "per_class": [
                {
                    "class_id": p.class_id,
                    "n_plus": p.n_plus,
                    "n_minus": p.n_minus,
                    "ap": p.ap,
                    "ranking_error": p.ranking_error,
                    "det_error": p.det_error,
                    "ap_lower": p.ap_lower,
                    "ap_upper": p.ap_upper,
                    "within_bounds": p.within_bounds,
                }
                for p in self.per_class
            ],
            "mean_ap": self.mean_ap,
            "loss_curve": [[epoch, loss] for epoch, loss in self.loss_curve],
        }


def _unit_scores(raw: np.ndarray) -> np.ndarray:
    """Monotone rescale of logits into [0,1]; AP and R are rank statistics, so
    this changes nothing while avoiding sigmoid saturation ties."""
    lo = float(raw.min())
    hi = float(raw.max())
    if hi == lo:
        return np.full(raw.shape, 0.5)
    return (raw - lo) / (hi - lo)


def class_score_set(logits: np.ndarray, labels: np.ndarray, class_id: int) -> ScoreSet:
    """ScoreSet for one class head: its samples positive, everything else negative."""
    mask = labels == class_id
    scores = _unit_scores(logits[:, class_id])
    return ScoreSet(positives=scores[mask], negatives=scores[~mask])


def evaluate(
    model: Model, dataset: Dataset, alphas: dict[int, float], params: dict | None = None
) -> TrainReport:
    """Balanced per-class evaluation of a parameter snapshot (default: final).

    Classes with no positives in the evaluation split are logged and left out
    of the report and its mean.
    """
    snapshot = model.params if params is None else params
    features = dataset.features[model.eval_indices]
    labels = dataset.labels[model.eval_indices]
    logits = _forward(model.kind, snapshot, model.temperature, features)[0]

    per_class = []
    for c in range(dataset.num_classes):
        if c not in alphas:
            raise ValidationError(f"no alpha supplied for class {c}")
        if not np.any(labels == c):
            log.warning("class %d has no positives in the evaluation split; skipped", c)
            continue
        ss = class_score_set(logits, labels, c)
        alpha = float(alphas[c])
        ap = average_precision(ss, alpha)
        r = ranking_error(ss)
        lo, hi = audit_interval(ss, alpha)
        per_class.append(
            PerClassReport(
                class_id=c,
                n_plus=ss.n_plus,
                n_minus=ss.n_minus,
                ap=ap,
                ranking_error=r,
                det_error=1.0 - ap,
                ap_lower=ap_lower(alpha, r),
                ap_upper=ap_upper(alpha, r),
                within_bounds=bool(lo <= ap <= hi),
            )
        )
    if not per_class:
        raise ValidationError("no class has positives in the evaluation split")
    mean_ap = float(np.mean([p.ap for p in per_class]))
    return TrainReport(per_class=tuple(per_class), mean_ap=mean_ap, loss_curve=model.loss_curve)


def audit_failures(report: TrainReport) -> list[PerClassReport]:
    return [p for p in report.per_class if not p.within_bounds]


def bound_audit(report: TrainReport) -> bool:
    """True iff every class's AP sits inside its noise-widened bound interval."""
    failures = audit_failures(report)
    for p in failures:
        log.warning(
            "bound audit failure: class %d ap=%.6f R=%.6f bounds=[%.6f, %.6f]",
            p.class_id,
            p.ap,
            p.ranking_error,
            p.ap_lower,
            p.ap_upper,
        )
    return not failures


def rare_tercile(dataset: Dataset) -> tuple[int, ...]:
    """Class ids of the bottom third by sample count (ties to larger ids)."""
    k = dataset.num_classes
    n_rare = max(1, k // 3)
    order = sorted(range(k), key=lambda c: (dataset.class_counts[c], -c))
    return tuple(sorted(order[:n_rare]))


def run_experiment(config: SyntheticConfig, tcfg: TrainConfig) -> tuple[Model, TrainReport]:
    """Generate, train with the dataset's own optimal margins, evaluate."""
    dataset = generate(config)
    margins = default_margin_weights(dataset)
    model = train(dataset, tcfg, margins)
    alphas = {c: st.alpha for c, st in dataset_stats(dataset).items()}
    report = evaluate(model, dataset, alphas)
    return model, report
