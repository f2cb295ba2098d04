"""The weighted-sigmoid surrogate score, the ECM loss, and its focal variant.

Everything is evaluated in logit space through softplus/log-sigmoid, never by
exponentiating probabilities and taking logs afterwards, so the kernels stay
finite for logits up to +-1e4 and weights from counts up to 1e9.

With z = 2f - ln(w-/w+) and s_hat = sigmoid(z):

    ecm positive:  value = m * softplus(-z)          grad = -2m (1 - s_hat)
    ecm negative:  value = m * softplus(z)           grad = +2m s_hat
    focal positive: value = fa * (1-s_hat)^fg * (m * softplus(-z))
    focal negative: value = (1-fa) * s_hat^fg * (m * softplus(z))

The focal gradients follow from the product rule and d s_hat/df = 2 s_hat (1 - s_hat).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .margins import MarginWeights

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class LossEval:
    """A loss value together with its analytic derivative w.r.t. the logit."""

    value: float
    grad_logit: float

    def __post_init__(self):
        if not (self.value >= 0.0):
            raise ValidationError(f"loss value must be >= 0, got {self.value}")


def _softplus(x):
    # log(1 + e^x), overflow-safe for any float
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    # sigmoid(x) = exp(-softplus(-x)), stable at both tails
    return np.exp(-np.logaddexp(0.0, -x))


def _check_label(label: str) -> bool:
    if label == POSITIVE:
        return True
    if label == NEGATIVE:
        return False
    raise ValidationError(f"label must be 'positive' or 'negative', got {label!r}")


def _check_finite(name: str, x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"{name} must be finite, got {x}")
    return x


def log_weight_ratio(w: MarginWeights) -> float:
    """ln(w- / w+), the logit shift that encodes the margins."""
    return math.log(w.w_minus) - math.log(w.w_plus)


def surrogate_score(f: float, w: MarginWeights) -> float:
    """Weighted sigmoid s_hat = w+ e^f / (w+ e^f + w- e^-f), in (0,1).

    Computed as sigmoid(2f - ln(w-/w+)); strictly increasing in f.
    """
    f = _check_finite("f", f)
    return float(_sigmoid(2.0 * f - log_weight_ratio(w)))


def decision_logit(w: MarginWeights) -> float:
    """The logit f* where s_hat crosses 1/2: f* = (ln w- - ln w+) / 2.

    The plain sigmoid e^f/(e^f + e^-f) evaluated at f* equals gamma_plus,
    i.e. the weights shift the decision boundary by exactly the margin.
    """
    return 0.5 * log_weight_ratio(w)


def _ecm_value_grad(z, positive, m):
    """Vectorized ECM value/gradient at z = 2f - ln(w-/w+).

    ``positive`` is a boolean array (or scalar) marking positive labels;
    shapes broadcast.  Single source of truth for the scalar API and the
    sandbox trainer.
    """
    value = m * np.where(positive, _softplus(-z), _softplus(z))
    grad = np.where(positive, -2.0 * m * _sigmoid(-z), 2.0 * m * _sigmoid(z))
    return value, grad


def _focal_value_grad(z, positive, m, focal_gamma, focal_alpha):
    """Vectorized focal-ECM value/gradient at z = 2f - ln(w-/w+)."""
    sp_pos = _softplus(-z)  # -ln s_hat
    sp_neg = _softplus(z)  # -ln (1 - s_hat)
    s = _sigmoid(z)
    one_minus_s = _sigmoid(-z)
    # (1-s)^g = exp(-g * softplus(z)), s^g = exp(-g * softplus(-z))
    mod_pos = focal_alpha * np.exp(-focal_gamma * sp_neg)
    mod_neg = (1.0 - focal_alpha) * np.exp(-focal_gamma * sp_pos)
    value = m * np.where(positive, mod_pos * sp_pos, mod_neg * sp_neg)
    grad_pos = -2.0 * m * mod_pos * (focal_gamma * s * sp_pos + one_minus_s)
    grad_neg = 2.0 * m * mod_neg * (focal_gamma * one_minus_s * sp_neg + s)
    grad = np.where(positive, grad_pos, grad_neg)
    return value, grad


def ecm_loss(f: float, label: str, w: MarginWeights, m: float = 1.0) -> LossEval:
    """Binary cross entropy on the surrogate score, scaled by m.

    Positive label: m * softplus(-2f + ln(w-/w+)); negative label:
    m * softplus(2f - ln(w-/w+)).  Gradients are -2m(1-s_hat) and +2m s_hat.
    """
    f = _check_finite("f", f)
    m = _check_finite("m", m)
    if m <= 0:
        raise ValidationError(f"m must be > 0, got {m}")
    is_pos = _check_label(label)
    z = 2.0 * f - log_weight_ratio(w)
    value, grad = _ecm_value_grad(z, is_pos, m)
    return LossEval(value=float(value), grad_logit=float(grad))


def focal_ecm_loss(
    f: float,
    label: str,
    w: MarginWeights,
    m: float = 1.0,
    focal_gamma: float = 2.0,
    focal_alpha: float = 0.25,
) -> LossEval:
    """ECM loss with focal modulation.

    Positive: focal_alpha * (1-s_hat)^focal_gamma * ecm positive term;
    negative: (1-focal_alpha) * s_hat^focal_gamma * ecm negative term.
    Defaults focal_gamma=2, focal_alpha=0.25.
    """
    f = _check_finite("f", f)
    m = _check_finite("m", m)
    if m <= 0:
        raise ValidationError(f"m must be > 0, got {m}")
    if focal_gamma < 0:
        raise ValidationError(f"focal_gamma must be >= 0, got {focal_gamma}")
    if not 0.0 < focal_alpha < 1.0:
        raise ValidationError(f"focal_alpha must lie in (0,1), got {focal_alpha}")
    is_pos = _check_label(label)
    z = 2.0 * f - log_weight_ratio(w)
    value, grad = _focal_value_grad(z, is_pos, m, focal_gamma, focal_alpha)
    return LossEval(value=float(value), grad_logit=float(grad))


def bce_loss(f: float, label: str) -> LossEval:
    """Plain binary cross entropy baseline: ECM with equal weights and m = 1.

    Only the weight ratio enters the kernel, so any w+ = w- gives the same
    value; this is ecm_loss with z = 2f.
    """
    f = _check_finite("f", f)
    is_pos = _check_label(label)
    value, grad = _ecm_value_grad(2.0 * f, is_pos, 1.0)
    return LossEval(value=float(value), grad_logit=float(grad))


def margin_error(score: float, gamma: float, side: str) -> int:
    """Empirical margin-violation indicator.

    Positives violate when s_c <= gamma_plus; negatives when the complement
    score s_nonc = 1 - s_c is <= gamma_minus.
    """
    if not 0.0 <= score <= 1.0:
        raise ValidationError(f"score must lie in [0,1], got {score}")
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"gamma must lie in (0,1), got {gamma}")
    is_pos = _check_label(side)
    if is_pos:
        return 1 if score <= gamma else 0
    return 1 if (1.0 - score) <= gamma else 0
