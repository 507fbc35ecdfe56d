"""Binary cross-entropy and the temporal importance weighting schedules.

Each schedule maps a training sample's day order ``t`` (1 = oldest day,
``n_days`` = most recent) to a positive multiplier on its BCE loss.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError

EPS = 1e-7

VARIANTS = ("plain", "tif_linear", "tif_anti", "tif_exp", "tif_log")
_ALIASES = {
    "linear": "tif_linear",
    "anti": "tif_anti",
    "exponential": "tif_exp",
    "logarithmic": "tif_log",
}


def canonical_variant(name):
    name = _ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ConfigurationError(f"unknown loss variant {name!r}; expected one of {VARIANTS}")
    return name


@dataclass(frozen=True)
class LossSpec:
    """Loss variant plus its parameters.

    ``alpha`` scales the linear schedule only.  ``scale`` is a global multiplier
    applied to every variant (1.0 = off).  ``normalization`` selects the batch
    reduction: ``"mean"`` divides the summed weighted loss by the batch size,
    ``"weight_sum"`` by the sum of the batch's weights.
    """

    variant: str = "plain"
    alpha: float = 1.0
    n_days: int = 1
    scale: float = 1.0
    normalization: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if not self.scale > 0:
            raise ConfigurationError(f"scale must be > 0, got {self.scale}")
        if int(self.n_days) != self.n_days or self.n_days < 1:
            raise ConfigurationError(f"n_days must be an integer >= 1, got {self.n_days}")
        if self.normalization not in ("mean", "weight_sum"):
            raise ConfigurationError(f"unknown normalization {self.normalization!r}")

    def with_days(self, n_days):
        return LossSpec(self.variant, self.alpha, n_days, self.scale, self.normalization)


@dataclass(frozen=True)
class WeightedLossValue:
    raw_bce: float
    weight: float
    weighted: float


def _check_labels(label):
    y = np.asarray(label)
    if not np.all((y == 0) | (y == 1)):
        raise DataError(f"labels must be 0 or 1, got {np.unique(y[(y != 0) & (y != 1)])[:5]}")
    return y.astype(np.float64)


def bce(label, yhat):
    """Per-sample binary cross-entropy with ``yhat`` clamped to [EPS, 1 - EPS]."""
    y = _check_labels(label)
    p = np.clip(np.asarray(yhat, dtype=np.float64), EPS, 1.0 - EPS)
    out = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return out if out.ndim else float(out)


def tif_weights(spec, t):
    """Vectorised schedule: weight for every day order in ``t``."""
    t = np.asarray(t)
    n = spec.n_days
    if t.size and (t.min() < 1 or t.max() > n):
        raise DataError(f"day index outside [1, {n}]: {t.min()}..{t.max()}")
    tf = t.astype(np.float64)
    v = spec.variant
    if v == "plain":
        w = np.ones_like(tf)
    elif v == "tif_linear":
        w = spec.alpha * tf / n
    elif v == "tif_anti":
        w = (n - tf + 1.0) / n
    elif v == "tif_exp":
        # (e^t - 1) / (e^N - 1) rewritten so nothing exceeds 1 in magnitude
        w = np.exp(tf - n) * np.expm1(-tf) / math.expm1(-n)
    else:
        w = (np.log(tf) + 1.0) / (math.log(n) + 1.0)
    if spec.scale != 1.0:
        w = w * spec.scale
    return w


def tif_weight(spec, t):
    if int(t) != t:
        raise DataError(f"day index must be an integer, got {t}")
    return float(tif_weights(spec, np.array([int(t)]))[0])


def weighted_bce(spec, label, yhat, t):
    raw = bce(label, yhat)
    w = tif_weight(spec, t)
    return WeightedLossValue(raw_bce=raw, weight=w, weighted=raw * w)


def reduce_batch(losses, weights, normalization="mean"):
    """Batch objective from per-sample raw losses and their weights."""
    total = np.sum(losses * weights)
    if normalization == "weight_sum":
        return total / np.sum(weights)
    return total / len(losses)
