"""Mini-batch training with per-sample temporal weights and early stopping."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import metrics
from . import models as M
from .errors import ConfigurationError, TrainingError
from .losses import LossSpec, tif_weights
from .numkernel import AdamState, adam_step

log = logging.getLogger(__name__)

EVAL_BATCH = 8192


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    max_epochs: int = 20
    learning_rate: float = 1e-3
    early_stop_patience: int = 2
    seed: int = 0
    loss: LossSpec = field(default_factory=LossSpec)
    model: M.ModelSpec = field(default_factory=M.ModelSpec)
    eval_metric: str = "auc"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigurationError("max_epochs must be >= 1")
        if self.early_stop_patience < 1:
            raise ConfigurationError("early_stop_patience must be >= 1")
        if self.eval_metric not in ("auc", "logloss"):
            raise ConfigurationError(f"eval_metric must be 'auc' or 'logloss', got {self.eval_metric!r}")

    def to_json(self):
        d = asdict(self)
        d["model"] = self.model.to_json()
        return d

    def config_hash(self):
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    config_hash: str
    epochs: list = field(default_factory=list)
    stopping_epoch: int = 0
    best_epoch: int = 0
    best_metric: float = float("nan")
    wall_time: float = 0.0

    def to_json(self):
        return asdict(self)


def _scores(model, partition):
    out = [M.predict(model, partition.features[i:i + EVAL_BATCH])
           for i in range(0, len(partition), EVAL_BATCH)]
    return np.concatenate(out) if out else np.empty(0)


def evaluate(model, partition):
    """Unweighted logloss and AUC of ``model`` over a partition."""
    return metrics.report(partition.labels, _scores(model, partition))


def _better(metric, new, best):
    return new > best if metric == "auc" else new < best


def train(dataset, config):
    """Train a fresh model on ``dataset.train``; early-stop on ``dataset.val``.

    Returns the model restored to its best validation epoch and the run record.
    Each epoch visits the training samples in a fresh seeded permutation; a
    sample's weight depends only on its own day index.
    """
    if config.loss.n_days != dataset.n_days:
        raise ConfigurationError(
            f"loss n_days={config.loss.n_days} but the training set spans {dataset.n_days} days")
    train_part, val_part = dataset.train, dataset.val
    if len(train_part) == 0 or len(val_part) == 0:
        raise ConfigurationError("dataset needs non-empty train and val partitions")
    spec = config.model
    if spec.field_count != dataset.field_count:
        spec = replace(spec, field_count=dataset.field_count)

    started = time.perf_counter()
    model = M.build(spec, dataset.vocab.size, config.seed)
    opt = AdamState(lr=config.learning_rate)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    weights = tif_weights(config.loss, train_part.days)
    record = RunRecord(config_hash=config.config_hash())
    best_params = model.copy_params()
    best = None
    stale = 0
    n = len(train_part)

    for epoch in range(1, config.max_epochs + 1):
        perm = shuffle_rng.permutation(n)
        total = 0.0
        for b, lo in enumerate(range(0, n, config.batch_size)):
            idx = perm[lo:lo + config.batch_size]
            loss, grads = M.forward_backward(
                model, train_part.features[idx], train_part.labels[idx], weights[idx],
                config.loss.normalization)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            adam_step(model.params, grads, opt, batch=f"epoch {epoch}, batch {b}")
            total += loss * len(idx)
        val = evaluate(model, val_part)
        score = val.auc if config.eval_metric == "auc" else val.logloss
        record.epochs.append({
            "epoch": epoch,
            "train_loss": total / n,
            "val_logloss": val.logloss,
            "val_auc": val.auc,
        })
        log.debug("epoch %d train %.5f val auc %.5f", epoch, total / n, val.auc)
        if best is None or _better(config.eval_metric, score, best):
            best, stale = score, 0
            record.best_epoch = epoch
            best_params = model.copy_params()
        else:
            stale += 1
        record.stopping_epoch = epoch
        if stale >= config.early_stop_patience:
            break

    model.params = best_params
    record.best_metric = best
    record.wall_time = time.perf_counter() - started
    return model, record
