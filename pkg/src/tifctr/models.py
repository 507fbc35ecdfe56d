"""DNN, DeepFM-style and DCN-style CTR models built from the numeric kernel.

All three share one embedding table over a single vocabulary index space and
end in a dense head producing one logit.  They differ only in the interaction
layer:

``mlp_only``        logit = MLP(concat embeddings)
``fm_plus_mlp``     logit = MLP(concat embeddings) + FM(field embeddings)
``cross_plus_mlp``  logit = MLP(cross^depth(concat embeddings))
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numkernel as nk
from .errors import ConfigurationError, DataError, TrainingError
from .losses import bce, reduce_batch

INTERACTIONS = ("mlp_only", "fm_plus_mlp", "cross_plus_mlp")
CHECKPOINT_FORMAT = "tifctr-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    interaction: str = "mlp_only"
    embedding_dim: int = 16
    hidden_widths: tuple = (64, 64)
    cross_depth: int = 2
    field_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.interaction not in INTERACTIONS:
            raise ConfigurationError(
                f"unknown interaction {self.interaction!r}; expected one of {INTERACTIONS}")
        if self.embedding_dim < 1:
            raise ConfigurationError("embedding_dim must be >= 1")
        if not self.hidden_widths or min(self.hidden_widths) < 1:
            raise ConfigurationError("hidden_widths must be a non-empty list of positive widths")
        if self.field_count < 1:
            raise ConfigurationError("field_count must be >= 1")
        if self.interaction == "cross_plus_mlp" and self.cross_depth < 1:
            raise ConfigurationError("cross_depth must be >= 1 for cross_plus_mlp")
        if self.interaction == "fm_plus_mlp" and self.field_count < 2:
            raise ConfigurationError("fm_plus_mlp needs at least 2 fields")

    @property
    def input_width(self):
        return self.field_count * self.embedding_dim

    def to_json(self):
        d = asdict(self)
        d["hidden_widths"] = list(self.hidden_widths)
        return d


@dataclass
class Model:
    spec: ModelSpec
    vocab_size: int
    seed: int
    params: dict = field(default_factory=dict)

    def parameter_count(self):
        return int(sum(p.size for p in self.params.values()))

    def checksum(self):
        h = hashlib.sha256()
        for name, p in self.params.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}


def build(spec, vocab_size, seed):
    """Deterministically initialise a model: weights U(-0.05, 0.05), biases 0."""
    if vocab_size < 1:
        raise ConfigurationError(f"vocab_size must be >= 1, got {vocab_size}")
    rng = np.random.default_rng(seed)
    p = {"embedding": nk.uniform_init(rng, (vocab_size, spec.embedding_dim))}
    width = spec.input_width
    if spec.interaction == "cross_plus_mlp":
        for k in range(spec.cross_depth):
            p[f"cross_w_{k}"] = nk.uniform_init(rng, (width,))
            p[f"cross_b_{k}"] = np.zeros(width)
    for k, out in enumerate(spec.hidden_widths):
        p[f"dense_W_{k}"] = nk.uniform_init(rng, (out, width))
        p[f"dense_b_{k}"] = np.zeros(out)
        width = out
    p["head_W"] = nk.uniform_init(rng, (1, width))
    p["head_b"] = np.zeros(1)
    return Model(spec=spec, vocab_size=int(vocab_size), seed=int(seed), params=p)


def _as_batch(model, features):
    idx = np.asarray(features)
    single = idx.ndim == 1
    if single:
        idx = idx[None, :]
    if idx.ndim != 2 or idx.shape[1] != model.spec.field_count:
        raise DataError(
            f"expected {model.spec.field_count} feature indices per sample, got shape {idx.shape}")
    return idx, single


def logits(model, features, tape=None):
    idx, single = _as_batch(model, features)
    spec, p = model.spec, model.params
    x = nk.embedding_forward(p["embedding"], idx, tape)
    h = x
    if spec.interaction == "cross_plus_mlp":
        for k in range(spec.cross_depth):
            h = nk.cross_layer(x, h, p[f"cross_w_{k}"], p[f"cross_b_{k}"], tape)
    for k in range(len(spec.hidden_widths)):
        h = nk.relu(nk.dense_forward(p[f"dense_W_{k}"], p[f"dense_b_{k}"], h, tape), tape)
    z = nk.dense_forward(p["head_W"], p["head_b"], h, tape)[:, 0]
    if spec.interaction == "fm_plus_mlp":
        fields = x.reshape(len(idx), spec.field_count, spec.embedding_dim)
        z = z + nk.fm_interaction(fields, tape)
    return (float(z[0]) if single else z)


def predict(model, features):
    """Click probability for one sample (index list) or a batch of samples."""
    return nk.sigmoid(logits(model, features))


def forward_backward(model, features, labels, weights=1.0, normalization="mean"):
    """Weighted BCE objective of a batch and its gradient for every parameter.

    ``weights`` multiplies each sample's BCE; the batch objective is reduced
    with ``losses.reduce_batch``.  The logit gradient is ``w * (p - y)``, the
    exact derivative wherever ``p`` is inside the log clamp.
    """
    idx, _ = _as_batch(model, features)
    y = np.atleast_1d(np.asarray(labels, dtype=np.float64))
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), y.shape)
    if np.any(w <= 0):
        raise DataError("sample weights must be > 0")
    spec, p = model.spec, model.params
    tape = nk.Tape()
    z = logits(model, idx, tape)
    prob = nk.sigmoid(z)
    raw = np.atleast_1d(bce(y, prob))
    loss = float(reduce_batch(raw, w, normalization))
    if not np.isfinite(loss):
        raise TrainingError("non-finite loss")

    denom = w.sum() if normalization == "weight_sum" else len(y)
    g_logit = (prob - y) * w / denom
    grads = {}
    grad_x = 0.0
    if spec.interaction == "fm_plus_mlp":
        grad_x = nk.fm_backward(tape, g_logit).reshape(len(idx), spec.input_width)
    grads["head_W"], grads["head_b"], g = nk.dense_backward(tape, g_logit[:, None])
    for k in reversed(range(len(spec.hidden_widths))):
        g = nk.relu_backward(tape, g)
        grads[f"dense_W_{k}"], grads[f"dense_b_{k}"], g = nk.dense_backward(tape, g)
    if spec.interaction == "cross_plus_mlp":
        g_x0 = 0.0
        for k in reversed(range(spec.cross_depth)):
            gx0, g, grads[f"cross_w_{k}"], grads[f"cross_b_{k}"] = nk.cross_backward(tape, g)
            g_x0 = g_x0 + gx0
        g = g + g_x0
    grads["embedding"] = nk.embedding_backward(tape, g + grad_x)
    return loss, {name: grads[name] for name in p}


# -- checkpoints -----------------------------------------------------------

def save_checkpoint(model, path):
    """Write an ``.npz`` archive: a ``__meta__`` JSON header plus one array per parameter.

    Header fields: ``format`` ("tifctr-checkpoint"), ``version``, ``spec``,
    ``vocab_size``, ``seed`` and ``parameters`` (names in model order).
    """
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": model.spec.to_json(),
        "vocab_size": model.vocab_size,
        "seed": model.seed,
        "parameters": list(model.params),
    }
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **model.params)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
            raise DataError(f"{path}: not a version-{CHECKPOINT_VERSION} tifctr checkpoint")
        params = {name: z[name].copy() for name in meta["parameters"]}
    spec = ModelSpec(**meta["spec"])
    return Model(spec=spec, vocab_size=meta["vocab_size"], seed=meta["seed"], params=params)
