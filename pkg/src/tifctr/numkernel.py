"""Dense numeric kernel: layers with explicit forward/backward passes and Adam.

All layers accept a single vector or a batch (leading axis = samples).  A layer
called with a ``Tape`` pushes what its backward pass needs; backward functions
pop records in strict reverse order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, InternalError, TrainingError

DTYPE = np.float64
INIT_SCALE = 0.05


class Tape:
    """LIFO record of layer inputs needed by the backward pass."""

    def __init__(self):
        self._records = []

    def __len__(self):
        return len(self._records)

    def push(self, kind, *payload):
        self._records.append((kind, payload))

    def pop(self, kind):
        if not self._records:
            raise InternalError(f"backward for {kind!r} called on an empty tape")
        got, payload = self._records.pop()
        if got != kind:
            raise InternalError(f"tape order violated: expected {kind!r}, found {got!r}")
        return payload


def uniform_init(rng, shape, scale=INIT_SCALE):
    return rng.uniform(-scale, scale, size=shape).astype(DTYPE)


# -- dense -----------------------------------------------------------------

def dense_forward(W, b, x, tape=None):
    W = np.asarray(W, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    x = np.asarray(x, dtype=DTYPE)
    if W.ndim != 2 or b.shape != (W.shape[0],) or x.shape[-1] != W.shape[1]:
        raise ConfigurationError(
            f"dense shapes do not line up: W{W.shape}, b{b.shape}, x{x.shape}")
    if tape is not None:
        tape.push("dense", W, x)
    return x @ W.T + b


def dense_backward(tape, upstream):
    W, x = tape.pop("dense")
    upstream = np.asarray(upstream, dtype=DTYPE)
    if x.ndim == 1:
        grad_W = np.outer(upstream, x)
        grad_b = upstream.copy()
    else:
        grad_W = upstream.T @ x
        grad_b = upstream.sum(axis=0)
    grad_x = upstream @ W
    return grad_W, grad_b, grad_x


# -- activations -----------------------------------------------------------

def relu(x, tape=None):
    x = np.asarray(x, dtype=DTYPE)
    if tape is not None:
        tape.push("relu", x)
    return np.maximum(x, 0.0)


def relu_backward(tape, upstream):
    (x,) = tape.pop("relu")
    # gradient at exactly 0 is taken as 0
    return np.where(x > 0.0, upstream, 0.0)


def sigmoid(z):
    """Logistic function, evaluated so that neither branch can overflow."""
    z = np.asarray(z, dtype=DTYPE)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


# -- embeddings ------------------------------------------------------------

def embedding_forward(table, indices, tape=None):
    """Look up one row per index and concatenate them along the last axis.

    ``indices`` is ``(fields,)`` or ``(batch, fields)``; the result is
    ``(fields * dim,)`` or ``(batch, fields * dim)`` with field order kept.
    """
    table = np.asarray(table, dtype=DTYPE)
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        bad = idx[(idx < 0) | (idx >= table.shape[0])].ravel()[0]
        raise DataError(f"embedding index {int(bad)} outside vocabulary of size {table.shape[0]}")
    if tape is not None:
        tape.push("embedding", table.shape, idx)
    rows = table[idx]
    return rows.reshape(*idx.shape[:-1], idx.shape[-1] * table.shape[1])


def embedding_backward(tape, upstream):
    """Scatter-add the upstream gradient into a zero table-shaped array."""
    shape, idx = tape.pop("embedding")
    grad = np.zeros(shape, dtype=DTYPE)
    np.add.at(grad, idx.ravel(), np.asarray(upstream, dtype=DTYPE).reshape(-1, shape[1]))
    return grad


# -- interaction layers ----------------------------------------------------

def fm_interaction(field_embeddings, tape=None):
    """Sum of pairwise inner products between field embeddings.

    Takes ``(fields, dim)`` or ``(batch, fields, dim)``.  Uses
    ``0.5 * ((sum e)^2 - sum e^2)`` per dimension instead of the O(F^2) loop.
    """
    e = np.asarray(field_embeddings, dtype=DTYPE)
    if e.ndim < 2 or e.shape[-2] < 2:
        raise ConfigurationError("fm_interaction needs at least 2 fields")
    total = e.sum(axis=-2)
    if tape is not None:
        tape.push("fm", e, total)
    return 0.5 * (total * total - (e * e).sum(axis=-2)).sum(axis=-1)


def fm_backward(tape, upstream):
    e, total = tape.pop("fm")
    upstream = np.asarray(upstream, dtype=DTYPE)
    return upstream[..., None, None] * (total[..., None, :] - e)


def cross_layer(x0, xl, w, b, tape=None):
    """One DCN cross layer: ``x0 * (xl . w) + b + xl``."""
    x0 = np.asarray(x0, dtype=DTYPE)
    xl = np.asarray(xl, dtype=DTYPE)
    w = np.asarray(w, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if not (x0.shape == xl.shape and w.shape == b.shape == (x0.shape[-1],)):
        raise ConfigurationError(
            f"cross layer shapes do not match: x0{x0.shape}, xl{xl.shape}, w{w.shape}, b{b.shape}")
    proj = xl @ w
    if tape is not None:
        tape.push("cross", x0, xl, w, proj)
    return x0 * proj[..., None] + b + xl


def cross_backward(tape, upstream):
    """Returns ``(grad_x0, grad_xl, grad_w, grad_b)``."""
    x0, xl, w, proj = tape.pop("cross")
    g = np.asarray(upstream, dtype=DTYPE)
    g_dot_x0 = (g * x0).sum(axis=-1)
    grad_x0 = g * proj[..., None]
    grad_xl = g + g_dot_x0[..., None] * w
    if g.ndim == 1:
        grad_w = g_dot_x0 * xl
        grad_b = g.copy()
    else:
        grad_w = g_dot_x0 @ xl
        grad_b = g.sum(axis=0)
    return grad_x0, grad_xl, grad_w, grad_b


# -- optimizer -------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params, grads, state, batch=None):
    """Apply one bias-corrected Adam update to ``params`` in place.

    ``params`` and ``grads`` are dicts of arrays keyed by parameter name.
    ``batch`` only labels the error raised on a non-finite gradient.
    """
    for name, g in grads.items():
        if name not in params:
            raise ConfigurationError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ConfigurationError(
                f"gradient shape {g.shape} does not match parameter {name!r} {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {name!r} at batch {batch}")

    state.step_count += 1
    t = state.step_count
    step_size = state.lr / (1.0 - state.beta1 ** t)
    bc2 = 1.0 - state.beta2 ** t
    for name, g in grads.items():
        m = state.first_moment.get(name)
        if m is None:
            m = state.first_moment[name] = np.zeros_like(params[name])
            state.second_moment[name] = np.zeros_like(params[name])
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] -= step_size * m / (np.sqrt(v / bc2) + state.epsilon)
    return params, state
