"""Recurrent sequence labelers (Elman RNN and LSTM) written directly in numpy.

Requests enter as one-hot vectors, so the input product ``W_v @ one_hot(r)``
is computed as the column lookup ``W_v[:, r]``. Every step produces user logits
``W_u @ h_t``. Training uses truncated BPTT: the hidden state is carried from
one window to the next but gradients stop at window boundaries; each window's
mean cross-entropy drives one Adam update.

Parameter layout (also the checkpoint order), ``H`` hidden units::

    simple:  W_v (H, n)   W_h (H, H)    b (H,)    W_u (m, H)
    lstm:    W_v (4H, n)  W_h (4H, H)   b (4H,)   W_u (m, H)

LSTM rows are stacked in gate order input, forget, output, candidate.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from deinterleave.metrics import accuracy

log = logging.getLogger(__name__)

PARAM_ORDER = ("W_v", "W_h", "b", "W_u")


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class RnnConfig:
    input_size: int
    output_size: int
    cell: str = "lstm"
    hidden_size: int = 64
    bptt_window: int = 50
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 50
    patience: int = 5
    init_scale: float = 0.08
    forget_bias: float = 1.0

    def __post_init__(self):
        if self.cell not in ("simple", "lstm"):
            raise ValueError(f"unknown cell {self.cell!r}")
        for name in ("input_size", "output_size", "hidden_size", "bptt_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")

    @property
    def gate_rows(self) -> int:
        return self.hidden_size * (4 if self.cell == "lstm" else 1)

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(config: RnnConfig) -> dict[str, tuple[int, ...]]:
    G, H = config.gate_rows, config.hidden_size
    return {
        "W_v": (G, config.input_size),
        "W_h": (G, H),
        "b": (G,),
        "W_u": (config.output_size, H),
    }


def init_params(config: RnnConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    s = config.init_scale
    params = {k: rng.uniform(-s, s, size=shape) for k, shape in param_shapes(config).items()}
    if config.cell == "lstm":
        H = config.hidden_size
        params["b"][H : 2 * H] = config.forget_bias
    return params


def zero_state(config: RnnConfig) -> tuple[np.ndarray, ...]:
    H = config.hidden_size
    if config.cell == "lstm":
        return (np.zeros(H), np.zeros(H))
    return (np.zeros(H),)


def one_hot(r: int, n: int) -> np.ndarray:
    if not 0 <= r < n:
        raise ValueError(f"request {r} outside [0, {n})")
    v = np.zeros(n)
    v[r] = 1.0
    return v


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def forward(params, config: RnnConfig, inputs, state=None):
    """Run the network over a window.

    ``inputs`` is a sequence of request ids (or a ``(T, n)`` one-hot matrix).
    Returns ``(logits (T, m), final_state, cache)``.
    """
    inputs = np.asarray(inputs)
    if inputs.ndim == 2:
        obs = np.argmax(inputs, axis=1)
    else:
        obs = inputs.astype(np.int64)
    if state is None:
        state = zero_state(config)
    T, H = len(obs), config.hidden_size
    Wh = params["W_h"]
    xz = params["W_v"][:, obs].T + params["b"]  # (T, G)
    hs = np.empty((T + 1, H))
    hs[0] = state[0]
    if config.cell == "simple":
        for t in range(T):
            hs[t + 1] = np.tanh(xz[t] + Wh @ hs[t])
        cache = {"hs": hs}
        final = (hs[T].copy(),)
    else:
        cs = np.empty((T + 1, H))
        cs[0] = state[1]
        gates = np.empty((T, 4 * H))
        tanh_c = np.empty((T, H))
        H3 = 3 * H
        for t in range(T):
            z = xz[t] + Wh @ hs[t]
            g = gates[t]
            g[:H3] = _sigmoid(z[:H3])
            g[H3:] = np.tanh(z[H3:])
            cs[t + 1] = g[H : 2 * H] * cs[t] + g[:H] * g[H3:]
            tanh_c[t] = np.tanh(cs[t + 1])
            hs[t + 1] = g[2 * H : H3] * tanh_c[t]
        cache = {"hs": hs, "cs": cs, "gates": gates, "tanh_c": tanh_c}
        final = (hs[T].copy(), cs[T].copy())
    logits = hs[1:] @ params["W_u"].T
    if not np.all(np.isfinite(logits)):
        raise TrainingDiverged("non-finite activation in forward pass")
    cache.update(obs=obs, params=params, config=config, logits=logits)
    return logits, final, cache


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_xent(logits, label: int):
    """Cross-entropy of one logit vector. Returns ``(loss, d loss / d logits)``."""
    logits = np.asarray(logits, dtype=float)
    z = logits - logits.max()
    lse = np.log(np.sum(np.exp(z)))
    p = np.exp(z - lse)
    grad = p.copy()
    grad[label] -= 1.0
    return float(lse - z[label]), grad


def window_loss(logits, labels):
    """Mean cross-entropy over a window and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    T = len(labels)
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=1))
    loss = float(np.mean(lse - z[np.arange(T), labels]))
    grad = np.exp(z - lse[:, None])
    grad[np.arange(T), labels] -= 1.0
    return loss, grad / T


def backward(cache, labels=None, dlogits=None) -> dict[str, np.ndarray]:
    """Exact gradients of the window's mean cross-entropy.

    Pass ``labels``, or ``dlogits`` directly to backpropagate another loss.
    """
    if dlogits is None:
        _, dlogits = window_loss(cache["logits"], labels)
    params, config, obs, hs = cache["params"], cache["config"], cache["obs"], cache["hs"]
    T, H = len(obs), config.hidden_size
    Wh = params["W_h"]
    grads = {"W_u": dlogits.T @ hs[1:]}
    dh_out = dlogits @ params["W_u"]  # (T, H)
    dz = np.empty((T, config.gate_rows))
    if config.cell == "simple":
        dh_next = np.zeros(H)
        for t in range(T - 1, -1, -1):
            dz[t] = (dh_out[t] + dh_next) * (1.0 - hs[t + 1] ** 2)
            dh_next = Wh.T @ dz[t]
    else:
        gates, cs, tanh_c = cache["gates"], cache["cs"], cache["tanh_c"]
        H2, H3 = 2 * H, 3 * H
        dh_next = np.zeros(H)
        dc_next = np.zeros(H)
        for t in range(T - 1, -1, -1):
            g = gates[t]
            i, f, o, cand = g[:H], g[H:H2], g[H2:H3], g[H3:]
            dh = dh_out[t] + dh_next
            dc = dc_next + dh * o * (1.0 - tanh_c[t] ** 2)
            d = dz[t]
            d[:H] = dc * cand * i * (1.0 - i)
            d[H:H2] = dc * cs[t] * f * (1.0 - f)
            d[H2:H3] = dh * tanh_c[t] * o * (1.0 - o)
            d[H3:] = dc * i * (1.0 - cand**2)
            dc_next = dc * f
            dh_next = Wh.T @ d
    grads["W_h"] = dz.T @ hs[:-1]
    grads["b"] = dz.sum(axis=0)
    onehots = np.zeros((T, config.input_size))
    onehots[np.arange(T), obs] = 1.0
    grads["W_v"] = dz.T @ onehots
    return {k: grads[k] for k in PARAM_ORDER}


def loss_and_grads(params, config: RnnConfig, obs, labels, state=None):
    """Forward + backward over one window: ``(loss, grads, final_state)``."""
    logits, final, cache = forward(params, config, obs, state)
    loss, dlogits = window_loss(logits, labels)
    return loss, backward(cache, dlogits=dlogits), final


def truncated_grads(params, config: RnnConfig, obs, labels, state=None):
    """Per-window ``(loss, grads)`` for truncated BPTT over a whole sequence."""
    out = []
    W = config.bptt_window
    for s in range(0, len(obs), W):
        loss, grads, state = loss_and_grads(params, config, obs[s : s + W], labels[s : s + W], state)
        out.append((loss, grads))
    return out


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls(
            {k: np.zeros_like(p) for k, p in params.items()},
            {k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params, grads, state: AdamState, config: RnnConfig):
    """Bias-corrected Adam. Returns new ``(params, state)``; inputs are untouched."""
    b1, b2, eps = config.beta1, config.beta2, config.epsilon
    t = state.step + 1
    new_m, new_v, new_p = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        new_m[k] = b1 * state.m[k] + (1.0 - b1) * g
        new_v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        m_hat = new_m[k] / (1.0 - b1**t)
        v_hat = new_v[k] / (1.0 - b2**t)
        new_p[k] = p - config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return new_p, AdamState(new_m, new_v, t)


def predict_proba(params, config: RnnConfig, obs, chunk: int = 4096) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.int64)
    state = zero_state(config)
    out = []
    for s in range(0, len(obs), chunk):
        logits, state, _ = forward(params, config, obs[s : s + chunk], state)
        out.append(softmax(logits))
    if not out:
        return np.zeros((0, config.output_size))
    return np.concatenate(out)


def predict_users(params, config: RnnConfig, obs) -> np.ndarray:
    """Most probable user per step, ties to the lower index."""
    return np.argmax(predict_proba(params, config, obs), axis=1)


@dataclass
class LabeledDataset:
    train: "LabeledSequence"
    validation: "LabeledSequence"
    test: "LabeledSequence"


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    config: RnnConfig
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = float("nan")


def train(dataset: LabeledDataset, config: RnnConfig, rng: np.random.Generator) -> TrainResult:
    """Truncated-BPTT training with early stopping on validation accuracy.

    The best-validation parameters are returned. Training stops after
    ``patience`` epochs without improvement, at ``max_epochs``, or as soon as
    validation accuracy reaches 1.
    """
    seq = dataset.train
    if len(seq) == 0:
        raise ValueError("training sequence is empty")
    params = init_params(config, rng)
    opt = AdamState.zeros_like(params)
    result = TrainResult(copy.deepcopy(params), config)
    best, stale = -1.0, 0
    W = config.bptt_window
    val = dataset.validation
    for epoch in range(1, config.max_epochs + 1):
        state = zero_state(config)
        total = 0.0
        for s in range(0, len(seq), W):
            try:
                loss, grads, state = loss_and_grads(
                    params, config, seq.requests[s : s + W], seq.users[s : s + W], state
                )
            except TrainingDiverged as exc:
                raise TrainingDiverged(f"training diverged in epoch {epoch}") from exc
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}")
            total += loss * min(W, len(seq) - s)
            params, opt = adam_step(params, grads, opt, config)
        train_loss = total / len(seq)
        if len(val):
            val_acc = accuracy(val.users, predict_users(params, config, val.requests))
        else:
            val_acc = accuracy(seq.users, predict_users(params, config, seq.requests))
        result.log.append({"epoch": epoch, "train_loss": train_loss, "val_accuracy": val_acc})
        log.debug("epoch %d loss %.5f val %.4f", epoch, train_loss, val_acc)
        if val_acc > best:
            best, stale = val_acc, 0
            result.params = copy.deepcopy(params)
            result.best_epoch, result.best_val_accuracy = epoch, val_acc
        else:
            stale += 1
        if best >= 1.0 or stale >= config.patience:
            break
    return result
