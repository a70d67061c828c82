"""Masked-softmax actor and scalar critic as small numpy MLPs.

Actor: features -> tanh hidden layers -> 41 logits; critic: features ->
tanh hidden layers -> 1 value.  The two networks keep separate parameters
so the actor can be frozen while the critic is fitted.

Checkpoint layout (little endian):

    bytes 0-7     header length n, uint64
    bytes 8..8+n  UTF-8 JSON header: {"format", "layout_version",
                  "actor_hidden", "critic_hidden", "input_dim",
                  "arrays": [[name, shape], ...]}
    rest          float64 values of every array in header order, C order
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .engine import FEATURE_LEN, LAYOUT_VERSION, N_ACTIONS

CHECKPOINT_FORMAT = "mcr-mppo-params-v1"


@dataclass
class PolicyParams:
    arrays: dict  # name -> ndarray; actor "a{i}.W"/"a{i}.b", critic "c{i}.W"/"c{i}.b"
    actor_hidden: tuple
    critic_hidden: tuple
    input_dim: int = FEATURE_LEN
    layout_version: str = LAYOUT_VERSION
    version: int = field(default=0, compare=False)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            {k: v.copy() for k, v in self.arrays.items()},
            self.actor_hidden,
            self.critic_hidden,
            self.input_dim,
            self.layout_version,
            self.version,
        )

    def names(self) -> list[str]:
        return list(self.arrays)

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.arrays.values()])

    def with_flat(self, vec: np.ndarray) -> "PolicyParams":
        out = self.copy()
        i = 0
        for k, v in out.arrays.items():
            n = v.size
            out.arrays[k] = np.asarray(vec[i:i + n], dtype=float).reshape(v.shape).copy()
            i += n
        return out

    def is_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())

    def save(self, path) -> None:
        header = {
            "format": CHECKPOINT_FORMAT,
            "layout_version": self.layout_version,
            "actor_hidden": list(self.actor_hidden),
            "critic_hidden": list(self.critic_hidden),
            "input_dim": self.input_dim,
            "version": self.version,
            "arrays": [[k, list(v.shape)] for k, v in self.arrays.items()],
        }
        raw = json.dumps(header, sort_keys=True).encode()
        body = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in self.arrays.values())
        Path(path).write_bytes(struct.pack("<Q", len(raw)) + raw + body)

    @classmethod
    def load(cls, path) -> "PolicyParams":
        data = Path(path).read_bytes()
        (n,) = struct.unpack("<Q", data[:8])
        header = json.loads(data[8:8 + n].decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a parameter checkpoint")
        arrays = {}
        off = 8 + n
        for name, shape in header["arrays"]:
            size = int(np.prod(shape)) if shape else 1
            arrays[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).astype(float)
            off += 8 * size
        return cls(
            arrays,
            tuple(header["actor_hidden"]),
            tuple(header["critic_hidden"]),
            header["input_dim"],
            header["layout_version"],
            header.get("version", 0),
        )


def _orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.normal(size=(max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


def init_params(
    seed: int = 0,
    actor_hidden: Sequence[int] = (256, 128),
    critic_hidden: Optional[Sequence[int]] = None,
    input_dim: int = FEATURE_LEN,
    out_scale: float = 0.01,
) -> PolicyParams:
    rng = np.random.default_rng(seed)
    critic_hidden = tuple(actor_hidden if critic_hidden is None else critic_hidden)
    actor_hidden = tuple(actor_hidden)
    arrays = {}
    for prefix, hidden, n_out, scale in (("a", actor_hidden, N_ACTIONS, out_scale), ("c", critic_hidden, 1, 1.0)):
        sizes = (input_dim,) + hidden + (n_out,)
        for i in range(len(sizes) - 1):
            last = i == len(sizes) - 2
            gain = scale if last else 5.0 / 3.0
            arrays[f"{prefix}{i}.W"] = _orthogonal(rng, sizes[i], sizes[i + 1], gain)
            arrays[f"{prefix}{i}.b"] = np.zeros(sizes[i + 1])
    return PolicyParams(arrays, actor_hidden, critic_hidden, input_dim)


def zero_output_layer(params: PolicyParams) -> PolicyParams:
    out = params.copy()
    k = len(params.actor_hidden)
    out.arrays[f"a{k}.W"][:] = 0.0
    out.arrays[f"a{k}.b"][:] = 0.0
    return out


# ---------------------------------------------------------------------------
# forward / backward


def _mlp(arrays: dict, prefix: str, n_layers: int, x: np.ndarray):
    acts = [x]
    h = x
    for i in range(n_layers):
        h = np.tanh(h @ arrays[f"{prefix}{i}.W"] + arrays[f"{prefix}{i}.b"])
        acts.append(h)
    out = h @ arrays[f"{prefix}{n_layers}.W"] + arrays[f"{prefix}{n_layers}.b"]
    return out, acts


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any(axis=-1).all():
        raise ValueError("legal mask has no legal action")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class BatchForward:
    logits: np.ndarray
    probs: np.ndarray
    values: np.ndarray
    masks: np.ndarray
    actor_acts: list
    critic_acts: list


def forward_batch(params: PolicyParams, x: np.ndarray, masks: np.ndarray) -> BatchForward:
    x = np.atleast_2d(x)
    masks = np.atleast_2d(masks)
    logits, a_acts = _mlp(params.arrays, "a", len(params.actor_hidden), x)
    v, c_acts = _mlp(params.arrays, "c", len(params.critic_hidden), x)
    return BatchForward(logits, masked_softmax(logits, masks), v[:, 0], masks, a_acts, c_acts)


def forward(params: PolicyParams, obs) -> tuple[np.ndarray, float, np.ndarray]:
    """(probs over the 41 actions, value, raw logits) for one observation."""
    out = forward_batch(params, obs.features[None, :], obs.legal_mask[None, :])
    return out.probs[0], float(out.values[0]), out.logits[0]


def _mlp_backward(arrays: dict, prefix: str, n_layers: int, acts: list, dout: np.ndarray, grads: dict) -> None:
    grads[f"{prefix}{n_layers}.W"] = acts[-1].T @ dout
    grads[f"{prefix}{n_layers}.b"] = dout.sum(axis=0)
    d = dout @ arrays[f"{prefix}{n_layers}.W"].T
    for i in range(n_layers - 1, -1, -1):
        d = d * (1.0 - acts[i + 1] ** 2)
        grads[f"{prefix}{i}.W"] = acts[i].T @ d
        grads[f"{prefix}{i}.b"] = d.sum(axis=0)
        if i:
            d = d @ arrays[f"{prefix}{i}.W"].T


def backward(params: PolicyParams, fwd: BatchForward, dlogits=None, dvalues=None) -> dict:
    """Gradients of a scalar loss given its derivatives w.r.t. logits and values."""
    grads = {}
    if dlogits is not None:
        _mlp_backward(params.arrays, "a", len(params.actor_hidden), fwd.actor_acts, dlogits, grads)
    if dvalues is not None:
        dv = np.asarray(dvalues, dtype=float).reshape(-1, 1)
        _mlp_backward(params.arrays, "c", len(params.critic_hidden), fwd.critic_acts, dv, grads)
    for k, v in params.arrays.items():
        if k not in grads:
            grads[k] = np.zeros_like(v)
    return grads


def log_probs(fwd: BatchForward, actions: np.ndarray) -> np.ndarray:
    idx = np.arange(len(actions))
    with np.errstate(divide="ignore"):
        return np.log(fwd.probs[idx, actions])


def grad_logprob(params: PolicyParams, obs, action: int) -> dict:
    """Analytic gradient of log pi(action | obs) w.r.t. the actor parameters."""
    if not obs.legal_mask[action]:
        raise ValueError(f"action {action} is not legal")
    fwd = forward_batch(params, obs.features[None, :], obs.legal_mask[None, :])
    d = -fwd.probs.copy()
    d[0, action] += 1.0
    return backward(params, fwd, dlogits=d)


def grad_value(params: PolicyParams, obs) -> dict:
    fwd = forward_batch(params, obs.features[None, :], obs.legal_mask[None, :])
    return backward(params, fwd, dvalues=np.ones(1))


def sample_action(params: PolicyParams, obs, rng: np.random.Generator, greedy: bool = False) -> tuple[int, float]:
    probs, _, _ = forward(params, obs)
    return choose(probs, rng, greedy)


def choose(probs: np.ndarray, rng: Optional[np.random.Generator], greedy: bool = False) -> tuple[int, float]:
    if greedy:
        a = int(np.argmax(probs))
    else:
        c = np.cumsum(probs)
        a = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
        a = min(a, len(probs) - 1)
        while probs[a] == 0.0:
            a -= 1
    return a, float(np.log(probs[a]))


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    def __init__(self, params: PolicyParams, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8,
                 max_grad_norm: Optional[float] = 1.0):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.t = 0

    def step(self, params: PolicyParams, grads: dict, only: Optional[str] = None) -> float:
        """Apply one update in place; ``only`` restricts it to names with that prefix."""
        keys = [k for k in params.arrays if only is None or k.startswith(only)]
        norm = float(np.sqrt(sum(float((grads[k] ** 2).sum()) for k in keys)))
        scale = 1.0
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            scale = self.max_grad_norm / (norm + 1e-12)
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k in keys:
            g = grads[k] * scale
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params.arrays[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
        return norm
