"""Fully connected networks with hand-written backpropagation and Adam.

Parameters of a network live in one contiguous float64 vector; the per-layer
weights and biases are views into it.  That keeps optimiser steps, soft target
updates and checkpointing to a handful of vector operations.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "lnss-checkpoint"
CHECKPOINT_VERSION = 1


class DivergenceError(FloatingPointError):
    """Raised when a loss or gradient stops being finite."""


class MLP:
    """ReLU network ``sizes[0] -> ... -> sizes[-1]``.

    ``output`` is ``"linear"`` or ``"tanh"``; a tanh output is multiplied by
    ``scale``.  Hidden layers are initialised uniformly in ``+-1/sqrt(fan_in)``
    and the final layer in ``+-final_init``.
    """

    def __init__(self, sizes, rng=None, output="linear", scale=1.0, final_init=3e-3):
        if output not in ("linear", "tanh"):
            raise ValueError(f"unknown output activation {output!r}")
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError("need at least an input and an output size")
        self.output = output
        self.scale = float(scale)
        self.final_init = float(final_init)

        shapes = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            shapes += [(fan_in, fan_out), (fan_out,)]
        self.shapes = shapes
        total = sum(int(np.prod(s)) for s in shapes)
        self.flat = np.zeros(total)
        self.grad_flat = np.zeros(total)
        self.params = self._views(self.flat)
        self.grads = self._views(self.grad_flat)
        self._cache = None
        if rng is not None:
            self.init(rng)

    def _views(self, buf):
        out, off = [], 0
        for shape in self.shapes:
            size = int(np.prod(shape))
            out.append(buf[off : off + size].reshape(shape))
            off += size
        return out

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    def init(self, rng: np.random.Generator) -> None:
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            if i == self.n_layers - 1:
                bound = self.final_init
            else:
                bound = 1.0 / np.sqrt(self.sizes[i])
            W[...] = rng.uniform(-bound, bound, W.shape)
            b[...] = rng.uniform(-bound, bound, b.shape)

    def copy(self) -> MLP:
        other = MLP(self.sizes, None, self.output, self.scale, self.final_init)
        other.flat[:] = self.flat
        return other

    def load_flat(self, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.flat.shape:
            raise ValueError(f"parameter vector has shape {values.shape}, expected {self.flat.shape}")
        self.flat[:] = values

    def forward(self, x, cache: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected input of shape (batch, {self.input_dim}), got {x.shape}")
        acts = [x]
        h = x
        last = self.n_layers - 1
        for i in range(self.n_layers):
            z = h @ self.params[2 * i]
            z += self.params[2 * i + 1]
            if i < last:
                h = np.maximum(z, 0.0)
                acts.append(h)
            else:
                h = z
        if self.output == "tanh":
            h = np.tanh(h)
            out = h * self.scale if self.scale != 1.0 else h
        else:
            out = h
        self._cache = (acts, h) if cache else None
        return out

    __call__ = forward

    def backward(self, dout) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of a scalar loss given ``dout = dLoss/dOutput`` for the cached batch.

        Returns the parameter gradients (views into ``grad_flat``) and the
        gradient with respect to the network input.
        """
        if self._cache is None:
            raise RuntimeError("backward needs a cached forward pass")
        acts, y = self._cache
        d = np.asarray(dout, dtype=np.float64)
        if self.output == "tanh":
            d = d * (self.scale * (1.0 - y * y))
        for i in range(self.n_layers - 1, -1, -1):
            a = acts[i]
            np.matmul(a.T, d, out=self.grads[2 * i])
            d.sum(axis=0, out=self.grads[2 * i + 1])
            d = d @ self.params[2 * i].T
            if i > 0:
                d *= a > 0.0
        return self.grads, d


def make_actor(state_dim, action_dim, width=64, rng=None, action_bound=1.0) -> MLP:
    return MLP((state_dim, width, width, action_dim), rng, output="tanh", scale=action_bound)


def make_critic(state_dim, action_dim, width=64, rng=None) -> MLP:
    return MLP((state_dim + action_dim, width, width, 1), rng)


def actor_forward(actor: MLP, state) -> np.ndarray:
    s = np.asarray(state, dtype=np.float64)
    if s.ndim == 1:
        return actor.forward(s[None, :], cache=False)[0]
    return actor.forward(s, cache=False)


def critic_forward(critic: MLP, state, action, cache: bool = False) -> np.ndarray | float:
    s = np.asarray(state, dtype=np.float64)
    a = np.asarray(action, dtype=np.float64)
    single = s.ndim == 1
    if single:
        s, a = s[None, :], a[None, :]
    if s.shape[1] + a.shape[1] != critic.input_dim:
        raise ValueError(
            f"critic expects state+action of size {critic.input_dim}, got {s.shape[1]}+{a.shape[1]}"
        )
    q = critic.forward(np.concatenate([s, a], axis=1), cache=cache)[:, 0]
    return float(q[0]) if single else q


class Adam:
    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        """In-place Adam update of the flat parameter vector."""
        if params.shape != self.m.shape or grads.shape != self.m.shape:
            raise ValueError("parameter/gradient shape does not match optimiser state")
        if not np.all(np.isfinite(grads)):
            raise DivergenceError("divergence detected: non-finite gradient")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * grads
        self.v *= b2
        self.v += (1.0 - b2) * (grads * grads)
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        denom = np.sqrt(self.v)
        denom /= np.sqrt(bc2)
        denom += self.eps
        params -= (self.lr / bc1) * self.m / denom


def adam_step(net: MLP, state: Adam) -> None:
    state.step(net.flat, net.grad_flat)


def soft_update(target: MLP, online: MLP, tau: float) -> None:
    """``target <- tau * online + (1 - tau) * target``."""
    if target.flat.shape != online.flat.shape:
        raise ValueError("soft_update between networks of different shapes")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if tau == 1.0:
        target.flat[:] = online.flat
    elif tau > 0.0:
        target.flat += tau * (online.flat - target.flat)


# -- checkpoints --------------------------------------------------------------


def save_checkpoint(path, networks: dict[str, MLP], meta: dict | None = None) -> Path:
    """Write networks to an ``.npz`` archive.

    Layout (version 1): one array ``<name>`` per network holding its flat
    parameter vector, plus ``__meta__``, a JSON string with the format tag,
    version, each network's layer sizes/output/scale, and caller metadata.
    """
    path = Path(path)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "networks": {
            name: {"sizes": list(net.sizes), "output": net.output, "scale": net.scale}
            for name, net in networks.items()
        },
        "meta": meta or {},
    }
    arrays = {name: net.flat for name, net in networks.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(header, sort_keys=True)), **arrays)
    return path


def load_checkpoint(path) -> tuple[dict[str, MLP], dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["__meta__"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not an lnss checkpoint")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        nets = {}
        for name, desc in header["networks"].items():
            net = MLP(desc["sizes"], None, desc["output"], desc["scale"])
            net.load_flat(data[name])
            nets[name] = net
    return nets, header["meta"]
