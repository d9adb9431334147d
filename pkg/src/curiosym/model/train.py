"""Mini-batch training with global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .network import Network

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 512
    learning_rate: float = 1e-5
    clip_norm: float = 1.0
    optimizer: str = "sgd"
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        return d


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float):
    """Scale all gradients together so their joint L2 norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if max_norm is None or max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


class Trainer:
    """Holds optimiser state so repeated ``train_epochs`` calls continue smoothly."""

    def __init__(self, net: Network, config: TrainConfig | None = None, seed: int = 0):
        self.net = net
        self.config = config or TrainConfig()
        self.rng = np.random.default_rng(seed)
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t = 0

    def update(self, grads: dict[str, np.ndarray]) -> None:
        c = self.config
        lr = c.learning_rate
        params = self.net.params
        if c.optimizer == "sgd":
            for k, g in grads.items():
                params[k] -= lr * g
            return
        b1, b2 = c.adam_betas
        self._t += 1
        corr1 = 1.0 - b1**self._t
        corr2 = 1.0 - b2**self._t
        for k, g in grads.items():
            m = self._m.get(k)
            if m is None:
                m = self._m[k] = np.zeros_like(g)
                self._v[k] = np.zeros_like(g)
            v = self._v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            params[k] -= lr * (m / corr1) / (np.sqrt(v / corr2) + c.adam_eps)

    def train_step(self, O, A, E) -> float:
        loss, grads, info = self.net.loss_and_grads(O, A, E, self.rng)
        grads, _ = clip_by_global_norm(grads, self.config.clip_norm)
        self.update(grads)
        self.net.apply_running_stats(info["running"])
        self.net.step += 1
        return loss

    def train_epochs(self, O, A, E, epochs: int | None = None) -> list[float]:
        """Shuffled mini-batch passes over the data; returns the mean loss per epoch."""
        O = np.asarray(O, dtype=float)
        A = np.asarray(A, dtype=float)
        E = np.asarray(E, dtype=float)
        n = len(O)
        if n == 0:
            raise ValueError("cannot train on an empty dataset")
        epochs = self.config.epochs if epochs is None else epochs
        bs = self.config.batch_size
        trace = []
        for _ in range(epochs):
            order = self.rng.permutation(n)
            total = 0.0
            for start in range(0, n, bs):
                idx = order[start : start + bs]
                total += self.train_step(O[idx], A[idx], E[idx]) * len(idx)
            trace.append(total / n)
        return trace


def train_epochs(net: Network, O, A, E, config: TrainConfig | None = None, seed: int = 0) -> list[float]:
    """One-shot training helper; optimiser state is discarded afterwards."""
    return Trainer(net, config, seed).train_epochs(O, A, E)
