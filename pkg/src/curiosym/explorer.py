"""Data collection: curiosity-driven, random, and active-learning exploration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import io
from .model import EncoderConfig, Network, TrainConfig, Trainer
from .model.network import ModeError
from .world import WorldConfig, execute, sample_actions, spawn_random, total_effect_magnitude

log = logging.getLogger(__name__)

STRATEGIES = ("curiosity", "random", "active")
HALF_LOG_2PI_E = 0.5 * math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class ExplorationConfig:
    strategy: str = "curiosity"
    candidates: int = 2000
    total_steps: int = 10000
    retrain_interval: int = 512
    epochs_per_retrain: int = 10
    active_threshold: float = 0.008

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.candidates < 1 or self.retrain_interval < 1:
            raise ValueError("candidates and retrain_interval must be >= 1")
        if self.total_steps < 0 or self.epochs_per_retrain < 0:
            raise ValueError("total_steps and epochs_per_retrain must be >= 0")


@dataclass
class Candidate:
    action: np.ndarray
    mean_entropy: float


def gaussian_entropy(log_var):
    """Differential entropy (nats) of a normal with the given log-variance."""
    return HALF_LOG_2PI_E + 0.5 * np.asarray(log_var, dtype=float)


def mean_entropy(log_var):
    """Mean per-axis entropy over the last axis."""
    return np.mean(gaussian_entropy(log_var), axis=-1)


def score_candidates(net: Network, obj_features, actions) -> np.ndarray:
    if net.head != "distribution":
        raise ModeError("curiosity scoring needs a distribution-head network")
    _, log_var = net.predict(np.atleast_2d(obj_features), actions)
    return mean_entropy(log_var)


def select_curious_action(net: Network, obj_features, rng: np.random.Generator, n: int = 2000):
    """Greedy max-entropy choice among ``n`` sampled candidates.

    Returns ``(action, scores, index)``; ties go to the lowest index.
    """
    actions = sample_actions(rng, n)
    scores = score_candidates(net, obj_features, actions)
    best = int(np.argmax(scores))
    return actions[best], scores, best


def select_random_action(rng: np.random.Generator) -> np.ndarray:
    return sample_actions(rng, 1)[0]


def active_filter(effect, threshold: float) -> bool:
    """Keep a transition only if its total effect reaches ``threshold``."""
    return total_effect_magnitude(effect) >= threshold


def head_for(strategy: str) -> str:
    return "distribution" if strategy == "curiosity" else "point"


@dataclass
class ExplorationResult:
    dataset: io.Dataset
    train_mask: np.ndarray
    net: Network
    metrics: list[dict] = field(default_factory=list)

    @property
    def training_set(self) -> io.Dataset:
        return self.dataset.subset(self.train_mask)


def run_exploration(
    config: ExplorationConfig,
    world_config: WorldConfig | None = None,
    model_config: EncoderConfig | None = None,
    train_config: TrainConfig | None = None,
    seed: int = 0,
    dataset_path=None,
    config_hash: str = "",
) -> ExplorationResult:
    """Collect ``total_steps`` transitions, retraining every ``retrain_interval`` steps.

    Each step spawns a fresh single-object world. The network head follows the
    strategy: curiosity needs variances, the baselines regress the effect
    directly. A final retrain covers a trailing partial interval.
    """
    wcfg = world_config or WorldConfig()
    mcfg = replace(model_config or EncoderConfig(), head=head_for(config.strategy))
    tcfg = replace(train_config or TrainConfig(), epochs=config.epochs_per_retrain)
    spawn_ss, act_ss, init_ss, train_ss, noise_ss = np.random.SeedSequence(seed).spawn(5)
    spawn_rng = np.random.default_rng(spawn_ss)
    act_rng = np.random.default_rng(act_ss)
    noise_rng = np.random.default_rng(noise_ss)
    net = Network(mcfg, seed=int(init_ss.generate_state(1)[0]))
    trainer = Trainer(net, tcfg, seed=int(train_ss.generate_state(1)[0]))

    n = config.total_steps
    O = np.zeros((n, 4))
    A = np.zeros((n, 12))
    E = np.zeros((n, 3))
    keep = np.zeros(n, dtype=bool)
    metrics: list[dict] = []
    writer = io.DatasetWriter(dataset_path, config_hash) if dataset_path is not None else None
    last_loss = None
    try:
        for step in range(n):
            state = spawn_random(spawn_rng, 1, wcfg)
            o = state.objects[0].features()
            if config.strategy == "curiosity":
                a, scores, best = select_curious_action(net, o, act_rng, config.candidates)
                cand_mean, selected = float(scores.mean()), float(scores[best])
            else:
                a = select_random_action(act_rng)
                cand_mean = selected = None
            out = execute(state, a, wcfg, noise_rng)
            O[step], A[step], E[step] = o, a, out.effect
            keep[step] = config.strategy != "active" or active_filter(out.effect, config.active_threshold)
            if writer is not None:
                writer.append(o, a, out.effect)

            done = step + 1
            if done % config.retrain_interval == 0 or done == n:
                idx = np.flatnonzero(keep[:done])
                if len(idx) and config.epochs_per_retrain > 0:
                    trace = trainer.train_epochs(O[idx], A[idx], E[idx])
                    last_loss = trace[-1]
                    log.info("%s step %d: trained on %d rows, loss %.5f", config.strategy, done, len(idx), last_loss)
            metrics.append(
                {
                    "step": done,
                    "strategy": config.strategy,
                    "mean_candidate_entropy": cand_mean,
                    "selected_entropy": selected,
                    "dataset_size": int(keep[:done].sum()),
                    "last_train_loss": last_loss,
                }
            )
    except BaseException:
        if writer is not None:
            writer.abort()
        raise
    if writer is not None:
        writer.close()
    return ExplorationResult(io.Dataset(O, A, E), keep, net, metrics)

