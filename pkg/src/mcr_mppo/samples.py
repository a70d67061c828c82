"""Training samples and the per-episode conversion shared by all actors."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .advantage import EpisodeRollout, gae


class Source(enum.IntEnum):
    SELF_PLAY = 0
    DEMO = 1


@dataclass(frozen=True)
class TrainSample:
    features: np.ndarray
    legal_mask: np.ndarray
    action: int
    advantage: float
    value_target: float
    behavior_logprob: float
    source: Source
    version: int = 0  # parameter snapshot the sample was generated with

    def __post_init__(self):
        if not np.isfinite(self.behavior_logprob):
            raise ValueError("behavior log-prob must be finite")
        if not self.legal_mask[self.action]:
            raise ValueError(f"action {self.action} is not legal for this sample")


@dataclass
class Decision:
    """One seat's recorded decision while an episode is played or replayed."""

    features: np.ndarray
    legal_mask: np.ndarray
    action: int
    logprob: float
    value: float


def seat_samples(
    decisions: Sequence[Decision],
    final_reward: float,
    source: Source,
    gamma: float = 1.0,
    lam: float = 0.95,
    version: int = 0,
) -> list[TrainSample]:
    """GAE samples for one seat; the terminal reward lands on its last decision."""
    if not decisions:
        return []
    rewards = np.zeros(len(decisions))
    rewards[-1] = final_reward
    adv, targets = gae(EpisodeRollout(rewards, [d.value for d in decisions]), gamma, lam)
    return [
        TrainSample(d.features, d.legal_mask, d.action, float(a), float(t), d.logprob, source, version)
        for d, a, t in zip(decisions, adv, targets)
    ]


def stack(samples: Sequence[TrainSample]) -> dict:
    """Column arrays for a batch."""
    return {
        "x": np.stack([s.features for s in samples]),
        "mask": np.stack([s.legal_mask for s in samples]),
        "action": np.array([s.action for s in samples], dtype=np.int64),
        "adv": np.array([s.advantage for s in samples]),
        "target": np.array([s.value_target for s in samples]),
        "logp_old": np.array([s.behavior_logprob for s in samples]),
        "source": np.array([int(s.source) for s in samples], dtype=np.int64),
    }
