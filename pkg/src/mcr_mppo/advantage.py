"""Generalized advantage estimation, plus exact tabular policy evaluation.

The tabular helpers solve small MDPs in closed form; they back the
performance-difference check J(pi') - J(pi) = sum_s rho_pi'(s) sum_a pi'(a|s) A_pi(s, a).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class EpisodeRollout:
    rewards: Sequence[float]
    values: Sequence[float]
    terminal: bool = True
    bootstrap_value: float = 0.0


def gae(rollout: EpisodeRollout, gamma: float = 1.0, lam: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Backward-recursion GAE.  Returns (advantages, value targets)."""
    r = np.asarray(rollout.rewards, dtype=float)
    v = np.asarray(rollout.values, dtype=float)
    if r.shape != v.shape or r.ndim != 1 or len(r) == 0:
        raise ValueError("rewards and values must be equal-length nonempty 1-d sequences")
    if not 0.0 < gamma <= 1.0 or not 0.0 <= lam <= 1.0:
        raise ValueError("need gamma in (0, 1] and lambda in [0, 1]")
    n = len(r)
    adv = np.empty(n)
    next_v = 0.0 if rollout.terminal else float(rollout.bootstrap_value)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        delta = r[t] + gamma * next_v - v[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
        next_v = v[t]
    return adv, adv + v


def normalize_advantages(adv, enabled: bool = True, eps: float = 1e-8) -> np.ndarray:
    adv = np.asarray(adv, dtype=float)
    if not enabled:
        return adv.copy()
    if adv.size < 2:
        raise ValueError("normalization needs at least two samples")
    centered = adv - adv.mean()
    std = centered.std()
    if std < eps:
        return centered
    return centered / std


# ---------------------------------------------------------------------------
# exact dynamic programming on finite MDPs


@dataclass(frozen=True)
class TabularMDP:
    transitions: np.ndarray  # (S, A, S)
    rewards: np.ndarray  # (S, A)
    initial: np.ndarray  # (S,)
    gamma: float

    @property
    def n_states(self) -> int:
        return self.rewards.shape[0]


def random_mdp(rng: np.random.Generator, n_states: int = 6, n_actions: int = 3, gamma: float = 0.9) -> TabularMDP:
    p = rng.random((n_states, n_actions, n_states)) ** 2
    p /= p.sum(axis=2, keepdims=True)
    mu = rng.random(n_states)
    return TabularMDP(p, rng.normal(size=(n_states, n_actions)), mu / mu.sum(), gamma)


def random_policy(rng: np.random.Generator, n_states: int, n_actions: int) -> np.ndarray:
    logits = rng.normal(scale=1.5, size=(n_states, n_actions))
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def state_values(mdp: TabularMDP, pi: np.ndarray) -> np.ndarray:
    p_pi = np.einsum("sa,sat->st", pi, mdp.transitions)
    r_pi = (pi * mdp.rewards).sum(axis=1)
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * p_pi, r_pi)


def action_values(mdp: TabularMDP, pi: np.ndarray) -> np.ndarray:
    v = state_values(mdp, pi)
    return mdp.rewards + mdp.gamma * mdp.transitions @ v


def advantages(mdp: TabularMDP, pi: np.ndarray) -> np.ndarray:
    return action_values(mdp, pi) - state_values(mdp, pi)[:, None]


def discounted_visitation(mdp: TabularMDP, pi: np.ndarray) -> np.ndarray:
    """rho_pi(s) = sum_t gamma^t P(s_t = s | pi), unnormalized."""
    p_pi = np.einsum("sa,sat->st", pi, mdp.transitions)
    return np.linalg.solve((np.eye(mdp.n_states) - mdp.gamma * p_pi).T, mdp.initial)


def performance(mdp: TabularMDP, pi: np.ndarray) -> float:
    return float(mdp.initial @ state_values(mdp, pi))


def expected_advantage(mdp: TabularMDP, pi_new: np.ndarray, pi_old: np.ndarray) -> float:
    """E over rho_{pi_new} and a ~ pi_new of A_{pi_old}(s, a)."""
    rho = discounted_visitation(mdp, pi_new)
    return float(rho @ (pi_new * advantages(mdp, pi_old)).sum(axis=1))
