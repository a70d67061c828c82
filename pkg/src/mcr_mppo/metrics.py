"""Policy distances, winning-pattern distributions and seat-swapped evaluation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .policy import PolicyParams, choose, forward, forward_batch
from .scoring import MAJOR_PATTERNS, pattern_signature, principal_pattern
from .trajectories import DemoTrajectory, final_state, play_game, replay
from .engine import encode


# ---------------------------------------------------------------------------
# action-level distance


def d_action(probs1: np.ndarray, probs2: np.ndarray) -> float:
    """Mean total variation between two (n_states, n_actions) probability tables."""
    p = np.atleast_2d(np.asarray(probs1, dtype=float))
    q = np.atleast_2d(np.asarray(probs2, dtype=float))
    if p.shape != q.shape or p.shape[0] == 0:
        raise ValueError("need equal-shape nonempty probability tables")
    return float(np.mean(0.5 * np.abs(p - q).sum(axis=1)))


def one_hot(actions: Sequence[int], n_actions: int) -> np.ndarray:
    out = np.zeros((len(actions), n_actions))
    out[np.arange(len(actions)), actions] = 1.0
    return out


def teacher_states(trajectories: Iterable[DemoTrajectory], seats: str = "all") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(features, masks, teacher actions) from held-out demos, skipping forced moves."""
    xs, ms, acts = [], [], []
    for traj in trajectories:
        keep = None if seats == "all" else traj.winner
        for s, seat, action in replay(traj):
            if keep is not None and seat != keep:
                continue
            obs = encode(s, seat)
            if len(obs.legal_ids) < 2:
                continue
            xs.append(obs.features)
            ms.append(obs.legal_mask)
            acts.append(action)
    return np.stack(xs), np.stack(ms), np.array(acts, dtype=np.int64)


def d_action_vs_teacher(params: PolicyParams, states) -> float:
    """Distance from a student to a one-hot teacher on recorded states."""
    x, masks, acts = states
    probs = forward_batch(params, x, masks).probs
    return d_action(probs, one_hot(acts, probs.shape[1]))


# ---------------------------------------------------------------------------
# pattern-level distance


@dataclass
class PatternDistribution:
    counts: dict
    wins: int
    games: int
    patterns: tuple = MAJOR_PATTERNS
    principal_only: bool = False
    signatures: list = field(default_factory=list, repr=False)

    def prob(self, pattern: str) -> float:
        return self.counts.get(pattern, 0) / self.wins if self.wins else 0.0

    def vector(self) -> np.ndarray:
        return np.array([self.prob(p) for p in self.patterns])

    @property
    def win_rate(self) -> float:
        return self.wins / self.games if self.games else 0.0


def pattern_distribution(fan_results: Iterable, games: Optional[int] = None, principal_only: bool = False,
                         patterns: Sequence[str] = MAJOR_PATTERNS) -> PatternDistribution:
    """Distribution from the fan results of winning hands (None entries are non-wins)."""
    counts = Counter()
    wins = 0
    n = 0
    sigs = []
    for res in fan_results:
        n += 1
        if res is None:
            continue
        wins += 1
        if principal_only:
            p = principal_pattern(res)
            sig = frozenset() if p is None else frozenset({p})
        else:
            sig = pattern_signature(res)
        sig = frozenset(s for s in sig if s in patterns)
        sigs.append(sig)
        counts.update(sig)
    return PatternDistribution(dict(counts), wins, games if games is not None else n, tuple(patterns),
                               principal_only, sigs)


def d_game(dist1: PatternDistribution, dist2: PatternDistribution) -> float:
    if tuple(dist1.patterns) != tuple(dist2.patterns):
        raise ValueError("pattern lists differ")
    return float(0.5 * np.abs(dist1.vector() - dist2.vector()).sum())


def pattern_histogram(bots: Sequence, seeds: Iterable[int], principal_only: bool = False) -> PatternDistribution:
    """Play one game per seed with ``bots`` seated 0-3 and collect winning patterns."""
    results = []
    for seed in seeds:
        final, _ = play_game(bots, seed)
        results.append(final.fan if final.winner is not None else None)
    return pattern_distribution(results, principal_only=principal_only)


def demo_histogram(trajectories: Iterable[DemoTrajectory], principal_only: bool = False) -> PatternDistribution:
    results = []
    for traj in trajectories:
        if traj.winner is None:
            results.append(None)
        else:
            results.append(final_state(traj).fan)
    return pattern_distribution(results, principal_only=principal_only)


# ---------------------------------------------------------------------------
# agents and seat-swapped evaluation


class PolicyBot:
    """Acts with a parameter snapshot, sampling from a seeded generator or greedily."""

    def __init__(self, params: PolicyParams, seed: int = 0, greedy: bool = False, name: str = "policy"):
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.greedy = greedy
        self.name = name

    def act(self, obs) -> int:
        if len(obs.legal_ids) == 1:
            return obs.legal_ids[0]
        probs, _, _ = forward(self.params, obs)
        return choose(probs, self.rng, self.greedy)[0]

    def reseed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)


@dataclass
class EvalReport:
    win_rate: float
    avg_score: float
    games: int
    seat_swapped: bool
    x_wins: int
    y_wins: int
    draws: int

    def ci95(self) -> tuple[float, float]:
        n = self.x_wins + self.y_wins
        if n == 0:
            return (0.0, 1.0)
        half = 1.96 * np.sqrt(self.win_rate * (1 - self.win_rate) / n)
        return (max(0.0, self.win_rate - half), min(1.0, self.win_rate + half))


def evaluate_seatswap(make_x: Callable[[], object], make_y: Callable[[], object], seeds: Sequence[int]) -> EvalReport:
    """Two games per seed: X at seats 0 and 2, then X at seats 1 and 3.

    ``make_x``/``make_y`` build fresh agents so every game starts from the
    same agent state; agents with a ``reseed`` method are reseeded per game.
    Draws are left out of the win-rate denominator and counted separately.
    """
    if not len(seeds):
        raise ValueError("need at least one seed")
    x_wins = y_wins = draws = 0
    score = 0.0
    games = 0
    for seed in seeds:
        for x_seats in ((0, 2), (1, 3)):
            x, y = make_x(), make_y()
            for agent, salt in ((x, 1), (y, 2)):
                if hasattr(agent, "reseed"):
                    agent.reseed(seed * 4 + salt)
            bots = [x if seat in x_seats else y for seat in range(4)]
            final, _ = play_game(bots, seed)
            games += 1
            score += sum(final.rewards[s] for s in x_seats) / 2.0
            if final.winner is None:
                draws += 1
            elif final.winner in x_seats:
                x_wins += 1
            else:
                y_wins += 1
    decided = x_wins + y_wins
    return EvalReport(x_wins / decided if decided else 0.5, score / games, games, True, x_wins, y_wins, draws)
