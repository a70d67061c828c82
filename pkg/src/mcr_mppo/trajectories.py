"""Demonstration trajectories: record, store, filter, replay.

A trajectory keeps only the game seed and the ordered (seat, action)
decisions.  States, rewards and observations are regenerated by replaying
the actions from ``reset(seed)``.

File format, one trajectory per line, tab separated:

    e=<u64>\tteacher=<id>\tscores=<s0,s1,s2,s3>\tactions=<seat:action,...>

A single game can also be written as a plain game log: a header line
``seed=<u64>`` (optionally followed by `` scores=<s0,s1,s2,s3>``), then one
``seat=<0-3> action=<id>`` line per decision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from . import engine
from .engine import GameState, encode, next_actor, reset, step
from .policy import PolicyParams, forward_batch
from .samples import Decision, Source, TrainSample, seat_samples

log = logging.getLogger(__name__)


class ReplayDivergenceError(RuntimeError):
    """A stored action is illegal on replay (engine or version drift)."""


@dataclass(frozen=True)
class DemoTrajectory:
    seed: int
    decisions: tuple  # ((seat, action), ...)
    final_scores: tuple
    teacher_id: str = "unknown"

    @property
    def winner(self) -> Optional[int]:
        for seat, r in enumerate(self.final_scores):
            if r > 0:
                return seat
        return None

    def to_line(self) -> str:
        scores = ",".join(repr(float(x)) for x in self.final_scores)
        actions = ",".join(f"{s}:{a}" for s, a in self.decisions)
        return f"e={self.seed}\tteacher={self.teacher_id}\tscores={scores}\tactions={actions}"

    @classmethod
    def from_line(cls, line: str) -> "DemoTrajectory":
        fields = {}
        for part in line.rstrip("\n").split("\t"):
            key, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"malformed field {part!r}")
            fields[key] = value
        try:
            seed = int(fields["e"])
            scores = tuple(float(x) for x in fields["scores"].split(","))
            decisions = tuple(
                (int(s), int(a)) for s, a in (tok.split(":") for tok in fields["actions"].split(",") if tok)
            )
        except (KeyError, ValueError) as exc:
            raise ValueError(f"malformed trajectory line: {exc}") from None
        if not 0 <= seed < 1 << 64 or len(scores) != 4:
            raise ValueError("seed must be a u64 and scores must have four entries")
        return cls(seed, decisions, scores, fields.get("teacher", "unknown"))


def format_game_log(traj: DemoTrajectory) -> str:
    scores = ",".join(repr(float(x)) for x in traj.final_scores)
    lines = [f"seed={traj.seed} scores={scores}"]
    lines += [f"seat={seat} action={action}" for seat, action in traj.decisions]
    return "\n".join(lines) + "\n"


def parse_game_log(text: str) -> DemoTrajectory:
    """Inverse of ``format_game_log``.  Without a scores field the replayed scores are used."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].startswith("seed="):
        raise ValueError("game log must start with a seed=<u64> header")
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    try:
        seed = int(header["seed"])
        decisions = []
        for n, ln in enumerate(lines[1:], 2):
            rec = dict(tok.split("=", 1) for tok in ln.split())
            seat, action = int(rec["seat"]), int(rec["action"])
            if not 0 <= seat < 4:
                raise ValueError(f"line {n}: seat out of range")
            decisions.append((seat, action))
        scores = tuple(float(x) for x in header["scores"].split(",")) if "scores" in header else None
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed game log: {exc}") from None
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be a u64")
    if scores is None:
        probe = DemoTrajectory(seed, tuple(decisions), (0.0,) * 4)
        scores = tuple(final_state(probe, check_scores=False).rewards)
    elif len(scores) != 4:
        raise ValueError("scores must have four entries")
    return DemoTrajectory(seed, tuple(decisions), scores)


@dataclass
class DemoCollection:
    trajectories: list = field(default_factory=list)
    winner_only: bool = True

    def admits(self, traj: DemoTrajectory) -> bool:
        return not self.winner_only or traj.winner is not None

    def add(self, traj: DemoTrajectory) -> bool:
        if not self.admits(traj):
            return False
        self.trajectories.append(traj)
        return True

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def save(self, path) -> None:
        text = "".join(t.to_line() + "\n" for t in self.trajectories)
        Path(path).write_text(text)

    @classmethod
    def load(cls, path, winner_only: bool = True) -> "DemoCollection":
        out = cls([], winner_only)
        for n, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                traj = DemoTrajectory.from_line(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{n}: {exc}") from None
            if not out.add(traj):
                log.info("%s:%d: skipped trajectory without a winner", path, n)
        return out


# ---------------------------------------------------------------------------
# playing and replaying


def play_game(bots: Sequence, seed: int, on_decision: Optional[Callable] = None) -> tuple[GameState, list]:
    """Drive one game; ``bots[seat].act(obs)`` chooses actions.

    ``on_decision(state, seat, obs, action)`` is called before each step.
    Returns the final state and the (seat, action) decision list.
    """
    s = reset(seed)
    decisions = []
    while not s.terminal:
        seat = next_actor(s)
        obs = encode(s, seat)
        action = int(bots[seat].act(obs))
        if on_decision is not None:
            on_decision(s, seat, obs, action)
        decisions.append((seat, action))
        s, _, _ = step(s, seat, action)
    return s, decisions


def record(bots: Sequence, seed: int, teacher_id: str = "unknown") -> DemoTrajectory:
    final, decisions = play_game(bots, seed)
    return DemoTrajectory(seed, tuple(decisions), tuple(final.rewards), teacher_id)


def replay(traj: DemoTrajectory, check_scores: bool = True) -> Iterator[tuple[GameState, int, int]]:
    """Yield (state before the action, seat, action) and check the final scores."""
    s = reset(traj.seed)
    for i, (seat, action) in enumerate(traj.decisions):
        if s.terminal:
            raise ReplayDivergenceError(f"seed {traj.seed}: game ended before decision {i}")
        if next_actor(s) != seat:
            raise ReplayDivergenceError(f"seed {traj.seed}: decision {i} expected seat {next_actor(s)}, log has {seat}")
        yield s, seat, action
        try:
            s, _, _ = step(s, seat, action)
        except engine.IllegalActionError as exc:
            raise ReplayDivergenceError(f"seed {traj.seed}: decision {i}: {exc}") from None
    if not s.terminal:
        raise ReplayDivergenceError(f"seed {traj.seed}: log ends before the game does")
    if check_scores and tuple(s.rewards) != tuple(traj.final_scores):
        raise ReplayDivergenceError(f"seed {traj.seed}: replayed scores {s.rewards} differ from {traj.final_scores}")


def final_state(traj: DemoTrajectory, check_scores: bool = True) -> GameState:
    last = None
    for last in replay(traj, check_scores):
        pass
    if last is None:
        raise ReplayDivergenceError(f"seed {traj.seed}: empty decision list")
    s, seat, action = last
    return step(s, seat, action)[0]


def replay_to_samples(
    traj: DemoTrajectory,
    params: PolicyParams,
    gamma: float = 1.0,
    lam: float = 0.95,
    seats: Optional[Iterable[int]] = None,
    version: int = 0,
) -> list[TrainSample]:
    """Regenerate training samples for the winner's decisions (or ``seats``).

    Values and behavior log-probs both come from the current parameters.
    """
    if seats is None:
        if traj.winner is None:
            return []
        seats = (traj.winner,)
    seats = set(seats)
    picked = []
    for s, seat, action in replay(traj):
        if seat in seats:
            obs = encode(s, seat)
            picked.append((seat, obs.features, obs.legal_mask, action))
    if not picked:
        return []
    x = np.stack([p[1] for p in picked])
    masks = np.stack([p[2] for p in picked])
    fwd = forward_batch(params, x, masks)
    actions = np.array([p[3] for p in picked])
    logp = np.log(fwd.probs[np.arange(len(picked)), actions])
    per_seat = {seat: [] for seat in seats}
    for i, (seat, f, m, a) in enumerate(picked):
        per_seat[seat].append(Decision(f, m, int(a), float(logp[i]), float(fwd.values[i])))
    out = []
    for seat in sorted(per_seat):
        out.extend(seat_samples(per_seat[seat], traj.final_scores[seat], Source.DEMO, gamma, lam, version))
    return out


def validate(collection: DemoCollection) -> DemoCollection:
    """Drop trajectories whose replay diverges, with a warning for each."""
    kept = []
    for traj in collection:
        try:
            for _ in replay(traj):
                pass
        except ReplayDivergenceError as exc:
            log.warning("dropping demo trajectory: %s", exc)
            continue
        kept.append(traj)
    return DemoCollection(kept, collection.winner_only)


def split_holdout(collection: DemoCollection, n_holdout: int, seed: int = 0) -> tuple[DemoCollection, DemoCollection]:
    n = len(collection)
    if not 0 <= n_holdout < n:
        raise ValueError(f"need 0 <= n_holdout < {n}")
    order = np.random.default_rng(seed).permutation(n)
    hold = set(order[:n_holdout].tolist())
    train = [t for i, t in enumerate(collection.trajectories) if i not in hold]
    holdout = [t for i, t in enumerate(collection.trajectories) if i in hold]
    return DemoCollection(train, collection.winner_only), DemoCollection(holdout, collection.winner_only)


def record_collection(teacher, n_games: int, seed_base: int = 0, teacher_id: Optional[str] = None,
                      winner_only: bool = True, max_games: Optional[int] = None) -> DemoCollection:
    """Self-play the teacher at all four seats until ``n_games`` trajectories are admitted."""
    teacher_id = teacher_id or getattr(teacher, "name", "teacher")
    out = DemoCollection([], winner_only)
    limit = max_games if max_games is not None else 20 * n_games
    seed = seed_base
    while len(out) < n_games and seed - seed_base < limit:
        out.add(record([teacher] * 4, seed, teacher_id))
        seed += 1
    return out
