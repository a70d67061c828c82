"""Mixed PPO: self-play and demonstration-replay actors feeding one PPO learner.

Both sample sources go through the same clipped surrogate.  The ratio
denominator is the log-prob the acting parameters assigned when the sample
was generated, for demo samples too (they are re-scored by the current
snapshot during replay).  The demonstration share of each batch is not a
quota: it emerges from how fast each kind of actor produces samples.

Two schedulers are provided.  ``mode="sim"`` interleaves actors on a
virtual clock in one thread and is bit-for-bit deterministic given the
config.  Each episode's duration on that clock is a cost model over the
work it actually performs (engine steps, observation encodes, network row
evaluations); the default unit costs were measured on a single CPU core.
``mode="threads"`` runs actors in worker threads against a bounded queue
and measures real time instead.
"""

from __future__ import annotations

import heapq
import json
import logging
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .advantage import normalize_advantages
from .engine import encode, next_actor, reset, step
from .policy import Adam, PolicyParams, backward, choose, forward, forward_batch, init_params
from .samples import Decision, Source, TrainSample, seat_samples, stack
from .trajectories import DemoCollection, DemoTrajectory, replay

log = logging.getLogger(__name__)


@dataclass
class CostModel:
    """Unit costs (microseconds) for the virtual clock."""

    engine_step: float = 36.0
    encode: float = 205.0
    eval_row: float = 220.0

    def episode_cost(self, steps: int, encodes: int, evals: int) -> float:
        return steps * self.engine_step + encodes * self.encode + evals * self.eval_row


@dataclass
class LearnerConfig:
    clip_epsilon: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    learning_rate: float = 3e-4
    max_grad_norm: Optional[float] = 1.0
    batch_size: int = 512
    epochs_per_batch: int = 1
    demo_actor_count: int = 10
    self_play_actor_count: int = 80
    con_gen_target: tuple = (0.75, 0.80)
    con_gen_window: int = 200
    queue_capacity: Optional[int] = None  # default 2 * batch_size
    policy_freeze_steps: int = 0
    gamma: float = 1.0
    lam: float = 0.95
    adv_norm: bool = True
    algorithm: str = "mppo"  # "mppo" or "ppo"
    seed: int = 0
    hidden: tuple = (256, 128)
    max_updates: Optional[int] = 100
    max_episodes: Optional[int] = None
    max_seconds: Optional[float] = None
    checkpoint_every: int = 0
    mode: str = "sim"  # "sim" or "threads"
    starvation_timeout: float = 30.0
    cost: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        lo, hi = self.con_gen_target
        self.con_gen_target = (float(lo), float(hi))
        self.hidden = tuple(self.hidden)
        if isinstance(self.cost, dict):
            self.cost = CostModel(**self.cost)
        if not self.clip_epsilon > 0:
            raise ValueError("clip_epsilon must be positive")
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("con_gen_target must satisfy 0 <= lo <= hi <= 1")
        if self.demo_actor_count < 0 or self.self_play_actor_count < 0:
            raise ValueError("actor counts must be non-negative")
        if self.demo_actor_count + self.self_play_actor_count == 0:
            raise ValueError("need at least one actor")
        if self.algorithm not in ("mppo", "ppo"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.mode not in ("sim", "threads"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.batch_size < 2 or self.epochs_per_batch < 1:
            raise ValueError("batch_size >= 2 and epochs_per_batch >= 1 required")

    @property
    def capacity(self) -> int:
        return self.queue_capacity or 2 * self.batch_size

    def to_dict(self) -> dict:
        d = asdict(self)
        d["con_gen_target"] = list(self.con_gen_target)
        d["hidden"] = list(self.hidden)
        return d


# ---------------------------------------------------------------------------
# loss


@dataclass(frozen=True)
class LossInfo:
    total: float
    policy: float
    value: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    beta: float


def ppo_loss(batch, params: PolicyParams, config: LearnerConfig, params_k: Optional[PolicyParams] = None,
             adv_norm: Optional[bool] = None) -> tuple[LossInfo, dict]:
    """Clipped-surrogate loss and its analytic gradient.

    ``batch`` is a list of TrainSample or the dict from ``samples.stack``.
    With ``params_k`` the ratio denominator is recomputed from those
    parameters instead of the stored behavior log-probs.  The formula does
    not look at the sample source.
    """
    b = stack(batch) if not isinstance(batch, dict) else batch
    n = len(b["action"])
    if n == 0:
        raise ValueError("empty batch")
    norm = config.adv_norm if adv_norm is None else adv_norm
    adv = normalize_advantages(b["adv"], enabled=norm) if n >= 2 else b["adv"].astype(float)
    fwd = forward_batch(params, b["x"], b["mask"])
    idx = np.arange(n)
    act = b["action"]
    probs = fwd.probs
    with np.errstate(divide="ignore"):
        logp_all = np.where(fwd.masks, np.log(np.where(fwd.masks, probs, 1.0)), 0.0)
    logp = logp_all[idx, act]
    if params_k is not None:
        logp_old = np.log(forward_batch(params_k, b["x"], b["mask"]).probs[idx, act])
    else:
        logp_old = b["logp_old"]
    ratio = np.exp(logp - logp_old)
    eps = config.clip_epsilon
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    surr1 = ratio * adv
    surr2 = clipped * adv
    surr = np.minimum(surr1, surr2)
    policy_loss = -surr.mean()
    entropy_each = -(probs * logp_all).sum(axis=1)
    entropy = entropy_each.mean()
    err = fwd.values - b["target"]
    value_loss = (err ** 2).mean()
    total = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy
    terms = (total, policy_loss, value_loss, entropy)
    if not all(np.isfinite(t) for t in terms):
        raise FloatingPointError(
            f"non-finite loss: total={total} policy={policy_loss} value={value_loss} entropy={entropy}; "
            f"ratio range [{ratio.min()}, {ratio.max()}], adv range [{adv.min()}, {adv.max()}]"
        )
    # d(-surr)/dlogp is -ratio*A where the unclipped branch is the minimum
    active = surr1 <= surr2
    g = np.where(active, -surr1, 0.0) / n
    onehot = np.zeros_like(probs)
    onehot[idx, act] = 1.0
    dlogits = g[:, None] * (onehot - probs)
    dlogits += (config.entropy_coef / n) * probs * (logp_all + entropy_each[:, None])
    dvalues = (2.0 * config.value_coef / n) * err
    grads = backward(params, fwd, dlogits=dlogits, dvalues=dvalues)
    src = b["source"]
    info = LossInfo(
        float(total),
        float(policy_loss),
        float(value_loss),
        float(entropy),
        float(np.mean(np.abs(ratio - 1.0) > eps)),
        float(np.mean(logp_old - logp)),
        float(np.mean(src == int(Source.DEMO))),
    )
    return info, grads


# ---------------------------------------------------------------------------
# plumbing: throttle, queue, snapshots


class ConGenThrottle:
    """Keeps consumed/generated samples over a sliding window inside a band.

    The window is the last ``window`` generation events; consumption is
    credited to the current event.  An update of ``n`` samples is allowed
    only if it keeps the windowed ratio at or below the upper bound.
    """

    def __init__(self, lo: float = 0.75, hi: float = 0.80, window: int = 200):
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("need 0 <= lo <= hi <= 1")
        self.lo, self.hi = lo, hi
        self.buckets = deque(maxlen=window)
        self.generated = 0
        self.consumed = 0

    def _sums(self) -> tuple[int, int]:
        g = sum(b[0] for b in self.buckets)
        c = sum(b[1] for b in self.buckets)
        return g, c

    def record_generated(self, n: int) -> None:
        self.buckets.append([n, 0])
        self.generated += n

    def record_consumed(self, n: int) -> None:
        if not self.buckets:
            self.buckets.append([0, 0])
        self.buckets[-1][1] += n
        self.consumed += n

    def ratio(self) -> float:
        g, c = self._sums()
        return c / g if g else 0.0

    def allow(self, n: int) -> bool:
        g, c = self._sums()
        return g > 0 and c + n <= self.hi * g

    def starving(self) -> bool:
        return self.ratio() < self.lo


class SampleQueue:
    """Bounded FIFO of samples; the oldest samples are dropped when full."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items = deque()
        self.dropped = 0
        self.lock = threading.Lock()
        self.not_empty = threading.Condition(self.lock)

    def put_many(self, samples: Sequence[TrainSample]) -> None:
        with self.lock:
            self.items.extend(samples)
            while len(self.items) > self.capacity:
                self.items.popleft()
                self.dropped += 1
            self.not_empty.notify_all()

    def __len__(self) -> int:
        return len(self.items)

    def take(self, n: int) -> list[TrainSample]:
        with self.lock:
            if len(self.items) < n:
                raise ValueError("not enough samples queued")
            return [self.items.popleft() for _ in range(n)]


class SnapshotStore:
    """Learner publishes immutable parameter snapshots; actors acquire the latest."""

    def __init__(self, params: PolicyParams):
        self.lock = threading.Lock()
        self._params = params.copy()
        self._version = 0

    def publish(self, params: PolicyParams) -> int:
        snap = params.copy()
        with self.lock:
            self._version += 1
            snap.version = self._version
            self._params = snap
            return self._version

    def acquire(self) -> tuple[PolicyParams, int]:
        with self.lock:
            return self._params, self._version


# ---------------------------------------------------------------------------
# actors


@dataclass
class EpisodeResult:
    samples: list
    source: Source
    steps: int
    encodes: int
    evals: int
    version: int
    winner: Optional[int]
    rewards: tuple


class SelfPlayActor:
    """Plays all four seats with the current snapshot; keeps every seat's samples."""

    source = Source.SELF_PLAY

    def __init__(self, actor_id: int, seed: int):
        self.actor_id = actor_id
        self.rng = np.random.default_rng([seed, actor_id, 0])
        self.last_version = -1

    def run_episode(self, params: PolicyParams, version: int, config: LearnerConfig) -> EpisodeResult:
        if version < self.last_version:
            raise RuntimeError("snapshot version went backwards")
        self.last_version = version
        game_seed = int(self.rng.integers(0, 2 ** 63))
        s = reset(game_seed)
        per_seat = [[], [], [], []]
        steps = 0
        while not s.terminal:
            seat = next_actor(s)
            obs = encode(s, seat)
            probs, value, _ = forward(params, obs)
            action, logp = choose(probs, self.rng)
            per_seat[seat].append(Decision(obs.features, obs.legal_mask, action, logp, value))
            s, _, _ = step(s, seat, action)
            steps += 1
        samples = []
        for seat in range(4):
            samples.extend(seat_samples(per_seat[seat], s.rewards[seat], Source.SELF_PLAY,
                                        config.gamma, config.lam, version))
        return EpisodeResult(samples, Source.SELF_PLAY, steps, steps, steps, version, s.winner, s.rewards)


class DemoActor:
    """Re-executes stored demonstrations from their seeds.

    Every step is replayed and encoded; the network is evaluated only on
    the winner's decisions, which are the only ones kept.
    """

    source = Source.DEMO

    def __init__(self, actor_id: int, seed: int, demos: DemoCollection):
        if not len(demos):
            raise ValueError("demo actor needs a nonempty collection")
        self.actor_id = actor_id
        self.demos = demos
        self.rng = np.random.default_rng([seed, actor_id, 1])
        self.last_version = -1

    def run_episode(self, params: PolicyParams, version: int, config: LearnerConfig) -> EpisodeResult:
        if version < self.last_version:
            raise RuntimeError("snapshot version went backwards")
        self.last_version = version
        traj: DemoTrajectory = self.demos.trajectories[int(self.rng.integers(len(self.demos)))]
        samples = demo_samples(traj, params, config, version)
        n = len(traj.decisions)
        return EpisodeResult(samples, Source.DEMO, n, n, len(samples), version, traj.winner, traj.final_scores)


def demo_samples(traj: DemoTrajectory, params: PolicyParams, config: LearnerConfig, version: int = 0) -> list:
    winner = traj.winner
    if winner is None:
        return []
    kept = []
    for s, seat, action in replay(traj):
        obs = encode(s, seat)
        if seat == winner:
            kept.append((obs.features, obs.legal_mask, action))
    if not kept:
        return []
    fwd = forward_batch(params, np.stack([k[0] for k in kept]), np.stack([k[1] for k in kept]))
    acts = np.array([k[2] for k in kept])
    logp = np.log(fwd.probs[np.arange(len(kept)), acts])
    decisions = [Decision(f, m, int(a), float(lp), float(v))
                 for (f, m, a), lp, v in zip(kept, logp, fwd.values)]
    return seat_samples(decisions, traj.final_scores[winner], Source.DEMO, config.gamma, config.lam, version)


# ---------------------------------------------------------------------------
# learner


@dataclass
class TrainingResult:
    params: PolicyParams
    history: list
    checkpoints: list
    consumed: dict
    generated: dict
    dropped: int

    @property
    def beta(self) -> float:
        total = sum(self.consumed.values())
        return self.consumed.get("demo", 0) / total if total else 0.0


class Learner:
    def __init__(self, params: PolicyParams, config: LearnerConfig):
        self.params = params.copy()
        self.config = config
        self.opt = Adam(self.params, lr=config.learning_rate, max_grad_norm=config.max_grad_norm)
        self.steps = 0

    def update(self, batch: Sequence[TrainSample]) -> LossInfo:
        stacked = stack(batch)
        stacked["adv"] = normalize_advantages(stacked["adv"], enabled=self.config.adv_norm)
        frozen = self.steps < self.config.policy_freeze_steps
        info = None
        for _ in range(self.config.epochs_per_batch):
            info, grads = ppo_loss(stacked, self.params, self.config, adv_norm=False)
            self.opt.step(self.params, grads, only="c" if frozen else None)
        if not self.params.is_finite():
            raise FloatingPointError("parameters became non-finite")
        self.steps += 1
        return info


def _make_actors(config: LearnerConfig, demos: Optional[DemoCollection]) -> list:
    actors = [SelfPlayActor(i, config.seed) for i in range(config.self_play_actor_count)]
    if config.algorithm == "mppo" and config.demo_actor_count > 0:
        if demos is None or not len(demos):
            raise ValueError("demo actors need a nonempty demo collection")
        base = config.self_play_actor_count
        actors += [DemoActor(base + i, config.seed, demos) for i in range(config.demo_actor_count)]
    return actors


def run_training(
    config: LearnerConfig,
    demos: Optional[DemoCollection] = None,
    params: Optional[PolicyParams] = None,
    out_dir=None,
    on_record: Optional[Callable[[dict], None]] = None,
) -> TrainingResult:
    """Train until the first of max_updates / max_episodes / max_seconds."""
    if params is None:
        params = init_params(config.seed, config.hidden)
    if config.mode == "threads":
        return _run_threads(config, demos, params, out_dir, on_record)
    return _run_sim(config, demos, params, out_dir, on_record)


class _Run:
    """State shared by both schedulers."""

    def __init__(self, config, params, out_dir, on_record):
        self.config = config
        self.learner = Learner(params, config)
        self.store = SnapshotStore(params)
        self.queue = SampleQueue(config.capacity)
        self.throttle = ConGenThrottle(*config.con_gen_target, window=config.con_gen_window)
        self.history = []
        self.checkpoints = []
        self.generated = {"self_play": 0, "demo": 0}
        self.consumed = {"self_play": 0, "demo": 0}
        self.episodes = {"self_play": 0, "demo": 0}
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.on_record = on_record
        self.t0 = time.monotonic()
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    def done(self) -> bool:
        c = self.config
        if c.max_updates is not None and self.learner.steps >= c.max_updates:
            return True
        if c.max_episodes is not None and sum(self.episodes.values()) >= c.max_episodes:
            return True
        if c.max_seconds is not None and time.monotonic() - self.t0 >= c.max_seconds:
            return True
        return False

    def add_episode(self, res: EpisodeResult) -> None:
        key = "demo" if res.source == Source.DEMO else "self_play"
        self.episodes[key] += 1
        self.generated[key] += len(res.samples)
        self.throttle.record_generated(len(res.samples))
        self.queue.put_many(res.samples)

    def try_update(self, clock: float) -> bool:
        b = self.config.batch_size
        if len(self.queue) < b or not self.throttle.allow(b) or self.done():
            return False
        batch = self.queue.take(b)
        self.throttle.record_consumed(b)
        n_demo = sum(1 for s in batch if s.source == Source.DEMO)
        self.consumed["demo"] += n_demo
        self.consumed["self_play"] += b - n_demo
        info = self.learner.update(batch)
        version = self.store.publish(self.learner.params)
        total = sum(self.consumed.values())
        rec = {
            "step": self.learner.steps,
            "version": version,
            "loss": info.total,
            "policy_loss": info.policy,
            "value_loss": info.value,
            "entropy": info.entropy,
            "clip_fraction": info.clip_fraction,
            "approx_kl": info.approx_kl,
            "beta_batch": info.beta,
            "beta": self.consumed["demo"] / total,
            "con_gen": self.throttle.ratio(),
            "episodes_self_play": self.episodes["self_play"],
            "episodes_demo": self.episodes["demo"],
            "dropped": self.queue.dropped,
            "clock": clock,
            "policy_frozen": self.learner.steps <= self.config.policy_freeze_steps,
        }
        self.history.append(rec)
        if self.on_record is not None:
            self.on_record(rec)
        every = self.config.checkpoint_every
        if self.out_dir is not None and every and self.learner.steps % every == 0:
            path = self.out_dir / f"ckpt_{self.learner.steps:06d}.bin"
            self.learner.params.save(path)
            self.checkpoints.append(str(path))
        return True

    def result(self) -> TrainingResult:
        if self.out_dir is not None:
            path = self.out_dir / "final.bin"
            self.learner.params.save(path)
            self.checkpoints.append(str(path))
        return TrainingResult(self.learner.params, self.history, self.checkpoints, dict(self.consumed),
                              dict(self.generated), self.queue.dropped)


def _run_sim(config, demos, params, out_dir, on_record) -> TrainingResult:
    run = _Run(config, params, out_dir, on_record)
    actors = _make_actors(config, demos)
    # events: (time, order, actor index, pending result or None)
    events = [(0.0, i, i, None) for i in range(len(actors))]
    heapq.heapify(events)
    order = len(actors)
    while not run.done():
        clock, _, idx, pending = heapq.heappop(events)
        actor = actors[idx]
        if pending is not None:
            run.add_episode(pending)
            while run.try_update(clock):
                pass
            pending = None
            if run.done():
                break
        snap, version = run.store.acquire()
        res = actor.run_episode(snap, version, config)
        cost = config.cost.episode_cost(res.steps, res.encodes, res.evals)
        heapq.heappush(events, (clock + cost, order, idx, res))
        order += 1
    return run.result()


def _run_threads(config, demos, params, out_dir, on_record) -> TrainingResult:
    run = _Run(config, params, out_dir, on_record)
    actors = _make_actors(config, demos)
    results = deque()
    cond = threading.Condition()
    stop = threading.Event()
    errors = []

    def worker(mine):
        try:
            while not stop.is_set():
                for actor in mine:
                    if stop.is_set():
                        return
                    snap, version = run.store.acquire()
                    res = actor.run_episode(snap, version, config)
                    with cond:
                        results.append(res)
                        cond.notify()
        except Exception as exc:  # surfaced to the learner thread
            errors.append(exc)
            with cond:
                cond.notify()

    n_workers = max(1, min(len(actors), 4))
    threads = [threading.Thread(target=worker, args=(actors[i::n_workers],), daemon=True) for i in range(n_workers)]
    for t in threads:
        t.start()
    last_progress = time.monotonic()
    try:
        while not run.done():
            with cond:
                if not results and not errors:
                    cond.wait(timeout=0.5)
                fresh = list(results)
                results.clear()
            if errors:
                raise errors[0]
            for res in fresh:
                run.add_episode(res)
            if run.try_update(time.monotonic() - run.t0):
                last_progress = time.monotonic()
                while run.try_update(time.monotonic() - run.t0):
                    pass
            elif time.monotonic() - last_progress > config.starvation_timeout:
                log.warning("learner starved for %.1fs; waiting for samples", config.starvation_timeout)
                last_progress = time.monotonic()
    finally:
        stop.set()
        for t in threads:
            t.join(timeout=60)
    return run.result()


# ---------------------------------------------------------------------------
# behavior cloning warm start


def cloning_dataset(trajectories: Sequence[DemoTrajectory], seats: str = "all") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Features (float32), masks and teacher actions from replayed demos."""
    xs, ms, acts = [], [], []
    for traj in trajectories:
        keep = None if seats == "all" else traj.winner
        for s, seat, action in replay(traj):
            if keep is not None and seat != keep:
                continue
            obs = encode(s, seat)
            if len(obs.legal_ids) < 2:
                continue
            xs.append(obs.features.astype(np.float32))
            ms.append(obs.legal_mask)
            acts.append(action)
    if not xs:
        raise ValueError("no decisions to clone")
    return np.stack(xs), np.stack(ms), np.array(acts, dtype=np.int64)


def behavior_cloning(params: PolicyParams, data, epochs: int = 3, lr: float = 1e-3, batch_size: int = 256,
                     seed: int = 0) -> tuple[PolicyParams, list[float]]:
    """Cross-entropy fit of the actor to teacher actions.  The critic is untouched."""
    x, masks, acts = data
    params = params.copy()
    opt = Adam(params, lr=lr, max_grad_norm=None)
    rng = np.random.default_rng(seed)
    losses = []
    n = len(acts)
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            fwd = forward_batch(params, x[idx].astype(float), masks[idx])
            k = len(idx)
            p = fwd.probs[np.arange(k), acts[idx]]
            total += float(-np.log(p).sum())
            d = fwd.probs.copy()
            d[np.arange(k), acts[idx]] -= 1.0
            grads = backward(params, fwd, dlogits=d / k)
            opt.step(params, grads, only="a")
        losses.append(total / n)
    return params, losses


# ---------------------------------------------------------------------------
# offline update probe


def theorem2_probe(params: PolicyParams, pairs: Sequence[tuple], steps: int = 100, lr: float = 0.01) -> np.ndarray:
    """Unclipped offline updates on fixed (features, mask, action, advantage) pairs.

    Each step is plain gradient ascent on mean_i A_i log pi(a_i | s_i) over
    the actor parameters.  Returns pi(a_i | s_i) before every step and after
    the last one, shape (steps + 1, len(pairs)).
    """
    params = params.copy()
    x = np.stack([p[0] for p in pairs]).astype(float)
    masks = np.stack([p[1] for p in pairs])
    acts = np.array([p[2] for p in pairs])
    adv = np.array([p[3] for p in pairs], dtype=float)
    n = len(pairs)
    idx = np.arange(n)
    out = np.empty((steps + 1, n))
    for t in range(steps + 1):
        fwd = forward_batch(params, x, masks)
        out[t] = fwd.probs[idx, acts]
        if t == steps:
            break
        onehot = np.zeros_like(fwd.probs)
        onehot[idx, acts] = 1.0
        # gradient of the objective w.r.t. logits; descend on its negative
        dlogits = -(adv / n)[:, None] * (onehot - fwd.probs)
        grads = backward(params, fwd, dlogits=dlogits)
        for k in params.arrays:
            if k.startswith("a"):
                params.arrays[k] -= lr * grads[k]
    return out


def write_history(history: Sequence[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in history:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
