"""Scaled style-imitation comparison: MPPO and PPO students of one scripted teacher.

Both students start from the same warm-start network (behavior cloning on
mixed-profile tables, so it favors no single teacher) and train with the
same budget and seed.  The MPPO student additionally has demonstration
actors replaying the teacher's winning games.  Each student is then
measured against the teacher on held-out demo states (D_action), on
winning-pattern histograms from its own self-play (D_game), and by
seat-swapped win rate against a fixed reference bot.

    python -m mcr_mppo.experiment --seeds 1 2 3
"""

from __future__ import annotations

import argparse
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bots import PROFILES, make_bot
from .metrics import (
    PolicyBot,
    d_action_vs_teacher,
    d_game,
    demo_histogram,
    evaluate_seatswap,
    pattern_histogram,
    teacher_states,
)
from .mppo import LearnerConfig, behavior_cloning, cloning_dataset, run_training
from .policy import PolicyParams, init_params
from .trajectories import DemoCollection, record, record_collection, split_holdout


@dataclass
class StyleExperiment:
    teacher: str = "claimer"
    reference: str = "balanced"
    demo_games: int = 700
    holdout: int = 100
    demo_seed_base: int = 10_000
    warm_games: int = 500
    warm_seed_base: int = 2_000_000
    warm_epochs: int = 8
    warm_lr: float = 1e-3
    hidden: tuple = (128, 64)
    updates: int = 600
    learning_rate: float = 3e-4
    batch_size: int = 512
    demo_actors: int = 10
    self_play_actors: int = 80
    freeze_steps: int = 20
    d_game_games: int = 1000
    d_game_seed_base: int = 500_000
    eval_seeds: int = 256
    eval_seed_base: int = 900_000
    tolerance: float = 0.02  # allowed win-rate shortfall of MPPO


@dataclass
class ExperimentResult:
    config: StyleExperiment
    rows: list = field(default_factory=list)  # one dict per seed: {"seed", "mppo": {...}, "ppo": {...}}
    warm: Optional[dict] = None

    def verdict(self) -> dict:
        da = sum(r["mppo"]["d_action"] < r["ppo"]["d_action"] for r in self.rows)
        dg = sum(r["mppo"]["d_game"] < r["ppo"]["d_game"] for r in self.rows)
        m = float(np.mean([r["mppo"]["win_rate"] for r in self.rows]))
        p = float(np.mean([r["ppo"]["win_rate"] for r in self.rows]))
        return {"seeds": len(self.rows), "d_action_wins": da, "d_game_wins": dg, "mppo_win_rate": m,
                "ppo_win_rate": p, "strength_ok": m >= p - self.config.tolerance}


def warm_start(cfg: StyleExperiment) -> tuple[PolicyParams, list]:
    """Behavior cloning on tables where every seat draws a random shipped profile."""
    rng = np.random.default_rng(cfg.warm_seed_base)
    names = sorted(PROFILES)
    trajs = []
    for g in range(cfg.warm_games):
        bots = [make_bot(names[int(rng.integers(len(names)))]) for _ in range(4)]
        trajs.append(record(bots, cfg.warm_seed_base + g, "mixed"))
    data = cloning_dataset(trajs)
    return behavior_cloning(init_params(0, cfg.hidden), data, epochs=cfg.warm_epochs, lr=cfg.warm_lr)


def evaluate_student(params: PolicyParams, cfg: StyleExperiment, states, teacher_dist, sample_seed: int = 7) -> dict:
    dist = pattern_histogram([PolicyBot(params, sample_seed)] * 4,
                             range(cfg.d_game_seed_base, cfg.d_game_seed_base + cfg.d_game_games))
    seeds = list(range(cfg.eval_seed_base, cfg.eval_seed_base + cfg.eval_seeds))
    rep = evaluate_seatswap(lambda: PolicyBot(params, sample_seed), lambda: make_bot(cfg.reference), seeds)
    return {
        "d_action": d_action_vs_teacher(params, states),
        "d_game": d_game(dist, teacher_dist),
        "self_play_wins": dist.wins,
        "win_rate": rep.win_rate,
        "top_patterns": {p: round(dist.prob(p), 3) for p in dist.patterns if dist.prob(p) >= 0.05},
    }


def run_experiment(cfg: StyleExperiment, seeds: Sequence[int] = (1, 2, 3), demos: Optional[DemoCollection] = None,
                   init: Optional[PolicyParams] = None, log: Optional[Callable[[str], None]] = None) -> ExperimentResult:
    say = log or (lambda msg: None)
    t0 = time.monotonic()
    if demos is None:
        demos = record_collection(make_bot(cfg.teacher), cfg.demo_games, seed_base=cfg.demo_seed_base,
                                  teacher_id=cfg.teacher)
    train, hold = split_holdout(demos, cfg.holdout, seed=0)
    states = teacher_states(hold.trajectories)
    teacher_dist = demo_histogram(train.trajectories)
    say(f"{len(train)} training demos, {len(states[2])} held-out states ({time.monotonic() - t0:.0f}s)")
    result = ExperimentResult(cfg)
    if init is None:
        init, losses = warm_start(cfg)
        say(f"warm start losses {[round(x, 3) for x in losses]} ({time.monotonic() - t0:.0f}s)")
    result.warm = evaluate_student(init, cfg, states, teacher_dist)
    say(f"warm start: {json.dumps(result.warm)}")
    for seed in seeds:
        row = {"seed": seed}
        for alg in ("mppo", "ppo"):
            lc = LearnerConfig(algorithm=alg, seed=seed, demo_actor_count=cfg.demo_actors,
                               self_play_actor_count=cfg.self_play_actors, batch_size=cfg.batch_size,
                               max_updates=cfg.updates, hidden=cfg.hidden, learning_rate=cfg.learning_rate,
                               policy_freeze_steps=cfg.freeze_steps)
            res = run_training(lc, train, params=init)
            rep = evaluate_student(res.params, cfg, states, teacher_dist, sample_seed=seed)
            rep["beta"] = res.beta
            row[alg] = rep
            say(f"seed {seed} {alg}: {json.dumps(rep)} ({time.monotonic() - t0:.0f}s)")
        result.rows.append(row)
    return result


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--teacher", default=StyleExperiment.teacher)
    p.add_argument("--reference", default=StyleExperiment.reference)
    p.add_argument("--updates", type=int, default=StyleExperiment.updates)
    p.add_argument("--lr", type=float, default=StyleExperiment.learning_rate)
    args = p.parse_args(argv)
    cfg = StyleExperiment(teacher=args.teacher, reference=args.reference, updates=args.updates,
                          learning_rate=args.lr)
    res = run_experiment(cfg, args.seeds, log=lambda m: print(m, flush=True))
    print(json.dumps({"config": asdict(cfg), "rows": res.rows, "verdict": res.verdict()}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
