"""Command-line entry point.

Machine-readable results go to stdout as one JSON object per line; human
messages go to stderr.  Exit codes: 0 success, 1 runtime failure, 2 usage
or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .bots import PROFILES, make_bot
from .config import CONFIG_ENV, ConfigError, RunConfig, load_config
from .metrics import (
    PolicyBot,
    d_action_vs_teacher,
    d_game,
    demo_histogram,
    evaluate_seatswap,
    pattern_histogram,
    teacher_states,
)
from .mppo import behavior_cloning, cloning_dataset, run_training
from .policy import PolicyParams, init_params
from .scoring import NotWinningError, WinContext, score
from .tiles import Meld, MeldKind, format_tiles, parse_tile, parse_tiles, to_counts
from .trajectories import (
    DemoCollection,
    DemoTrajectory,
    ReplayDivergenceError,
    final_state,
    format_game_log,
    parse_game_log,
    record_collection,
    split_holdout,
)

log = logging.getLogger("mcr_mppo")


class UsageError(Exception):
    pass


def emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True), flush=True)


def say(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _agent_factory(spec: str, seed: int = 0, greedy: bool = False):
    """An agent builder from a profile name, ``random`` or a checkpoint path."""
    if spec in PROFILES or spec == "random":
        return lambda: make_bot(spec, seed)
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"{spec!r} is neither a bot profile ({', '.join(sorted(PROFILES))}, random) nor a checkpoint")
    params = PolicyParams.load(path)
    return lambda: PolicyBot(params, seed, greedy, name=path.stem)


# ---------------------------------------------------------------------------
# subcommands


def cmd_record_demos(args) -> int:
    teacher = make_bot(args.teacher) if args.teacher in PROFILES else None
    if teacher is None:
        raise UsageError(f"unknown teacher {args.teacher!r}")
    coll = record_collection(teacher, args.games, args.seed_base, args.teacher, winner_only=not args.keep_draws)
    coll.save(args.out)
    emit({"command": "record-demos", "teacher": args.teacher, "trajectories": len(coll), "out": args.out})
    if len(coll) < args.games:
        say(f"only {len(coll)} of {args.games} requested trajectories were admitted")
        return 1
    return 0


def cmd_inspect_demos(args) -> int:
    coll = DemoCollection.load(args.file, winner_only=False)
    n = len(coll)
    winners = [t.winner for t in coll]
    decided = [w for w in winners if w is not None]
    dist = demo_histogram(coll.trajectories, principal_only=args.principal)
    emit({
        "command": "inspect-demos",
        "trajectories": n,
        "teachers": sorted({t.teacher_id for t in coll}),
        "win_rate": len(decided) / n if n else 0.0,
        "winner_seats": {str(s): decided.count(s) for s in range(4)},
        "mean_decisions": sum(len(t.decisions) for t in coll) / n if n else 0.0,
        "patterns": {p: round(dist.prob(p), 6) for p in dist.patterns},
    })
    return 0


def cmd_replay(args) -> int:
    text = Path(args.log).read_text()
    first = next((ln for ln in text.splitlines() if ln.strip()), "")
    if first.startswith("seed="):
        coll = DemoCollection([parse_game_log(text)], winner_only=False)
    else:
        coll = DemoCollection.load(args.log, winner_only=False)
    bad = 0
    for traj in coll:
        try:
            s = final_state(traj)
        except ReplayDivergenceError as exc:
            say(str(exc))
            bad += 1
            continue
        emit({"command": "replay", "seed": traj.seed, "scores": list(s.rewards), "header_scores": list(traj.final_scores),
              "match": tuple(s.rewards) == tuple(traj.final_scores), "winner": s.winner,
              "fan": None if s.fan is None else s.fan.total})
    return 1 if bad else 0


def _parse_melds(text: Optional[str]) -> tuple:
    if not text:
        return ()
    kinds = {"chow": MeldKind.CHOW, "pung": MeldKind.PUNG, "kong": MeldKind.EXPOSED_KONG,
             "ckong": MeldKind.CONCEALED_KONG}
    out = []
    for tok in text.split(","):
        kind, _, tile = tok.strip().partition(":")
        if kind.lower() not in kinds:
            raise UsageError(f"bad meld {tok!r}; use chow:1C, pung:DR, kong:WE or ckong:5B")
        mk = kinds[kind.lower()]
        try:
            base = parse_tile(tile)
            out.append(Meld(mk, base, None if mk == MeldKind.CONCEALED_KONG else 1))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return tuple(out)


def cmd_score(args) -> int:
    try:
        tiles = parse_tiles(args.hand)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    melds = _parse_melds(args.melds)
    ctx = WinContext(self_drawn=args.self_drawn, last_tile=args.last_tile, seat_wind=args.seat_wind)
    try:
        res = score(to_counts(tiles), melds, ctx)
    except (NotWinningError, ValueError) as exc:
        say(f"not a winning hand: {exc}")
        emit({"command": "score", "hand": format_tiles(tiles), "winning": False})
        return 1
    for name, pts in res.matched:
        say(f"{name:32s} {pts:3d}")
    say(f"{'total':32s} {res.total:3d}{'' if res.is_legal_win else '  (below the 8 point minimum)'}")
    emit({"command": "score", "hand": format_tiles(tiles), "winning": True, "patterns": dict(res.matched),
          "total": res.total, "legal": res.is_legal_win})
    return 0


def cmd_bot_duel(args) -> int:
    names = [p.strip() for p in args.profiles.split(",")]
    if len(names) != 4:
        raise UsageError("--profiles needs exactly four comma-separated names")
    bots = []
    for i, n in enumerate(names):
        if n not in PROFILES and n != "random":
            raise UsageError(f"unknown profile {n!r}")
        bots.append(make_bot(n, args.seed_base + i))
    from .trajectories import play_game

    wins = [0, 0, 0, 0]
    per_seat = [[], [], [], []]
    draws = 0
    log_dir = Path(args.logs) if args.logs else None
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
    for seed in range(args.seed_base, args.seed_base + args.games):
        final, decisions = play_game(bots, seed)
        if log_dir is not None:
            traj = DemoTrajectory(seed, tuple(decisions), tuple(final.rewards), ",".join(names))
            (log_dir / f"game_{seed}.log").write_text(format_game_log(traj))
        if final.winner is None:
            draws += 1
            continue
        wins[final.winner] += 1
        per_seat[final.winner].append(final.fan)
    from .metrics import pattern_distribution

    for seat, name in enumerate(names):
        dist = pattern_distribution(per_seat[seat], games=args.games)
        emit({"command": "bot-duel", "seat": seat, "profile": name, "wins": wins[seat],
              "win_rate": wins[seat] / args.games,
              "patterns": {p: round(dist.prob(p), 6) for p in dist.patterns if dist.counts.get(p)}})
    emit({"command": "bot-duel", "games": args.games, "draws": draws})
    return 0


def cmd_eval(args) -> int:
    seeds = list(range(args.seed_base, args.seed_base + args.seeds))
    rep = evaluate_seatswap(_agent_factory(args.x, 1, args.greedy), _agent_factory(args.y, 2, args.greedy), seeds)
    lo, hi = rep.ci95()
    emit({"command": "eval", "x": args.x, "y": args.y, "games": rep.games, "win_rate": rep.win_rate,
          "ci95": [lo, hi], "avg_score": rep.avg_score, "x_wins": rep.x_wins, "y_wins": rep.y_wins,
          "draws": rep.draws, "seat_swapped": rep.seat_swapped})
    return 0


def cmd_metrics(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    student = PolicyParams.load(args.student)
    rows = []
    if args.which == "daction":
        if not args.demos:
            raise UsageError("daction needs --demos")
        coll = DemoCollection.load(args.demos)
        holdout = coll
        if args.holdout:
            _, holdout = split_holdout(coll, args.holdout, args.split_seed)
        value = d_action_vs_teacher(student, teacher_states(holdout.trajectories))
        rec = {"command": "metrics", "metric": "d_action", "value": value, "states_from": len(holdout)}
    else:
        n = args.seeds or cfg.metrics.d_game_seeds
        seeds = range(cfg.metrics.seed_base, cfg.metrics.seed_base + n)
        principal = args.principal or cfg.metrics.principal_only
        if args.demos:
            teacher = demo_histogram(DemoCollection.load(args.demos).trajectories, principal)
        else:
            if args.teacher not in PROFILES:
                raise UsageError("dgame needs --teacher PROFILE or --demos FILE")
            teacher = pattern_histogram([make_bot(args.teacher)] * 4, seeds, principal)
        stud = pattern_histogram([PolicyBot(student, args.sample_seed)] * 4, seeds, principal)
        value = d_game(stud, teacher)
        rec = {"command": "metrics", "metric": "d_game", "value": value, "student_wins": stud.wins,
               "teacher_wins": teacher.wins, "games": n}
    emit(rec)
    rows.append((0, rec["metric"], rec["value"]))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "metric", "value"])
            w.writerows(rows)
    return 0


def cmd_train(args) -> int:
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = load_config(path) if path else RunConfig()
    if args.demos:
        cfg.train.demos = args.demos
    if args.out:
        cfg.train.out = args.out
    if args.bc_epochs is not None:
        cfg.train.bc_epochs = args.bc_epochs
    if args.init:
        cfg.train.init = args.init
    emit({"config": cfg.to_dict()})
    lc = cfg.learner
    demos = DemoCollection.load(cfg.train.demos) if cfg.train.demos else None
    if lc.algorithm == "mppo" and lc.demo_actor_count > 0 and demos is None:
        raise UsageError("mppo with demo actors needs demos (--demos or [train].demos)")
    params = PolicyParams.load(cfg.train.init) if cfg.train.init else init_params(lc.seed, lc.hidden)
    if cfg.train.bc_epochs:
        if demos is None:
            raise UsageError("behavior cloning needs demos")
        data = cloning_dataset(demos.trajectories, cfg.train.bc_seats)
        params, losses = behavior_cloning(params, data, cfg.train.bc_epochs, cfg.train.bc_lr, seed=lc.seed)
        for i, loss in enumerate(losses):
            emit({"bc_epoch": i + 1, "bc_loss": loss})
    res = run_training(lc, demos, params, out_dir=cfg.train.out, on_record=emit)
    emit({"command": "train", "updates": len(res.history), "beta": res.beta, "generated": res.generated,
          "consumed": res.consumed, "checkpoints": res.checkpoints})
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcr-mppo", description="MCR Mahjong engine, teacher bots and mixed PPO training")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("record-demos", help="record winner-filtered teacher self-play")
    s.add_argument("--teacher", required=True)
    s.add_argument("--games", type=int, required=True, help="trajectories to admit")
    s.add_argument("--out", required=True)
    s.add_argument("--seed-base", type=int, default=0)
    s.add_argument("--keep-draws", action="store_true", help="store every game, not only won ones")
    s.set_defaults(func=cmd_record_demos)

    s = sub.add_parser("inspect-demos", help="summary statistics of a demo file")
    s.add_argument("file")
    s.add_argument("--principal", action="store_true", help="one pattern per win")
    s.set_defaults(func=cmd_inspect_demos)

    s = sub.add_parser("train", help="run MPPO or PPO training")
    s.add_argument("--config")
    s.add_argument("--demos")
    s.add_argument("--out")
    s.add_argument("--init", help="starting checkpoint")
    s.add_argument("--bc-epochs", type=int, help="behavior-cloning epochs before training")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="seat-swapped win rate of X against Y")
    s.add_argument("--x", required=True, help="profile name, random, or checkpoint")
    s.add_argument("--y", required=True)
    s.add_argument("--seeds", type=int, default=256)
    s.add_argument("--seed-base", type=int, default=900_000)
    s.add_argument("--greedy", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("metrics", help="policy distances to a teacher")
    s.add_argument("which", choices=["daction", "dgame"])
    s.add_argument("--student", required=True)
    s.add_argument("--teacher", help="teacher profile (dgame)")
    s.add_argument("--demos", help="teacher demo file")
    s.add_argument("--holdout", type=int, default=0, help="use only a held-out split of this size")
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--seeds", type=int, default=0)
    s.add_argument("--sample-seed", type=int, default=7)
    s.add_argument("--principal", action="store_true")
    s.add_argument("--config")
    s.add_argument("--csv", help="also write step,metric,value rows")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("replay", help="replay a game log or demo file and reprint final scores")
    s.add_argument("--log", required=True)
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("score", help="score a winning hand")
    s.add_argument("--hand", required=True, help='concealed tiles, e.g. "1C9C1B9B1D9DWEWSWWWNDRDGDWDW"')
    s.add_argument("--melds", help="exposed melds, e.g. chow:1C,pung:DR")
    s.add_argument("--self-drawn", action="store_true")
    s.add_argument("--last-tile", action="store_true")
    s.add_argument("--seat-wind", type=int, default=0, choices=range(4))
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("bot-duel", help="four scripted bots over seeded games")
    s.add_argument("--profiles", required=True)
    s.add_argument("--games", type=int, default=100)
    s.add_argument("--seed-base", type=int, default=0)
    s.add_argument("--logs", help="directory for one seed/seat/action game log per game")
    s.set_defaults(func=cmd_bot_duel)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        say(f"mcr-mppo {args.command}: {exc}")
        return 2
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        say(f"mcr-mppo {args.command}: error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
