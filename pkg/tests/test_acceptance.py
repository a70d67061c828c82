"""Acceptance suite: one test per acceptance criterion, each reported PASS/FAIL in the summary.

Run alone with ``pytest tests/test_acceptance.py -v``.  The style
reproduction criterion trains six students and takes about 35 minutes
on one core.
"""

import time
from types import SimpleNamespace

import numpy as np
import pytest

from mcr_mppo.advantage import EpisodeRollout, expected_advantage, gae, performance, random_mdp, random_policy
from mcr_mppo.bots import make_bot
from mcr_mppo.engine import N_ACTIONS, Phase, encode, legal_action_ids, next_actor, reset, step
from mcr_mppo.experiment import StyleExperiment, run_experiment
from mcr_mppo.metrics import d_action, d_game, one_hot, pattern_distribution
from mcr_mppo.mppo import ConGenThrottle, LearnerConfig, run_training, theorem2_probe
from mcr_mppo.policy import forward, grad_logprob, grad_value, init_params
from mcr_mppo.scoring import FanResult, decompose, score
from mcr_mppo.tiles import parse_tiles, to_counts
from mcr_mppo.trajectories import format_game_log, parse_game_log, record_collection, replay_to_samples

from oracles import as_records, gae_double_sum, oracle_decompositions, random_hand, random_structured_hand

FULL_SET = [4] * 34


def _random_game(seed, rng):
    s = reset(seed)
    log = []
    while not s.terminal:
        seat = next_actor(s)
        opts = legal_action_ids(s, seat)
        a = opts[int(rng.integers(len(opts)))]
        log.append((s.fingerprint(), encode(s, seat).features.tobytes(), seat, a))
        s, _, _ = step(s, seat, a)
    return s, log


@pytest.mark.criterion("engine determinism (1000 games replayed from logs)")
def test_engine_determinism():
    rng = np.random.default_rng(2024)
    for seed in rng.integers(0, 2**63, size=1000):
        seed = int(seed)
        final, trace = _random_game(seed, rng)
        text = format_game_log(SimpleNamespace(seed=seed, decisions=[(t[2], t[3]) for t in trace],
                                               final_scores=final.rewards))
        traj = parse_game_log(text)
        s = reset(traj.seed)
        for (fp, feats, seat, a), (seat2, a2) in zip(trace, traj.decisions):
            assert (seat, a) == (seat2, a2)
            assert s.fingerprint() == fp, f"seed {seed}: state diverged"
            assert encode(s, seat).features.tobytes() == feats, f"seed {seed}: observation diverged"
            s, _, _ = step(s, seat, a)
        assert s.fingerprint() == final.fingerprint() and s.rewards == traj.final_scores


@pytest.mark.criterion("tile conservation and legality (10000 random games)")
def test_tile_conservation_and_legality():
    rng = np.random.default_rng(7)
    violations = []
    for seed in range(10_000):
        s = reset(seed)
        while True:
            if s.tile_multiset() != FULL_SET:
                violations.append((seed, "multiset"))
            for seat in range(4):
                size = sum(s.hands[seat]) + 3 * len(s.melds[seat])
                holding = (s.phase == Phase.AWAIT_DISCARD and s.turn == seat) or (s.terminal and s.winner == seat)
                if size != (14 if holding else 13):
                    violations.append((seed, "hand size"))
            if s.terminal:
                break
            seat = next_actor(s)
            opts = legal_action_ids(s, seat)
            if not opts or any(not 0 <= a < N_ACTIONS for a in opts):
                violations.append((seed, "legal set"))
            s, _, _ = step(s, seat, opts[int(rng.integers(len(opts)))])
        if abs(sum(s.rewards)) > 1e-12 or (s.winner is None and any(s.rewards)):
            violations.append((seed, "rewards"))
        if s.winner is not None and s.fan.total < 8:
            violations.append((seed, "cheap win"))
    assert not violations, f"{len(violations)} violations, first {violations[:3]}"


FIGURE_HANDS = {
    "GWP": ("1C2C3C4B5B6B7D8D9DWEWEWEDRDR", None),
    "SevenPairs": ("2C2C3C3C4C4C6B6B7B7B9B9B1D1D", "SevenPairs"),
    "ThirteenOrphans": ("1C9C1B9B1D9DWEWSWWWNDRDGDWDW", "ThirteenOrphans"),
    "KnittedStraight": ("1C4C7C2B5B8B3D6D9D5C6C7CWEWE", "KnittedStraight"),
    "LesserHonorsAndKnittedTiles": ("1C4C7C2B5B8B3D6DWEWSWWWNDRDG", "LesserHonorsAndKnittedTiles"),
}


@pytest.mark.criterion("scoring oracle equivalence (1e5 hands and fixtures)")
def test_scoring_oracle_equivalence():
    rng = np.random.default_rng(11)
    mismatches = 0
    for i in range(100_000):
        hand = random_hand(rng) if i % 2 else random_structured_hand(rng)
        if as_records(decompose(hand)) != oracle_decompositions(hand):
            mismatches += 1
    assert mismatches == 0
    for name, (text, pattern) in FIGURE_HANDS.items():
        hand = to_counts(parse_tiles(text))
        assert decompose(hand), name
        res = score(hand)
        if pattern is None:
            assert any(len(d.melds) == 4 for d in decompose(hand))
        else:
            assert pattern in res.names(), name


@pytest.mark.criterion("GAE recursion vs double sum (1000 rollouts)")
def test_gae_correctness():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        T = int(rng.integers(1, 80))
        r, v = rng.normal(size=T), rng.normal(size=T)
        gamma, lam = float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.0, 1.0))
        adv, _ = gae(EpisodeRollout(r, v), gamma, lam)
        assert np.max(np.abs(adv - gae_double_sum(r, v, gamma, lam))) < 1e-10
        adv0, _ = gae(EpisodeRollout(r, v), gamma, 0.0)
        assert np.max(np.abs(adv0 - (r + gamma * np.append(v[1:], 0.0) - v))) < 1e-10
        adv1, _ = gae(EpisodeRollout(r, v), gamma, 1.0)
        mc = np.array([sum(gamma ** (k - t) * r[k] for k in range(t, T)) for t in range(T)])
        assert np.max(np.abs(adv1 - (mc - v))) < 1e-10


@pytest.mark.criterion("performance difference identity on 20 MDPs")
def test_performance_difference_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        mdp = random_mdp(rng, 6, 3, gamma=0.9)
        pi, pi_new = random_policy(rng, 6, 3), random_policy(rng, 6, 3)
        worst = max(worst, abs(performance(mdp, pi_new) - performance(mdp, pi) - expected_advantage(mdp, pi_new, pi)))
    assert worst < 1e-8, worst


@pytest.fixture(scope="module")
def teacher_demos():
    return record_collection(make_bot("balanced"), 12, seed_base=70_000)


@pytest.mark.criterion("offline update probe: demo-action probability rises every step")
def test_offline_probe_monotone(teacher_demos):
    params = init_params(seed=4, actor_hidden=(64, 32))
    pairs = []
    for traj in teacher_demos:
        samples = replay_to_samples(traj, params)
        pairs += [(s.features, s.legal_mask, s.action, s.advantage) for s in samples
                  if s.advantage > 0 and s.legal_mask.sum() > 1]
    pairs = pairs[::max(1, len(pairs) // 20)][:20]
    assert len(pairs) >= 10
    for pair in pairs:
        series = theorem2_probe(params, [pair], steps=100, lr=0.01)[:, 0]
        assert np.all(np.diff(series) > 0), "single-pair probability fell"
    joint = theorem2_probe(params, pairs, steps=100, lr=0.01)
    assert np.all(np.diff(joint.mean(axis=1)) > 0)


def _fd(params, f, h=1e-6):
    base = params.flat()
    out = np.zeros_like(base)
    for i in range(base.size):
        e = base.copy()
        e[i] += h
        up = f(params.with_flat(e))
        e[i] -= 2 * h
        out[i] = (up - f(params.with_flat(e))) / (2 * h)
    return out


@pytest.mark.criterion("analytic gradients vs central differences (24 configurations)")
def test_gradient_checks():
    rng = np.random.default_rng(9)
    worst = 0.0
    for cfg in range(24):
        if cfg < 2:
            # real observations at full feature width
            s = reset(cfg)
            obs = encode(s, next_actor(s))
            dim, hidden = obs.features.size, (2,)
        else:
            dim = int(rng.integers(3, 9))
            hidden = tuple(int(h) for h in rng.integers(2, 7, size=int(rng.integers(1, 3))))
            mask = np.zeros(N_ACTIONS, dtype=bool)
            mask[rng.choice(N_ACTIONS, size=int(rng.integers(2, N_ACTIONS)), replace=False)] = True
            obs = SimpleNamespace(features=rng.normal(size=dim), legal_mask=mask)
        params = init_params(seed=cfg, actor_hidden=hidden, input_dim=dim, out_scale=1.0)
        for k in params.arrays:
            params.arrays[k] += 0.1 * rng.normal(size=params.arrays[k].shape)
        a = int(rng.choice(np.flatnonzero(obs.legal_mask)))
        for analytic, f in (
            (grad_logprob(params, obs, a), lambda p: float(np.log(forward(p, obs)[0][a]))),
            (grad_value(params, obs), lambda p: forward(p, obs)[1]),
        ):
            flat = np.concatenate([analytic[k].ravel() for k in params.arrays])
            num = _fd(params, f)
            err = np.linalg.norm(flat - num) / max(np.linalg.norm(flat), np.linalg.norm(num), 1e-12)
            worst = max(worst, err)
    assert worst < 1e-4, worst


@pytest.mark.criterion("zero demo actors reproduce PPO bitwise (50 steps)")
def test_ppo_reduction(teacher_demos):
    base = dict(batch_size=64, hidden=(32,), self_play_actor_count=4, max_updates=50, seed=21, learning_rate=1e-3)
    mppo = run_training(LearnerConfig(algorithm="mppo", demo_actor_count=0, **base))
    ppo = run_training(LearnerConfig(algorithm="ppo", demo_actor_count=10, **base), demos=teacher_demos)
    keys = ("loss", "policy_loss", "value_loss", "entropy", "clip_fraction", "approx_kl")
    a = [tuple(r[k] for k in keys) for r in mppo.history]
    b = [tuple(r[k] for k in keys) for r in ppo.history]
    assert len(a) == 50 and a == b
    assert np.array(a).tobytes() == np.array(b).tobytes()


@pytest.mark.criterion("metric bounds, symmetry, identity, one-hot closed form")
def test_metric_properties():
    rng = np.random.default_rng(13)
    for _ in range(500):
        n, k = int(rng.integers(1, 40)), int(rng.integers(2, 42))
        p = rng.random((n, k)) ** 2
        q = rng.random((n, k)) ** 2
        p /= p.sum(axis=1, keepdims=True)
        q /= q.sum(axis=1, keepdims=True)
        d = d_action(p, q)
        assert 0.0 <= d <= 1.0 and d == d_action(q, p) and d_action(p, p) == 0.0
        acts = rng.integers(0, k, size=n)
        assert abs(d_action(p, one_hot(acts, k)) - (1 - p[np.arange(n), acts].mean())) < 1e-12
    assert d_action(one_hot([0, 1], 3), one_hot([1, 2], 3)) == 1.0
    names = ("SevenPairs", "AllPungs", "HalfFlush", "PureStraight", "MixedTripleChow")
    for _ in range(200):
        dists = []
        for _ in range(2):
            res = [None if rng.random() < 0.3 else
                   FanResult(tuple((nm, 1) for nm in rng.choice(names, size=int(rng.integers(1, 3)), replace=False)), 0)
                   for _ in range(int(rng.integers(1, 30)))]
            dists.append(pattern_distribution(res))
        x, y = dists
        assert d_game(x, y) == d_game(y, x) and d_game(x, x) == 0.0 and d_game(x, y) >= 0.0
        assert all(0.0 <= v <= 1.0 for v in x.vector())
    single_a = pattern_distribution([FanResult((("SevenPairs", 24),), 24)])
    single_b = pattern_distribution([FanResult((("AllPungs", 6),), 6)])
    assert d_game(single_a, single_b) == 1.0


@pytest.mark.criterion("con/gen throttle settles in [0.75, 0.80] within 200 steps")
def test_throttle_convergence():
    for rate, batch in [(100, 64), (37, 256), (500, 512), (1000, 64), (250, 128)]:
        th = ConGenThrottle(0.75, 0.80, window=200)
        queued = 0
        for _ in range(200):
            th.record_generated(rate)
            queued += rate
            while queued >= batch and th.allow(batch):
                th.record_consumed(batch)
                queued -= batch
        assert 0.75 - 0.05 <= th.ratio() <= 0.80 + 0.05, (rate, batch, th.ratio())


@pytest.fixture(scope="module")
def style_results():
    t0 = time.monotonic()
    res = run_experiment(StyleExperiment(), seeds=(1, 2, 3), log=print)
    print(f"style experiment took {time.monotonic() - t0:.0f}s")
    return res


@pytest.mark.criterion("style reproduction: MPPO closer to the teacher without losing strength (3 seeds)")
def test_style_reproduction(style_results):
    for row in style_results.rows:
        print(row)
    v = style_results.verdict()
    print(v)
    assert v["d_action_wins"] >= 2, v
    assert v["d_game_wins"] >= 2, v
    assert v["strength_ok"], v


@pytest.mark.criterion("realized demo fraction with 10 demo / 80 self-play actors in [0.04, 0.08]")
def test_realized_beta(style_results, teacher_demos):
    betas = [r["mppo"]["beta"] for r in style_results.rows]
    assert all(0.04 <= b <= 0.08 for b in betas), betas
    # halving and doubling the demo actors moves beta the same way
    base = dict(batch_size=256, hidden=(32,), self_play_actor_count=80, max_updates=100, seed=5)
    measured = {n: run_training(LearnerConfig(demo_actor_count=n, **base), demos=teacher_demos).beta for n in (5, 10, 20)}
    print("beta by demo actors", measured)
    assert measured[5] < measured[10] < measured[20]
    assert 0.04 <= measured[10] <= 0.08
    assert 1.5 <= measured[10] / measured[5] <= 2.7 and 1.5 <= measured[20] / measured[10] <= 2.7
