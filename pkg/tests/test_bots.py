import pytest

from mcr_mppo.bots import PROFILES, RandomBot, ScriptedBot, make_bot
from mcr_mppo.engine import N_KINDS, _turn_options, encode, reset
from mcr_mppo.metrics import d_game, pattern_histogram
from mcr_mppo.tiles import parse_tiles, to_counts
from mcr_mppo.trajectories import play_game

# competence floor and style separation are measured over this many seeded games
GAMES = 2000
COMPETENCE_FLOOR = 0.05


def _discard_state(hand_str, seed=0):
    s = reset(seed)._clone()
    seat = s.turn
    s.hands[seat] = to_counts(parse_tiles(hand_str))
    s.drawn = None
    s.options = {seat: _turn_options(s, seat)}
    return s, seat


def test_forced_action_is_returned():
    s = reset(3)
    seat = s.turn
    obs = encode(s, seat, legal_ids=(5,))
    for name in PROFILES:
        assert make_bot(name).act(obs) == 5
    assert RandomBot(0).act(obs) == 5


def test_decisions_are_deterministic_and_legal():
    for name in PROFILES:
        a, da = play_game([make_bot(name)] * 4, 17)
        b, db = play_game([make_bot(name)] * 4, 17)
        assert da == db and a.rewards == b.rewards
    seen = []

    def check(state, seat, obs, action):
        assert obs.legal_mask[action]
        seen.append(action)

    play_game([make_bot(n) for n in ("balanced", "claimer", "pairs", "random")], 4, on_decision=check)
    assert seen


def test_pairs_seeker_keeps_pairs():
    s, seat = _discard_state("1C1C4C4C7C7C2B2B5B5B8B8B3DWE")
    obs = encode(s, seat)
    action = make_bot("pairs").act(obs)
    assert action in (obs.legal_ids) and action < N_KINDS
    assert obs.hand[action] % 2 == 1
    # during real games too: with six or more pairs concealed, the discard never breaks one
    checked = 0

    def check(state, seat, obs, action):
        nonlocal checked
        hand = obs.hand
        if seat != 0 or action >= N_KINDS or any(m is not None for m in obs.melds[seat]):
            return
        if sum(c // 2 for c in hand) >= 6 and any(hand[k] % 2 for k in obs.legal_ids if k < N_KINDS):
            assert hand[action] % 2 == 1
            checked += 1

    pairs = make_bot("pairs")
    for seed in range(40):
        play_game([pairs, make_bot("balanced"), make_bot("claimer"), RandomBot(seed)], seed, on_decision=check)
    assert checked > 0


def test_unknown_profile():
    with pytest.raises(KeyError):
        make_bot("nobody")
    assert isinstance(make_bot("balanced"), ScriptedBot)


@pytest.mark.parametrize("name", sorted(PROFILES))
def test_competence_floor_against_random_bots(name):
    bot = make_bot(name)
    wins = 0
    for seed in range(GAMES):
        final, _ = play_game([bot] + [RandomBot(seed * 3 + i) for i in range(3)], seed)
        wins += final.winner == 0
    assert wins / GAMES >= COMPETENCE_FLOOR


@pytest.fixture(scope="module")
def self_play_histograms():
    return {name: pattern_histogram([make_bot(name)] * 4, range(GAMES)) for name in ("pairs", "claimer")}


def test_profiles_have_distinct_styles(self_play_histograms):
    h = self_play_histograms
    assert h["pairs"].wins > 0 and h["claimer"].wins > 0
    assert d_game(h["pairs"], h["claimer"]) > 0.1


def test_pairs_seeker_wins_with_seven_pairs_more_often():
    seeds = range(GAMES // 4)
    pairs = pattern_histogram([make_bot("pairs")] * 4, seeds)
    balanced = pattern_histogram([make_bot("balanced")] * 4, seeds)
    assert pairs.prob("SevenPairs") > balanced.prob("SevenPairs")
