import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcr_mppo.scoring import (
    EXCLUSIONS,
    MAJOR_PATTERNS,
    MIN_FAN,
    PATTERN_NAMES,
    POINTS,
    FanResult,
    NotWinningError,
    WinContext,
    decompose,
    evaluate,
    is_winning_shape,
    pattern_signature,
    principal_pattern,
    score,
)
from mcr_mppo.tiles import Meld, MeldKind, parse_tile, parse_tiles, to_counts

from oracles import as_records, oracle_decompositions, random_gwp_hand, random_structured_hand


def H(text):
    return to_counts(parse_tiles(text))


def names(hand, exposed=(), ctx=WinContext()):
    return score(H(hand), tuple(exposed), ctx).names()


def exposed_melds(spec, seat=1):
    out = []
    for part in spec.split():
        kind, tile = part.split(":")
        out.append(Meld(MeldKind[kind.upper()], parse_tile(tile), seat))
    return tuple(out)


DISCARD = WinContext()
SELF = WinContext(self_drawn=True)
FOUR_MELDS = "chow:1C pung:5B chow:6D chow:2B"

# pattern -> (positive case, near-miss negative case); a case is
# (concealed hand, exposed melds, context)
FIXTURES = {
    "ThirteenOrphans": (("1C9C1B9B1D9DWEWSWWWNDRDGDWDW", "", DISCARD),
                        ("1C9C1B9B1D9DWEWSWWWNDRDGDW5C", "", DISCARD)),
    "SevenPairs": (("2C2C3C3C4C4C6B6B7B7B9B9B1D1D", "", DISCARD),
                   ("2C2C3C3C4C4C6B6B6B7B8B9B1D1D", "", DISCARD)),
    "GreaterHonorsAndKnittedTiles": (("1C4C7C2B5B8B3DWEWSWWWNDRDGDW", "", DISCARD),
                                     ("1C4C7C2B5B8B3D6DWEWSWWWNDRDG", "", DISCARD)),
    "LesserHonorsAndKnittedTiles": (("1C4C7C2B5B8B3D6DWEWSWWWNDRDG", "", DISCARD),
                                    ("1C4C7C2B5B8B3D6D9CWEWSWWWNDR", "", DISCARD)),
    "KnittedStraight": (("1C4C7C2B5B8B3D6D9D5C6C7CWEWE", "", DISCARD),
                        ("1C4C7C2B5B8B3D6D8D5C6C7CWEWE", "", DISCARD)),
    "FullFlush": (("1C2C3C4C5C6C7C8C9C2C3C4C5C5C", "", DISCARD),
                  ("1C2C3C4C5C6C7C8C9C2B3B4B5C5C", "", DISCARD)),
    "PureStraight": (("1B2B3B4B5B6B7B8B9B2C3C4C5D5D", "", DISCARD),
                     ("1B2B3B4B5B6B6B7B8B2C3C4C5D5D", "", DISCARD)),
    "MixedStraight": (("1C2C3C4B5B6B7D8D9D2C3C4CWEWE", "", DISCARD),
                      ("1C2C3C4B5B6B7B8B9B2C3C4CWEWE", "", DISCARD)),
    "MixedTripleChow": (("2C3C4C2B3B4B2D3D4D6C7C8C9D9D", "", DISCARD),
                        ("2C3C4C2B3B4B3D4D5D6C7C8C9D9D", "", DISCARD)),
    "LastTileDraw": (("2C3C4C2B3B4B2D3D4D6C7C8C9D9D", "", WinContext(self_drawn=True, last_tile=True)),
                     ("2C3C4C2B3B4B2D3D4D6C7C8C9D9D", "", SELF)),
    "LastTileClaim": (("2C3C4C2B3B4B2D3D4D6C7C8C9D9D", "", WinContext(last_tile=True)),
                      ("2C3C4C2B3B4B2D3D4D6C7C8C9D9D", "", WinContext(self_drawn=True, last_tile=True))),
    "AllPungs": (("1C1C1C5B5B5B9D9D9DWEWEWEDRDR", "", DISCARD),
                 ("1C2C3C5B5B5B9D9D9DWEWEWEDRDR", "", DISCARD)),
    "HalfFlush": (("1C2C3C4C5C6C7C7C7CWEWEWEDRDR", "", DISCARD),
                  ("1C2C3C4C5C6C7B7B7BWEWEWEDRDR", "", DISCARD)),
    "MixedShiftedChows": (("1C2C3C2B3B4B3D4D5D7C8C9CWNWN", "", DISCARD),
                          ("1C2C3C2B3B4B4D5D6D7C8C9CWNWN", "", DISCARD)),
    "AllTypes": (("1C2C3C4B5B6B7D8D9DWEWEWEDRDR", "", DISCARD),
                 ("1C2C3C4B5B6B7D8D9DWEWEWEWSWS", "", DISCARD)),
    "MeldedHand": (("5D5D", FOUR_MELDS, DISCARD),
                   ("5D5D", FOUR_MELDS, SELF)),
    "TwoDragonPungs": (("DRDRDRDGDGDG1C2C3C4B5B6B9D9D", "", DISCARD),
                       ("DRDRDRDGDG1C2C3C4B5B6B9D9D9D", "", DISCARD)),
    "OutsideHand": (("1C2C3C7B8B9B1D1D1DWEWEWE9C9C", "", DISCARD),
                    ("1C2C3C6B7B8B1D1D1DWEWEWE9C9C", "", DISCARD)),
    "FullyConcealedHand": (("2C3C4C2B3B4B2D3D4D6C7C8C9D9D", "", SELF),
                           ("2C3C4C2B3B4B2D3D4D6C7C8C9D9D", "", DISCARD)),
    "DragonPung": (("DRDRDR1C2C3C4B5B6B7D8D9D5C5C", "", DISCARD),
                   ("DRDR1C2C3C4B5B6B7D8D9D5C5C5C", "", DISCARD)),
    "SeatWind": (("WSWSWS1C2C3C4B5B6B7D8D9D5C5C", "", WinContext(seat_wind=1)),
                 ("WSWSWS1C2C3C4B5B6B7D8D9D5C5C", "", WinContext(seat_wind=0))),
    "AllChows": (("1C2C3C4B5B6B7D8D9D2C3C4C5B5B", "", DISCARD),
                 ("1C2C3C4B5B6B7D8D9D2C3C4CWEWE", "", DISCARD)),
    "ConcealedHand": (("2C3C4C2B3B4B2D3D4D6C7C8C9D9D", "", DISCARD),
                      ("2C3C4C2B3B4B6C7C8C9D9D", "chow:2D", DISCARD)),
    "AllSimples": (("2C3C4C3B4B5B6D7D8D5C6C7C8B8B", "", DISCARD),
                   ("2C3C4C3B4B5B6D7D8D5C6C7C9B9B", "", DISCARD)),
    "SelfDrawn": (("2C3C4C2B3B4B6C7C8C9D9D", "chow:2D", SELF),
                  ("2C3C4C2B3B4B6C7C8C9D9D", "chow:2D", DISCARD)),
}


def test_every_pattern_has_fixtures():
    assert set(FIXTURES) == set(PATTERN_NAMES)
    assert len(PATTERN_NAMES) == 25


def _case_names(case):
    hand, exposed, ctx = case
    ex = exposed_melds(exposed) if exposed else ()
    if exposed == "chow:2D":
        ex = (Meld(MeldKind.CHOW, parse_tile("2D"), 3),)
    try:
        return names(hand, ex, ctx)
    except NotWinningError:
        return None


@pytest.mark.parametrize("pattern", sorted(FIXTURES))
def test_pattern_positive_fixture(pattern):
    got = _case_names(FIXTURES[pattern][0])
    assert got is not None and pattern in got


@pytest.mark.parametrize("pattern", sorted(FIXTURES))
def test_pattern_near_miss_fixture(pattern):
    got = _case_names(FIXTURES[pattern][1])
    assert got is None or pattern not in got


def test_named_special_hands():
    seven = H("2C2C3C3C4C4C6B6B7B7B9B9B1D1D")
    assert any(d.special and d.special.value == "SevenPairs" for d in decompose(seven))
    res = score(seven)
    assert "SevenPairs" in res.names() and res.total >= 24
    # thirteen orphans with every possible duplicate
    base = "1C9C1B9B1D9DWEWSWWWNDRDGDW"
    for dup in parse_tiles(base):
        hand = H(base)
        hand[dup] += 1
        assert "ThirteenOrphans" in score(hand).names()
    knit = H("1C4C7C2B5B8B3D6D9D5C6C7CWEWE")
    assert any(d.special and d.special.value == "KnittedStraight" for d in decompose(knit))
    lesser = H("1C4C7C2B5B8B3D6DWEWSWWWNDRDG")
    assert any(d.special and d.special.value == "LesserKnitted" for d in decompose(lesser))
    gwp = H("1C2C3C4B5B6B7D8D9DWEWEWEDRDR")
    assert [len(d.melds) for d in decompose(gwp)] == [4]


def test_not_winning_hand_raises_and_has_no_decomposition():
    hand = H("1C3C5C7C9C2B4B6B8B1D3D5DWEDR")
    assert decompose(hand) == []
    assert not is_winning_shape(hand)
    with pytest.raises(NotWinningError):
        score(hand)


def test_bad_size_rejected():
    with pytest.raises(ValueError):
        decompose(H("1C2C3C"))


def test_full_flush_all_chows_checklist():
    # one-suit, all chows: full flush 24, pure straight 16, all chows 2,
    # concealed 2 on a discard; half flush is implied by full flush
    res = score(H("1C2C3C4C5C6C7C8C9C2C3C4C5C5C"))
    assert dict(res.matched) == {"FullFlush": 24, "PureStraight": 16, "AllChows": 2, "ConcealedHand": 2}
    assert res.total == 44 and res.is_legal_win


def test_cheap_hand_is_not_a_legal_win():
    res = score(H("1C2C3C5B6B7B3D4D5D7C8C9C2B2B"))
    assert res.total < MIN_FAN and not res.is_legal_win


def test_exclusions_are_respected():
    for hand, ctx in [("1C2C3C4C5C6C7C8C9C2C3C4C5C5C", SELF), ("1C9C1B9B1D9DWEWSWWWNDRDGDWDW", SELF),
                      ("DRDRDRDGDGDG1C2C3C4B5B6B9D9D", DISCARD), ("1C4C7C2B5B8B3DWEWSWWWNDRDGDW", SELF)]:
        res = score(H(hand), (), ctx)
        got = set(res.names())
        for a, b in EXCLUSIONS:
            assert not (a in got and b in got)
        assert res.total == sum(POINTS[n] for n in got)


def test_score_is_max_over_decompositions():
    # 111222333 in one suit reads as three pungs or three chows
    hand = H("1C1C1C2C2C2C3C3C3C4C5C6C9C9C")
    totals = sorted(evaluate(d, hand, DISCARD).total for d in decompose(hand))
    assert totals[0] < totals[-1]
    res = score(hand)
    assert res.total == totals[-1] == 24 + 2 + 2
    assert set(res.names()) == {"FullFlush", "AllChows", "ConcealedHand"}


def test_decompose_matches_cover_search():
    rng = np.random.default_rng(7)
    for _ in range(3000):
        hand = random_structured_hand(rng)
        assert as_records(decompose(hand)) == oracle_decompositions(hand)


def test_decompose_with_exposed_melds_matches_cover_search():
    rng = np.random.default_rng(8)
    checked = 0
    while checked < 1000:
        n_exp = int(rng.integers(1, 5))
        full = random_gwp_hand(rng)
        melds = []
        # expose melds that are actually present so some hands win
        for kind, base in [(0, b) for b in range(27) if b % 9 <= 6] + [(1, k) for k in range(34)]:
            if len(melds) == n_exp:
                break
            tiles = [base] * 3 if kind == 1 else [base, base + 1, base + 2]
            if all(full[k] >= tiles.count(k) for k in tiles) and rng.random() < 0.3:
                for k in tiles:
                    full[k] -= 1
                melds.append(Meld(MeldKind(kind), base, int(rng.integers(1, 4))))
        if len(melds) != n_exp:
            continue
        exposed = [(m.kind, m.base, m.claimed_from) for m in melds]
        assert as_records(decompose(full, melds)) == oracle_decompositions(full, exposed)
        checked += 1


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_score_invariant_to_tile_order(r):
    rng = np.random.default_rng(r.randrange(2**32))
    hand = random_gwp_hand(rng)
    tiles = [k for k in range(34) for _ in range(hand[k])]
    r.shuffle(tiles)
    a = score(hand, (), SELF)
    b = score(to_counts(tiles), (), SELF)
    assert a.matched == b.matched and a.total == b.total


def test_pattern_signature_projection():
    assert pattern_signature(FanResult((("SevenPairs", 24),), 24)) == {"SevenPairs"}
    mixed = FanResult((("MeldedHand", 6), ("AllChows", 2)), 8)
    assert pattern_signature(mixed, major_only=False) == {"MeldedHand", "AllChows"}
    assert pattern_signature(mixed) == {"MeldedHand"}
    assert pattern_signature(FanResult((), 0)) == frozenset()
    assert principal_pattern(FanResult((("HalfFlush", 6), ("PureStraight", 16)), 22)) == "PureStraight"
    assert principal_pattern(FanResult((("AllChows", 2),), 2)) is None


def test_major_list_is_the_six_plus_patterns():
    assert set(MAJOR_PATTERNS) == {n for n in PATTERN_NAMES if POINTS[n] >= 6}
    assert {"SevenPairs", "ThirteenOrphans", "MeldedHand", "AllTypes", "KnittedStraight"} <= set(MAJOR_PATTERNS)
