from collections import Counter
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from mcr_mppo.tiles import (
    N_KINDS,
    TILES,
    Meld,
    MeldKind,
    SplitMix64,
    Suit,
    Tile,
    enumerate_chows,
    format_tiles,
    parse_tile,
    parse_tiles,
    shuffle_wall,
    to_counts,
)

seeds = st.integers(min_value=0, max_value=2**64 - 1)


def test_thirty_four_kinds_with_suit_ranges():
    assert len(TILES) == N_KINDS == len(set(TILES))
    by_suit = Counter(t.suit for t in TILES)
    assert by_suit == {Suit.CHARACTERS: 9, Suit.BAMBOOS: 9, Suit.DOTS: 9, Suit.WINDS: 4, Suit.DRAGONS: 3}
    for k, t in enumerate(TILES):
        assert t.index == k
        assert Tile.from_index(k) == t
    with pytest.raises(ValueError):
        Tile(Suit.DRAGONS, 4)
    with pytest.raises(ValueError):
        Tile(Suit.WINDS, 0)


def test_tile_ordering_is_total_and_matches_index():
    for a, b in combinations(TILES, 2):
        assert (a < b) != (b < a)
        assert (a < b) == (a.index < b.index)


def test_notation_round_trip():
    for k in range(N_KINDS):
        assert parse_tile(format_tiles([k])) == k
    assert parse_tiles("1C 9C 1b,9B WE DR") == [0, 8, 9, 17, 27, 31]
    assert format_tiles(parse_tiles("2C2C3C")) == "2C2C3C"
    with pytest.raises(ValueError):
        parse_tile("0C")
    with pytest.raises(ValueError):
        parse_tiles("1C XX")


def test_splitmix_reference_vector():
    # first outputs for seed 1234567 from the published reference implementation
    rng = SplitMix64(1234567)
    assert [rng.next() for _ in range(5)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]


def test_shuffle_deterministic_and_seed_sensitive():
    assert shuffle_wall(42).tiles == shuffle_wall(42).tiles
    assert shuffle_wall(1).tiles != shuffle_wall(2).tiles


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_shuffle_is_permutation_of_full_set(seed):
    wall = shuffle_wall(seed)
    assert len(wall.tiles) == 136
    assert wall.multiset() == Counter({k: 4 for k in range(N_KINDS)})


def test_meld_constructor_rejects_bad_groups():
    with pytest.raises(ValueError):
        Meld(MeldKind.CHOW, parse_tile("DR"))
    with pytest.raises(ValueError):
        Meld(MeldKind.CHOW, parse_tile("8C"))
    with pytest.raises(ValueError):
        Meld(MeldKind.CONCEALED_KONG, 0, claimed_from=2)
    with pytest.raises(ValueError):
        Meld(MeldKind.PUNG, 34)
    assert Meld(MeldKind.CHOW, parse_tile("7B")).tiles == (15, 16, 17)
    assert Meld(MeldKind.EXPOSED_KONG, 5, 1).tiles == (5,) * 4


def _chows_brute(hand, claimed):
    out = []
    for base in range(27):
        if base % 9 > 6:
            continue
        run = (base, base + 1, base + 2)
        if claimed not in run:
            continue
        need = Counter(run)
        need[claimed] -= 1
        if all(hand[k] >= n for k, n in need.items()):
            out.append(base)
    return out


def test_enumerate_chows_examples():
    assert [m.base for m in enumerate_chows(to_counts(parse_tiles("3D4D")), parse_tile("5D"))] == [parse_tile("3D")]
    assert enumerate_chows(to_counts(parse_tiles("WW WW 1C2C")), parse_tile("WW")) == []
    got = enumerate_chows(to_counts(parse_tiles("1B2B4B5B")), parse_tile("3B"))
    assert [format_tiles(m.tiles) for m in got] == ["1B2B3B", "2B3B4B", "3B4B5B"]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=N_KINDS, max_size=N_KINDS), st.integers(0, N_KINDS - 1))
def test_enumerate_chows_matches_brute_force(hand, claimed):
    assert [m.base for m in enumerate_chows(hand, claimed)] == _chows_brute(hand, claimed)
