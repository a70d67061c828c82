"""Tiles, melds and the seeded wall.

Internally every tile kind is an integer index in ``0..33``:

    0-8    1C..9C  Characters
    9-17   1B..9B  Bamboos
    18-26  1D..9D  Dots
    27-30  WE WS WW WN
    31-33  DR DG DW

The index order is the canonical total order.  :class:`Tile` is the
presentation type used at API boundaries; the engine and scorer work on
34-length count vectors.

Wall shuffling uses SplitMix64 (Steele, Lea & Flood 2014) seeded with the
64-bit game seed, feeding a Fisher-Yates shuffle from the top index down.
Bounded draws use rejection sampling so every permutation is unbiased.
Any implementation following these three steps reproduces the walls
bit for bit.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional, Sequence

N_KINDS = 34
N_TILES = 136
MASK64 = (1 << 64) - 1


class Suit(IntEnum):
    CHARACTERS = 0
    BAMBOOS = 1
    DOTS = 2
    WINDS = 3
    DRAGONS = 4


SUIT_LETTERS = "CBD"
WIND_LETTERS = "ESWN"
DRAGON_LETTERS = "RGW"
_RANK_LIMIT = {Suit.CHARACTERS: 9, Suit.BAMBOOS: 9, Suit.DOTS: 9, Suit.WINDS: 4, Suit.DRAGONS: 3}

WINDS = (27, 28, 29, 30)
DRAGONS = (31, 32, 33)
HONORS = WINDS + DRAGONS
TERMINALS = (0, 8, 9, 17, 18, 26)
TERMINALS_AND_HONORS = TERMINALS + HONORS


def suit_of(k: int) -> int:
    if k < 27:
        return k // 9
    return Suit.WINDS if k < 31 else Suit.DRAGONS


def is_suited(k: int) -> bool:
    return k < 27


def rank_of(k: int) -> int:
    if k < 27:
        return k % 9 + 1
    return k - 26 if k < 31 else k - 30


def is_terminal_or_honor(k: int) -> bool:
    return k >= 27 or k % 9 in (0, 8)


@dataclass(frozen=True, order=True)
class Tile:
    suit: Suit
    rank: int

    def __post_init__(self):
        if not 1 <= self.rank <= _RANK_LIMIT[Suit(self.suit)]:
            raise ValueError(f"rank {self.rank} out of range for {Suit(self.suit).name}")

    @property
    def index(self) -> int:
        if self.suit < 3:
            return self.suit * 9 + self.rank - 1
        return (27 if self.suit == Suit.WINDS else 31) + self.rank - 1

    @classmethod
    def from_index(cls, k: int) -> "Tile":
        return TILES[k]

    @classmethod
    def parse(cls, text: str) -> "Tile":
        return TILES[parse_tile(text)]

    def __str__(self) -> str:
        return tile_name(self.index)


def tile_name(k: int) -> str:
    if k < 27:
        return f"{k % 9 + 1}{SUIT_LETTERS[k // 9]}"
    if k < 31:
        return "W" + WIND_LETTERS[k - 27]
    return "D" + DRAGON_LETTERS[k - 31]


_NAME_TO_INDEX = {}
for _k in range(N_KINDS):
    _NAME_TO_INDEX[tile_name(_k)] = _k

TILES = tuple(
    Tile(Suit(suit_of(k)), rank_of(k)) for k in range(N_KINDS)
)

_TOKEN = re.compile(r"[1-9][CBD]|W[ESWN]|D[RGW]")


def parse_tile(text: str) -> int:
    try:
        return _NAME_TO_INDEX[text.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown tile {text!r}") from None


def parse_tiles(text: str) -> list[int]:
    """Parse compact notation such as ``"2C2C3C WE DR"`` into kind indices."""
    cleaned = re.sub(r"[\s,]+", "", text.upper())
    tokens = _TOKEN.findall(cleaned)
    if "".join(tokens) != cleaned:
        raise ValueError(f"cannot parse tiles from {text!r}")
    return [_NAME_TO_INDEX[t] for t in tokens]


def format_tiles(kinds: Iterable[int]) -> str:
    return "".join(tile_name(k) for k in sorted(kinds))


def to_counts(tiles: Iterable) -> list[int]:
    """Count vector over the 34 kinds from tiles given as ints, Tiles or names."""
    counts = [0] * N_KINDS
    for t in tiles:
        if isinstance(t, Tile):
            t = t.index
        elif isinstance(t, str):
            t = parse_tile(t)
        counts[t] += 1
    return counts


def counts_to_kinds(counts: Sequence[int]) -> list[int]:
    out = []
    for k, c in enumerate(counts):
        out.extend([k] * c)
    return out


class MeldKind(IntEnum):
    CHOW = 0
    PUNG = 1
    EXPOSED_KONG = 2
    CONCEALED_KONG = 3


@dataclass(frozen=True)
class Meld:
    """A tile group.  ``base`` is the kind index (lowest tile for a Chow).

    ``claimed_from`` is the seat a tile was claimed from; ``None`` marks a
    concealed group (concealed kong, or a group formed inside the hand).
    """

    kind: MeldKind
    base: int
    claimed_from: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.base < N_KINDS:
            raise ValueError(f"bad tile index {self.base}")
        if self.kind == MeldKind.CHOW:
            if self.base >= 27 or self.base % 9 > 6:
                raise ValueError(f"no chow starts at {tile_name(self.base)}")
        if self.kind == MeldKind.CONCEALED_KONG and self.claimed_from is not None:
            raise ValueError("a concealed kong is never claimed")

    @property
    def tiles(self) -> tuple[int, ...]:
        b = self.base
        if self.kind == MeldKind.CHOW:
            return (b, b + 1, b + 2)
        if self.kind == MeldKind.PUNG:
            return (b, b, b)
        return (b, b, b, b)

    @property
    def exposed(self) -> bool:
        return self.claimed_from is not None

    @property
    def is_triplet(self) -> bool:
        return self.kind != MeldKind.CHOW

    def __str__(self) -> str:
        return f"{self.kind.name}({format_tiles(self.tiles)})"


def meld_key(m: Meld) -> tuple:
    return (m.base, int(m.kind), -1 if m.claimed_from is None else m.claimed_from)


def enumerate_chows(hand: Sequence[int], claimed: int) -> list[Meld]:
    """Every chow containing ``claimed`` that the hand can complete.

    ``hand`` is a 34-count vector.  Results are ordered by base tile.
    """
    if isinstance(claimed, Tile):
        claimed = claimed.index
    if claimed >= 27:
        return []
    r = claimed % 9
    out = []
    for base in (claimed - 2, claimed - 1, claimed):
        br = r - (claimed - base)
        if br < 0 or br > 6:
            continue
        need = [base + i for i in range(3) if base + i != claimed]
        if all(hand[k] > 0 for k in need):
            out.append(Meld(MeldKind.CHOW, base))
    return out


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class SplitMix64:
    """Tiny reference generator; ``below(n)`` is an unbiased integer in [0, n)."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state, out = _splitmix64(self.state)
        return out

    def below(self, n: int) -> int:
        limit = ((1 << 64) // n) * n
        while True:
            x = self.next()
            if x < limit:
                return x % n


@dataclass(frozen=True)
class Wall:
    tiles: tuple[int, ...]
    draw_cursor: int = 0

    def multiset(self) -> Counter:
        return Counter(self.tiles)


def shuffle_wall(seed: int) -> Wall:
    tiles = [k for k in range(N_KINDS) for _ in range(4)]
    rng = SplitMix64(seed)
    for i in range(N_TILES - 1, 0, -1):
        j = rng.below(i + 1)
        tiles[i], tiles[j] = tiles[j], tiles[i]
    return Wall(tuple(tiles))
