"""Winning-shape decomposition and fan scoring over a 25-pattern MCR subset.

Pattern table (points):

    ThirteenOrphans 88, SevenPairs 24, GreaterHonorsAndKnittedTiles 24,
    FullFlush 24, PureStraight 16, LesserHonorsAndKnittedTiles 12,
    KnittedStraight 12, MixedStraight 8, MixedTripleChow 8, LastTileDraw 8,
    LastTileClaim 8, AllPungs 6, HalfFlush 6, MixedShiftedChows 6,
    AllTypes 6, MeldedHand 6, TwoDragonPungs 6, OutsideHand 4,
    FullyConcealedHand 4, DragonPung 2, SeatWind 2, AllChows 2,
    ConcealedHand 2, AllSimples 2, SelfDrawn 1

Patterns worth 6 or more form the major-pattern list used for winning
pattern distributions.  Implied patterns are removed with the explicit
``EXCLUSIONS`` pairs: matched patterns are visited by descending points
(table order breaks ties) and a pattern is dropped when an already kept
pattern excludes it.  A hand may be declared only with a total of 8.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import permutations, product
from typing import Iterable, Optional, Sequence

from .tiles import (
    DRAGONS,
    HONORS,
    N_KINDS,
    TERMINALS_AND_HONORS,
    Meld,
    MeldKind,
    is_terminal_or_honor,
    meld_key,
)

MIN_FAN = 8

PATTERNS: tuple[tuple[str, int], ...] = (
    ("ThirteenOrphans", 88),
    ("SevenPairs", 24),
    ("GreaterHonorsAndKnittedTiles", 24),
    ("FullFlush", 24),
    ("PureStraight", 16),
    ("LesserHonorsAndKnittedTiles", 12),
    ("KnittedStraight", 12),
    ("MixedStraight", 8),
    ("MixedTripleChow", 8),
    ("LastTileDraw", 8),
    ("LastTileClaim", 8),
    ("AllPungs", 6),
    ("HalfFlush", 6),
    ("MixedShiftedChows", 6),
    ("AllTypes", 6),
    ("MeldedHand", 6),
    ("TwoDragonPungs", 6),
    ("OutsideHand", 4),
    ("FullyConcealedHand", 4),
    ("DragonPung", 2),
    ("SeatWind", 2),
    ("AllChows", 2),
    ("ConcealedHand", 2),
    ("AllSimples", 2),
    ("SelfDrawn", 1),
)
POINTS = dict(PATTERNS)
PATTERN_NAMES = tuple(name for name, _ in PATTERNS)
_ORDER = {name: i for i, name in enumerate(PATTERN_NAMES)}
MAJOR_PATTERNS = tuple(name for name, pts in PATTERNS if pts >= 6)

EXCLUSIONS: tuple[tuple[str, str], ...] = (
    ("ThirteenOrphans", "AllTypes"),
    ("ThirteenOrphans", "ConcealedHand"),
    ("ThirteenOrphans", "FullyConcealedHand"),
    ("SevenPairs", "ConcealedHand"),
    ("SevenPairs", "FullyConcealedHand"),
    ("GreaterHonorsAndKnittedTiles", "LesserHonorsAndKnittedTiles"),
    ("GreaterHonorsAndKnittedTiles", "AllTypes"),
    ("GreaterHonorsAndKnittedTiles", "ConcealedHand"),
    ("GreaterHonorsAndKnittedTiles", "FullyConcealedHand"),
    ("LesserHonorsAndKnittedTiles", "AllTypes"),
    ("LesserHonorsAndKnittedTiles", "ConcealedHand"),
    ("LesserHonorsAndKnittedTiles", "FullyConcealedHand"),
    ("FullFlush", "HalfFlush"),
    ("LastTileDraw", "SelfDrawn"),
    ("TwoDragonPungs", "DragonPung"),
    ("FullyConcealedHand", "SelfDrawn"),
    ("FullyConcealedHand", "ConcealedHand"),
)
_EXCLUDES: dict[str, frozenset] = {}
for _a, _b in EXCLUSIONS:
    _EXCLUDES[_a] = _EXCLUDES.get(_a, frozenset()) | {_b}


class Special(str, Enum):
    SEVEN_PAIRS = "SevenPairs"
    THIRTEEN_ORPHANS = "ThirteenOrphans"
    KNITTED_STRAIGHT = "KnittedStraight"
    LESSER_KNITTED = "LesserKnitted"


class NotWinningError(ValueError):
    pass


@dataclass(frozen=True)
class WinContext:
    self_drawn: bool = False
    last_tile: bool = False
    seat_wind: int = 0


@dataclass(frozen=True)
class WinningDecomposition:
    melds: tuple[Meld, ...]
    pair: Optional[int]
    special: Optional[Special] = None
    # suit order holding ranks (1,4,7), (2,5,8), (3,6,9) for knitted shapes
    knit: Optional[tuple[int, int, int]] = None


@dataclass(frozen=True)
class FanResult:
    matched: tuple[tuple[str, int], ...]
    total: int
    decomposition: Optional[WinningDecomposition] = None

    @property
    def is_legal_win(self) -> bool:
        return self.total >= MIN_FAN

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.matched)


# ---------------------------------------------------------------------------
# shape tables


def _build_suit_tables():
    melds = []
    for r in range(9):
        melds.append((r, r, r))
    for r in range(7):
        melds.append((r, r + 1, r + 2))
    frontier = {(0,) * 9}
    complete = set(frontier)
    for _ in range(4):
        nxt = set()
        for c in frontier:
            for m in melds:
                lst = list(c)
                for r in m:
                    lst[r] += 1
                if max(lst) <= 4:
                    nxt.add(tuple(lst))
        complete |= nxt
        frontier = nxt
    with_pair = set()
    for c in complete:
        for r in range(9):
            if c[r] <= 2:
                lst = list(c)
                lst[r] += 2
                with_pair.add(tuple(lst))
    return frozenset(complete), frozenset(with_pair)


SUIT_MELDS, SUIT_MELDS_PAIR = _build_suit_tables()

KNIT_PERMS = tuple(permutations(range(3)))


def knitted_tiles(perm: Sequence[int]) -> tuple[int, ...]:
    """The nine knitted-straight kinds when suit ``perm[j]`` holds ranks j+1, j+4, j+7."""
    return tuple(sorted(perm[j] * 9 + j + 3 * i for j in range(3) for i in range(3)))


_KNIT_SETS = {perm: knitted_tiles(perm) for perm in KNIT_PERMS}


def _gwp_shape(hand: Sequence[int]) -> bool:
    pair = False
    for s in (0, 9, 18):
        c = tuple(hand[s:s + 9])
        r = sum(c) % 3
        if r == 0:
            if c not in SUIT_MELDS:
                return False
        elif r == 2:
            if pair or c not in SUIT_MELDS_PAIR:
                return False
            pair = True
        else:
            return False
    for k in range(27, 34):
        c = hand[k]
        if c == 2:
            if pair:
                return False
            pair = True
        elif c == 1 or c == 4:
            return False
    return pair


def _seven_pairs(hand: Sequence[int]) -> bool:
    return all(c % 2 == 0 for c in hand) and sum(hand) == 14


def _thirteen_orphans(hand: Sequence[int]) -> bool:
    if sum(hand) != 14:
        return False
    extra = 0
    for k in range(N_KINDS):
        c = hand[k]
        if k in _TH_SET:
            if c == 0 or c > 2:
                return False
            extra += c - 1
        elif c:
            return False
    return extra == 1


_TH_SET = frozenset(TERMINALS_AND_HONORS)


def _lesser_knitted_perm(hand: Sequence[int]) -> Optional[tuple]:
    if sum(hand) != 14 or any(c > 1 for c in hand):
        return None
    for perm, ks in _KNIT_SETS.items():
        allowed = set(ks) | set(HONORS)
        if all(hand[k] == 0 or k in allowed for k in range(N_KINDS)):
            return perm
    return None


def _knitted_straight_rests(hand: Sequence[int]):
    for perm, ks in _KNIT_SETS.items():
        if all(hand[k] > 0 for k in ks):
            rest = list(hand)
            for k in ks:
                rest[k] -= 1
            yield perm, rest


def is_winning_shape(hand: Sequence[int], n_exposed: int = 0) -> bool:
    """Fast test whether concealed counts plus ``n_exposed`` melds form a winning shape."""
    if _gwp_shape(hand):
        return True
    if n_exposed == 0:
        if _seven_pairs(hand) or _thirteen_orphans(hand) or _lesser_knitted_perm(hand):
            return True
    if n_exposed <= 1 and sum(hand) >= 11:
        for _, rest in _knitted_straight_rests(hand):
            if _gwp_shape(rest):
                return True
    return False


# ---------------------------------------------------------------------------
# decomposition


@lru_cache(maxsize=None)
def _suit_partitions(c: tuple, need_pair: bool) -> tuple:
    """All ways to split a 9-rank count tuple into melds (plus one pair if asked).

    Returns a tuple of (melds, pair_rank) where melds is a sorted tuple of
    (kind, rank) with kind 0 = chow, 1 = pung.
    """
    i = next((r for r in range(9) if c[r]), None)
    if i is None:
        return (((), None),) if not need_pair else ()
    out = set()
    lst = list(c)
    if c[i] >= 3:
        lst[i] -= 3
        for melds, pair in _suit_partitions(tuple(lst), need_pair):
            out.add((tuple(sorted(melds + ((1, i),))), pair))
        lst[i] += 3
    if i <= 6 and c[i + 1] and c[i + 2]:
        lst[i] -= 1
        lst[i + 1] -= 1
        lst[i + 2] -= 1
        for melds, pair in _suit_partitions(tuple(lst), need_pair):
            out.add((tuple(sorted(melds + ((0, i),))), pair))
        lst[i] += 1
        lst[i + 1] += 1
        lst[i + 2] += 1
    if need_pair and c[i] >= 2:
        lst[i] -= 2
        for melds, _ in _suit_partitions(tuple(lst), False):
            out.add((melds, i))
        lst[i] += 2
    return tuple(sorted(out, key=lambda x: (x[0], -1 if x[1] is None else x[1])))


def _gwp_decompositions(hand: Sequence[int]) -> list[tuple[tuple[Meld, ...], int]]:
    if not _gwp_shape(hand):
        return []
    per_group = []
    for s in (0, 9, 18):
        c = tuple(hand[s:s + 9])
        need_pair = sum(c) % 3 == 2
        opts = []
        for melds, pair in _suit_partitions(c, need_pair):
            ms = tuple(Meld(MeldKind.CHOW if kind == 0 else MeldKind.PUNG, s + r) for kind, r in melds)
            opts.append((ms, None if pair is None else s + pair))
        per_group.append(opts)
    honor_melds = []
    honor_pair = None
    for k in range(27, 34):
        if hand[k] == 3:
            honor_melds.append(Meld(MeldKind.PUNG, k))
        elif hand[k] == 2:
            honor_pair = k
    out = []
    for combo in product(*per_group):
        melds = []
        pair = honor_pair
        for ms, p in combo:
            melds.extend(ms)
            if p is not None:
                pair = p
        melds.extend(honor_melds)
        out.append((tuple(melds), pair))
    return out


def _check_size(hand: Sequence[int], exposed: Sequence[Meld]) -> None:
    if len(hand) != N_KINDS:
        raise ValueError("hand must be a 34-kind count vector")
    if sum(hand) + 3 * len(exposed) != 14:
        raise ValueError(
            f"hand has {sum(hand)} tiles with {len(exposed)} melds; expected 14-equivalent"
        )


def decompose(hand: Sequence[int], exposed: Sequence[Meld] = ()) -> list[WinningDecomposition]:
    """Every winning decomposition of concealed counts ``hand`` plus ``exposed`` melds."""
    hand = list(hand)
    exposed = tuple(exposed)
    _check_size(hand, exposed)
    out = []
    for melds, pair in _gwp_decompositions(hand):
        out.append(WinningDecomposition(tuple(sorted(exposed + melds, key=meld_key)), pair))
    if not exposed:
        if _seven_pairs(hand):
            out.append(WinningDecomposition((), None, Special.SEVEN_PAIRS))
        if _thirteen_orphans(hand):
            out.append(WinningDecomposition((), None, Special.THIRTEEN_ORPHANS))
        perm = _lesser_knitted_perm(hand)
        if perm is not None:
            out.append(WinningDecomposition((), None, Special.LESSER_KNITTED, perm))
    if len(exposed) <= 1:
        for perm, rest in _knitted_straight_rests(hand):
            for melds, pair in _gwp_decompositions(rest):
                out.append(
                    WinningDecomposition(tuple(sorted(exposed + melds, key=meld_key)), pair, Special.KNITTED_STRAIGHT, perm)
                )
    return out


# ---------------------------------------------------------------------------
# fan evaluation


def _full_counts(hand: Sequence[int], exposed: Sequence[Meld]) -> list[int]:
    full = list(hand)
    for m in exposed:
        for k in m.tiles:
            full[k] += 1
    return full


def _tile_level(full: Sequence[int], matched: list) -> None:
    suits = [s for s in range(3) if any(full[9 * s:9 * s + 9])]
    has_wind = any(full[27:31])
    has_dragon = any(full[31:34])
    if len(suits) == 1 and not (has_wind or has_dragon):
        matched.append("FullFlush")
    if len(suits) == 1 and (has_wind or has_dragon):
        matched.append("HalfFlush")
    if len(suits) == 3 and has_wind and has_dragon:
        matched.append("AllTypes")
    if not any(full[k] for k in TERMINALS_AND_HONORS):
        matched.append("AllSimples")


def _chow_patterns(chows: list[int], matched: list) -> None:
    cs = set(chows)
    for s in (0, 9, 18):
        if {s, s + 3, s + 6} <= cs:
            matched.append("PureStraight")
            break
    for a, b, c in KNIT_PERMS:
        if {9 * a, 9 * b + 3, 9 * c + 6} <= cs:
            matched.append("MixedStraight")
            break
    for r in range(7):
        if {r, 9 + r, 18 + r} <= cs:
            matched.append("MixedTripleChow")
            break
    found = False
    for r in range(5):
        for a, b, c in KNIT_PERMS:
            if {9 * a + r, 9 * b + r + 1, 9 * c + r + 2} <= cs:
                found = True
                break
        if found:
            matched.append("MixedShiftedChows")
            break


def _triplet_patterns(triplets: list[int], seat_wind: int, matched: list) -> None:
    dragon = sum(1 for k in triplets if k in DRAGONS)
    if dragon >= 2:
        matched.append("TwoDragonPungs")
    elif dragon == 1:
        matched.append("DragonPung")
    if 27 + seat_wind in triplets:
        matched.append("SeatWind")


def _resolve(matched: Iterable[str]) -> tuple[tuple[str, int], ...]:
    ordered = sorted(set(matched), key=lambda n: (-POINTS[n], _ORDER[n]))
    kept: list[str] = []
    excluded: set = set()
    for name in ordered:
        if name in excluded:
            continue
        kept.append(name)
        excluded |= _EXCLUDES.get(name, frozenset())
    return tuple((name, POINTS[name]) for name in kept)


def evaluate(decomp: WinningDecomposition, full: Sequence[int], ctx: WinContext) -> FanResult:
    """Fan points of one decomposition; ``full`` counts include exposed melds."""
    matched: list[str] = []
    n_exposed = sum(1 for m in decomp.melds if m.exposed)
    sp = decomp.special
    if sp == Special.THIRTEEN_ORPHANS:
        matched.append("ThirteenOrphans")
    elif sp == Special.SEVEN_PAIRS:
        matched.append("SevenPairs")
    elif sp == Special.LESSER_KNITTED:
        matched.append("LesserHonorsAndKnittedTiles")
        if all(full[k] for k in HONORS):
            matched.append("GreaterHonorsAndKnittedTiles")
        if all(full[k] for k in _KNIT_SETS[decomp.knit]):
            matched.append("KnittedStraight")
    else:
        if sp == Special.KNITTED_STRAIGHT:
            matched.append("KnittedStraight")
        chows = [m.base for m in decomp.melds if m.kind == MeldKind.CHOW]
        triplets = [m.base for m in decomp.melds if m.kind != MeldKind.CHOW]
        _chow_patterns(chows, matched)
        _triplet_patterns(triplets, ctx.seat_wind, matched)
        if sp is None:
            if len(triplets) == 4:
                matched.append("AllPungs")
            if len(chows) == 4 and decomp.pair is not None and decomp.pair < 27:
                matched.append("AllChows")
            if all(any(is_terminal_or_honor(k) for k in m.tiles) for m in decomp.melds) and (
                decomp.pair is not None and is_terminal_or_honor(decomp.pair)
            ):
                matched.append("OutsideHand")
            if n_exposed == 4 and not ctx.self_drawn:
                matched.append("MeldedHand")
    _tile_level(full, matched)
    if n_exposed == 0:
        matched.append("FullyConcealedHand" if ctx.self_drawn else "ConcealedHand")
    if ctx.self_drawn:
        matched.append("SelfDrawn")
        if ctx.last_tile:
            matched.append("LastTileDraw")
    elif ctx.last_tile:
        matched.append("LastTileClaim")
    res = _resolve(matched)
    return FanResult(res, sum(p for _, p in res), decomp)


def score(hand: Sequence[int], exposed: Sequence[Meld] = (), context: WinContext = WinContext()) -> FanResult:
    """Best fan result over all decompositions.  Raises if not a winning shape."""
    return _score_cached(tuple(hand), tuple(exposed), context)


@lru_cache(maxsize=1 << 16)
def _score_cached(hand: tuple, exposed: tuple, context: WinContext) -> FanResult:
    decomps = decompose(hand, exposed)
    if not decomps:
        raise NotWinningError("hand is not a winning shape")
    full = _full_counts(hand, exposed)
    best = None
    for d in decomps:
        r = evaluate(d, full, context)
        if best is None or r.total > best.total:
            best = r
    return best


def win_fan(hand: Sequence[int], exposed: Sequence[Meld], context: WinContext) -> int:
    """Fan total if the hand is a winning shape, else 0 (cheap rejection first)."""
    if not is_winning_shape(hand, len(exposed)):
        return 0
    return score(hand, exposed, context).total


def pattern_signature(result: FanResult, major_only: bool = True) -> frozenset:
    """Pattern names of a result; restricted to the major list by default."""
    names = result.names()
    if major_only:
        return frozenset(n for n in names if n in MAJOR_PATTERNS)
    return frozenset(names)


def principal_pattern(result: FanResult) -> Optional[str]:
    """Highest valued major pattern of a result (table order on ties)."""
    majors = [n for n in result.names() if n in MAJOR_PATTERNS]
    if not majors:
        return None
    return min(majors, key=lambda n: (-POINTS[n], _ORDER[n]))
