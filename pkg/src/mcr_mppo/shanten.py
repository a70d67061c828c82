"""Shanten counts: tile exchanges still needed to reach a winning shape.

Four melds and a pair use the block-counting bound

    shanten = 8 - 2 * melds - min(partials, 4 - melds) - pair

maximized over decompositions of each suit into melds, partial melds
(pairs, adjacent or one-gap runs) and at most one pair for the whole
hand.  Per-suit decompositions are cached by the suit's 9 counts, so a
full hand costs four table lookups and a small product.  A complete
14-tile hand has shanten -1.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

from .scoring import KNIT_PERMS, knitted_tiles
from .tiles import HONORS, TERMINALS_AND_HONORS

INFEASIBLE = 99


def _pareto(opts) -> tuple:
    best = []
    for o in sorted(set(opts), reverse=True):
        if not any(b[0] >= o[0] and b[1] >= o[1] and b[2] >= o[2] for b in best):
            best.append(o)
    return tuple(best)


@lru_cache(maxsize=None)
def suit_blocks(c: tuple) -> tuple:
    """Pareto set of (melds, partials, pair) splits of one suit's 9 counts."""
    i = 0
    while i < 9 and c[i] == 0:
        i += 1
    if i == 9:
        return ((0, 0, 0),)
    out = []

    def sub(delta, removed):
        lst = list(c)
        for k in removed:
            lst[k] -= 1
        for m, t, h in suit_blocks(tuple(lst)):
            if h + delta[2] <= 1:
                out.append((m + delta[0], t + delta[1], h + delta[2]))

    if c[i] >= 3:
        sub((1, 0, 0), (i, i, i))
    if i <= 6 and c[i + 1] and c[i + 2]:
        sub((1, 0, 0), (i, i + 1, i + 2))
    if c[i] >= 2:
        sub((0, 0, 1), (i, i))
        sub((0, 1, 0), (i, i))
    if i <= 7 and c[i + 1]:
        sub((0, 1, 0), (i, i + 1))
    if i <= 6 and c[i + 2]:
        sub((0, 1, 0), (i, i + 2))
    sub((0, 0, 0), (i,))
    return _pareto(out)


@lru_cache(maxsize=None)
def honor_blocks(c: tuple) -> tuple:
    opts = [(0, 0, 0)]
    for n in c:
        nxt = []
        for m, t, h in opts:
            if n >= 3:
                nxt.append((m + 1, t, h))
            elif n == 2:
                nxt.append((m, t + 1, h))
                if not h:
                    nxt.append((m, t, 1))
            else:
                nxt.append((m, t, h))
        opts = _pareto(nxt)
    return opts


@lru_cache(maxsize=None)
def pung_blocks(c: tuple) -> tuple:
    """Like ``honor_blocks`` but for any group where chows are not wanted."""
    return honor_blocks(c)


def _merge(acc, g) -> set:
    return {(m + a, t + b, h + d) for m, t, h in acc for a, b, d in g if h + d <= 1}


def _best(acc, n_fixed: int) -> int:
    best = INFEASIBLE
    for m, t, h in acc:
        m = min(m + n_fixed, 4)
        s = 8 - 2 * m - min(t, 4 - m) - h
        if s < best:
            best = s
    return best


def _combine(groups, n_fixed: int) -> int:
    acc = {(0, 0, 0)}
    for g in groups:
        acc = _merge(acc, g)
    return _best(acc, n_fixed)


def gwp_shanten(hand: Sequence[int], n_fixed: int = 0, chows: bool = True) -> int:
    """Shanten toward four melds and a pair with ``n_fixed`` melds already made."""
    return keys_shanten(split_groups(hand), n_fixed, chows)


def seven_pairs_shanten(hand: Sequence[int]) -> int:
    return 6 - min(7, sum(c // 2 for c in hand))


def thirteen_orphans_shanten(hand: Sequence[int]) -> int:
    distinct = sum(1 for k in TERMINALS_AND_HONORS if hand[k])
    pair = any(hand[k] >= 2 for k in TERMINALS_AND_HONORS)
    return 13 - distinct - (1 if pair else 0)


_KNIT = {perm: frozenset(knitted_tiles(perm)) for perm in KNIT_PERMS}


def knitted_shanten(hand: Sequence[int], perm) -> int:
    ks = _KNIT[perm]
    have = sum(1 for k in ks if hand[k]) + sum(1 for k in HONORS if hand[k])
    return 13 - min(14, have)


EMPTY_SUIT = (0,) * 9


@lru_cache(maxsize=1 << 18)
def keys_shanten(keys: tuple, n_fixed: int, chows: bool) -> int:
    blocks = suit_blocks if chows else pung_blocks
    return _combine([blocks(keys[0]), blocks(keys[1]), blocks(keys[2]), honor_blocks(keys[3])], n_fixed)


def split_groups(hand: Sequence[int]) -> tuple:
    return (tuple(hand[0:9]), tuple(hand[9:18]), tuple(hand[18:27]), tuple(hand[27:34]))


def discard_shanten(hand: Sequence[int], n_fixed: int = 0) -> dict:
    """GWP shanten after discarding each kind held; ``hand`` is 14-equivalent."""
    keys = split_groups(hand)
    blocks = [suit_blocks(keys[0]), suit_blocks(keys[1]), suit_blocks(keys[2]), honor_blocks(keys[3])]
    out = {}
    for g, (lo, hi) in enumerate(((0, 9), (9, 18), (18, 27), (27, 34))):
        if not any(hand[lo:hi]):
            continue
        # the other three groups are fixed while discarding from this one
        rest = {(0, 0, 0)}
        for j in range(4):
            if j != g:
                rest = _merge(rest, blocks[j])
        block_fn = honor_blocks if g == 3 else suit_blocks
        for k in range(lo, hi):
            if hand[k]:
                c = list(keys[g])
                c[k - lo] -= 1
                out[k] = _best(_merge(rest, block_fn(tuple(c))), n_fixed)
    return out
