"""Heuristic teacher bots and a random-legal bot.

A scripted bot scores every candidate hand by a set of goals.  Each goal
is a target winning shape (generic four-melds-and-a-pair, a flush, a
straight, seven pairs, ...) with a nominal point value.  Its distance is a
shanten count: the number of tile exchanges still needed, computed from
cached per-suit block decompositions

    shanten = 8 - 2 * melds - min(partials, 4 - melds) - pair

(the standard block-counting bound).  Goal utility is
``weight * value * DECAY ** shanten``.  Once a hand is one tile away the
estimate is replaced by the exact scorer over every live winning tile, so
bots never chase waits that cannot reach the 8 point minimum.

Only the decision's Observation is used: no hidden tiles and no wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .engine import CHOW_HIGH, CHOW_LOW, CHOW_MID, KONG, PASS, PUNG, WIN, Observation
from .scoring import KNIT_PERMS, MIN_FAN, NotWinningError, WinContext, is_winning_shape, score
from .shanten import (
    EMPTY_SUIT,
    INFEASIBLE,
    keys_shanten,
    knitted_shanten,
    seven_pairs_shanten,
    split_groups,
    thirteen_orphans_shanten,
)
from .tiles import HONORS, MASK64, N_KINDS, Meld, MeldKind, _splitmix64

DECAY = 0.3


# ---------------------------------------------------------------------------
# goals


@dataclass(frozen=True)
class Goal:
    name: str
    value: float
    kinds: frozenset = frozenset(range(N_KINDS))
    chows: bool = True
    required: tuple = ()  # chow bases that must appear
    special: str = ""  # "pairs", "orphans" or "knit"
    perm: tuple = ()
    style: str = ""  # pattern name used for style weighting
    groups: tuple = field(init=False, default=())  # usable (characters, bamboos, dots, honors)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(any(min(k // 9, 3) == g for k in self.kinds) for g in range(4)))


def _suit_kinds(s: int) -> frozenset:
    return frozenset(range(9 * s, 9 * s + 9))


def build_goals() -> tuple:
    goals = [Goal("gwp", 3.0, style="")]
    honors = frozenset(HONORS)
    for s in range(3):
        goals.append(Goal(f"full_flush_{s}", 24.0, _suit_kinds(s), style="FullFlush"))
        goals.append(Goal(f"half_flush_{s}", 7.0, _suit_kinds(s) | honors, style="HalfFlush"))
        goals.append(Goal(f"half_flush_pungs_{s}", 12.0, _suit_kinds(s) | honors, chows=False, style="AllPungs"))
        goals.append(Goal(f"pure_straight_{s}", 16.0, required=(9 * s, 9 * s + 3, 9 * s + 6), style="PureStraight"))
    goals.append(Goal("all_pungs", 7.0, chows=False, style="AllPungs"))
    for perm in KNIT_PERMS:
        goals.append(Goal(f"mixed_straight_{perm}", 8.0, required=tuple(9 * perm[j] + 3 * j for j in range(3)),
                          style="MixedStraight"))
    for r in range(7):
        goals.append(Goal(f"triple_chow_{r}", 8.0, required=(r, 9 + r, 18 + r), style="MixedTripleChow"))
    goals.append(Goal("seven_pairs", 24.0, special="pairs", style="SevenPairs"))
    goals.append(Goal("thirteen_orphans", 88.0, special="orphans", style="ThirteenOrphans"))
    for perm in KNIT_PERMS:
        goals.append(Goal(f"knitted_{perm}", 12.0, special="knit", perm=perm, style="LesserHonorsAndKnittedTiles"))
    return tuple(goals)


GOALS = build_goals()


def goal_shanten(goal: Goal, hand: Sequence[int], melds: Sequence[Meld], keys: Optional[tuple] = None) -> int:
    if goal.special:
        if melds:
            return INFEASIBLE
        if goal.special == "pairs":
            return seven_pairs_shanten(hand)
        if goal.special == "orphans":
            return thirteen_orphans_shanten(hand)
        return knitted_shanten(hand, goal.perm)
    required = list(goal.required)
    n_fixed = 0
    for m in melds:
        if m.kind == MeldKind.CHOW:
            if not goal.chows:
                return INFEASIBLE
            if m.base in required:
                required.remove(m.base)
                n_fixed += 1
                continue
        if m.base not in goal.kinds:
            return INFEASIBLE
        n_fixed += 1
    if n_fixed + len(required) > 4:
        return INFEASIBLE
    if keys is None:
        keys = split_groups(hand)
    groups = goal.groups
    rest = [keys[g] if groups[g] else EMPTY_SUIT[: 9 if g < 3 else 7] for g in range(4)]
    missing = 0
    for b in required:
        g = b // 9
        c = list(rest[g])
        r = b % 9
        for j in (r, r + 1, r + 2):
            if c[j]:
                c[j] -= 1
            else:
                missing += 1
        rest[g] = tuple(c)
    return missing + keys_shanten(tuple(rest), n_fixed + len(required), goal.chows)


# ---------------------------------------------------------------------------
# profiles and bots


@dataclass(frozen=True)
class BotProfile:
    name: str
    style_weights: dict = field(default_factory=dict)  # pattern name -> weight, default 1
    claim_aggressiveness: float = 0.5
    tie_break_seed: int = 0
    top_goals: int = 5
    protect_pairs_from: Optional[int] = None  # keep pairs once a concealed hand holds this many

    def weight(self, pattern: str) -> float:
        return self.style_weights.get(pattern, 1.0)


PROFILES = {
    "balanced": BotProfile(
        "balanced",
        {"SevenPairs": 0.6, "AllPungs": 0.8, "PureStraight": 1.3, "MixedStraight": 1.3, "MixedTripleChow": 1.3,
         "FullFlush": 1.2},
        claim_aggressiveness=0.3,
        tie_break_seed=11,
    ),
    "claimer": BotProfile(
        "claimer",
        {"AllPungs": 2.0, "HalfFlush": 1.8, "SevenPairs": 0.2, "ThirteenOrphans": 0.3,
         "LesserHonorsAndKnittedTiles": 0.2, "PureStraight": 0.7, "MixedStraight": 0.6, "MixedTripleChow": 0.6},
        claim_aggressiveness=0.9,
        tie_break_seed=23,
    ),
    "pairs": BotProfile(
        "pairs",
        {"SevenPairs": 3.0, "AllPungs": 0.5, "PureStraight": 0.5, "MixedStraight": 0.4, "MixedTripleChow": 0.4,
         "FullFlush": 0.6, "HalfFlush": 0.6},
        claim_aggressiveness=0.0,
        tie_break_seed=37,
        top_goals=3,
        protect_pairs_from=5,
    ),
}


def _mix(*xs: int) -> int:
    state = 0
    for x in xs:
        state, out = _splitmix64((state ^ (x & MASK64)) & MASK64)
        state = out
    return state


def visible_counts(obs: Observation) -> list[int]:
    seen = list(obs.hand)
    for ms in obs.melds:
        for m in ms:
            if m is not None:
                for k in m.tiles:
                    seen[k] += 1
    for pile in obs.discards:
        for k in pile:
            seen[k] += 1
    if obs.last_discard is not None:
        seen[obs.last_discard[0]] += 1
    return seen


def _usefulness(hand: Sequence[int], k: int) -> int:
    if k >= 27:
        return 3 * (hand[k] - 1)
    r = k % 9
    u = 3 * (hand[k] - 1)
    for d in (-2, -1, 1, 2):
        if 0 <= r + d <= 8 and hand[k + d]:
            u += 3 - abs(d)
    return u + (1 if 2 <= r <= 6 else 0)


class ScriptedBot:
    """Deterministic goal-driven policy for one profile."""

    def __init__(self, profile: BotProfile):
        self.profile = profile
        self.name = profile.name
        self._weights = tuple(profile.weight(g.style) if g.style else 1.0 for g in GOALS)

    # utilities -------------------------------------------------------------

    def _goal_table(self, hand, melds, idx=None) -> list[tuple[float, int, int]]:
        out = []
        keys = split_groups(hand)
        for i in (range(len(GOALS)) if idx is None else idx):
            s = goal_shanten(GOALS[i], hand, melds, keys)
            if s >= INFEASIBLE:
                continue
            out.append((self._weights[i] * GOALS[i].value * DECAY ** max(s, 0), s, i))
        return out

    def _tenpai_value(self, hand, melds, live, seat) -> float:
        best = 0.0
        n_live = 0
        n_ex = len(melds)
        ctx = WinContext(self_drawn=False, last_tile=False, seat_wind=seat)
        for w in range(N_KINDS):
            if live[w] <= 0:
                continue
            hand[w] += 1
            try:
                if not is_winning_shape(hand, n_ex):
                    continue
                try:
                    res = score(hand, melds, ctx)
                except NotWinningError:
                    continue
                if res.total < MIN_FAN:
                    continue
                names = res.names()
                style = max((self.profile.weight(p) for p in names), default=1.0)
                best = max(best, res.total * style)
                n_live += live[w]
            finally:
                hand[w] -= 1
        return best * min(1.0, n_live / 4.0)

    def utility(self, hand: list, melds, live, seat, idx=None) -> float:
        """Value of a 13-equivalent hand."""
        table = self._goal_table(hand, melds, idx)
        if not table:
            return 0.0
        if min(t[1] for t in table) == 0:
            exact = self._tenpai_value(hand, melds, live, seat)
            rest = max(w * DECAY if s == 0 else w for w, s, _ in table)
            return max(exact, rest)
        return max(t[0] for t in table)

    def _shortlist(self, hand, melds) -> list[int]:
        table = self._goal_table(hand, melds)
        table.sort(key=lambda t: (-t[0], t[2]))
        return [i for _, _, i in table[: self.profile.top_goals]]

    def _best_discard(self, hand: list, melds, live, seat, candidates, salt: int) -> tuple[int, float]:
        idx = self._shortlist(hand, melds)
        best = None
        for k in candidates:
            hand[k] -= 1
            u = self.utility(hand, melds, live, seat, idx)
            hand[k] += 1
            key = (round(u, 9), -_usefulness(hand, k), _mix(self.profile.tie_break_seed, salt, k))
            if best is None or key > best[0]:
                best = (key, k, u)
        return best[1], best[2]

    # decisions -------------------------------------------------------------

    def act(self, obs: Observation) -> int:
        legal = obs.legal_ids
        if len(legal) == 1:
            return legal[0]
        if WIN in legal:
            return WIN
        seat = obs.seat
        hand = list(obs.hand)
        melds = tuple(m for m in obs.melds[seat] if m is not None)
        seen = visible_counts(obs)
        live = [4 - c for c in seen]
        salt = _mix(sum((k + 1) * c for k, c in enumerate(hand)), len(obs.discards[seat]), obs.wall_remaining)
        discards = [a for a in legal if a < N_KINDS]
        if discards and self.profile.protect_pairs_from is not None and not melds:
            if sum(c // 2 for c in hand) >= self.profile.protect_pairs_from:
                odd = [k for k in discards if hand[k] % 2]
                discards = odd or discards
        if discards:
            k, u = self._best_discard(hand, melds, live, seat, discards, salt)
            if KONG in legal:
                alt = self._kong_value(hand, melds, live, seat)
                if alt is not None and alt >= u:
                    return KONG
            return k
        return self._claim_decision(obs, hand, melds, live, seat, salt)

    def _kong_value(self, hand, melds, live, seat) -> Optional[float]:
        pungs = {m.base for m in melds if m.kind == MeldKind.PUNG}
        for k in range(N_KINDS):
            if hand[k] == 4 or (hand[k] and k in pungs):
                h = list(hand)
                if hand[k] == 4:
                    h[k] = 0
                    new = melds + (Meld(MeldKind.CONCEALED_KONG, k),)
                else:
                    h[k] -= 1
                    new = tuple(Meld(MeldKind.EXPOSED_KONG, k, m.claimed_from)
                                if (m.kind == MeldKind.PUNG and m.base == k) else m for m in melds)
                # the replacement draw is unknown; value the 13-equivalent remainder
                return self.utility(h, new, live, seat)
        return None

    def _claim_decision(self, obs, hand, melds, live, seat, salt) -> int:
        tile, discarder = obs.last_discard
        now = self.utility(hand, melds, live, seat, self._shortlist(hand, melds))
        margin = np.exp(2.0 * (0.5 - self.profile.claim_aggressiveness))
        best_action, best_u = PASS, now * margin
        for a in obs.legal_ids:
            if a == PASS:
                continue
            h = list(hand)
            if a == PUNG:
                h[tile] -= 2
                meld = Meld(MeldKind.PUNG, tile, discarder)
            elif a == KONG:
                h[tile] -= 3
                meld = Meld(MeldKind.EXPOSED_KONG, tile, discarder)
            elif a in (CHOW_LOW, CHOW_MID, CHOW_HIGH):
                base = tile - (a - CHOW_LOW)
                for k in (base, base + 1, base + 2):
                    if k != tile:
                        h[k] -= 1
                meld = Meld(MeldKind.CHOW, base, discarder)
            else:
                continue
            new = melds + (meld,)
            if a == KONG:
                u = self.utility(h, new, live, seat)
            else:
                cands = [k for k in range(N_KINDS) if h[k]]
                if not cands:
                    continue
                _, u = self._best_discard(h, new, live, seat, cands, salt)
            if u > best_u:
                best_action, best_u = a, u
        return best_action


class RandomBot:
    """Uniform choice among legal actions, seeded."""

    def __init__(self, seed: int = 0, name: str = "random"):
        self.rng = np.random.default_rng(seed)
        self.name = name

    def act(self, obs: Observation) -> int:
        legal = obs.legal_ids
        return int(legal[self.rng.integers(len(legal))])


def make_bot(name: str, seed: int = 0):
    if name == "random":
        return RandomBot(seed)
    if name not in PROFILES:
        raise KeyError(f"unknown bot profile {name!r}; choose from {sorted(PROFILES) + ['random']}")
    return ScriptedBot(PROFILES[name])
