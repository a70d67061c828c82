"""Four-player MCR table: deal, draw/discard, claims, terminal settlement.

Engine functions are pure: every transition returns a fresh ``GameState``
and leaves its input untouched.  All randomness lives in the wall order,
which is fixed by the 64-bit seed.

Action ids (frozen):

    0-33   discard tile kind k
    34     chow, claimed tile is the lowest of the run
    35     chow, claimed tile is the middle
    36     chow, claimed tile is the highest
    37     pung
    38     kong (exposed kong on a discard; on one's own turn the lowest
           kind that can form a concealed kong or extend an exposed pung)
    39     win
    40     pass

Engine policy, not taken from any rulebook text: after a discard every
other seat with a claim option decides simultaneously; Win beats
Pung/Kong which beats Chow, and among several Wins the seat nearest
clockwise from the discarder takes the tile.  A discard win is paid
8 + fan by the discarder and 8 by each other loser; a self-drawn win is
paid 8 + fan by all three.  Payments are scaled by 1/32.  Kong
replacement tiles come from the tail of the wall.  The game is drawn
when a seat must draw from an empty wall.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from .scoring import WinContext, is_winning_shape, score
from .shanten import discard_shanten, keys_shanten, seven_pairs_shanten, split_groups, thirteen_orphans_shanten
from .tiles import N_KINDS, Meld, MeldKind, shuffle_wall

CHOW_LOW, CHOW_MID, CHOW_HIGH, PUNG, KONG, WIN, PASS = range(34, 41)
N_ACTIONS = 41
REWARD_SCALE = 1.0 / 32.0
BASE_PAYMENT = 8
DEAL_SIZE = 13

ACTION_NAMES = tuple(
    [f"discard:{k}" for k in range(N_KINDS)]
    + ["chow_low", "chow_mid", "chow_high", "pung", "kong", "win", "pass"]
)


class Phase(IntEnum):
    AWAIT_DISCARD = 0
    AWAIT_CLAIMS = 1
    FINISHED = 2


class IllegalActionError(ValueError):
    pass


class NoPendingDecisionError(ValueError):
    pass


class GameState:
    """Full table state.  Treat instances as immutable values."""

    __slots__ = (
        "seed",
        "wall",
        "head",
        "tail",
        "hands",
        "melds",
        "discards",
        "turn",
        "phase",
        "last_discard",
        "drawn",
        "pending",
        "claims",
        "options",
        "winner",
        "fan",
        "rewards",
        "self_drawn",
    )

    def _clone(self) -> "GameState":
        s = GameState.__new__(GameState)
        s.seed = self.seed
        s.wall = self.wall
        s.head = self.head
        s.tail = self.tail
        s.hands = [list(h) for h in self.hands]
        s.melds = list(self.melds)
        s.discards = list(self.discards)
        s.turn = self.turn
        s.phase = self.phase
        s.last_discard = self.last_discard
        s.drawn = self.drawn
        s.pending = self.pending
        s.claims = self.claims
        s.options = self.options
        s.winner = self.winner
        s.fan = self.fan
        s.rewards = self.rewards
        s.self_drawn = self.self_drawn
        return s

    @property
    def wall_remaining(self) -> int:
        return self.tail - self.head

    @property
    def terminal(self) -> bool:
        return self.phase == Phase.FINISHED

    def seat_winds(self) -> tuple[int, int, int, int]:
        return (0, 1, 2, 3)

    def fingerprint(self) -> bytes:
        """Canonical byte encoding of the full state."""
        fan = None if self.fan is None else (self.fan.total, self.fan.names())
        rec = (
            self.seed,
            self.head,
            self.tail,
            tuple(tuple(h) for h in self.hands),
            tuple(tuple((int(m.kind), m.base, m.claimed_from) for m in ms) for ms in self.melds),
            tuple(self.discards),
            self.turn,
            int(self.phase),
            self.last_discard,
            self.drawn,
            self.pending,
            self.claims,
            tuple(sorted(self.options.items())),
            self.winner,
            fan,
            self.rewards,
            self.self_drawn,
        )
        return repr(rec).encode()

    def tile_multiset(self) -> list[int]:
        """Counts of every tile accounted for anywhere on the table."""
        counts = [0] * N_KINDS
        for k in self.wall[self.head:self.tail]:
            counts[k] += 1
        for h in self.hands:
            for k in range(N_KINDS):
                counts[k] += h[k]
        for ms in self.melds:
            for m in ms:
                for k in m.tiles:
                    counts[k] += 1
        for pile in self.discards:
            for k in pile:
                counts[k] += 1
        if self.phase == Phase.AWAIT_CLAIMS:
            counts[self.last_discard[0]] += 1
        return counts


def reset(seed: int) -> GameState:
    wall = shuffle_wall(seed).tiles
    s = GameState.__new__(GameState)
    s.seed = seed
    s.wall = wall
    hands = []
    for seat in range(4):
        h = [0] * N_KINDS
        for k in wall[seat * DEAL_SIZE:(seat + 1) * DEAL_SIZE]:
            h[k] += 1
        hands.append(h)
    s.hands = hands
    s.head = 4 * DEAL_SIZE
    s.tail = len(wall)
    s.melds = [(), (), (), ()]
    s.discards = [(), (), (), ()]
    s.last_discard = None
    s.pending = ()
    s.claims = ()
    s.winner = None
    s.fan = None
    s.rewards = (0.0, 0.0, 0.0, 0.0)
    s.self_drawn = False
    _draw(s, 0, from_tail=False)
    return s


# ---------------------------------------------------------------------------
# internals; these mutate a freshly cloned state


def _draw(s: GameState, seat: int, from_tail: bool) -> None:
    if from_tail:
        s.tail -= 1
        k = s.wall[s.tail]
    else:
        k = s.wall[s.head]
        s.head += 1
    s.hands[seat][k] += 1
    s.turn = seat
    s.drawn = k
    s.phase = Phase.AWAIT_DISCARD
    s.last_discard = None
    s.pending = ()
    s.claims = ()
    s.options = {seat: _turn_options(s, seat)}


def _kong_candidate(s: GameState, seat: int) -> Optional[int]:
    hand = s.hands[seat]
    pungs = {m.base for m in s.melds[seat] if m.kind == MeldKind.PUNG}
    for k in range(N_KINDS):
        if hand[k] == 4 or (hand[k] and k in pungs):
            return k
    return None


def _turn_options(s: GameState, seat: int) -> tuple[int, ...]:
    hand = s.hands[seat]
    opts = [k for k in range(N_KINDS) if hand[k]]
    if s.drawn is not None:
        if s.tail - s.head > 0 and _kong_candidate(s, seat) is not None:
            opts.append(KONG)
        melds = s.melds[seat]
        if is_winning_shape(hand, len(melds)):
            ctx = WinContext(self_drawn=True, last_tile=s.tail == s.head, seat_wind=seat)
            if score(hand, melds, ctx).is_legal_win:
                opts.append(WIN)
    return tuple(opts)


def _discard_win_fan(s: GameState, seat: int, tile: int) -> int:
    hand = s.hands[seat]
    melds = s.melds[seat]
    hand[tile] += 1
    try:
        if not is_winning_shape(hand, len(melds)):
            return 0
        ctx = WinContext(self_drawn=False, last_tile=s.tail == s.head, seat_wind=seat)
        return score(hand, melds, ctx).total
    finally:
        hand[tile] -= 1


def _claim_options(s: GameState, discarder: int, tile: int) -> dict:
    options = {}
    remaining = s.tail - s.head
    for off in (1, 2, 3):
        seat = (discarder + off) % 4
        hand = s.hands[seat]
        opts = []
        if off == 1 and tile < 27:
            r = tile % 9
            if r <= 6 and hand[tile + 1] and hand[tile + 2]:
                opts.append(CHOW_LOW)
            if 1 <= r <= 7 and hand[tile - 1] and hand[tile + 1]:
                opts.append(CHOW_MID)
            if r >= 2 and hand[tile - 2] and hand[tile - 1]:
                opts.append(CHOW_HIGH)
        c = hand[tile]
        if c >= 2:
            opts.append(PUNG)
        if c >= 3 and remaining > 0:
            opts.append(KONG)
        if _discard_win_fan(s, seat, tile) >= 8:
            opts.append(WIN)
        if opts:
            opts.append(PASS)
            options[seat] = tuple(opts)
    return options


def _settle(s: GameState, winner: int, fan_result, discarder: Optional[int]) -> None:
    fan = fan_result.total
    pay = [0.0] * 4
    for seat in range(4):
        if seat == winner:
            continue
        amount = BASE_PAYMENT + fan if (discarder is None or seat == discarder) else BASE_PAYMENT
        pay[seat] -= amount
        pay[winner] += amount
    s.rewards = tuple(p * REWARD_SCALE for p in pay)
    s.winner = winner
    s.fan = fan_result
    s.self_drawn = discarder is None
    s.phase = Phase.FINISHED
    s.options = {}
    s.pending = ()


def _finish_draw(s: GameState) -> None:
    s.phase = Phase.FINISHED
    s.options = {}
    s.pending = ()
    s.rewards = (0.0, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# public API


def legal_action_ids(state: GameState, seat: int) -> tuple[int, ...]:
    if state.phase == Phase.FINISHED:
        raise NoPendingDecisionError("game is finished")
    opts = state.options.get(seat)
    if opts is not None:
        return opts
    if state.phase == Phase.AWAIT_CLAIMS and seat != state.last_discard[1]:
        return (PASS,)
    raise NoPendingDecisionError(f"seat {seat} has no pending decision")


def legal_actions(state: GameState, seat: int) -> np.ndarray:
    mask = np.zeros(N_ACTIONS, dtype=bool)
    mask[list(legal_action_ids(state, seat))] = True
    return mask


def next_actor(state: GameState) -> Optional[int]:
    """Seat whose decision the driver should collect next, or None when finished."""
    if state.phase == Phase.AWAIT_DISCARD:
        return state.turn
    if state.phase == Phase.AWAIT_CLAIMS:
        return state.pending[0]
    return None


def step(state: GameState, seat: int, action: int) -> tuple[GameState, bool, tuple]:
    if state.phase == Phase.FINISHED:
        raise IllegalActionError("game is already finished")
    action = int(action)
    opts = state.options.get(seat)
    if state.phase == Phase.AWAIT_CLAIMS:
        if opts is None or seat not in state.pending:
            if action == PASS and seat != state.last_discard[1] and seat not in dict(state.claims):
                return state, False, (0.0, 0.0, 0.0, 0.0)
            raise IllegalActionError(f"seat {seat} cannot act now")
        if action not in opts:
            raise IllegalActionError(f"action {ACTION_NAMES[action]} illegal for seat {seat}")
        s = state._clone()
        s.claims = state.claims + ((seat, action),)
        s.pending = tuple(p for p in state.pending if p != seat)
        if s.pending:
            return s, False, (0.0, 0.0, 0.0, 0.0)
        return _finish_claims(s)

    if seat != state.turn or opts is None:
        raise IllegalActionError(f"seat {seat} cannot act now; seat {state.turn} to discard")
    if action not in opts:
        raise IllegalActionError(f"action {ACTION_NAMES[action]} illegal for seat {seat}")
    s = state._clone()
    if action == WIN:
        hand = s.hands[seat]
        ctx = WinContext(self_drawn=True, last_tile=s.tail == s.head, seat_wind=seat)
        _settle(s, seat, score(hand, s.melds[seat], ctx), None)
        return s, True, s.rewards
    if action == KONG:
        k = _kong_candidate(s, seat)
        hand = s.hands[seat]
        if hand[k] == 4:
            hand[k] = 0
            s.melds[seat] = s.melds[seat] + (Meld(MeldKind.CONCEALED_KONG, k),)
        else:
            hand[k] -= 1
            s.melds[seat] = tuple(
                Meld(MeldKind.EXPOSED_KONG, k, m.claimed_from) if (m.kind == MeldKind.PUNG and m.base == k) else m
                for m in s.melds[seat]
            )
        _draw(s, seat, from_tail=True)
        return s, False, (0.0, 0.0, 0.0, 0.0)
    # discard
    s.hands[seat][action] -= 1
    s.drawn = None
    s.last_discard = (action, seat)
    options = _claim_options(s, seat, action)
    s.options = options
    s.claims = ()
    s.phase = Phase.AWAIT_CLAIMS
    s.pending = tuple(p for p in ((seat + 1) % 4, (seat + 2) % 4, (seat + 3) % 4) if p in options)
    if s.pending:
        return s, False, (0.0, 0.0, 0.0, 0.0)
    return _finish_claims(s)


def _finish_claims(s: GameState):
    s = claim_resolution(s, dict(s.claims), _inplace=True)
    return s, s.phase == Phase.FINISHED, s.rewards


def claim_resolution(state: GameState, claims: dict, _inplace: bool = False) -> GameState:
    """Resolve simultaneous claims on the last discard by priority."""
    if state.phase != Phase.AWAIT_CLAIMS:
        raise IllegalActionError("no discard awaiting claims")
    s = state if _inplace else state._clone()
    tile, discarder = s.last_discard
    order = [(discarder + off) % 4 for off in (1, 2, 3)]
    for seat, action in claims.items():
        if action != PASS and action not in s.options.get(seat, ()):
            raise IllegalActionError(f"claim {ACTION_NAMES[action]} illegal for seat {seat}")
    chosen = None
    for wanted in ((WIN,), (PUNG, KONG), (CHOW_LOW, CHOW_MID, CHOW_HIGH)):
        for seat in order:
            if claims.get(seat) in wanted:
                chosen = (seat, claims[seat])
                break
        if chosen:
            break
    s.claims = ()
    s.pending = ()
    if chosen is None:
        s.discards[discarder] = s.discards[discarder] + (tile,)
        s.last_discard = None
        if s.tail - s.head <= 0:
            _finish_draw(s)
            return s
        _draw(s, (discarder + 1) % 4, from_tail=False)
        return s
    seat, action = chosen
    hand = s.hands[seat]
    if action == WIN:
        hand[tile] += 1
        ctx = WinContext(self_drawn=False, last_tile=s.tail == s.head, seat_wind=seat)
        _settle(s, seat, score(hand, s.melds[seat], ctx), discarder)
        return s
    s.last_discard = None
    if action == KONG:
        hand[tile] -= 3
        s.melds[seat] = s.melds[seat] + (Meld(MeldKind.EXPOSED_KONG, tile, discarder),)
        _draw(s, seat, from_tail=True)
        return s
    if action == PUNG:
        hand[tile] -= 2
        meld = Meld(MeldKind.PUNG, tile, discarder)
    else:
        base = tile - (action - CHOW_LOW)
        for k in (base, base + 1, base + 2):
            if k != tile:
                hand[k] -= 1
        meld = Meld(MeldKind.CHOW, base, discarder)
    s.melds[seat] = s.melds[seat] + (meld,)
    s.turn = seat
    s.drawn = None
    s.phase = Phase.AWAIT_DISCARD
    s.options = {seat: _turn_options(s, seat)}
    return s


# ---------------------------------------------------------------------------
# observation encoding

FEATURE_LAYOUT = (
    ("hand_thermometer", 4 * N_KINDS),
    ("meld_tiles_by_relative_seat", 4 * N_KINDS),
    ("concealed_kongs_by_relative_seat", 4),
    ("discard_counts_by_relative_seat", 4 * N_KINDS),
    ("discard_recency_by_relative_seat", 4 * N_KINDS),
    ("unseen_fraction", N_KINDS),
    ("wall_remaining", 1),
    ("seat_wind", 4),
    ("last_discard_tile", N_KINDS),
    ("last_discarder_relative_seat", 4),
    ("phase", 2),
    ("legal_mask", N_ACTIONS),
    ("drawn_tile", N_KINDS),
    ("discard_keeps_best_shanten", N_KINDS),
    ("discard_keeps_pairs_shanten", N_KINDS),
    ("shanten_summary", 3),
    ("claim_shanten_gain", 5),
)
FEATURE_OFFSETS = {}
_off = 0
for _name, _size in FEATURE_LAYOUT:
    FEATURE_OFFSETS[_name] = (_off, _off + _size)
    _off += _size
FEATURE_LEN = _off
LAYOUT_VERSION = hashlib.sha1(repr((FEATURE_LAYOUT, ACTION_NAMES)).encode()).hexdigest()[:12]
_MAX_WALL = 136 - 4 * DEAL_SIZE - 1


def _shanten_features(f: np.ndarray, hand: list, n_melds: int, legal_ids: tuple, ld) -> None:
    o_keep = FEATURE_OFFSETS["discard_keeps_best_shanten"][0]
    o_pairs = FEATURE_OFFSETS["discard_keeps_pairs_shanten"][0]
    o_sum = FEATURE_OFFSETS["shanten_summary"][0]
    o_claim = FEATURE_OFFSETS["claim_shanten_gain"][0]
    concealed = n_melds == 0
    s_now = keys_shanten(split_groups(hand), n_melds, True)
    f[o_sum] = (s_now + 1) / 9.0
    f[o_sum + 1] = (seven_pairs_shanten(hand) + 1) / 7.0 if concealed else 1.0
    f[o_sum + 2] = (thirteen_orphans_shanten(hand) + 1) / 14.0 if concealed else 1.0
    if legal_ids and legal_ids[0] < N_KINDS:
        after = discard_shanten(hand, n_melds)
        best = min(after.values())
        for k, v in after.items():
            if v == best:
                f[o_keep + k] = 1.0
        if concealed:
            sp = seven_pairs_shanten(hand)
            for k in after:
                if hand[k] % 2 == 1 or sp < 0:
                    f[o_pairs + k] = 1.0
    if ld is not None:
        tile = ld[0]
        for a in legal_ids:
            if not CHOW_LOW <= a <= KONG:
                continue
            h = list(hand)
            if a == KONG:
                h[tile] -= 3
                s_after = keys_shanten(split_groups(h), n_melds + 1, True)
            else:
                if a == PUNG:
                    h[tile] -= 2
                else:
                    base = tile - (a - CHOW_LOW)
                    for k in (base, base + 1, base + 2):
                        if k != tile:
                            h[k] -= 1
                s_after = min(discard_shanten(h, n_melds + 1).values())
            f[o_claim + a - CHOW_LOW] = max(-1.0, min(1.0, (s_now - s_after + 1) / 2.0))


@dataclass(frozen=True, eq=False)
class Observation:
    """One seat's view.  Opponents' concealed tiles and the wall order are absent."""

    seat: int
    hand: tuple
    melds: tuple  # per absolute seat; other seats' concealed kongs appear as None
    discards: tuple
    wall_remaining: int
    last_discard: Optional[tuple]
    drawn: Optional[int]
    phase: int
    legal_ids: tuple
    features: np.ndarray
    legal_mask: np.ndarray

    def visible_melds(self, seat: int) -> tuple:
        return self.melds[seat]


def encode(state: GameState, seat: int, legal_ids: Optional[Sequence[int]] = None) -> Observation:
    if legal_ids is None:
        legal_ids = legal_action_ids(state, seat)
    legal_ids = tuple(legal_ids)
    # filled as a Python list and converted once; far cheaper than many small numpy writes
    f = [0.0] * FEATURE_LEN
    hand = state.hands[seat]
    seen = list(hand)
    for k, c in enumerate(hand):
        for level in range(min(c, 4)):
            f[level * N_KINDS + k] = 1.0
    melds_view = []
    for abs_seat in range(4):
        rel = (abs_seat - seat) % 4
        view = []
        n_ck = 0
        o_m = 136 + rel * N_KINDS
        for m in state.melds[abs_seat]:
            if m.kind == MeldKind.CONCEALED_KONG:
                n_ck += 1
                if abs_seat != seat:
                    view.append(None)
                    continue
            view.append(m)
            for k in m.tiles:
                f[o_m + k] += 0.25
                seen[k] += 1
        melds_view.append(tuple(view))
        f[272 + rel] = n_ck / 4.0
        pile = state.discards[abs_seat]
        if pile:
            o_c = 276 + rel * N_KINDS
            o_r = 412 + rel * N_KINDS
            n = len(pile)
            for i, k in enumerate(pile):
                f[o_c + k] += 0.25
                seen[k] += 1
                f[o_r + k] = (i + 1.0) / n
    ld = state.last_discard if state.phase == Phase.AWAIT_CLAIMS else None
    if ld is not None:
        seen[ld[0]] += 1
        f[587 + ld[0]] = 1.0
        f[621 + (ld[1] - seat) % 4] = 1.0
    for k in range(N_KINDS):
        f[548 + k] = min(max(4.0 - seen[k], 0.0), 4.0) / 4.0
    remaining = state.tail - state.head
    f[582] = remaining / _MAX_WALL
    f[583 + seat] = 1.0
    if state.phase != Phase.FINISHED:
        f[625 + int(state.phase)] = 1.0
    for a in legal_ids:
        f[627 + a] = 1.0
    drawn = state.drawn if (state.phase == Phase.AWAIT_DISCARD and state.turn == seat) else None
    if drawn is not None:
        f[668 + drawn] = 1.0
    _shanten_features(f, hand, len(state.melds[seat]), legal_ids, ld)
    mask = np.zeros(N_ACTIONS, dtype=bool)
    mask[list(legal_ids)] = True
    return Observation(
        seat=seat,
        hand=tuple(hand),
        melds=tuple(melds_view),
        discards=tuple(state.discards),
        wall_remaining=remaining,
        last_discard=ld,
        drawn=drawn,
        phase=int(state.phase),
        legal_ids=legal_ids,
        features=np.array(f),
        legal_mask=mask,
    )
