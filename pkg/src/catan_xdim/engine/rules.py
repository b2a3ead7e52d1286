"""Two-player, no-trade Catan rules: legal move generation and transitions.

``apply`` is pure (it copies the state); ``apply_inplace`` mutates and is
what the simulation loops use.  Both validate the action against
``legal_actions`` unless ``check=False`` is passed by a caller that picked
the action from that list itself.
"""

from __future__ import annotations

import random
from typing import Optional

from catan_xdim.engine.board import (
    BRICK,
    DESERT,
    GENERIC_HARBOR,
    GRAIN,
    LUMBER,
    N_HEXES,
    N_INTERSECTIONS,
    N_PATHS,
    ORE,
    TOPOLOGY,
    WOOL,
    generate_board,
)
from catan_xdim.engine.discard import KEEP4, resolve_discard
from catan_xdim.engine.state import (
    DEFAULT_TURN_CAP,
    DEV_INVENTORY,
    KNIGHT,
    MONOPOLY,
    ROAD_BUILDING,
    VICTORY_POINT,
    YEAR_OF_PLENTY,
    Action,
    ActionKind as K,
    GameState,
    IllegalAction,
    Observation,
    OpponentSummary,
    OwnSummary,
    Phase,
    TransitionRecord,
)

VP_TO_WIN = 10
LONGEST_ROAD_MIN = 5
LARGEST_ARMY_MIN = 3
SETUP_ORDER = (0, 1, 1, 0)

_INT_PATHS = TOPOLOGY.int_paths
_INT_NEIGHBORS = TOPOLOGY.int_neighbors
_INT_HEXES = TOPOLOGY.int_hexes
_PATH_ENDS = TOPOLOGY.path_ends
_HEX_INTS = TOPOLOGY.hex_intersections

# Pre-built action values; legal_actions hands these out without allocating.
PLACE_SETTLEMENT = tuple(Action(K.PLACE_SETTLEMENT, i) for i in range(N_INTERSECTIONS))
PLACE_CITY = tuple(Action(K.PLACE_CITY, i) for i in range(N_INTERSECTIONS))
PLACE_ROAD = tuple(Action(K.PLACE_ROAD, p) for p in range(N_PATHS))
ROBBER_STEAL = tuple(Action(K.MOVE_ROBBER_STEAL, h) for h in range(N_HEXES))
ROBBER_NO_STEAL = tuple(Action(K.MOVE_ROBBER_NO_STEAL, h) for h in range(N_HEXES))
ROLL_DICE = Action(K.ROLL_DICE)
END_TURN = Action(K.END_TURN)
DISCARD_KEEP = tuple(Action(K.DISCARD_KEEP, keep) for keep in KEEP4)
BANK_TRADE = tuple(
    tuple(Action(K.BANK_TRADE, (g, r)) if r != g else None for r in range(5))
    for g in range(5)
)
BUY_DEV_CARD = Action(K.BUY_DEV_CARD)
PLAY_KNIGHT = Action(K.PLAY_KNIGHT)
PLAY_ROAD_BUILDING = Action(K.PLAY_ROAD_BUILDING)
PLAY_YEAR_OF_PLENTY = Action(K.PLAY_YEAR_OF_PLENTY)
CHOOSE_FREE_RESOURCE = tuple(Action(K.CHOOSE_FREE_RESOURCE, r) for r in range(5))
PLAY_MONOPOLY = tuple(Action(K.PLAY_MONOPOLY, r) for r in range(5))


def new_game(rng: random.Random, turn_cap: int = DEFAULT_TURN_CAP) -> GameState:
    layout = generate_board(rng)
    deck = [card for card, n in enumerate(DEV_INVENTORY) for _ in range(n)]
    rng.shuffle(deck)
    return GameState(layout, deck, turn_cap)


# ---------------------------------------------------------------------------
# Placement queries
# ---------------------------------------------------------------------------

def _free_spot(building, i) -> bool:
    if building[i]:
        return False
    for n in _INT_NEIGHBORS[i]:
        if building[n]:
            return False
    return True


def settlement_spots(state: GameState, player: int) -> list[int]:
    building = state.building
    if state.phase == Phase.SETUP_SETTLEMENT:
        return [i for i in range(N_INTERSECTIONS) if _free_spot(building, i)]
    seen = set()
    for p in state.players[player].roads:
        for i in _PATH_ENDS[p]:
            if i not in seen and _free_spot(building, i):
                seen.add(i)
    return sorted(seen)


def road_spots(state: GameState, player: int) -> list[int]:
    road_owner = state.road_owner
    if state.phase == Phase.SETUP_ROAD:
        return [p for p in _INT_PATHS[state.last_settlement] if road_owner[p] < 0]
    owner = state.owner
    me = state.players[player]
    spots = set()
    for p in me.roads:
        for i in _PATH_ENDS[p]:
            o = owner[i]
            if o >= 0 and o != player:
                continue
            for q in _INT_PATHS[i]:
                if road_owner[q] < 0:
                    spots.add(q)
    for i in me.settlements | me.cities:
        for q in _INT_PATHS[i]:
            if road_owner[q] < 0:
                spots.add(q)
    return sorted(spots)


# ---------------------------------------------------------------------------
# Legal actions
# ---------------------------------------------------------------------------

def _dev_actions(state: GameState, acts: list) -> None:
    if state.dev_played:
        return
    me = state.players[state.current]
    old = me.dev_old
    if old[KNIGHT]:
        acts.append(PLAY_KNIGHT)
    if old[ROAD_BUILDING] and me.roads_left and road_spots(state, state.current):
        acts.append(PLAY_ROAD_BUILDING)
    if old[YEAR_OF_PLENTY] and sum(state.bank):
        acts.append(PLAY_YEAR_OF_PLENTY)
    if old[MONOPOLY]:
        acts.extend(PLAY_MONOPOLY)


def _main_actions(state: GameState) -> list:
    p = state.current
    me = state.players[p]
    b, l, o, g, w = me.resources
    acts = [END_TURN]
    if b and l and me.roads_left:
        acts.extend(PLACE_ROAD[q] for q in road_spots(state, p))
    if b and l and g and w and me.settlements_left:
        acts.extend(PLACE_SETTLEMENT[i] for i in settlement_spots(state, p))
    if o >= 3 and g >= 2 and me.cities_left:
        acts.extend(PLACE_CITY[i] for i in sorted(me.settlements))
    if o and g and w and state.dev_deck:
        acts.append(BUY_DEV_CARD)
    bank = state.bank
    res = me.resources
    rates = me.trade_rates
    for give in range(5):
        if res[give] >= rates[give]:
            row = BANK_TRADE[give]
            for recv in range(5):
                if recv != give and bank[recv]:
                    acts.append(row[recv])
    _dev_actions(state, acts)
    return acts


def _robber_actions(state: GameState) -> list:
    opp = 1 - state.current
    owner = state.owner
    can_steal = any(state.players[opp].resources)
    acts = []
    for h in range(N_HEXES):
        if h == state.robber:
            continue
        if can_steal and any(owner[i] == opp for i in _HEX_INTS[h]):
            acts.append(ROBBER_STEAL[h])
        else:
            acts.append(ROBBER_NO_STEAL[h])
    return acts


def legal_actions(state: GameState) -> list:
    phase = state.phase
    if phase == Phase.MAIN:
        return _main_actions(state)
    if phase == Phase.PRE_ROLL:
        acts = [ROLL_DICE]
        _dev_actions(state, acts)
        return acts
    if phase == Phase.SETUP_SETTLEMENT:
        return [PLACE_SETTLEMENT[i] for i in settlement_spots(state, state.current)]
    if phase == Phase.SETUP_ROAD or phase == Phase.FREE_ROADS:
        return [PLACE_ROAD[q] for q in road_spots(state, state.current)]
    if phase == Phase.DISCARD:
        hand = state.players[state.discard_queue[0][0]].resources
        return [a for a, keep in zip(DISCARD_KEEP, KEEP4)
                if keep[0] <= hand[0] and keep[1] <= hand[1] and keep[2] <= hand[2]
                and keep[3] <= hand[3] and keep[4] <= hand[4]]
    if phase == Phase.MOVE_ROBBER:
        return _robber_actions(state)
    if phase == Phase.FREE_RESOURCES:
        return [CHOOSE_FREE_RESOURCE[r] for r in range(5) if state.bank[r]]
    return []


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def victory_points(state: GameState, player: int, include_hidden: bool = True) -> int:
    me = state.players[player]
    vp = len(me.settlements) + 2 * len(me.cities)
    if me.has_longest_road:
        vp += 2
    if me.has_largest_army:
        vp += 2
    if include_hidden:
        vp += me.dev_new[VICTORY_POINT] + me.dev_old[VICTORY_POINT]
    return vp


def longest_road(state: GameState, player: int) -> int:
    """Longest trail of distinct own roads; opponent buildings cut through-traffic."""
    roads = state.players[player].roads
    if not roads:
        return 0
    owner = state.owner
    opp = 1 - player

    def extend(i: int, used: set) -> int:
        if used and owner[i] == opp:
            return 0
        best = 0
        for q in _INT_PATHS[i]:
            if q in roads and q not in used:
                used.add(q)
                a, b = _PATH_ENDS[q]
                n = 1 + extend(b if a == i else a, used)
                used.discard(q)
                if n > best:
                    best = n
        return best

    best = 0
    for i in {i for q in roads for i in _PATH_ENDS[q]}:
        n = extend(i, set())
        if n > best:
            best = n
    return best


def _update_longest_road(state: GameState) -> None:
    p0, p1 = state.players
    holder = 0 if p0.has_longest_road else 1 if p1.has_longest_road else -1
    lengths = (p0.road_length, p1.road_length)
    if holder >= 0:
        other = 1 - holder
        if lengths[other] > lengths[holder] and lengths[other] >= LONGEST_ROAD_MIN:
            state.players[holder].has_longest_road = False
            state.players[other].has_longest_road = True
        elif lengths[holder] < LONGEST_ROAD_MIN:
            state.players[holder].has_longest_road = False
        return
    for p in (0, 1):
        if lengths[p] >= LONGEST_ROAD_MIN and lengths[p] > lengths[1 - p]:
            state.players[p].has_longest_road = True


def _update_largest_army(state: GameState, player: int) -> None:
    me, opp = state.players[player], state.players[1 - player]
    if me.has_largest_army or me.army < LARGEST_ARMY_MIN or me.army <= opp.army:
        return
    me.has_largest_army = True
    opp.has_largest_army = False


# ---------------------------------------------------------------------------
# Transitions
# ---------------------------------------------------------------------------

def _pay(state: GameState, player: int, cost) -> None:
    res = state.players[player].resources
    bank = state.bank
    for r, n in cost:
        res[r] -= n
        bank[r] += n


ROAD_COST = ((BRICK, 1), (LUMBER, 1))
SETTLEMENT_COST = ((BRICK, 1), (LUMBER, 1), (GRAIN, 1), (WOOL, 1))
CITY_COST = ((ORE, 3), (GRAIN, 2))
DEV_COST = ((ORE, 1), (GRAIN, 1), (WOOL, 1))


def _place_settlement(state: GameState, player: int, i: int) -> None:
    me = state.players[player]
    state.building[i] = 1
    state.owner[i] = player
    me.settlements.add(i)
    me.settlements_left -= 1
    kind = state.layout.harbor_at[i]
    if kind == GENERIC_HARBOR:
        me.trade_rates = [min(r, 3) for r in me.trade_rates]
    elif kind >= 0:
        me.trade_rates[kind] = 2
    # a settlement between two opponent roads may cut their network
    opp = 1 - player
    road_owner = state.road_owner
    if sum(road_owner[q] == opp for q in _INT_PATHS[i]) >= 2:
        state.players[opp].road_length = longest_road(state, opp)
        _update_longest_road(state)


def _place_road(state: GameState, player: int, q: int) -> None:
    me = state.players[player]
    state.road_owner[q] = player
    me.roads.add(q)
    me.roads_left -= 1
    me.road_length = longest_road(state, player)
    _update_longest_road(state)


def _produce(state: GameState, roll: int):
    claims = ([0] * 5, [0] * 5)
    building, owner, robber = state.building, state.owner, state.robber
    for h, res, ints in state.layout.production[roll]:
        if h == robber:
            continue
        for i in ints:
            n = building[i]
            if n:
                claims[owner[i]][res] += n
    bank = state.bank
    got = ([0] * 5, [0] * 5)
    for r in range(5):
        c0, c1 = claims[0][r], claims[1][r]
        if c0 + c1 == 0:
            continue
        if c0 + c1 <= bank[r]:
            got[0][r], got[1][r] = c0, c1
        elif c0 == 0 or c1 == 0:
            # a single claimant takes whatever is left
            who = 0 if c0 else 1
            got[who][r] = bank[r]
        else:
            continue
        bank[r] -= got[0][r] + got[1][r]
    for p in (0, 1):
        res = state.players[p].resources
        for r in range(5):
            res[r] += got[p][r]
    return (tuple(got[0]), tuple(got[1]))


def _steal(state: GameState, thief: int, rng: random.Random) -> int:
    victim = state.players[1 - thief].resources
    k = rng.randrange(sum(victim))
    for r in range(5):
        if k < victim[r]:
            victim[r] -= 1
            state.players[thief].resources[r] += 1
            return r
        k -= victim[r]
    raise AssertionError("unreachable")


def _leave_free_roads(state: GameState) -> None:
    me = state.players[state.current]
    if state.free_remaining == 0 or me.roads_left == 0 or not road_spots(state, state.current):
        state.phase = state.return_phase


def apply_inplace(state: GameState, action: Action, rng: random.Random,
                  check: bool = True) -> TransitionRecord:
    if state.phase == Phase.TERMINAL:
        raise IllegalAction("game is over")
    if check and action not in legal_actions(state):
        raise IllegalAction(f"{action!r} is not legal in phase {state.phase.name}")

    kind, arg = action
    phase_before = state.phase
    actor = state.acting_player
    turn = state.turn
    p = state.current
    me = state.players[p]
    dice = produced = stolen = discarded = None

    if kind == K.ROLL_DICE:
        d1, d2 = rng.randint(1, 6), rng.randint(1, 6)
        dice = (d1, d2)
        state.has_rolled = True
        if d1 + d2 == 7:
            queue = []
            for who in (p, 1 - p):
                h = state.players[who].hand_size
                if h >= 7:
                    queue.append((who, h - h // 2))
            state.discard_queue = queue
            state.return_phase = Phase.MAIN
            state.phase = Phase.DISCARD if queue else Phase.MOVE_ROBBER
        else:
            produced = _produce(state, d1 + d2)
            state.phase = Phase.MAIN
    elif kind == K.END_TURN:
        for c in range(5):
            me.dev_old[c] += me.dev_new[c]
            me.dev_new[c] = 0
        state.current = 1 - p
        state.turn += 1
        state.dev_played = False
        state.has_rolled = False
        state.phase = Phase.PRE_ROLL
        if state.turn >= state.turn_cap:
            state.phase = Phase.TERMINAL
            state.winner = None
    elif kind == K.PLACE_ROAD:
        if phase_before == Phase.SETUP_ROAD:
            _place_road(state, p, arg)
            state.setup_step += 1
            if state.setup_step == 4:
                state.current = 0
                state.phase = Phase.PRE_ROLL
            else:
                state.current = SETUP_ORDER[state.setup_step]
                state.phase = Phase.SETUP_SETTLEMENT
        elif phase_before == Phase.FREE_ROADS:
            _place_road(state, p, arg)
            state.free_remaining -= 1
            _leave_free_roads(state)
        else:
            _pay(state, p, ROAD_COST)
            _place_road(state, p, arg)
    elif kind == K.PLACE_SETTLEMENT:
        if phase_before == Phase.SETUP_SETTLEMENT:
            _place_settlement(state, p, arg)
            if state.setup_step >= 2:
                gained = [0] * 5
                for h in _INT_HEXES[arg]:
                    r = state.layout.hex_kind[h]
                    if r != DESERT and state.bank[r]:
                        gained[r] += 1
                        state.bank[r] -= 1
                        me.resources[r] += 1
                produced = (tuple(gained), (0,) * 5) if p == 0 else ((0,) * 5, tuple(gained))
            state.last_settlement = arg
            state.phase = Phase.SETUP_ROAD
        else:
            _pay(state, p, SETTLEMENT_COST)
            _place_settlement(state, p, arg)
    elif kind == K.PLACE_CITY:
        _pay(state, p, CITY_COST)
        state.building[arg] = 2
        me.settlements.discard(arg)
        me.cities.add(arg)
        me.settlements_left += 1
        me.cities_left -= 1
    elif kind == K.BANK_TRADE:
        give, recv = arg
        rate = me.trade_rates[give]
        me.resources[give] -= rate
        state.bank[give] += rate
        me.resources[recv] += 1
        state.bank[recv] -= 1
    elif kind == K.BUY_DEV_CARD:
        _pay(state, p, DEV_COST)
        me.dev_new[state.dev_deck.pop()] += 1
    elif kind == K.DISCARD_KEEP:
        who, keep_count = state.discard_queue.pop(0)
        hand = state.players[who].resources
        discarded = resolve_discard(hand, arg, keep_count, rng)
        for r in range(5):
            hand[r] -= discarded[r]
            state.bank[r] += discarded[r]
        if not state.discard_queue:
            state.phase = Phase.MOVE_ROBBER
    elif kind == K.MOVE_ROBBER_STEAL or kind == K.MOVE_ROBBER_NO_STEAL:
        state.robber = arg
        if kind == K.MOVE_ROBBER_STEAL:
            stolen = _steal(state, p, rng)
        state.phase = state.return_phase
    elif kind == K.PLAY_KNIGHT:
        me.dev_old[KNIGHT] -= 1
        me.army += 1
        state.dev_played = True
        _update_largest_army(state, p)
        state.return_phase = Phase.MAIN if state.has_rolled else Phase.PRE_ROLL
        state.phase = Phase.MOVE_ROBBER
    elif kind == K.PLAY_ROAD_BUILDING:
        me.dev_old[ROAD_BUILDING] -= 1
        state.dev_played = True
        state.return_phase = Phase.MAIN if state.has_rolled else Phase.PRE_ROLL
        state.free_remaining = 2
        state.phase = Phase.FREE_ROADS
    elif kind == K.PLAY_YEAR_OF_PLENTY:
        me.dev_old[YEAR_OF_PLENTY] -= 1
        state.dev_played = True
        state.return_phase = Phase.MAIN if state.has_rolled else Phase.PRE_ROLL
        state.free_remaining = 2
        state.phase = Phase.FREE_RESOURCES
    elif kind == K.CHOOSE_FREE_RESOURCE:
        state.bank[arg] -= 1
        me.resources[arg] += 1
        state.free_remaining -= 1
        if state.free_remaining == 0 or not any(state.bank):
            state.phase = state.return_phase
    elif kind == K.PLAY_MONOPOLY:
        me.dev_old[MONOPOLY] -= 1
        state.dev_played = True
        opp = state.players[1 - p].resources
        me.resources[arg] += opp[arg]
        opp[arg] = 0
    else:  # pragma: no cover - exhaustive over ActionKind
        raise IllegalAction(f"unknown action kind {kind}")

    if (state.phase != Phase.TERMINAL and state.setup_step == 4
            and victory_points(state, state.current) >= VP_TO_WIN):
        state.winner = state.current
        state.phase = Phase.TERMINAL

    return TransitionRecord(
        turn=turn, player=actor, action=action, phase_before=phase_before,
        phase=state.phase, dice=dice, produced=produced, stolen=stolen,
        discarded=discarded,
    )


def apply(state: GameState, action: Action, rng: random.Random,
          check: bool = True) -> tuple[GameState, TransitionRecord]:
    new = state.copy()
    record = apply_inplace(new, action, rng, check=check)
    return new, record


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------

def observable(state: GameState, player: int) -> Observation:
    me = state.players[player]
    opp = state.players[1 - player]
    harbors = [0] * 6
    harbor_at = state.layout.harbor_at
    for i in me.settlements | me.cities:
        kind = harbor_at[i]
        if kind == GENERIC_HARBOR:
            harbors[0] = 1
        elif kind >= 0:
            harbors[1 + kind] = 1
    return Observation(
        player=player,
        layout=state.layout,
        road_owner=tuple(state.road_owner),
        building=tuple(state.building),
        owner=tuple(state.owner),
        robber=state.robber,
        me=OwnSummary(
            resources=tuple(me.resources), roads_left=me.roads_left,
            settlements_left=me.settlements_left, cities_left=me.cities_left,
            army=me.army, dev_new=tuple(me.dev_new), dev_old=tuple(me.dev_old),
            harbors=tuple(harbors), has_longest_road=me.has_longest_road,
            has_largest_army=me.has_largest_army,
        ),
        opponent=OpponentSummary(
            resource_total=sum(opp.resources), dev_total=opp.dev_total(),
            roads_left=opp.roads_left, settlements_left=opp.settlements_left,
            cities_left=opp.cities_left, army=opp.army,
            has_longest_road=opp.has_longest_road,
            has_largest_army=opp.has_largest_army,
        ),
        bank=tuple(state.bank),
        dev_deck_size=len(state.dev_deck),
        has_rolled=state.has_rolled,
        dev_played=state.dev_played,
        phase=state.phase,
        free_remaining=state.free_remaining,
        current=state.current,
        turn=state.turn,
    )


def play_random_game(rng: random.Random, turn_cap: int = DEFAULT_TURN_CAP,
                     state: Optional[GameState] = None) -> GameState:
    """Uniform-random playout to the end; handy for fuzzing and benchmarks."""
    if state is None:
        state = new_game(rng, turn_cap)
    while state.phase != Phase.TERMINAL:
        acts = legal_actions(state)
        apply_inplace(state, acts[rng.randrange(len(acts))], rng, check=False)
    return state
