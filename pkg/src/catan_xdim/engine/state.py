"""Game state containers, actions and phases."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Optional

from catan_xdim.engine.board import (
    N_INTERSECTIONS,
    N_PATHS,
    RESOURCE_NAMES,
    BoardLayout,
)

KNIGHT, ROAD_BUILDING, YEAR_OF_PLENTY, MONOPOLY, VICTORY_POINT = range(5)
DEV_NAMES = ("Knight", "RoadBuilding", "YearOfPlenty", "Monopoly", "VictoryPoint")
DEV_INVENTORY = (14, 2, 2, 2, 5)

BANK_START = 19
MAX_ROADS, MAX_SETTLEMENTS, MAX_CITIES = 15, 5, 4
DEFAULT_TURN_CAP = 500


class IllegalAction(Exception):
    """An action outside ``legal_actions`` was passed to ``apply``."""


class Phase(IntEnum):
    SETUP_SETTLEMENT = 0
    SETUP_ROAD = 1
    PRE_ROLL = 2
    MAIN = 3
    DISCARD = 4
    MOVE_ROBBER = 5
    FREE_ROADS = 6
    FREE_RESOURCES = 7
    TERMINAL = 8


class ActionKind(IntEnum):
    PLACE_SETTLEMENT = 0
    PLACE_ROAD = 1
    PLACE_CITY = 2
    MOVE_ROBBER_STEAL = 3
    MOVE_ROBBER_NO_STEAL = 4
    ROLL_DICE = 5
    END_TURN = 6
    DISCARD_KEEP = 7
    BANK_TRADE = 8
    BUY_DEV_CARD = 9
    PLAY_KNIGHT = 10
    PLAY_ROAD_BUILDING = 11
    PLAY_YEAR_OF_PLENTY = 12
    CHOOSE_FREE_RESOURCE = 13
    PLAY_MONOPOLY = 14


ACTION_NAMES = (
    "PlaceSettlement", "PlaceRoad", "PlaceCity", "MoveRobberSteal",
    "MoveRobberNoSteal", "RollDice", "EndTurn", "DiscardKeep", "BankTrade",
    "BuyDevCard", "PlayKnight", "PlayRoadBuilding", "PlayYearOfPlenty",
    "ChooseFreeResource", "PlayMonopoly",
)
_NAME_TO_KIND = {name: ActionKind(i) for i, name in enumerate(ACTION_NAMES)}


class Action(NamedTuple):
    """One move.  ``arg`` depends on the kind: an element id for board
    placements and robber moves, a resource index, a ``(give, receive)`` pair
    for bank trades, a 5-tuple of kept counts for discards, else ``None``."""

    kind: ActionKind
    arg: object = None

    def __repr__(self) -> str:
        name = ACTION_NAMES[self.kind]
        return name if self.arg is None else f"{name}({self.arg})"

    def to_json(self) -> dict:
        out: dict = {"type": ACTION_NAMES[self.kind]}
        k = self.kind
        if k in (ActionKind.PLACE_SETTLEMENT, ActionKind.PLACE_CITY):
            out["intersection"] = self.arg
        elif k == ActionKind.PLACE_ROAD:
            out["path"] = self.arg
        elif k in (ActionKind.MOVE_ROBBER_STEAL, ActionKind.MOVE_ROBBER_NO_STEAL):
            out["hex"] = self.arg
        elif k == ActionKind.DISCARD_KEEP:
            out["keep"] = list(self.arg)
        elif k == ActionKind.BANK_TRADE:
            out["give"] = RESOURCE_NAMES[self.arg[0]]
            out["receive"] = RESOURCE_NAMES[self.arg[1]]
        elif k in (ActionKind.CHOOSE_FREE_RESOURCE, ActionKind.PLAY_MONOPOLY):
            out["resource"] = RESOURCE_NAMES[self.arg]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Action":
        kind = _NAME_TO_KIND[obj["type"]]
        if "intersection" in obj:
            return cls(kind, obj["intersection"])
        if "path" in obj:
            return cls(kind, obj["path"])
        if "hex" in obj:
            return cls(kind, obj["hex"])
        if "keep" in obj:
            return cls(kind, tuple(obj["keep"]))
        if "give" in obj:
            return cls(kind, (RESOURCE_NAMES.index(obj["give"]),
                              RESOURCE_NAMES.index(obj["receive"])))
        if "resource" in obj:
            return cls(kind, RESOURCE_NAMES.index(obj["resource"]))
        return cls(kind)


class PlayerState:
    __slots__ = (
        "resources", "roads_left", "settlements_left", "cities_left", "army",
        "dev_new", "dev_old", "has_longest_road", "has_largest_army",
        # caches derived from the board
        "roads", "settlements", "cities", "trade_rates", "road_length",
    )

    def __init__(self):
        self.resources = [0] * 5
        self.roads_left = MAX_ROADS
        self.settlements_left = MAX_SETTLEMENTS
        self.cities_left = MAX_CITIES
        self.army = 0
        self.dev_new = [0] * 5
        self.dev_old = [0] * 5
        self.has_longest_road = False
        self.has_largest_army = False
        self.roads: set[int] = set()
        self.settlements: set[int] = set()
        self.cities: set[int] = set()
        self.trade_rates = [4] * 5
        self.road_length = 0

    def copy(self) -> "PlayerState":
        new = PlayerState.__new__(PlayerState)
        new.resources = self.resources[:]
        new.roads_left = self.roads_left
        new.settlements_left = self.settlements_left
        new.cities_left = self.cities_left
        new.army = self.army
        new.dev_new = self.dev_new[:]
        new.dev_old = self.dev_old[:]
        new.has_longest_road = self.has_longest_road
        new.has_largest_army = self.has_largest_army
        new.roads = set(self.roads)
        new.settlements = set(self.settlements)
        new.cities = set(self.cities)
        new.trade_rates = self.trade_rates[:]
        new.road_length = self.road_length
        return new

    @property
    def hand_size(self) -> int:
        return sum(self.resources)

    def dev_total(self) -> int:
        return sum(self.dev_new) + sum(self.dev_old)


class GameState:
    """Complete authoritative game situation.

    Occupancy is stored as flat lists: ``road_owner[path]`` and
    ``owner[intersection]`` are -1 when empty, ``building[intersection]`` is
    0 (none), 1 (settlement) or 2 (city).
    """

    __slots__ = (
        "layout", "road_owner", "building", "owner", "robber", "players",
        "bank", "dev_deck", "phase", "current", "turn", "dev_played",
        "has_rolled", "setup_step", "last_settlement", "discard_queue",
        "return_phase", "free_remaining", "winner", "turn_cap",
    )

    def __init__(self, layout: BoardLayout, dev_deck: list[int], turn_cap: int):
        self.layout = layout
        self.road_owner = [-1] * N_PATHS
        self.building = [0] * N_INTERSECTIONS
        self.owner = [-1] * N_INTERSECTIONS
        self.robber = layout.desert
        self.players = [PlayerState(), PlayerState()]
        self.bank = [BANK_START] * 5
        self.dev_deck = dev_deck
        self.phase = Phase.SETUP_SETTLEMENT
        self.current = 0
        self.turn = 0
        self.dev_played = False
        self.has_rolled = False
        self.setup_step = 0
        self.last_settlement = -1
        self.discard_queue: list[tuple[int, int]] = []
        self.return_phase = Phase.MAIN
        self.free_remaining = 0
        # None while playing or on a turn-cap draw, else the winning seat
        self.winner: Optional[int] = None
        self.turn_cap = turn_cap

    def copy(self) -> "GameState":
        new = GameState.__new__(GameState)
        new.layout = self.layout
        new.road_owner = self.road_owner[:]
        new.building = self.building[:]
        new.owner = self.owner[:]
        new.robber = self.robber
        new.players = [p.copy() for p in self.players]
        new.bank = self.bank[:]
        new.dev_deck = self.dev_deck[:]
        new.phase = self.phase
        new.current = self.current
        new.turn = self.turn
        new.dev_played = self.dev_played
        new.has_rolled = self.has_rolled
        new.setup_step = self.setup_step
        new.last_settlement = self.last_settlement
        new.discard_queue = self.discard_queue[:]
        new.return_phase = self.return_phase
        new.free_remaining = self.free_remaining
        new.winner = self.winner
        new.turn_cap = self.turn_cap
        return new

    @property
    def acting_player(self) -> int:
        if self.phase == Phase.DISCARD:
            return self.discard_queue[0][0]
        return self.current

    @property
    def keep_count(self) -> int:
        """Cards the acting player must keep (Discard phase only)."""
        return self.discard_queue[0][1]

    @property
    def is_terminal(self) -> bool:
        return self.phase == Phase.TERMINAL

    def fingerprint(self) -> tuple:
        """Hashable summary of everything, used to compare replays."""
        players = tuple(
            (tuple(p.resources), p.roads_left, p.settlements_left, p.cities_left,
             p.army, tuple(p.dev_new), tuple(p.dev_old), p.has_longest_road,
             p.has_largest_army)
            for p in self.players
        )
        return (
            tuple(self.road_owner), tuple(self.building), tuple(self.owner),
            self.robber, players, tuple(self.bank), tuple(self.dev_deck),
            int(self.phase), self.current, self.turn, self.dev_played,
            self.has_rolled, self.setup_step, tuple(self.discard_queue),
            self.free_remaining, self.winner,
        )


@dataclass(frozen=True)
class TransitionRecord:
    turn: int
    player: int
    action: Action
    phase_before: Phase
    phase: Phase
    dice: Optional[tuple[int, int]] = None
    produced: Optional[tuple[tuple[int, ...], tuple[int, ...]]] = None
    stolen: Optional[int] = None
    discarded: Optional[tuple[int, ...]] = None

    def to_json(self) -> dict:
        out: dict = {"turn": self.turn, "player": self.player,
                     "action": self.action.to_json()}
        if self.dice is not None:
            out["dice"] = list(self.dice)
        if self.produced is not None:
            out["produced"] = [list(p) for p in self.produced]
        if self.stolen is not None:
            out["stolen"] = RESOURCE_NAMES[self.stolen]
        if self.discarded is not None:
            out["discarded"] = list(self.discarded)
        out["phase"] = self.phase.name
        return out


@dataclass(frozen=True)
class OpponentSummary:
    resource_total: int
    dev_total: int
    roads_left: int
    settlements_left: int
    cities_left: int
    army: int
    has_longest_road: bool
    has_largest_army: bool


@dataclass(frozen=True)
class OwnSummary:
    resources: tuple[int, ...]
    roads_left: int
    settlements_left: int
    cities_left: int
    army: int
    dev_new: tuple[int, ...]
    dev_old: tuple[int, ...]
    harbors: tuple[int, ...]  # generic first, then per resource; 0/1
    has_longest_road: bool
    has_largest_army: bool


@dataclass(frozen=True)
class Observation:
    """What one seat may see.  Board occupancy is in absolute seat ids."""

    player: int
    layout: BoardLayout
    road_owner: tuple[int, ...]
    building: tuple[int, ...]
    owner: tuple[int, ...]
    robber: int
    me: OwnSummary
    opponent: OpponentSummary
    bank: tuple[int, ...]
    dev_deck_size: int
    has_rolled: bool
    dev_played: bool
    phase: Phase
    free_remaining: int
    current: int
    turn: int

