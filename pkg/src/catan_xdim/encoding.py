"""Brick-coordinate grid, observation encoding and the flat action codec.

The fine grid doubles the brick-wall coordinates of ``engine.board``:
intersection (x, y) sits at cell (2y, 2x), the horizontal path leaving it
eastwards at (2y, 2x+1), the vertical path leaving it southwards at
(2y+1, 2x), and the hex whose brick starts at x0 in brick row R at
(2R+1, x0*2+2).  With this layout a 3-row by 5-column window centred on a
hex sees exactly its six corners, six sides and two empty cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

from catan_xdim.engine import (
    ACTION_NAMES,
    DESERT,
    GENERIC_HARBOR,
    KEEP4,
    N_HEXES,
    N_INTERSECTIONS,
    N_PATHS,
    TOPOLOGY,
    Action,
    ActionKind,
    BoardLayout,
    GameState,
    Observation,
    legal_actions,
)
from catan_xdim.engine.discard import discard_keep_actions, resolve_discard  # noqa: F401
from catan_xdim.engine.state import DEV_INVENTORY

ROWS, COLS = 11, 21
CELLS = ROWS * COLS
KERNEL_ROWS, KERNEL_COLS = 3, 5

N_BOARD_CHANNELS = 17
N_SCALARS = 45
N_POLICY_CHANNELS = 5
N_SCALAR_ACTIONS = 106
N_SCALAR_ACTIONS_COMPAT = 117
SPATIAL_SIZE = N_POLICY_CHANNELS * CELLS  # 1155


class CellType(IntEnum):
    EMPTY = 0
    HEX = 1
    PATH = 2
    INTERSECTION = 3


class InvalidIndex(ValueError):
    pass


class BrickGrid:
    """Immutable 11x21 embedding of hexes, paths and intersections."""

    def __init__(self):
        cell_type = np.zeros((ROWS, COLS), dtype=np.int8)
        element = np.full((ROWS, COLS), -1, dtype=np.int16)
        hex_cells = []
        for row, x0 in TOPOLOGY.hex_bricks:
            hex_cells.append((2 * row + 1, 2 * x0 + 2))
        path_cells = []
        for (xa, ya), (xb, yb) in TOPOLOGY.path_segments:
            path_cells.append((2 * ya, 2 * xa + 1) if ya == yb else (2 * ya + 1, 2 * xa))
        int_cells = [(2 * y, 2 * x) for x, y in TOPOLOGY.int_xy]
        for kind, cells in ((CellType.HEX, hex_cells), (CellType.PATH, path_cells),
                            (CellType.INTERSECTION, int_cells)):
            for idx, (r, c) in enumerate(cells):
                if cell_type[r, c] != CellType.EMPTY:
                    raise AssertionError(f"cell collision at {(r, c)}")
                cell_type[r, c] = kind
                element[r, c] = idx
        cell_type.setflags(write=False)
        element.setflags(write=False)
        self.cell_type = cell_type
        self.element = element
        self.hex_cells = tuple(hex_cells)
        self.path_cells = tuple(path_cells)
        self.intersection_cells = tuple(int_cells)
        self.hex_flat = np.array([r * COLS + c for r, c in hex_cells])
        self.path_flat = np.array([r * COLS + c for r, c in path_cells])
        self.int_flat = np.array([r * COLS + c for r, c in int_cells])

    def counts(self) -> dict[CellType, int]:
        return {t: int((self.cell_type == t).sum()) for t in CellType}

    def window(self, row: int, col: int) -> list[tuple[int, int]]:
        """In-bounds cells of the kernel window centred on (row, col)."""
        dr, dc = KERNEL_ROWS // 2, KERNEL_COLS // 2
        return [(r, c)
                for r in range(row - dr, row + dr + 1)
                for c in range(col - dc, col + dc + 1)
                if 0 <= r < ROWS and 0 <= c < COLS]

    def kernel_mismatches(self) -> list[int]:
        """Hexes whose kernel window does not hold exactly their own 6
        intersections and 6 paths (empty when the embedding is sound)."""
        bad = []
        for h, (r, c) in enumerate(self.hex_cells):
            ints, paths, other = set(), set(), 0
            for rr, cc in self.window(r, c):
                t = self.cell_type[rr, cc]
                if t == CellType.INTERSECTION:
                    ints.add(int(self.element[rr, cc]))
                elif t == CellType.PATH:
                    paths.add(int(self.element[rr, cc]))
                elif t == CellType.HEX and (rr, cc) != (r, c):
                    other += 1
            if (ints != set(TOPOLOGY.hex_intersections[h])
                    or paths != set(TOPOLOGY.hex_paths[h]) or other):
                bad.append(h)
        return bad

    def render(self) -> str:
        marks = {CellType.EMPTY: " . ", CellType.HEX: "H", CellType.PATH: "P",
                 CellType.INTERSECTION: "I"}
        lines = []
        for r in range(ROWS):
            cells = []
            for c in range(COLS):
                t = CellType(self.cell_type[r, c])
                cells.append(marks[t] if t == CellType.EMPTY
                             else f"{marks[t]}{self.element[r, c]:02d}")
            lines.append(" ".join(cells))
        return "\n".join(lines)


@lru_cache(maxsize=1)
def build_brick_grid() -> BrickGrid:
    return BrickGrid()


# ---------------------------------------------------------------------------
# State encoding
# ---------------------------------------------------------------------------

# board channel order
CH_DESERT = 0
CH_PRODUCTION = 1  # +resource
CH_THIEF = 6
CH_ROAD_SELF, CH_ROAD_OPP = 7, 8
CH_HARBOR = 9  # generic, then one per resource
CH_BUILDING_SELF, CH_BUILDING_OPP = 15, 16

CHANNEL_ELEMENT = (
    (CellType.HEX,) * 7 + (CellType.PATH,) * 2 + (CellType.INTERSECTION,) * 8
)

SCALAR_NAMES = (
    [f"self_resource_{r}" for r in range(5)]
    + ["self_roads_left", "self_settlements_left", "self_cities_left", "self_army"]
    + [f"self_dev_new_{d}" for d in range(5)] + [f"self_dev_old_{d}" for d in range(5)]
    + ["self_harbor_generic"] + [f"self_harbor_{r}" for r in range(5)]
    + ["self_largest_army", "self_longest_road"]
    + ["opp_resource_total", "opp_dev_total", "opp_roads_left",
       "opp_settlements_left", "opp_cities_left", "opp_army",
       "opp_largest_army", "opp_longest_road"]
    + [f"bank_{r}" for r in range(5)] + ["dev_deck"]
    + ["has_rolled", "dev_played", "using_road_building", "using_year_of_plenty"]
)


def dice_probability(token: int) -> float:
    return (6 - abs(token - 7)) / 36.0


@dataclass(frozen=True)
class StateEncoding:
    channels: np.ndarray  # (17, 11, 21)
    scalars: np.ndarray   # (45,)

    def dump(self) -> str:
        """Stable text form: nonzero ``channel,row,col,value`` lines, then
        every ``scalar_index,value``."""
        lines = []
        for c, r, col in zip(*np.nonzero(self.channels)):
            lines.append(f"{c},{r},{col},{self.channels[c, r, col]:.6g}")
        for i, v in enumerate(self.scalars):
            lines.append(f"{i},{v:.6g}")
        return "\n".join(lines)


_static_cache: dict[int, tuple[BoardLayout, np.ndarray]] = {}


def _static_planes(layout: BoardLayout, grid: BrickGrid) -> np.ndarray:
    hit = _static_cache.get(id(layout))
    if hit is not None and hit[0] is layout:
        return hit[1]
    planes = np.zeros((N_BOARD_CHANNELS, CELLS), dtype=np.float32)
    for h, (kind, tok) in enumerate(zip(layout.hex_kind, layout.number_token)):
        cell = grid.hex_flat[h]
        if kind == DESERT:
            planes[CH_DESERT, cell] = 1.0
        else:
            planes[CH_PRODUCTION + kind, cell] = dice_probability(tok)
    for kind, ints in layout.harbors:
        ch = CH_HARBOR if kind == GENERIC_HARBOR else CH_HARBOR + 1 + kind
        for i in ints:
            planes[ch, grid.int_flat[i]] = 1.0
    planes.setflags(write=False)
    if len(_static_cache) > 4096:
        _static_cache.clear()
    _static_cache[id(layout)] = (layout, planes)
    return planes


def encode_state(obs: Observation, grid: BrickGrid | None = None) -> StateEncoding:
    grid = grid or build_brick_grid()
    me, opp = obs.player, 1 - obs.player
    ch = _static_planes(obs.layout, grid).copy()
    ch[CH_THIEF, grid.hex_flat[obs.robber]] = 1.0
    roads = np.array(obs.road_owner)
    ch[CH_ROAD_SELF, grid.path_flat] = roads == me
    ch[CH_ROAD_OPP, grid.path_flat] = roads == opp
    size = np.array(obs.building, dtype=np.float32) * 0.5
    owner = np.array(obs.owner)
    ch[CH_BUILDING_SELF, grid.int_flat] = size * (owner == me)
    ch[CH_BUILDING_OPP, grid.int_flat] = size * (owner == opp)

    s, o = obs.me, obs.opponent
    phase = obs.phase
    scalars = [r / 19 for r in s.resources]
    scalars += [s.roads_left / 15, s.settlements_left / 5, s.cities_left / 4, s.army / 14]
    scalars += [n / m for n, m in zip(s.dev_new, DEV_INVENTORY)]
    scalars += [n / m for n, m in zip(s.dev_old, DEV_INVENTORY)]
    scalars += s.harbors
    scalars += [s.has_largest_army, s.has_longest_road]
    scalars += [min(o.resource_total / 19, 1.0), o.dev_total / 25, o.roads_left / 15,
                o.settlements_left / 5, o.cities_left / 4, o.army / 14,
                o.has_largest_army, o.has_longest_road]
    scalars += [b / 19 for b in obs.bank]
    scalars += [obs.dev_deck_size / 25]
    scalars += [obs.has_rolled, obs.dev_played,
                phase == phase.FREE_ROADS, phase == phase.FREE_RESOURCES]
    return StateEncoding(
        ch.reshape(N_BOARD_CHANNELS, ROWS, COLS),
        np.array(scalars, dtype=np.float32),
    )


# ---------------------------------------------------------------------------
# Action codec
# ---------------------------------------------------------------------------

# spatial channel order
SPATIAL_KINDS = (
    ActionKind.MOVE_ROBBER_STEAL,
    ActionKind.MOVE_ROBBER_NO_STEAL,
    ActionKind.PLACE_ROAD,
    ActionKind.PLACE_SETTLEMENT,
    ActionKind.PLACE_CITY,
)
_SPATIAL_ELEMENT = (CellType.HEX, CellType.HEX, CellType.PATH,
                    CellType.INTERSECTION, CellType.INTERSECTION)


def _scalar_actions() -> list[Action]:
    acts = [Action(ActionKind.ROLL_DICE), Action(ActionKind.END_TURN)]
    acts += [Action(ActionKind.DISCARD_KEEP, keep) for keep in KEEP4]
    acts += [Action(ActionKind.BANK_TRADE, (g, r))
             for g in range(5) for r in range(5) if g != r]
    acts += [Action(ActionKind.BUY_DEV_CARD), Action(ActionKind.PLAY_KNIGHT),
             Action(ActionKind.PLAY_ROAD_BUILDING), Action(ActionKind.PLAY_YEAR_OF_PLENTY)]
    acts += [Action(ActionKind.CHOOSE_FREE_RESOURCE, r) for r in range(5)]
    acts += [Action(ActionKind.PLAY_MONOPOLY, r) for r in range(5)]
    return acts


SCALAR_ACTIONS = tuple(_scalar_actions())
assert len(SCALAR_ACTIONS) == N_SCALAR_ACTIONS


class ActionCodec:
    """Bijection between actions and flat policy indices.

    Spatial index = channel*231 + row*21 + col; scalar index = 1155 + slot.
    ``compat=True`` pads the scalar block to 117 slots that are never legal.
    """

    def __init__(self, grid: BrickGrid | None = None, compat: bool = False):
        self.grid = grid or build_brick_grid()
        self.compat = compat
        self.n_scalar = N_SCALAR_ACTIONS_COMPAT if compat else N_SCALAR_ACTIONS
        self.size = SPATIAL_SIZE + self.n_scalar
        index: dict[Action, int] = {}
        cells_of = {CellType.HEX: self.grid.hex_flat, CellType.PATH: self.grid.path_flat,
                    CellType.INTERSECTION: self.grid.int_flat}
        for ch, (kind, elem) in enumerate(zip(SPATIAL_KINDS, _SPATIAL_ELEMENT)):
            for e, cell in enumerate(cells_of[elem]):
                index[Action(kind, e)] = ch * CELLS + int(cell)
        for slot, act in enumerate(SCALAR_ACTIONS):
            index[act] = SPATIAL_SIZE + slot
        self._index = index
        self._action = {i: a for a, i in index.items()}

    @property
    def n_valid(self) -> int:
        return len(self._index)

    def encode(self, action: Action) -> int:
        try:
            return self._index[action]
        except KeyError:
            raise InvalidIndex(f"no index for action {action!r}") from None

    def decode(self, index: int) -> Action:
        try:
            return self._action[int(index)]
        except KeyError:
            if not 0 <= index < self.size:
                raise InvalidIndex(f"index {index} outside [0, {self.size})") from None
            raise InvalidIndex(f"index {index} is not a valid action slot") from None

    def mask(self, actions) -> np.ndarray:
        m = np.zeros(self.size, dtype=bool)
        idx = self._index
        m[[idx[a] for a in actions]] = True
        return m

    def legal_mask(self, state: GameState) -> np.ndarray:
        return self.mask(legal_actions(state))


@lru_cache(maxsize=2)
def default_codec(compat: bool = False) -> ActionCodec:
    return ActionCodec(build_brick_grid(), compat)


def encode_action(action: Action, compat: bool = False) -> int:
    return default_codec(compat).encode(action)


def decode_action(index: int, compat: bool = False) -> Action:
    return default_codec(compat).decode(index)


def legal_mask(state: GameState, compat: bool = False) -> np.ndarray:
    return default_codec(compat).legal_mask(state)


def raw_discard_action_count(max_per_type: int = 19, lo: int = 3, hi: int = 47) -> int:
    """Brute-force count of unabstracted discard choices: 5-tuples over
    0..max_per_type whose sum lies in [lo, hi]."""
    axis = np.arange(max_per_type + 1)
    total = (axis[:, None, None, None, None] + axis[None, :, None, None, None]
             + axis[None, None, :, None, None] + axis[None, None, None, :, None]
             + axis[None, None, None, None, :])
    return int(((total >= lo) & (total <= hi)).sum())


__all__ = [
    "ACTION_NAMES", "ActionCodec", "BrickGrid", "CellType", "InvalidIndex",
    "StateEncoding", "build_brick_grid", "decode_action", "default_codec",
    "discard_keep_actions", "encode_action", "encode_state", "legal_mask",
    "raw_discard_action_count", "resolve_discard",
]
