"""Two-player Catan rules engine."""

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
    RESOURCE_NAMES,
    RESOURCES,
    TOPOLOGY,
    WOOL,
    BoardLayout,
    generate_board,
)
from catan_xdim.engine.discard import KEEP4, KeepNotInHand, discard_keep_actions, resolve_discard
from catan_xdim.engine.rules import (
    apply,
    apply_inplace,
    legal_actions,
    longest_road,
    new_game,
    observable,
    play_random_game,
    victory_points,
)
from catan_xdim.engine.state import (
    ACTION_NAMES,
    DEV_INVENTORY,
    Action,
    ActionKind,
    GameState,
    IllegalAction,
    Observation,
    Phase,
    PlayerState,
    TransitionRecord,
)
