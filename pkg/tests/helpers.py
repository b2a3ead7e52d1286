"""Position builders shared by the test modules."""

from __future__ import annotations

import random
from typing import Iterator

from catan_xdim.engine import (
    TOPOLOGY,
    GameState,
    Phase,
    apply_inplace,
    legal_actions,
    new_game,
)
from catan_xdim.engine import rules


class FixedDice(random.Random):
    """Random source whose dice come from a script; everything else is seeded."""

    def __init__(self, *rolls: int, seed: int = 0):
        super().__init__(seed)
        self.faces: list[int] = []
        for total in rolls:
            a = max(1, total - 6)
            self.faces += [a, total - a]

    def randint(self, a, b):
        if self.faces:
            return self.faces.pop(0)
        return super().randint(a, b)


def main_phase_game(seed: int = 0, current: int = 0, rolled: bool = True) -> GameState:
    """Empty board, setup skipped, ``current`` to act in Main (or PreRoll)."""
    state = new_game(random.Random(seed))
    state.setup_step = 4
    state.current = current
    state.turn = 4
    state.has_rolled = rolled
    state.phase = Phase.MAIN if rolled else Phase.PRE_ROLL
    return state


def give(state: GameState, player: int, res: tuple[int, ...]) -> None:
    """Move cards from the bank into a hand."""
    for r, n in enumerate(res):
        state.bank[r] -= n
        state.players[player].resources[r] += n
        assert state.bank[r] >= 0


def settle(state: GameState, player: int, i: int, city: bool = False) -> None:
    rules._place_settlement(state, player, i)
    if city:
        me = state.players[player]
        state.building[i] = 2
        me.settlements.discard(i)
        me.cities.add(i)
        me.settlements_left += 1
        me.cities_left -= 1


def road(state: GameState, player: int, q: int) -> None:
    rules._place_road(state, player, q)


def simple_path(length: int, start: int = 0) -> tuple[list[int], list[int]]:
    """A chain of ``length`` paths visiting distinct intersections; returns
    (intersections, paths)."""
    ints = [start]
    paths: list[int] = []

    def dfs() -> bool:
        if len(paths) == length:
            return True
        here = ints[-1]
        for q in TOPOLOGY.int_paths[here]:
            a, b = TOPOLOGY.path_ends[q]
            nxt = b if a == here else a
            if nxt in ints:
                continue
            ints.append(nxt)
            paths.append(q)
            if dfs():
                return True
            ints.pop()
            paths.pop()
        return False

    assert dfs()
    return ints, paths


def random_states(n: int, seed: int, stride: int = 7) -> Iterator[GameState]:
    """Non-terminal states sampled every ``stride`` moves from random playouts."""
    rng = random.Random(seed)
    produced = 0
    while produced < n:
        state = new_game(rng)
        k = 0
        while not state.is_terminal and produced < n:
            if k % stride == 0:
                produced += 1
                yield state
            acts = legal_actions(state)
            apply_inplace(state, acts[rng.randrange(len(acts))], rng, check=False)
            k += 1
