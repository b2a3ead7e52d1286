"""Agents, single games and head-to-head arenas."""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from catan_xdim.encoding import ActionCodec, default_codec, encode_state
from catan_xdim.engine import (
    Action,
    GameState,
    Observation,
    apply_inplace,
    legal_actions,
    new_game,
    observable,
    victory_points,
)
from catan_xdim.engine.state import DEFAULT_TURN_CAP
from catan_xdim.network import EmptyMask, NetworkParams, forward, masked_policy

VP_BUCKETS = tuple(range(2, 13))


class Agent(Protocol):
    name: str

    def act(self, state: GameState, rng: random.Random) -> Action: ...


def random_policy(observation: Optional[Observation], mask: np.ndarray,
                  rng: random.Random, codec: Optional[ActionCodec] = None) -> Action:
    """Uniform choice over the set bits of ``mask``."""
    legal = np.flatnonzero(mask)
    if len(legal) == 0:
        raise EmptyMask("no legal action to choose from")
    codec = codec or default_codec(len(mask) != default_codec().size)
    return codec.decode(int(legal[rng.randrange(len(legal))]))


def sample_index(probs: np.ndarray, rng: random.Random) -> int:
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    # guard against the float edge where u*total == total
    return min(i, len(probs) - 1)


class RandomAgent:
    name = "random"

    def act(self, state: GameState, rng: random.Random) -> Action:
        acts = legal_actions(state)
        return acts[rng.randrange(len(acts))]


class NetworkAgent:
    """Plays from a network snapshot; samples from the masked policy unless
    ``greedy`` is set."""

    def __init__(self, params: NetworkParams, greedy: bool = False, name: str = "network"):
        self.params = params
        self.greedy = greedy
        self.name = name
        self.codec = default_codec(params.config.compat117)

    def policy(self, state: GameState, acts=None):
        acts = acts if acts is not None else legal_actions(state)
        enc = encode_state(observable(state, state.acting_player), self.codec.grid)
        mask = self.codec.mask(acts)
        out = forward(self.params, enc.channels, enc.scalars)
        return enc, mask, masked_policy(out.logits[0], mask)

    def act(self, state: GameState, rng: random.Random) -> Action:
        acts = legal_actions(state)
        if len(acts) == 1:
            return acts[0]
        _, mask, probs = self.policy(state, acts)
        if self.greedy:
            idx = int(np.argmax(probs))
        else:
            legal = np.flatnonzero(mask)
            idx = int(legal[sample_index(probs[legal], rng)])
        return self.codec.decode(idx)


@dataclass
class GameResult:
    winner: Optional[int]         # seat, None on a turn-cap draw
    vps: tuple[int, int]          # by seat, hidden cards included
    turns: int
    moves: int
    transcript: Optional[list[dict]] = None


def game_seeds(seed: int) -> tuple[int, int]:
    """Independent engine and agent seeds for one game."""
    a, b = np.random.SeedSequence(seed).generate_state(2)
    return int(a), int(b)


def play_game(agent_a, agent_b, seed: int, turn_cap: int = DEFAULT_TURN_CAP,
              record: bool = False) -> GameResult:
    """One full game with ``agent_a`` in seat 0 (first player)."""
    engine_seed, agent_seed = game_seeds(seed)
    engine_rng = random.Random(engine_seed)
    agent_rng = random.Random(agent_seed)
    state = new_game(engine_rng, turn_cap)
    agents = (agent_a, agent_b)
    transcript = [] if record else None
    moves = 0
    while not state.is_terminal:
        action = agents[state.acting_player].act(state, agent_rng)
        rec = apply_inplace(state, action, engine_rng)
        moves += 1
        if transcript is not None:
            transcript.append(rec.to_json())
    return GameResult(
        winner=state.winner,
        vps=(victory_points(state, 0), victory_points(state, 1)),
        turns=state.turn,
        moves=moves,
        transcript=transcript,
    )


def wilson_interval(successes: float, n: int, z: float = 1.959963984540054):
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class ArenaStats:
    """Results from agent A's point of view.

    ``winrate`` scores a draw as half a win, so two identical agents sit at
    0.5; the interval is a Wilson score interval.
    """

    games: int = 0
    wins: int = 0
    losses: int = 0
    draws: int = 0
    a_first: int = 0
    total_turns: int = 0
    vp_hist_a: dict = field(default_factory=lambda: {**{v: 0 for v in VP_BUCKETS}, "draw": 0})
    vp_hist_b: dict = field(default_factory=lambda: {**{v: 0 for v in VP_BUCKETS}, "draw": 0})

    def add(self, result: GameResult, a_seat: int) -> None:
        self.games += 1
        self.total_turns += result.turns
        if a_seat == 0:
            self.a_first += 1
        if result.winner is None:
            self.draws += 1
            self.vp_hist_a["draw"] += 1
            self.vp_hist_b["draw"] += 1
            return
        if result.winner == a_seat:
            self.wins += 1
        else:
            self.losses += 1
        clamp = lambda v: min(max(v, VP_BUCKETS[0]), VP_BUCKETS[-1])  # noqa: E731
        self.vp_hist_a[clamp(result.vps[a_seat])] += 1
        self.vp_hist_b[clamp(result.vps[1 - a_seat])] += 1

    def merge(self, other: "ArenaStats") -> "ArenaStats":
        out = ArenaStats(
            self.games + other.games, self.wins + other.wins,
            self.losses + other.losses, self.draws + other.draws,
            self.a_first + other.a_first, self.total_turns + other.total_turns,
        )
        for k in out.vp_hist_a:
            out.vp_hist_a[k] = self.vp_hist_a[k] + other.vp_hist_a[k]
            out.vp_hist_b[k] = self.vp_hist_b[k] + other.vp_hist_b[k]
        return out

    @property
    def winrate(self) -> float:
        return (self.wins + 0.5 * self.draws) / self.games if self.games else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.wins + 0.5 * self.draws, self.games)

    @property
    def mean_turns(self) -> float:
        return self.total_turns / self.games if self.games else 0.0

    def summary(self) -> str:
        lo, hi = self.ci
        return (f"games={self.games} wins={self.wins} losses={self.losses} "
                f"draws={self.draws} winrate={self.winrate:.4f} "
                f"ci95=[{lo:.4f},{hi:.4f}] mean_turns={self.mean_turns:.1f}")

    def write_csv(self, report: str | Path, histogram: str | Path | None = None) -> None:
        lo, hi = self.ci
        with open(report, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["winrate", "ci_low", "ci_high", "draws", "mean_turns"])
            w.writerow([f"{self.winrate:.6f}", f"{lo:.6f}", f"{hi:.6f}", self.draws,
                        f"{self.mean_turns:.3f}"])
        if histogram is not None:
            with open(histogram, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["vp", "count_a", "count_b"])
                for k in self.vp_hist_a:
                    w.writerow([k, self.vp_hist_a[k], self.vp_hist_b[k]])


def arena(agent_a, agent_b, n: int, seed: int, turn_cap: int = DEFAULT_TURN_CAP,
          transcript_dir: str | Path | None = None) -> ArenaStats:
    """``n`` games, A first in games 0, 2, 4, ... (so ceil(n/2) times)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]
    stats = ArenaStats()
    for g, game_seed in enumerate(seeds):
        a_first = g % 2 == 0
        pair = (agent_a, agent_b) if a_first else (agent_b, agent_a)
        result = play_game(*pair, game_seed, turn_cap, record=transcript_dir is not None)
        stats.add(result, 0 if a_first else 1)
        if transcript_dir is not None:
            write_transcript(Path(transcript_dir) / f"game_{g:05d}.jsonl", result.transcript)
    return stats


def write_transcript(path: str | Path, transcript: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in transcript:
            fh.write(json.dumps(row) + "\n")
