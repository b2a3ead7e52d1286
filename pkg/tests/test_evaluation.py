"""Agents, games and arena statistics."""

from __future__ import annotations

import csv
import json
import random
from collections import Counter

import numpy as np
import pytest
from helpers import main_phase_game

from catan_xdim import checkpoint
from catan_xdim.encoding import default_codec, legal_mask
from catan_xdim.engine import Action, ActionKind, Phase, legal_actions, new_game, observable
from catan_xdim.evaluation import (
    VP_BUCKETS,
    ArenaStats,
    GameResult,
    NetworkAgent,
    RandomAgent,
    arena,
    play_game,
    random_policy,
    sample_index,
    wilson_interval,
)
from catan_xdim.network import EmptyMask, NetworkConfig, init_network

TINY = NetworkConfig("Xdim", layers=2, channels=3, scalars=4)


# ---------------------------------------------------------------------------
# random_policy
# ---------------------------------------------------------------------------

def test_random_policy_single_action():
    mask = np.zeros(1261, dtype=bool)
    mask[1156] = True
    rng = random.Random(0)
    assert all(random_policy(None, mask, rng) == Action(ActionKind.END_TURN) for _ in range(50))


def test_random_policy_uniform_chi_square():
    state = new_game(random.Random(0))
    mask = legal_mask(state)
    k = int(mask.sum())
    assert k == 54
    rng = random.Random(1)
    n = 10_000
    counts = Counter(random_policy(observable(state, 0), mask, rng) for _ in range(n))
    assert set(counts) == set(legal_actions(state))
    expected = n / k
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    # 99.9% quantile of chi-square with 53 degrees of freedom
    assert chi2 < 90.0


def test_random_policy_never_masked():
    codec = default_codec()
    rng = random.Random(2)
    for seed in range(30):
        state = main_phase_game(seed)
        mask = codec.legal_mask(state)
        for _ in range(20):
            assert mask[codec.encode(random_policy(None, mask, rng))]


def test_random_policy_empty_mask():
    with pytest.raises(EmptyMask):
        random_policy(None, np.zeros(1261, dtype=bool), random.Random(0))


def test_random_policy_compat_width():
    mask = np.zeros(1272, dtype=bool)
    mask[1155] = True
    assert random_policy(None, mask, random.Random(0)) == Action(ActionKind.ROLL_DICE)


def test_sample_index_distribution():
    rng = random.Random(3)
    probs = np.array([0.1, 0.0, 0.6, 0.3])
    counts = Counter(sample_index(probs, rng) for _ in range(20_000))
    assert counts[1] == 0
    for i in (0, 2, 3):
        assert abs(counts[i] / 20_000 - probs[i]) < 0.015


# ---------------------------------------------------------------------------
# Agents and single games
# ---------------------------------------------------------------------------

def test_network_agent_always_legal():
    agent = NetworkAgent(init_network(TINY, np.random.default_rng(0)))
    greedy = NetworkAgent(agent.params, greedy=True)
    rng = random.Random(0)
    for seed in range(10):
        state = main_phase_game(seed)
        acts = set(legal_actions(state))
        assert agent.act(state, rng) in acts and greedy.act(state, rng) in acts


def test_greedy_agent_is_argmax():
    params = init_network(TINY, np.random.default_rng(0))
    agent = NetworkAgent(params, greedy=True)
    state = new_game(random.Random(4))
    _, _, probs = agent.policy(state)
    picks = {agent.act(state, random.Random(s)) for s in range(5)}
    assert picks == {agent.codec.decode(int(np.argmax(probs)))}


def test_random_game_terminates():
    for seed in range(5):
        res = play_game(RandomAgent(), RandomAgent(), seed, turn_cap=500)
        assert res.turns <= 500 and res.moves > 0
    capped = play_game(RandomAgent(), RandomAgent(), 0, turn_cap=20)
    assert capped.winner is None and capped.turns == 20


def test_play_game_deterministic():
    a = play_game(RandomAgent(), RandomAgent(), 11, record=True)
    b = play_game(RandomAgent(), RandomAgent(), 11, record=True)
    assert a == b
    assert play_game(RandomAgent(), RandomAgent(), 12) != a


def test_reported_vps_consistent():
    for seed in range(30):
        res = play_game(RandomAgent(), RandomAgent(), seed)
        if res.winner is not None:
            assert res.vps[res.winner] >= 10
            assert res.vps[1 - res.winner] < 10
        else:
            assert res.turns == 500


def test_transcript_rows_are_json():
    res = play_game(RandomAgent(), RandomAgent(), 5, turn_cap=30, record=True)
    assert len(res.transcript) == res.moves
    json.dumps(res.transcript)


# ---------------------------------------------------------------------------
# Arena
# ---------------------------------------------------------------------------

def test_arena_invariants(tmp_path):
    stats = arena(RandomAgent(), RandomAgent(), 7, seed=3, turn_cap=200,
                  transcript_dir=tmp_path / "tx")
    assert stats.games == 7
    assert stats.wins + stats.losses + stats.draws == 7
    assert stats.a_first == 4
    assert sum(stats.vp_hist_a.values()) == sum(stats.vp_hist_b.values()) == 7
    assert set(stats.vp_hist_a) == set(VP_BUCKETS) | {"draw"}
    assert len(list((tmp_path / "tx").glob("game_*.jsonl"))) == 7
    with pytest.raises(ValueError):
        arena(RandomAgent(), RandomAgent(), 0, seed=0)


def test_arena_reproducible():
    a = arena(RandomAgent(), RandomAgent(), 6, seed=9)
    b = arena(RandomAgent(), RandomAgent(), 6, seed=9)
    assert a == b


def test_arena_seat_assignment():
    """Agent A moves first in even-numbered games."""
    class Tagged(RandomAgent):
        def __init__(self):
            self.first = 0

        def act(self, state, rng):
            if state.setup_step == 0 and state.phase == Phase.SETUP_SETTLEMENT:
                self.first += 1
            return super().act(state, rng)

    a, b = Tagged(), Tagged()
    arena(a, b, 5, seed=1, turn_cap=10)
    assert (a.first, b.first) == (3, 2)


def test_identical_checkpoints_are_even(tmp_path):
    params = init_network(TINY, np.random.default_rng(8))
    path = tmp_path / "same.xdim"
    checkpoint.save(path, params)
    loaded, _ = checkpoint.load(path)
    stats = arena(NetworkAgent(loaded), NetworkAgent(checkpoint.load(path)[0]), 1000, seed=21)
    lo, hi = stats.ci
    assert lo <= 0.5 <= hi


def test_wilson_interval():
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and abs((lo + hi) / 2 - 0.5) < 1e-12
    lo, hi = wilson_interval(0, 20)
    assert lo == 0.0 and 0 < hi < 0.2
    lo, hi = wilson_interval(400, 500)
    assert 0.76 < lo < 0.8 < hi < 0.84


def _result(winner, vps):
    return GameResult(winner, vps, 100, 400)


def test_stats_accounting_and_merge(tmp_path):
    s1, s2 = ArenaStats(), ArenaStats()
    s1.add(_result(0, (10, 4)), a_seat=0)
    s1.add(_result(0, (11, 3)), a_seat=1)
    s2.add(_result(None, (6, 6)), a_seat=0)
    s2.add(_result(1, (1, 14)), a_seat=0)
    both = s1.merge(s2)
    assert (both.games, both.wins, both.losses, both.draws) == (4, 1, 2, 1)
    assert both.a_first == 3
    assert both == s2.merge(s1)
    assert both.winrate == pytest.approx((both.wins + 0.5) / 4)
    assert both.vp_hist_a[2] == 1 and both.vp_hist_b[12] == 1 and both.vp_hist_a["draw"] == 1
    report, hist = tmp_path / "r.csv", tmp_path / "h.csv"
    both.write_csv(report, hist)
    rows = list(csv.reader(open(report)))
    assert rows[0] == ["winrate", "ci_low", "ci_high", "draws", "mean_turns"]
    assert float(rows[1][0]) == pytest.approx(both.winrate, abs=1e-6)
    hrows = list(csv.reader(open(hist)))
    assert hrows[0] == ["vp", "count_a", "count_b"]
    assert sum(int(r[1]) for r in hrows[1:]) == 4
