"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line with its measured
numbers before asserting, so ``pytest -v`` output doubles as a report.
"""

from __future__ import annotations

import json
import random
import time

import numpy as np
import pytest
from gradcheck import COMBINED, ISOLATED, max_relative_error, small_problem
from helpers import main_phase_game, random_states
from oracles import hex_boundary, keep_multisets, longest_trail, raw_discard_count

from catan_xdim import checkpoint
from catan_xdim.cli import main as cli_main
from catan_xdim.encoding import (
    CHANNEL_ELEMENT,
    COLS,
    N_BOARD_CHANNELS,
    N_SCALARS,
    ROWS,
    CellType,
    build_brick_grid,
    default_codec,
    discard_keep_actions,
    encode_state,
    raw_discard_action_count,
)
from catan_xdim.engine import (
    N_INTERSECTIONS,
    N_PATHS,
    apply_inplace,
    legal_actions,
    longest_road,
    new_game,
    observable,
)
from catan_xdim.engine import ActionKind as K
from catan_xdim.evaluation import NetworkAgent, RandomAgent, arena
from catan_xdim.network import ARCHITECTURES, NetworkConfig, forward, init_network
from catan_xdim.trainer import smoke_config, train

PLAY_KINDS = (K.PLAY_KNIGHT, K.PLAY_ROAD_BUILDING, K.PLAY_YEAR_OF_PLENTY, K.PLAY_MONOPOLY)


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
        assert ok, detail
    return emit


def test_c01_combinatorics(report):
    start = time.perf_counter()
    keeps = keep_multisets()
    raw = raw_discard_count()
    elapsed = time.perf_counter() - start
    ok = (len(keeps) == 70 and keeps == discard_keep_actions()
          and raw == 1_599_979 == raw_discard_action_count() and elapsed < 10)
    report(1, "combinatorics oracle", ok,
           f"keep4={len(keeps)} raw_discard={raw} brute_force={elapsed:.2f}s (<10s)")


def test_c02_grid_and_kernel(report):
    start = time.perf_counter()
    grid = build_brick_grid()
    counts = grid.counts()
    shape_ok = grid.cell_type.shape == (11, 21)
    triple = (counts[CellType.HEX], counts[CellType.PATH], counts[CellType.INTERSECTION])
    bad = []
    for h, (r, c) in enumerate(grid.hex_cells):
        window = grid.window(r, c)
        ints = {int(grid.element[rc]) for rc in window if grid.cell_type[rc] == CellType.INTERSECTION}
        paths = {int(grid.element[rc]) for rc in window if grid.cell_type[rc] == CellType.PATH}
        n_ints = sum(grid.cell_type[rc] == CellType.INTERSECTION for rc in window)
        n_paths = sum(grid.cell_type[rc] == CellType.PATH for rc in window)
        if (ints, paths) != hex_boundary(h) or (n_ints, n_paths) != (6, 6):
            bad.append(h)
    elapsed = time.perf_counter() - start
    ok = shape_ok and triple == (19, 72, 54) and not bad and elapsed < 1.0
    report(2, "brick grid", ok,
           f"hex/path/int={triple[0]}/{triple[1]}/{triple[2]} kernel_mismatches={len(bad)} "
           f"time={elapsed:.3f}s (<1s)")


def test_c03_encoding_fuzz(report):
    start = time.perf_counter()
    grid = build_brick_grid()
    codec = default_codec()
    params = init_network(NetworkConfig(), np.random.default_rng(0))
    support_errors = mask_errors = 0
    shapes_ok = True
    n = 10_000
    for k, state in enumerate(random_states(n, seed=2024, stride=3)):
        enc = encode_state(observable(state, state.acting_player), grid)
        shapes_ok &= enc.channels.shape == (N_BOARD_CHANNELS, ROWS, COLS) == (17, 11, 21)
        shapes_ok &= enc.scalars.shape == (N_SCALARS,) == (45,)
        for ch, elem in enumerate(CHANNEL_ELEMENT):
            if np.any(grid.cell_type[enc.channels[ch] != 0] != elem):
                support_errors += 1
        acts = legal_actions(state)
        mask = codec.legal_mask(state)
        decoded = {codec.decode(int(i)) for i in np.flatnonzero(mask)}
        if mask.sum() != len(acts) or decoded != set(acts):
            mask_errors += 1
        if k == 0:
            out = forward(params, enc.channels, enc.scalars)
            shapes_ok &= out.spatial_logits.shape == (1, 5, ROWS, COLS)
            shapes_ok &= out.scalar_logits.shape == (1, 106) and out.value.shape == (1,)
    elapsed = time.perf_counter() - start
    ok = shapes_ok and support_errors == 0 and mask_errors == 0 and elapsed < 120
    report(3, "encoding shapes and fuzz", ok,
           f"states={n} shapes_ok={shapes_ok} support_errors={support_errors} "
           f"mask_errors={mask_errors} time={elapsed:.1f}s (<120s)")


def test_c04_gradient_check(report):
    start = time.perf_counter()
    worst = {}
    for arch in ARCHITECTURES:
        params, batch, targets = small_problem(arch)
        worst[f"{arch}/combined"] = max_relative_error(params, batch, targets, COMBINED)
        for term, coeffs in ISOLATED.items():
            worst[f"{arch}/{term}"] = max_relative_error(params, batch, targets, coeffs, sample=20)
    elapsed = time.perf_counter() - start
    top = max(worst, key=worst.get)
    ok = worst[top] < 1e-4 and elapsed < 120
    report(4, "gradient check", ok,
           f"checks={len(worst)} max_rel_err={worst[top]:.2e} at {top} (<1e-4) "
           f"time={elapsed:.1f}s (<120s)")


def test_c05_conservation_and_termination(report):
    start = time.perf_counter()
    rng = random.Random(5)
    violations = over_cap = moves = 0
    n = 10_000
    for _ in range(n):
        state = new_game(rng)
        players = state.players
        played = 0
        while not state.is_terminal:
            acts = legal_actions(state)
            action = acts[rng.randrange(len(acts))]
            apply_inplace(state, action, rng, check=False)
            played += action.kind in PLAY_KINDS
            moves += 1
            p0, p1 = players[0].resources, players[1].resources
            bank = state.bank
            if (bank[0] + p0[0] + p1[0] != 19 or bank[1] + p0[1] + p1[1] != 19
                    or bank[2] + p0[2] + p1[2] != 19 or bank[3] + p0[3] + p1[3] != 19
                    or bank[4] + p0[4] + p1[4] != 19):
                violations += 1
            held = players[0].dev_total() + players[1].dev_total()
            if len(state.dev_deck) + held + played != 25:
                violations += 1
        if state.turn > state.turn_cap:
            over_cap += 1
    elapsed = time.perf_counter() - start
    ok = violations == 0 and over_cap == 0 and elapsed < 300
    report(5, "conservation and termination", ok,
           f"playouts={n} moves={moves} violations={violations} over_cap={over_cap} "
           f"time={elapsed:.1f}s (<300s)")


def test_c06_longest_road_oracle(report):
    start = time.perf_counter()
    rng = random.Random(6)
    mismatches = checked = 0
    # positions reached by random play
    for k, state in enumerate(random_states(5_000, seed=66, stride=11)):
        if k % 5:
            continue
        for p in (0, 1):
            blocked = {i for i, o in enumerate(state.owner) if o == 1 - p}
            checked += 1
            mismatches += longest_road(state, p) != longest_trail(state.players[p].roads, blocked)
    # arbitrary road sets, often disconnected and cyclic
    for _ in range(1_000):
        state = main_phase_game(rng.randrange(1000))
        roads = set(rng.sample(range(N_PATHS), rng.randint(1, 15)))
        blocked = set(rng.sample(range(N_INTERSECTIONS), rng.randint(0, 6)))
        state.players[0].roads = roads
        for i in blocked:
            state.owner[i] = 1
        checked += 1
        mismatches += longest_road(state, 0) != longest_trail(roads, blocked)
    elapsed = time.perf_counter() - start
    ok = checked >= 1000 and mismatches == 0 and elapsed < 60
    report(6, "longest-road oracle", ok,
           f"positions={checked} mismatches={mismatches} time={elapsed:.1f}s (<60s)")


def test_c07_learning_smoke(report, tmp_path):
    cfg = smoke_config(max_updates=1563, optimizer="adam")
    pre_params = init_network(cfg.network, np.random.default_rng(cfg.seed), zero_heads=cfg.zero_heads)
    pre = arena(NetworkAgent(pre_params), RandomAgent(), 500, seed=701)
    pre_lo, pre_hi = pre.ci
    start = time.perf_counter()
    result = train(cfg, tmp_path)
    train_time = time.perf_counter() - start
    experiences = result.updates * cfg.batch_size
    trained, _ = checkpoint.load(result.checkpoints[-1])
    post = arena(NetworkAgent(trained), RandomAgent(), 500, seed=702)
    lo, hi = post.ci
    ok = pre_lo <= 0.5 <= pre_hi and lo > 0.65
    report(7, "learning smoke test", ok,
           f"pre={pre.winrate:.3f} ci=[{pre_lo:.3f},{pre_hi:.3f}] (contains 0.5) "
           f"post={post.winrate:.3f} ci=[{lo:.3f},{hi:.3f}] (low>0.65) "
           f"experiences={experiences} train={train_time:.0f}s")


def test_c08_ablation_flags(report, tmp_path):
    cfg = tmp_path / "ablation.cfg"
    cfg.write_text("layers = 2\nchannels = 4\nscalars = 6\nworkers = 2\ngames_per_worker = 2\n"
                   "batch_size = 16\nbatches_per_step = 1\nopponent_refresh = 1\n"
                   "max_updates = 6\nparallel = false\n")

    def run(name, *flags):
        run_dir = tmp_path / name
        code = cli_main(["train", "--config", str(cfg), "--run-dir", str(run_dir), *flags])
        lines = (run_dir / "diagnostics.jsonl").read_text().splitlines()
        return code, [json.loads(l) for l in lines]

    code_a, no_act = run("no_activity", "--no-activity-loss")
    code_f, fixed = run("fixed", "--fixed-opponent", "initial")
    code_b, base = run("baseline")
    activity_absent = all(d["activity_term"] == 0.0 for d in no_act)
    activity_present = all(d["activity_term"] > 0.0 for d in base)
    fixed_stamps = {tuple(d["pool_stamps"]) for d in fixed}
    base_stamps = {tuple(d["pool_stamps"]) for d in base}
    ok = (code_a == code_f == code_b == 0 and activity_absent and activity_present
          and len(fixed_stamps) == 1 and len(base_stamps) > 1)
    report(8, "ablation flags", ok,
           f"no_activity_term_zero={activity_absent} baseline_term_positive={activity_present} "
           f"fixed_pool_stamp_sets={len(fixed_stamps)} baseline_pool_stamp_sets={len(base_stamps)}")


def test_c09_throughput(report):
    rng = random.Random(9)
    grid = build_brick_grid()
    codec = default_codec()
    target = 100_000
    moves = 0
    start = time.perf_counter()
    while moves < target:
        state = new_game(rng)
        while not state.is_terminal and moves < target:
            acts = legal_actions(state)
            encode_state(observable(state, state.acting_player), grid)
            codec.mask(acts)
            apply_inplace(state, acts[rng.randrange(len(acts))], rng)
            moves += 1
    rate = moves / (time.perf_counter() - start)
    report(9, "throughput", rate >= 10_000,
           f"moves={moves} rate={rate:,.0f}/s (>=10,000/s, engine+encoding+mask, one thread)")


def test_c10_checkpoint_round_trip(report, tmp_path):
    params = init_network(NetworkConfig(), np.random.default_rng(10))
    path = tmp_path / "rt.xdim"
    checkpoint.save(path, params, {"step": 0})
    loaded, _ = checkpoint.load(path)
    identical = 0
    n = 100
    for state in random_states(n, seed=10, stride=13):
        enc = encode_state(observable(state, state.acting_player))
        a = forward(params, enc.channels, enc.scalars)
        b = forward(loaded, enc.channels, enc.scalars)
        identical += (a.logits.tobytes() == b.logits.tobytes()
                      and a.value.tobytes() == b.value.tobytes())
    report(10, "checkpoint round-trip", identical == n,
           f"bit_identical={identical}/{n}")
