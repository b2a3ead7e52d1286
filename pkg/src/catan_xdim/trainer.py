"""Self-play advantage actor-critic training.

Workers play several games each against a frozen opponent snapshot and emit
fixed-size batches of the learner's moves.  A single updater consumes the
batches in arrival order, applies one gradient step per batch and publishes
the new weights back to the workers.
"""

from __future__ import annotations

import csv
import json
import logging
import multiprocessing as mp
import os
import queue
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from catan_xdim import checkpoint
from catan_xdim.encoding import default_codec, encode_state
from catan_xdim.engine import (
    GameState,
    apply_inplace,
    legal_actions,
    new_game,
    observable,
    victory_points,
)
from catan_xdim.engine.state import DEFAULT_TURN_CAP
from catan_xdim.evaluation import NetworkAgent, RandomAgent, arena, sample_index
from catan_xdim.experience import Batch, Experience
from catan_xdim.network import (
    LossCoefficients,
    NetworkConfig,
    NetworkParams,
    ShapeMismatch,
    compute_targets,
    forward,
    init_network,
    loss_and_gradients,
    masked_policy,
)

__all__ = [
    "TrainerConfig", "Adam", "OpponentPool", "Worker", "Trainer", "TrainResult",
    "lr_schedule", "compute_reward", "compute_targets", "apply_update", "train",
    "METRICS_HEADER", "smoke_config",
]

log = logging.getLogger("catan_xdim.trainer")

METRICS_HEADER = ("step", "updates", "lr", "policy_loss", "value_loss", "entropy",
                  "logit_l2", "avg_reward", "winrate_vs_random")
THREADS_ENV = "CATAN_XDIM_THREADS"
OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainerConfig:
    workers: int = 16
    games_per_worker: int = 8
    batch_size: int = 64
    batches_per_step: int = 1000
    opponent_refresh: int = 50
    lr0: float = 3e-3
    lr_decay: float = 2e-3
    gamma: float = 1.0
    alpha_policy: float = 1.0
    alpha_value: float = 1e3
    alpha_entropy: float = 1e-4
    alpha_activity: float = 1e-8
    alpha_weight: float = 1e-4
    win_reward: float = 0.75
    vp_reward: float = 0.02
    turn_cap: int = DEFAULT_TURN_CAP
    seed: int = 0
    max_updates: int = 1000
    max_staleness: int = 100
    checkpoint_every: int = 1
    eval_every: int = 0
    eval_games: int = 100
    parallel: bool = True
    fixed_opponent: Optional[str] = None
    zero_heads: bool = False
    optimizer: str = "sgd"
    network: NetworkConfig = field(default_factory=NetworkConfig)

    def __post_init__(self):
        positive = ("workers", "games_per_worker", "batch_size", "batches_per_step",
                    "opponent_refresh", "lr0", "turn_cap", "max_updates", "eval_games",
                    "checkpoint_every")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        nonneg = ("lr_decay", "alpha_policy", "alpha_value", "alpha_entropy",
                  "alpha_activity", "alpha_weight", "max_staleness", "eval_every")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def coefficients(self) -> LossCoefficients:
        return LossCoefficients(self.alpha_policy, self.alpha_value, self.alpha_entropy,
                                self.alpha_activity, self.alpha_weight)

    def schedule(self, step: int) -> float:
        return lr_schedule(step, self.lr0, self.lr_decay)


def lr_schedule(step: int, lr0: float = 3e-3, decay: float = 2e-3) -> float:
    """Inverse-time decay over completed training steps."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return lr0 / (1.0 + decay * step)


def compute_reward(state: GameState, player: int, win_reward: float = 0.75,
                   vp_reward: float = 0.02) -> float:
    """Terminal reward for ``player``; a turn-cap draw keeps only the VP term."""
    if not state.is_terminal:
        raise ValueError("reward is only defined for terminal states")
    diff = victory_points(state, player) - victory_points(state, 1 - player)
    reward = vp_reward * diff
    if state.winner is not None:
        reward += win_reward if state.winner == player else -win_reward
    return reward


def apply_update(params: NetworkParams, grads: dict[str, np.ndarray], lr: float) -> NetworkParams:
    """Plain gradient descent, returning new parameters."""
    if set(grads) != set(params.arrays):
        raise ShapeMismatch("gradient names do not match parameters")
    arrays = {}
    for name, value in params.arrays.items():
        g = grads[name]
        if g.shape != value.shape:
            raise ShapeMismatch(f"{name}: gradient {g.shape} vs parameter {value.shape}")
        arrays[name] = (value - lr * g).astype(value.dtype, copy=False)
    return NetworkParams(params.config, arrays)


class Adam:
    """Adam moment estimates; the step size still comes from the schedule."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def direction(self, grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        out = {}
        for name, g in grads.items():
            g = g.astype(np.float64)
            m = self.m.get(name, 0.0) * self.beta1 + (1 - self.beta1) * g
            v = self.v.get(name, 0.0) * self.beta2 + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            out[name] = (m / c1) / (np.sqrt(v / c2) + self.eps)
        return out


# ---------------------------------------------------------------------------
# Opponent pool
# ---------------------------------------------------------------------------

@dataclass
class OpponentPool:
    """One frozen snapshot per worker, each stamped with its creation step."""

    params: list[NetworkParams]
    stamps: list[int]
    frozen: bool = False

    @classmethod
    def uniform(cls, params: NetworkParams, size: int, stamp: int = 0,
                frozen: bool = False) -> "OpponentPool":
        snap = params.copy()
        return cls([snap] * size, [stamp] * size, frozen)

    def __len__(self) -> int:
        return len(self.params)

    def refresh(self, current: NetworkParams, step: int) -> Optional[int]:
        """Replace the oldest slot by ``current``; returns the slot index, or
        None for a frozen pool."""
        if self.frozen:
            return None
        slot = int(np.argmin(self.stamps))
        self.params[slot] = current.copy()
        self.stamps[slot] = step
        return slot


# ---------------------------------------------------------------------------
# Workers
# ---------------------------------------------------------------------------

@dataclass
class _Pending:
    channels: np.ndarray
    scalars: np.ndarray
    mask: np.ndarray
    action: int
    version: int


class _Slot:
    __slots__ = ("state", "seat", "pending")

    def __init__(self, state: GameState, seat: int):
        self.state = state
        self.seat = seat
        self.pending: Optional[_Pending] = None


class Worker:
    """Plays ``games_per_worker`` games round-robin, one learner move per visit.

    Slot ``i`` always seats the learner as player ``i % 2``.  Opponent moves
    are played inline by the frozen opponent and produce no experiences.
    """

    def __init__(self, worker_id: int, config: TrainerConfig, learner: NetworkParams,
                 opponent: NetworkParams, version: int = 0, opponent_stamp: int = 0):
        self.worker_id = worker_id
        self.config = config
        ss = np.random.SeedSequence([config.seed, worker_id])
        engine_seed, policy_seed = ss.generate_state(2)
        self.engine_rng = random.Random(int(engine_seed))
        self.policy_rng = random.Random(int(policy_seed))
        self.codec = default_codec(config.network.compat117)
        self.learner = learner
        self.version = version
        self.opponent = NetworkAgent(opponent, name="opponent")
        self.opponent_stamp = opponent_stamp
        self.games = [_Slot(self._fresh_state(), i % 2) for i in range(config.games_per_worker)]
        self.cursor = 0
        self.ready: list[tuple[Experience, int]] = []
        self.games_finished = 0

    def _fresh_state(self) -> GameState:
        return new_game(self.engine_rng, self.config.turn_cap)

    def set_learner(self, params: NetworkParams, version: int) -> None:
        self.learner = params
        self.version = version

    def set_opponent(self, params: NetworkParams, stamp: int) -> None:
        self.opponent = NetworkAgent(params, name="opponent")
        self.opponent_stamp = stamp

    def _advance_opponent(self, slot: _Slot) -> None:
        state = slot.state
        while not state.is_terminal and state.acting_player != slot.seat:
            apply_inplace(state, self.opponent.act(state, self.policy_rng), self.engine_rng)

    def _finish(self, slot: _Slot) -> None:
        reward = compute_reward(slot.state, slot.seat, self.config.win_reward,
                                self.config.vp_reward)
        p = slot.pending
        if p is not None:
            self.ready.append((Experience(p.channels, p.scalars, p.mask, p.action,
                                          reward=reward, terminal=True), p.version))
        self.games_finished += 1
        slot.state = self._fresh_state()
        slot.pending = None

    def _visit(self, slot: _Slot) -> None:
        self._advance_opponent(slot)
        if slot.state.is_terminal:
            self._finish(slot)
            self._advance_opponent(slot)
        state = slot.state
        acts = legal_actions(state)
        enc = encode_state(observable(state, slot.seat), self.codec.grid)
        mask = self.codec.mask(acts)
        if len(acts) == 1:
            action = acts[0]
            index = self.codec.encode(action)
        else:
            out = forward(self.learner, enc.channels, enc.scalars)
            probs = masked_policy(out.logits[0], mask)
            legal = np.flatnonzero(mask)
            index = int(legal[sample_index(probs[legal], self.policy_rng)])
            action = self.codec.decode(index)
        p = slot.pending
        if p is not None:
            self.ready.append((Experience(p.channels, p.scalars, p.mask, p.action,
                                          next_channels=enc.channels,
                                          next_scalars=enc.scalars, next_mask=mask), p.version))
        slot.pending = _Pending(enc.channels, enc.scalars, mask, index, self.version)
        apply_inplace(state, action, self.engine_rng)
        if state.is_terminal:
            self._finish(slot)

    def generate_batch(self) -> Batch:
        b = self.config.batch_size
        while len(self.ready) < b:
            self._visit(self.games[self.cursor])
            self.cursor = (self.cursor + 1) % len(self.games)
        taken, self.ready = self.ready[:b], self.ready[b:]
        batch = Batch.from_experiences([e for e, _ in taken], self.worker_id,
                                       min(v for _, v in taken))
        batch.meta["opponent_stamp"] = self.opponent_stamp
        return batch


# ---------------------------------------------------------------------------
# Updater
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    params: NetworkParams
    step: int
    updates: int
    rejected: int
    metrics_path: Path
    checkpoints: list[Path]
    pool_stamps: list[int]


class Trainer:
    """Owns the learner parameters, the opponent pool and all run outputs."""

    def __init__(self, config: TrainerConfig, run_dir: str | os.PathLike,
                 params: Optional[NetworkParams] = None, step: int = 0, updates: int = 0,
                 metrics_path: Optional[str | os.PathLike] = None):
        self.config = config
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        if params is None:
            params = init_network(config.network, np.random.default_rng(config.seed),
                                  zero_heads=config.zero_heads)
        if params.config != config.network:
            raise ShapeMismatch("parameters were built for a different network config")
        self.params = params
        self.step = step
        self.updates = updates
        self.rejected = 0
        self.coeffs = config.coefficients
        self.adam = Adam() if config.optimizer == "adam" else None
        self.pool = self._make_pool()
        self.checkpoints: list[Path] = []
        self.metrics_path = Path(metrics_path) if metrics_path else self.run_dir / "metrics.csv"
        self.diag_path = self.run_dir / "diagnostics.jsonl"
        fresh = not (updates and self.metrics_path.exists())
        self._metrics_fh = open(self.metrics_path, "w" if fresh else "a", newline="")
        self._metrics = csv.writer(self._metrics_fh)
        if fresh:
            self._metrics.writerow(METRICS_HEADER)
        self._diag_fh = open(self.diag_path, "w" if fresh else "a")
        self.last_diag: dict = {}

    def _make_pool(self) -> OpponentPool:
        source = self.config.fixed_opponent
        size = self.config.workers
        if source is None:
            return OpponentPool.uniform(self.params, size, self.step)
        if source == "initial":
            return OpponentPool.uniform(self.params, size, self.step, frozen=True)
        opp, meta = checkpoint.load(source)
        if opp.config != self.config.network:
            raise ShapeMismatch("fixed opponent checkpoint has a different network config")
        return OpponentPool.uniform(opp, size, int(meta.get("step", 0)), frozen=True)

    def close(self) -> None:
        self._metrics_fh.close()
        self._diag_fh.close()

    def save_checkpoint(self) -> Path:
        path = self.run_dir / f"ckpt_step{self.step}.xdim"
        checkpoint.save(path, self.params, {"step": self.step, "updates": self.updates,
                                            "seed": self.config.seed})
        if path not in self.checkpoints:
            self.checkpoints.append(path)
        return path

    def consume(self, batch: Batch) -> Optional[list[tuple[int, NetworkParams, int]]]:
        """Apply one update.  Returns the pool slots that changed, or None when
        the batch is rejected as stale."""
        cfg = self.config
        if len(batch) != cfg.batch_size:
            raise ValueError(f"batch has {len(batch)} experiences, expected {cfg.batch_size}")
        lag = self.updates - batch.policy_version
        if lag > cfg.max_staleness:
            self.rejected += 1
            log.error("rejected batch from worker %d: %d updates stale (bound %d)",
                      batch.worker_id, lag, cfg.max_staleness)
            return None
        lr = cfg.schedule(self.step)
        diag, grads = loss_and_gradients(self.params, batch, self.coeffs, cfg.gamma)
        if self.adam is not None:
            grads = self.adam.direction(grads)
        self.params = apply_update(self.params, grads, lr)
        self.updates += 1
        changed = []
        if self.updates % cfg.batches_per_step == 0:
            self.step += 1
            if self.step % cfg.opponent_refresh == 0:
                slot = self.pool.refresh(self.params, self.step)
                if slot is not None:
                    changed.append((slot, self.pool.params[slot], self.step))
            if self.step % cfg.checkpoint_every == 0:
                self.save_checkpoint()

        term = batch.rewards[batch.terminal]
        winrate = ""
        if cfg.eval_every and self.updates % cfg.eval_every == 0:
            winrate = f"{self.evaluate(cfg.eval_games, cfg.seed + self.updates).winrate:.6f}"
        self._metrics.writerow([
            self.step, self.updates, f"{lr:.9g}",
            f"{diag['policy_loss']:.9g}", f"{diag['value_loss']:.9g}",
            f"{diag['entropy']:.9g}", f"{diag['logit_l2']:.9g}",
            f"{term.mean():.6f}" if len(term) else "", winrate,
        ])
        self._metrics_fh.flush()
        self.last_diag = {
            "updates": self.updates, "step": self.step, "lr": lr,
            "staleness": lag, "worker": batch.worker_id,
            "activity_term": self.coeffs.activity * diag["logit_l2"],
            "logit_l2": diag["logit_l2"], "total": diag["total"],
            "mean_value": diag["mean_value"], "pool_stamps": list(self.pool.stamps),
        }
        self._diag_fh.write(json.dumps(self.last_diag) + "\n")
        return changed

    def evaluate(self, games: int, seed: int):
        return arena(NetworkAgent(self.params), RandomAgent(), games, seed, self.config.turn_cap)

    def result(self) -> TrainResult:
        return TrainResult(self.params, self.step, self.updates, self.rejected,
                           self.metrics_path, list(self.checkpoints), list(self.pool.stamps))


def worker_processes(config: TrainerConfig) -> int:
    if not config.parallel:
        return 1
    cap = os.environ.get(THREADS_ENV)
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = min(limit, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
    return max(1, min(config.workers, limit))


def train(config: TrainerConfig, run_dir: str | os.PathLike,
          resume: Optional[str | os.PathLike] = None,
          metrics_path: Optional[str | os.PathLike] = None) -> TrainResult:
    """Run training until ``config.max_updates`` batches have been consumed.

    With one worker process (or ``parallel=False``) workers and the updater
    are interleaved deterministically; otherwise workers run in child
    processes and the updater consumes batches in arrival order.
    """
    params, step, updates = None, 0, 0
    if resume is not None:
        params, meta = checkpoint.load(resume)
        if params.config != config.network:
            raise ShapeMismatch("resume checkpoint has a different network config")
        step, updates = int(meta.get("step", 0)), int(meta.get("updates", 0))
    trainer = Trainer(config, run_dir, params, step, updates, metrics_path)
    try:
        if worker_processes(config) == 1:
            _train_serial(trainer)
        else:
            _train_parallel(trainer, worker_processes(config))
        trainer.save_checkpoint()
    finally:
        trainer.close()
    return trainer.result()


def _train_serial(trainer: Trainer) -> None:
    cfg = trainer.config
    workers = [Worker(w, cfg, trainer.params, trainer.pool.params[w], trainer.updates,
                      trainer.pool.stamps[w]) for w in range(cfg.workers)]
    turn = 0
    while trainer.updates < cfg.max_updates:
        worker = workers[turn % cfg.workers]
        turn += 1
        worker.set_learner(trainer.params, trainer.updates)
        changed = trainer.consume(worker.generate_batch())
        for slot, params, stamp in changed or ():
            workers[slot].set_opponent(params, stamp)


def _worker_main(ids, config, learner, opponents, version, inbox, outbox):
    workers = [Worker(w, config, learner, opp.params, version, opp.stamp)
               for w, opp in zip(ids, opponents)]
    by_id = {w.worker_id: w for w in workers}
    turn = 0
    while True:
        try:
            while True:
                msg = inbox.get_nowait()
                if msg[0] == "stop":
                    return
                if msg[0] == "learner":
                    for w in workers:
                        w.set_learner(msg[1], msg[2])
                elif msg[0] == "opponent":
                    by_id[msg[1]].set_opponent(msg[2], msg[3])
        except queue.Empty:
            pass
        batch = workers[turn % len(workers)].generate_batch()
        turn += 1
        while True:
            try:
                outbox.put(batch, timeout=0.1)
                break
            except queue.Full:
                try:
                    msg = inbox.get_nowait()
                except queue.Empty:
                    continue
                if msg[0] == "stop":
                    return
                inbox.put(msg)


@dataclass
class _Snapshot:
    params: NetworkParams
    stamp: int


def _train_parallel(trainer: Trainer, n_proc: int) -> None:
    cfg = trainer.config
    ctx = mp.get_context("fork" if "fork" in mp.get_all_start_methods() else "spawn")
    outbox = ctx.Queue(maxsize=2 * n_proc)
    inboxes = [ctx.Queue() for _ in range(n_proc)]
    owner = {}
    procs = []
    for j in range(n_proc):
        ids = list(range(j, cfg.workers, n_proc))
        for w in ids:
            owner[w] = j
        opps = [_Snapshot(trainer.pool.params[w], trainer.pool.stamps[w]) for w in ids]
        p = ctx.Process(target=_worker_main, daemon=True,
                        args=(ids, cfg, trainer.params, opps, trainer.updates, inboxes[j], outbox))
        p.start()
        procs.append(p)
    try:
        while trainer.updates < cfg.max_updates:
            changed = trainer.consume(outbox.get())
            if changed is None:
                continue
            for box in inboxes:
                box.put(("learner", trainer.params, trainer.updates))
            for slot, params, stamp in changed:
                inboxes[owner[slot]].put(("opponent", slot, params, stamp))
    finally:
        for box in inboxes:
            box.put(("stop",))
        for p in procs:
            while p.is_alive():
                try:
                    outbox.get(timeout=0.05)
                except queue.Empty:
                    pass
                p.join(timeout=0.05)


def smoke_config(**overrides) -> TrainerConfig:
    """Small configuration used by the learning smoke test."""
    base = TrainerConfig(
        workers=2, games_per_worker=4, parallel=False, zero_heads=True,
        network=NetworkConfig(architecture="Xdim", layers=2, channels=8, scalars=16),
    )
    return replace(base, **overrides)
