"""Command-line entry point: train, eval, play, inspect and selftest."""

from __future__ import annotations

import argparse
import logging
import random
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from catan_xdim import checkpoint
from catan_xdim.encoding import (
    CellType,
    build_brick_grid,
    discard_keep_actions,
    raw_discard_action_count,
)
from catan_xdim.engine import DESERT, RESOURCE_NAMES, generate_board
from catan_xdim.engine.board import GENERIC_HARBOR
from catan_xdim.evaluation import NetworkAgent, RandomAgent, arena, game_seeds, play_game, write_transcript
from catan_xdim.network import NetworkConfig
from catan_xdim.trainer import TrainerConfig, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("catan_xdim.cli")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    trainer: TrainerConfig
    run_dir: str = "runs/default"
    metrics_file: str = ""
    transcript_dir: str = ""


_NET_KEYS = {f.name: f for f in fields(NetworkConfig)}
_TRAINER_KEYS = {f.name: f for f in fields(TrainerConfig) if f.name != "network"}
_PATH_KEYS = ("run_dir", "metrics_file", "transcript_dir")


def _default(key: str):
    if key in _NET_KEYS:
        return getattr(NetworkConfig(), key)
    if key in _TRAINER_KEYS:
        return getattr(TrainerConfig(), key)
    return getattr(RunConfig(TrainerConfig()), key)


def _parse_value(key: str, text: str):
    default = _default(key)
    text = text.strip()
    if key == "fixed_opponent":
        return None if text.lower() in ("", "none") else text
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    try:
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(default).__name__}") from None
    return text


def parse_config(text: str) -> RunConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Unknown or
    repeated keys are rejected."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _NET_KEYS and key not in _TRAINER_KEYS and key not in _PATH_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, value)
    return build_config(values)


def build_config(values: dict) -> RunConfig:
    try:
        net = NetworkConfig(**{k: v for k, v in values.items() if k in _NET_KEYS})
        trainer = TrainerConfig(network=net,
                                **{k: v for k, v in values.items() if k in _TRAINER_KEYS})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(trainer, **{k: v for k, v in values.items() if k in _PATH_KEYS})


def echo_config(cfg: RunConfig) -> str:
    """Every effective key, in a form ``parse_config`` reads back exactly."""
    lines = []
    for name in _NET_KEYS:
        lines.append(f"{name} = {getattr(cfg.trainer.network, name)!r}".replace("'", ""))
    for name in _TRAINER_KEYS:
        value = getattr(cfg.trainer, name)
        lines.append(f"{name} = {'none' if value is None else value!r}".replace("'", ""))
    for name in _PATH_KEYS:
        lines.append(f"{name} = {getattr(cfg, name)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Board rendering
# ---------------------------------------------------------------------------

def render_board(layout) -> str:
    """Brick grid with resource/number on hexes, harbor tags on intersections."""
    grid = build_brick_grid()
    rows = []
    for r in range(grid.cell_type.shape[0]):
        cells = []
        for c in range(grid.cell_type.shape[1]):
            t = grid.cell_type[r, c]
            e = int(grid.element[r, c])
            if t == CellType.HEX:
                kind = layout.hex_kind[e]
                cells.append(" D--" if kind == DESERT
                             else f" {RESOURCE_NAMES[kind][0]}{layout.number_token[e]:02d}")
            elif t == CellType.INTERSECTION:
                h = layout.harbor_at[e]
                if h < 0:
                    cells.append("   o")
                else:
                    cells.append("  h3" if h == GENERIC_HARBOR else f" h{RESOURCE_NAMES[h][0]}2")
            elif t == CellType.PATH:
                cells.append("   -" if r % 2 == 0 else "   |")
            else:
                cells.append("    ")
        rows.append("".join(cells).rstrip())
    return "\n".join(rows)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _load_agent(source: str, greedy: bool):
    if source == "random":
        return RandomAgent()
    try:
        params, _ = checkpoint.load(source)
    except (OSError, checkpoint.CheckpointError) as exc:
        raise ConfigError(f"cannot load agent {source!r}: {exc}") from None
    return NetworkAgent(params, greedy=greedy, name=Path(source).name)


def cmd_train(args) -> int:
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
        cfg = parse_config(text)
    else:
        cfg = build_config({})
    overrides = {}
    if args.no_activity_loss:
        overrides["alpha_activity"] = 0.0
    if args.fixed_opponent:
        overrides["fixed_opponent"] = args.fixed_opponent
    if args.max_updates is not None:
        overrides["max_updates"] = args.max_updates
    try:
        cfg = replace(cfg, trainer=replace(cfg.trainer, **overrides))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.run_dir:
        cfg = replace(cfg, run_dir=args.run_dir)
    for path in (args.resume, cfg.trainer.fixed_opponent):
        if path and path != "initial" and not Path(path).is_file():
            raise ConfigError(f"checkpoint not found: {path}")

    echo = echo_config(cfg)
    print(echo, end="")
    if args.dry_run:
        return EXIT_OK
    run_dir = Path(cfg.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(echo, encoding="utf-8")
    start = time.time()
    result = train(cfg.trainer, run_dir, resume=args.resume,
                   metrics_path=cfg.metrics_file or None)
    print(f"trained updates={result.updates} step={result.step} rejected={result.rejected} "
          f"seconds={time.time() - start:.1f}")
    print(f"checkpoint={result.checkpoints[-1]}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.n < 1:
        raise ConfigError("-n must be >= 1")
    a = _load_agent(args.agent_a, args.greedy)
    b = _load_agent(args.agent_b, args.greedy)
    stats = arena(a, b, args.n, args.seed, args.turn_cap, args.transcript_dir or None)
    print(stats.summary())
    hist = " ".join(f"{k}:{stats.vp_hist_a[k]}/{stats.vp_hist_b[k]}" for k in stats.vp_hist_a)
    print(f"vp_hist(a/b) {hist}")
    if args.report:
        stats.write_csv(args.report, args.histogram or None)
    return EXIT_OK


def cmd_play(args) -> int:
    a = _load_agent(args.agent_a, args.greedy)
    b = _load_agent(args.agent_b, args.greedy)
    result = play_game(a, b, args.seed, args.turn_cap, record=True)
    write_transcript(args.transcript, result.transcript)
    winner = "draw" if result.winner is None else f"seat{result.winner}"
    print(f"winner={winner} vp={result.vps[0]}-{result.vps[1]} turns={result.turns} "
          f"moves={result.moves} transcript={args.transcript}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    engine_seed, _ = game_seeds(args.seed)
    print(render_board(generate_board(random.Random(engine_seed))))
    return EXIT_OK


def cmd_selftest(args) -> int:
    keep = len(discard_keep_actions())
    raw = raw_discard_action_count()
    grid = build_brick_grid()
    counts = grid.counts()
    kernel_ok = not grid.kernel_mismatches()
    print(f"discard_keep={keep} raw_discard={raw} "
          f"grid={counts[CellType.HEX]}/{counts[CellType.PATH]}/{counts[CellType.INTERSECTION]} "
          f"kernel={'OK' if kernel_ok else 'FAIL'}")
    ok = (keep == 70 and raw == 1_599_979 and kernel_ok
          and (counts[CellType.HEX], counts[CellType.PATH], counts[CellType.INTERSECTION]) == (19, 72, 54))
    return EXIT_OK if ok else EXIT_RUNTIME


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="catan-xdim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="run self-play training")
    p.add_argument("--config")
    p.add_argument("--resume", metavar="CKPT")
    p.add_argument("--no-activity-loss", action="store_true")
    p.add_argument("--fixed-opponent", metavar="CKPT",
                   help="freeze the opponent pool at this checkpoint ('initial' for the start weights)")
    p.add_argument("--run-dir")
    p.add_argument("--max-updates", type=int)
    p.add_argument("--dry-run", action="store_true", help="print the effective config and exit")
    p.set_defaults(func=cmd_train)

    def agents(p):
        p.add_argument("--agent-a", required=True, metavar="CKPT|random")
        p.add_argument("--agent-b", required=True, metavar="CKPT|random")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--greedy", action="store_true")
        p.add_argument("--turn-cap", type=int, default=TrainerConfig().turn_cap)

    p = sub.add_parser("eval", help="head-to-head arena")
    agents(p)
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--report", help="arena report CSV")
    p.add_argument("--histogram", help="VP histogram CSV")
    p.add_argument("--transcript-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("play", help="play one recorded game")
    agents(p)
    p.add_argument("--transcript", required=True)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("inspect", help="inspect boards")
    p.add_argument("what", choices=["board"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("selftest", help="built-in consistency checks")
    p.add_argument("what", choices=["combinatorics"])
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # never let a traceback be the interface
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


run_command = main

if __name__ == "__main__":
    sys.exit(main())
