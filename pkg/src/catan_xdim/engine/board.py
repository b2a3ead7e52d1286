"""Board topology and randomized layouts for the standard 19-hex island.

The island is described as a brick wall: every hex is a brick two units wide
and one unit tall, and the five brick rows (3, 4, 5, 4, 3 bricks) are shifted
by one unit relative to their neighbours.  Brick corners and the midpoints of
the top and bottom edges are the intersections; the unit segments between
them are the paths.  This is topologically identical to the hexagonal tiling
and gives every element an integer coordinate, which the encoder reuses.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

BRICK, LUMBER, ORE, GRAIN, WOOL = range(5)
RESOURCES = (BRICK, LUMBER, ORE, GRAIN, WOOL)
RESOURCE_NAMES = ("Brick", "Lumber", "Ore", "Grain", "Wool")
DESERT = -1
GENERIC_HARBOR = 5

ROW_COUNTS = (3, 4, 5, 4, 3)
ROW_OFFSETS = (2, 1, 0, 1, 2)

HEX_INVENTORY = (
    [LUMBER] * 4 + [WOOL] * 4 + [GRAIN] * 4 + [BRICK] * 3 + [ORE] * 3 + [DESERT]
)
TOKEN_INVENTORY = [2, 12] + [t for t in (3, 4, 5, 6, 8, 9, 10, 11) for _ in range(2)]
HARBOR_INVENTORY = [GENERIC_HARBOR] * 4 + list(RESOURCES)
# Positions along the 30 coastal paths, walked clockwise from the top-left.
HARBOR_SLOTS = (0, 3, 7, 10, 13, 17, 20, 23, 27)


def _build_topology():
    hex_bricks = []
    for row, (count, off) in enumerate(zip(ROW_COUNTS, ROW_OFFSETS)):
        for k in range(count):
            hex_bricks.append((row, off + 2 * k))

    points = set()
    segments = set()
    hex_corner_points = []
    hex_segments = []
    for row, x0 in hex_bricks:
        corners = [(x0 + dx, row + dy) for dy in (0, 1) for dx in (0, 1, 2)]
        segs = [((x0, row), (x0 + 1, row)), ((x0 + 1, row), (x0 + 2, row)),
                ((x0, row + 1), (x0 + 1, row + 1)), ((x0 + 1, row + 1), (x0 + 2, row + 1)),
                ((x0, row), (x0, row + 1)), ((x0 + 2, row), (x0 + 2, row + 1))]
        points.update(corners)
        segments.update(segs)
        hex_corner_points.append(corners)
        hex_segments.append(segs)

    int_xy = sorted(points, key=lambda p: (p[1], p[0]))
    int_id = {p: i for i, p in enumerate(int_xy)}

    def seg_cell(seg):
        (xa, ya), (xb, yb) = seg
        return (2 * ya, 2 * xa + 1) if ya == yb else (2 * ya + 1, 2 * xa)

    path_segs = sorted(segments, key=seg_cell)
    path_id = {s: i for i, s in enumerate(path_segs)}

    hex_ints = tuple(tuple(int_id[p] for p in c) for c in hex_corner_points)
    hex_paths = tuple(tuple(path_id[s] for s in segs) for segs in hex_segments)
    path_ends = tuple((int_id[a], int_id[b]) for a, b in path_segs)

    int_paths = [[] for _ in int_xy]
    int_neighbors = [[] for _ in int_xy]
    for p, (a, b) in enumerate(path_ends):
        int_paths[a].append(p)
        int_paths[b].append(p)
        int_neighbors[a].append(b)
        int_neighbors[b].append(a)
    int_hexes = [[] for _ in int_xy]
    for h, ints in enumerate(hex_ints):
        for i in ints:
            int_hexes[i].append(h)
    path_hexes = [[] for _ in path_segs]
    for h, paths in enumerate(hex_paths):
        for p in paths:
            path_hexes[p].append(h)

    return Topology(
        hex_bricks=tuple(hex_bricks),
        int_xy=tuple(int_xy),
        path_segments=tuple(path_segs),
        hex_intersections=hex_ints,
        hex_paths=hex_paths,
        path_ends=path_ends,
        path_hexes=tuple(tuple(h) for h in path_hexes),
        int_paths=tuple(tuple(p) for p in int_paths),
        int_neighbors=tuple(tuple(n) for n in int_neighbors),
        int_hexes=tuple(tuple(h) for h in int_hexes),
        coast=_coastal_cycle(path_ends, path_hexes),
    )


def _coastal_cycle(path_ends, path_hexes):
    """Coastal paths (one adjacent hex) in walking order around the island."""
    coastal = [p for p, hs in enumerate(path_hexes) if len(hs) == 1]
    by_int: dict[int, list[int]] = {}
    for p in coastal:
        for i in path_ends[p]:
            by_int.setdefault(i, []).append(p)
    # path 0 is the top-left horizontal edge; walk eastwards from its left end
    start = 0
    order = [start]
    here = path_ends[start][1]
    while True:
        nxt = [p for p in by_int[here] if p != order[-1]][0]
        if nxt == start:
            break
        order.append(nxt)
        a, b = path_ends[nxt]
        here = b if a == here else a
    return tuple(order)


@dataclass(frozen=True)
class Topology:
    hex_bricks: tuple
    int_xy: tuple
    path_segments: tuple
    hex_intersections: tuple
    hex_paths: tuple
    path_ends: tuple
    path_hexes: tuple
    int_paths: tuple
    int_neighbors: tuple
    int_hexes: tuple
    coast: tuple

    @property
    def n_hexes(self) -> int:
        return len(self.hex_bricks)

    @property
    def n_paths(self) -> int:
        return len(self.path_ends)

    @property
    def n_intersections(self) -> int:
        return len(self.int_xy)


TOPOLOGY = _build_topology()
N_HEXES = TOPOLOGY.n_hexes
N_PATHS = TOPOLOGY.n_paths
N_INTERSECTIONS = TOPOLOGY.n_intersections


@dataclass(frozen=True)
class BoardLayout:
    """Per-game randomized part of the board.

    ``hex_kind[h]`` is a resource index or ``DESERT``; ``number_token[h]`` is
    0 on the desert.  ``harbors`` holds ``(kind, (i, j))`` pairs where kind is
    a resource (2:1) or ``GENERIC_HARBOR`` (3:1).
    """

    hex_kind: tuple[int, ...]
    number_token: tuple[int, ...]
    harbors: tuple[tuple[int, tuple[int, int]], ...]
    topology: Topology = field(default=TOPOLOGY, repr=False, compare=False)

    def __post_init__(self):
        harbor_at = [-1] * N_INTERSECTIONS
        for kind, ints in self.harbors:
            for i in ints:
                harbor_at[i] = kind
        # roll -> ((hex, resource, intersections), ...)
        production: dict[int, list] = {r: [] for r in range(2, 13)}
        for h, (kind, tok) in enumerate(zip(self.hex_kind, self.number_token)):
            if kind != DESERT:
                production[tok].append((h, kind, TOPOLOGY.hex_intersections[h]))
        object.__setattr__(self, "harbor_at", tuple(harbor_at))
        object.__setattr__(
            self, "production", {r: tuple(v) for r, v in production.items()}
        )

    @property
    def desert(self) -> int:
        return self.hex_kind.index(DESERT)


def generate_board(rng: random.Random) -> BoardLayout:
    kinds = list(HEX_INVENTORY)
    rng.shuffle(kinds)
    tokens = list(TOKEN_INVENTORY)
    rng.shuffle(tokens)
    it = iter(tokens)
    number_token = tuple(0 if k == DESERT else next(it) for k in kinds)
    harbor_kinds = list(HARBOR_INVENTORY)
    rng.shuffle(harbor_kinds)
    harbors = tuple(
        (kind, TOPOLOGY.path_ends[TOPOLOGY.coast[slot]])
        for kind, slot in zip(harbor_kinds, HARBOR_SLOTS)
    )
    return BoardLayout(tuple(kinds), number_token, harbors)
