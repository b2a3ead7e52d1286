"""Keep-four discard abstraction.

A player forced to discard picks four cards to keep; if the rules require
keeping more than four, the surplus survivors are drawn uniformly at random
from the rest of the hand.
"""

from __future__ import annotations

import itertools
import random


class KeepNotInHand(ValueError):
    pass


def discard_keep_actions() -> list[tuple[int, ...]]:
    """All 70 multisets of four cards over five resources, lexicographic
    descending on the count vector so that (4,0,0,0,0) comes first."""
    keeps = [
        tuple(combo.count(r) for r in range(5))
        for combo in itertools.combinations_with_replacement(range(5), 4)
    ]
    return keeps


KEEP4 = tuple(discard_keep_actions())


def resolve_discard(hand, keep4, keep_count: int, rng: random.Random) -> tuple[int, ...]:
    """Return the discarded multiset as a 5-tuple of counts."""
    if any(k > h for k, h in zip(keep4, hand)):
        raise KeepNotInHand(f"keep {tuple(keep4)} not contained in hand {tuple(hand)}")
    rest = [h - k for h, k in zip(hand, keep4)]
    extra = keep_count - sum(keep4)
    if extra > 0:
        cards = [r for r in range(5) for _ in range(rest[r])]
        for r in rng.sample(cards, extra):
            rest[r] -= 1
    return tuple(rest)
