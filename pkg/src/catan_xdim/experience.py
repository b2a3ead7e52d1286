"""Training samples and fixed-size batches."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class Experience:
    channels: np.ndarray
    scalars: np.ndarray
    mask: np.ndarray
    action: int
    reward: float = 0.0
    terminal: bool = False
    next_channels: Optional[np.ndarray] = None
    next_scalars: Optional[np.ndarray] = None
    next_mask: Optional[np.ndarray] = None


@dataclass
class Batch:
    """Stacked experiences.  Successor arrays are zero rows where terminal."""

    channels: np.ndarray       # (B, 17, 11, 21)
    scalars: np.ndarray        # (B, 45)
    masks: np.ndarray          # (B, A) bool
    actions: np.ndarray        # (B,) int
    rewards: np.ndarray        # (B,)
    terminal: np.ndarray       # (B,) bool
    next_channels: np.ndarray
    next_scalars: np.ndarray
    next_masks: np.ndarray
    worker_id: int = 0
    policy_version: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.actions)

    @classmethod
    def from_experiences(cls, exps: list[Experience], worker_id: int = 0,
                         policy_version: int = 0) -> "Batch":
        if not exps:
            raise ValueError("empty batch")
        zc = np.zeros_like(exps[0].channels)
        zs = np.zeros_like(exps[0].scalars)
        zm = np.zeros_like(exps[0].mask)
        return cls(
            channels=np.stack([e.channels for e in exps]),
            scalars=np.stack([e.scalars for e in exps]),
            masks=np.stack([e.mask for e in exps]),
            actions=np.array([e.action for e in exps], dtype=np.int64),
            rewards=np.array([e.reward for e in exps], dtype=np.float64),
            terminal=np.array([e.terminal for e in exps], dtype=bool),
            next_channels=np.stack([zc if e.terminal else e.next_channels for e in exps]),
            next_scalars=np.stack([zs if e.terminal else e.next_scalars for e in exps]),
            next_masks=np.stack([zm if e.terminal else e.next_mask for e in exps]),
            worker_id=worker_id,
            policy_version=policy_version,
        )
