"""Seeded box sampling for the experiment harness.

Every chunk of trials draws from its own Philox stream keyed by
``(seed, stream, chunk)``, so results do not depend on how many worker
threads process the chunks.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import normalize_obb

SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    trials: int = 1000
    center_range: tuple = (0.0, 10.0)
    size_range: tuple = (0.5, 5.0)
    angle_range: tuple = (-math.pi / 2, math.pi / 2)
    out: Optional[str] = None
    tau: float = 1.1
    delta: float = 5.0
    alpha: float = 3.0
    lam: float = 2.0
    workers: int = 1
    chunk_size: int = 100_000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        lo, hi = self.size_range
        if not 0 < lo <= hi:
            raise ValueError(f"size range must be strictly positive, got {self.size_range}")
        if self.center_range[0] > self.center_range[1] or self.angle_range[0] > self.angle_range[1]:
            raise ValueError("ranges must be ordered (low, high)")
        if self.workers < 1 or self.chunk_size < 1:
            raise ValueError("workers and chunk_size must be >= 1")


def substream(seed, stream=0, chunk=0):
    """Independent generator for one (stream, chunk) of a seeded run."""
    ss = np.random.SeedSequence([int(seed) & SEED_MASK, int(stream), int(chunk)])
    return np.random.Generator(np.random.Philox(ss))


def sample_boxes(rng, n, cfg, horizontal=False):
    """Draw ``n`` boxes as an ``(n, 5)`` array in long-edge form.

    Centers are uniform over ``center_range`` squared, each side uniform in
    ``size_range`` and the angle uniform in ``angle_range`` (0 when
    ``horizontal``).
    """
    c = rng.uniform(*cfg.center_range, size=(n, 2))
    s = rng.uniform(*cfg.size_range, size=(n, 2))
    t = np.zeros(n) if horizontal else rng.uniform(*cfg.angle_range, size=n)
    if horizontal:
        return np.column_stack([c, s, t])
    w, h, t = normalize_obb(s[:, 0], s[:, 1], t)
    return np.column_stack([c, w, h, t])


def chunks(total, size):
    return [(i, start, min(size, total - start))
            for i, start in enumerate(range(0, total, size))]


def map_chunks(fn, cfg, total=None):
    """Apply ``fn(chunk_index, n)`` over all chunks; results in chunk order."""
    parts = chunks(cfg.trials if total is None else total, cfg.chunk_size)
    if cfg.workers == 1 or len(parts) == 1:
        return [fn(i, n) for i, _, n in parts]
    with ThreadPoolExecutor(cfg.workers) as pool:
        return list(pool.map(lambda p: fn(p[0], p[2]), parts))
