"""Deterministic, splittable random streams.

Every stochastic routine in the package receives an explicit seed and derives
its generator through `stream_rng`, so results are reproducible and
independent of execution order (replicates may run on any thread schedule and
still consume identical streams).
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream_rng", "derive_seed"]


def _normalize(parts: tuple[int, ...]) -> tuple[int, ...]:
    out = []
    for p in parts:
        q = int(p)
        if q < 0:
            raise ValueError(f"stream ids must be nonnegative, got {q}")
        out.append(q)
    return tuple(out)


def stream_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the (seed, stream...) lane of the splittable RNG tree."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_normalize(stream))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *stream: int) -> int:
    """Collapse a stream address to a single reproducible integer seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_normalize(stream))
    return int(ss.generate_state(1, np.uint64)[0])
