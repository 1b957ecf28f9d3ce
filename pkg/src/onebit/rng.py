"""Counter-based random streams keyed by ``(seed, stream id, ...)``.

Every randomized routine in the package takes a ``numpy.random.Generator``
supplied by the caller.  ``stream`` builds one deterministically from a global
seed and a path of integer identifiers, so that independent tasks (directions,
Monte Carlo repetitions, chunks of paths) never share mutable RNG state.
"""
from __future__ import annotations

import numpy as np

DEFAULT_SEED = 20220101


def stream(seed: int, *ids: int) -> np.random.Generator:
    """Return a Philox generator keyed by ``seed`` and the stream ``ids``."""
    if seed < 0 or any(i < 0 for i in ids):
        raise ValueError("seed and stream ids must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *ids])))


def substreams(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Split ``count`` independent generators off ``rng`` (advances ``rng``)."""
    return rng.spawn(count)
