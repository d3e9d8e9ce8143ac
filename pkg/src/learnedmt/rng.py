"""Seeded, splittable random streams.

One root seed expands into independent named streams (``"init"``,
``"shuffle"``, ``"dropout"``...). Each stream is keyed by a stable hash of
its name, so introducing a new stream never shifts the draws of another.
"""

from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 3


def stream(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), key])))
