"""Named, reproducible random streams derived from a single seed."""

import zlib

import numpy as np

STREAMS = ("data", "mask", "init", "search")


def stream_seed(seed: int, name: str, *extra: int) -> np.random.SeedSequence:
    # crc32 keeps the name -> key mapping stable across interpreter runs
    key = (zlib.crc32(name.encode()),) + tuple(int(e) for e in extra)
    return np.random.SeedSequence(int(seed), spawn_key=key)


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Return an independent generator for ``name`` (and optional sub-keys)."""
    return np.random.default_rng(stream_seed(seed, name, *extra))


def int_seed(seed: int, name: str, *extra: int) -> int:
    """A 63-bit integer seed for libraries that do not take numpy generators."""
    return int(stream_seed(seed, name, *extra).generate_state(1, np.uint64)[0] >> np.uint64(1))
