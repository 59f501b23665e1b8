"""Named random streams derived from one user seed.

A stream is ``SeedSequence(root_seed, spawn_key=(crc32(name),))``: the root seed acts
as the key and the CRC-32 of the stream name as the counter, so ``data``, ``split``,
``init``, ``shuffle`` and ``bench`` draws never overlap and never shift when another
stream consumes more numbers.
"""
import zlib

import numpy as np


def stream_seed(root_seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(root_seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))


def stream_rng(root_seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(root_seed, name)))

