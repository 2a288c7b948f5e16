"""Counter-based random streams, one per Monte Carlo path.

Stream ``(master_seed, stream_index)`` is a Philox4x32-10 generator keyed by
``SeedSequence(master_seed, spawn_key=(stream_index,))``.  Normals come from
numpy's ``Generator.standard_normal`` (ziggurat).  Philox output is fixed by
the algorithm itself; the ziggurat transform is pinned by the numpy version
recorded in every replay document (see ``RNG_ALGORITHM``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RNG_ALGORITHM = f"philox4x32-10/seedsequence-spawn/ziggurat-normal (numpy {np.__version__})"

_U64 = 2**64


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < _U64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.Philox(seq))

    def substream(self, index: int) -> RngStream:
        return RngStream(self.master_seed, index)


def gaussian_increments(stream: RngStream, count: int) -> np.ndarray:
    """``count`` standard normals, reproducible from the stream identity."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return stream.generator().standard_normal(int(count))


def path_noise(master_seed: int, first_path: int, n_paths: int, n_steps: int, dim: int) -> np.ndarray:
    """Noise block of shape (n_paths, n_steps, dim); path i reads stream i."""
    out = np.empty((n_paths, n_steps, dim))
    for k in range(n_paths):
        gen = RngStream(master_seed, first_path + k).generator()
        out[k] = gen.standard_normal((n_steps, dim))
    return out
