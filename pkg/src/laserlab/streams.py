"""Reproducible, non-overlapping random streams.

Stream ``k`` of a seed is the PCG64 state advanced by ``k * 2**127`` draws
(``PCG64.jumped``), so distinct stream ids never overlap within a period of
``2**128``.
"""

import numpy as np

GENERATOR_NAME = "numpy.random.PCG64, stream k = PCG64(seed).jumped(k)"


def stream(seed, stream_id=0):
    if seed is None:
        raise ValueError("an explicit seed is required for reproducible streams")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if stream_id < 0:
        raise ValueError(f"stream_id must be >= 0, got {stream_id}")
    return np.random.Generator(np.random.PCG64(seed).jumped(int(stream_id)))


def rng_metadata(seed):
    return {"generator": GENERATOR_NAME, "seed": int(seed),
            "numpy": np.__version__}
