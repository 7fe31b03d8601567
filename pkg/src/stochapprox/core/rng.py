"""Counter-based, splittable random streams."""

import numpy as np


def make_rng(master_seed: int, replicate: int = 0, stream: int = 0) -> np.random.Generator:
    """
    Return the generator for one replicate.

    Streams are Philox generators keyed by (master_seed, replicate), so every
    replicate draws the same numbers whatever order replicates run in. A
    non-zero stream selects an independent generator for the same replicate
    (used by the random stopping rule).

    Args:
        master_seed: Non-negative experiment seed
        replicate: Non-negative replicate index
        stream: Non-negative sub-stream index

    Returns:
        Independent numpy Generator
    """
    if master_seed < 0 or replicate < 0 or stream < 0:
        raise ValueError(f"Seeds must be non-negative, got ({master_seed}, {replicate}, {stream})")
    spawn_key = (replicate,) if stream == 0 else (replicate, stream)
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))
