from __future__ import annotations

import numpy as np

# Paths per random stream. Fixing it keeps estimates independent of worker count.
PATH_BLOCK = 8192


def block_generator(master_seed: int, block: int, *, salt: int = 0) -> np.random.Generator:
    """Counter-based stream for one block of paths: Philox keyed by (seed, salt, block)."""
    if master_seed < 0 or block < 0:
        raise ValueError("seed and block index must be non-negative")
    seq = np.random.SeedSequence([master_seed, salt, block])
    return np.random.Generator(np.random.Philox(seq))


def path_blocks(n_paths: int, block_size: int = PATH_BLOCK) -> list[tuple[int, int]]:
    """(block index, paths in block) covering ``n_paths``."""
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    full, rest = divmod(n_paths, block_size)
    blocks = [(i, block_size) for i in range(full)]
    if rest:
        blocks.append((full, rest))
    return blocks
