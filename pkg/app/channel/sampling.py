"""
Seeded Rayleigh Channel Generation

Channel realizations are drawn from counter-based Philox4x64 streams keyed by
numpy's SeedSequence over (seed, realization index, *extra keys). Realization k
is therefore reachable without generating realizations 0..k-1, which lets the
Monte-Carlo harness hand realizations to any worker in any order and still get
bit-identical channels.
"""

from typing import List, Sequence

import numpy as np

from .models import MacInstance, PowerBudget, make_instance


def channel_stream(seed: int, realization: int = 0, *keys: int) -> np.random.Generator:
    """
    Independent generator for one realization.

    Args:
        seed: Master seed of the experiment
        realization: Realization index
        keys: Optional extra integers separating sub-streams

    Returns:
        numpy Generator backed by Philox
    """
    entropy = [int(seed), int(realization), *(int(key) for key in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def sample_rayleigh(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw an m x n matrix with i.i.d. CN(0, 1) entries.

    Real and imaginary parts are independent N(0, 1/2), so E|h|^2 = 1.
    """
    if m < 1 or n < 1:
        raise ValueError(f"Channel dimensions must be positive, got {m}x{n}")
    real = rng.standard_normal((m, n))
    imag = rng.standard_normal((m, n))
    return (real + 1j * imag) / np.sqrt(2.0)


def sample_channels(rng: np.random.Generator, m: int, tx_antennas: Sequence[int]) -> List[np.ndarray]:
    """Draw one channel per user, in user order, from a single stream."""
    return [sample_rayleigh(m, n, rng) for n in tx_antennas]


def random_instance(seed: int, realization: int, m: int, budgets: Sequence[PowerBudget]) -> MacInstance:
    """
    Seeded Rayleigh instance with the given per-antenna budgets.

    Users are drawn in order from the same stream, so the first K users of a
    realization do not depend on how many users follow them.
    """
    rng = channel_stream(seed, realization)
    channels = sample_channels(rng, m, [budget.size for budget in budgets])
    return make_instance(channels, budgets)
