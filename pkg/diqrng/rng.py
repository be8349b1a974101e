"""Seed derivation on top of numpy's counter-based Philox generator.

Every stochastic step draws from its own stream keyed by
(master_seed, stream, index...), so results never depend on the order in
which rounds are executed.
"""
import numpy as np

from diqrng.errors import DomainError

GENERATOR_NAME = "numpy-philox4x64/v1"

# stream identifiers used as the first spawn key
STREAM_ROUND = 0
STREAM_DETECTION = 1
STREAM_ALICE_INPUT = 2
STREAM_BOB_INPUT = 3
STREAM_SHARED = 4
STREAM_JOB = 5


def _check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise DomainError(f"seeds must be non-negative integers, got {seed!r}")
    return int(seed)


def make_rng(seed) -> np.random.Generator:
    """Generator for one stream; identical seeds give identical draws."""
    return np.random.Generator(np.random.Philox(_check_seed(seed)))


def derive_seed(master_seed, *keys) -> int:
    """64-bit child seed for the stream addressed by ``keys``."""
    sequence = np.random.SeedSequence(_check_seed(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, np.uint64)[0])
