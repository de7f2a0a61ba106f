"""
Counter-based random streams
Every replicate and every chain role draws from its own Philox stream,
derived from a single master seed through SeedSequence spawn keys
"""

import numpy as np

# Stream roles inside one replicate
ROLE_MAIN = 0
ROLE_VALIDATION = 1
ROLE_AUXILIARY = 2
ROLE_CALIBRATION = 3


def stream(seed, *path):
    """
    Independent generator for a (replicate, role, ...) path under a master seed

    Args:
        seed: master seed (non-negative integer)
        *path: integers identifying the stream, e.g. (replicate, ROLE_MAIN)

    Returns:
        numpy Generator backed by Philox
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))


def derived_seed(seed, *path):
    """Reportable 63-bit integer seed for a stream path"""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def replicate_streams(seed, replicates):
    """(main, validation) generator pairs for each replicate index"""
    return [(stream(seed, r, ROLE_MAIN), stream(seed, r, ROLE_VALIDATION)) for r in range(replicates)]
