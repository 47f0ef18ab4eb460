"""Seedable, splittable random streams.

Every consumer of randomness draws from its own named sub-stream derived from
one master seed, so e.g. changing the FISTA iteration count never perturbs the
Metropolis-Hastings proposals.
"""

from __future__ import annotations

import numpy as np

STREAM_IDS = {
    "noise": 0,
    "xi_m": 1,
    "xi_n": 2,
    "mh_proposal": 3,
    "mh_uniform": 4,
    "gamma": 5,
    "power": 6,
}


def stream(seed: int, name: str) -> np.random.Generator:
    """Generator fully determined by the pair (seed, stream id)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAM_IDS[name],))
    return np.random.Generator(np.random.PCG64(ss))


class RandomStreams:
    """Bundle of independent generators, one per named stream."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        for name in STREAM_IDS:
            setattr(self, name, stream(self.seed, name))
