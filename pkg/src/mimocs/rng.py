"""Deterministic random streams derived from a single master seed.

Every random draw in the simulator comes from a child generator keyed by
``(trial, antenna, purpose)``.  The key is fed to
:class:`numpy.random.SeedSequence` as its ``spawn_key``, so a stream depends
only on the master seed and the key, never on the order in which streams are
requested.  This is what makes parallel trial execution reproduce sequential
results bit for bit.

Antenna index ``None`` (draws not tied to a receive antenna) maps to key
slot 0; antenna ``l`` maps to ``l + 1``.
"""

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    GEOMETRY = 0
    WAVEFORM = 1
    JAMMER = 2
    NOISE = 3
    MEASUREMENT = 4
    TARGETS = 5


def stream(seed, purpose, trial=0, antenna=None):
    """Return the generator for one ``(trial, antenna, purpose)`` slot."""
    if seed < 0 or trial < 0:
        raise ValueError("seed and trial must be non-negative")
    slot = 0 if antenna is None else int(antenna) + 1
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(int(trial), slot, int(purpose)))
    return np.random.default_rng(ss)
