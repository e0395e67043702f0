"""Counter-derived random substreams.

Every random draw in the simulator comes from ``substream(seed, *key)``, a
fresh generator seeded by ``SeedSequence(seed, spawn_key=key)``.  A shot's
randomness therefore depends only on (seed, key) and never on the order in
which shots are executed or on how many workers run them.

Key layout (first element is the domain tag):

    (MEASURE, unitary_index, shot)   protocol measurement + noise draws
    (SCHEDULE, shot)                 protocol (l, m) choice, uniform schedule
    (GATE_PAIR, pair)                gate-level (l, m) draw
    (GATE_SHOTS, pair)               gate-level outcomes for that pair
    (TOMO_CELL, cell_id)             tomography population cell
"""
from __future__ import annotations

import numpy as np

MEASURE, SCHEDULE, GATE_PAIR, GATE_SHOTS, TOMO_CELL = range(5)


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
