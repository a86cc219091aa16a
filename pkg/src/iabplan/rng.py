"""Seeded random substreams.

Every random decision in the package draws from a generator derived from a
master seed and a purpose tag, so results never depend on evaluation order
or on how work is split across processes.

Mixing rule: the substream for ``(seed, tag, index, *extra)`` is a PCG64
generator seeded by ``SeedSequence(seed, spawn_key=(tag ^ index, *extra))``.
"""

from __future__ import annotations

import numpy as np

# Purpose tags. The high bits keep them apart for any realistic index.
SCENARIO_SEED = 0x5EED_0000
MBS_POSITIONS = 0x0A00_0000
SBS_POSITIONS = 0x0B00_0000
UE_POSITIONS = 0x0C00_0000
DESIGN_ORDER = 0x0D00_0000
RANDOM_PLACEMENT = 0x0E00_0000
DROP = 0x0F00_0000

# Per-drop channel components (used as the extra key after DROP ^ drop).
BACKHAUL_LINKS = 1
ACCESS_LOS = 2
ACCESS_FADING = 3
BEAMS = 4

_MASK64 = (1 << 64) - 1


def substream(seed: int, tag: int, index: int = 0, *extra: int) -> np.random.Generator:
    """Return the generator for ``(seed, tag, index, *extra)``."""
    if seed < 0 or seed > _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    key = (tag ^ index, *extra)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def derive_seed(master: int, index: int) -> int:
    """Scenario seed number ``index`` under a master seed (unsigned 64-bit)."""
    state = np.random.SeedSequence(master, spawn_key=(SCENARIO_SEED ^ index,)).generate_state(1, np.uint64)
    return int(state[0])
