"""Counter-based Gaussian streams.

Every (seed, path, mode) triple owns an independent Philox stream: the key
holds (seed, path id) and the top counter word holds the mode, so draw
number i of a stream is the increment of step i.  Values never depend on
how paths are grouped or scheduled.
"""

import numpy as np

_MASK = (1 << 64) - 1


def stream(seed: int, path_id: int, mode: int) -> np.random.Generator:
    bits = np.random.Philox(key=[int(seed) & _MASK, int(path_id)], counter=[0, 0, 0, int(mode)])
    return np.random.Generator(bits)


def brownian_increments(seed: int, path_ids, n_modes: int, n_steps: int, dt: float) -> np.ndarray:
    """Increments with variance dt, shape (len(path_ids), n_modes, n_steps)."""
    path_ids = np.asarray(path_ids)
    out = np.empty((path_ids.size, n_modes, n_steps))
    sd = np.sqrt(dt)
    for a, p in enumerate(path_ids):
        for j in range(n_modes):
            out[a, j] = stream(seed, p, j).standard_normal(n_steps)
    out *= sd
    return out
