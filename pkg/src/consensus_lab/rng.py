"""Counter-based noise streams for ensemble simulation.

Paths are grouped into fixed blocks of ``BLOCK_PATHS``.  The normals used at
time step ``k`` by a block come from a Philox generator keyed by
``(seed, block)`` with its counter reset to ``(0, k, 0, 0)``, and row ``r``
of that draw belongs to path ``block * BLOCK_PATHS + r``.  Rows are filled
in order, so a partial block sees a prefix of the full draw.  The noise of
a path is therefore a function of ``(seed, path, step)`` only; ensemble
size, thread count and execution order do not change it.
"""

from __future__ import annotations

import numpy as np

BLOCK_PATHS = 1024
_MASK64 = (1 << 64) - 1


class CounterStream:
    def __init__(self, seed: int, block: int):
        key = np.array([int(seed) & _MASK64, int(block)], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state

    def normals(self, step: int, rows: int, cols: int, out: np.ndarray | None = None) -> np.ndarray:
        st = self._state
        st["state"]["counter"][:] = (0, step, 0, 0)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        self._bitgen.state = st
        if out is None:
            return self._gen.standard_normal((rows, cols))
        return self._gen.standard_normal(out=out)


def block_ranges(n_paths: int) -> list[tuple[int, int]]:
    return [(b, min(b + BLOCK_PATHS, n_paths)) for b in range(0, n_paths, BLOCK_PATHS)]
