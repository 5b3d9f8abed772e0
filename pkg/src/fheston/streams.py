"""Counter-based random streams.

Every stream is addressed by ``(seed, path index, driver id)``: the seed is
the Philox key and the path/driver pair is written into the high words of
the Philox counter. The low word is the block counter advanced by the
generator itself, so streams never overlap and a path's draws do not depend
on which worker produced them or in what order.
"""

from __future__ import annotations

import threading

import numpy as np

# driver ids
DRIVER_V = 0
DRIVER_VTILDE = 1
DRIVER_FGN = 2

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *labels: int) -> int:
    """Derive an independent 64-bit seed from ``seed`` and integer labels."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(x) for x in labels))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class PathStreams:
    """Factory of per-path normal streams for one global seed.

    Instances are cheap and thread-safe: each thread keeps its own Philox
    bit generator whose state is reset for every (path, driver) pair.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._key = np.array([self.seed, 0], dtype=np.uint64)
        self._local = threading.local()

    def _generator(self) -> tuple[np.random.Philox, np.random.Generator]:
        gen = getattr(self._local, "gen", None)
        if gen is None:
            bg = np.random.Philox(key=self.seed)
            gen = (bg, np.random.Generator(bg))
            self._local.gen = gen
        return gen

    def generator(self, path: int, driver: int) -> np.random.Generator:
        """Fresh, independent generator for one (path, driver) stream."""
        return np.random.Generator(np.random.Philox(key=self.seed, counter=self._counter(path, driver)))

    @staticmethod
    def _counter(path: int, driver: int) -> np.ndarray:
        return np.array([0, 0, int(path) & _MASK64, int(driver)], dtype=np.uint64)

    def normals(self, driver: int, paths, n: int) -> np.ndarray:
        """Standard normals of shape ``(len(paths), n)``; row i uses stream ``paths[i]``."""
        paths = np.atleast_1d(np.asarray(paths, dtype=np.int64))
        out = np.empty((paths.size, n))
        bg, gen = self._generator()
        for row, p in enumerate(paths):
            bg.state = {
                "bit_generator": "Philox",
                "state": {"counter": self._counter(p, driver), "key": self._key},
                "buffer": np.zeros(4, dtype=np.uint64),
                "buffer_pos": 4,
                "has_uint32": 0,
                "uinteger": 0,
            }
            gen.standard_normal(out=out[row])
        return out
