"""Deterministic splitmix64 PRNG.

Every random draw in the package goes through this generator so that a
run is bit-reproducible across platforms. numpy's own generators are
deliberately not used for anything that affects results.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = 1.0 / float(1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """splitmix64 stream; identical seed => identical stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._state = self.seed  # kept as a python int; wrap is explicit

    def _raw(self, n: int) -> np.ndarray:
        """The next n outputs, identical to n sequential single draws."""
        steps = np.arange(1, n + 1, dtype=np.uint64) * _GAMMA
        out = _mix(np.uint64(self._state) + steps)
        self._state = (self._state + n * int(_GAMMA)) & _MASK64
        return out

    def next_u64(self) -> int:
        return int(self._raw(1)[0])

    def uniform(self) -> float:
        """One double in [0, 1) with 53 random bits."""
        return float(self._raw(1)[0] >> np.uint64(11)) * _INV_2_53

    def uniforms(self, rows: int, cols: int) -> np.ndarray:
        u = self._raw(rows * cols) >> np.uint64(11)
        return (u.astype(np.float64) * _INV_2_53).reshape(rows, cols)

    def uniform_range(self, rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
        return lo + (hi - lo) * self.uniforms(rows, cols)

    def normals(self, rows: int, cols: int) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        n = rows * cols
        k = (n + 1) // 2
        u1 = 1.0 - self.uniforms(1, k)[0]  # (0, 1], keeps log finite
        u2 = self.uniforms(1, k)[0]
        r = np.sqrt(-2.0 * np.log(u1))
        ang = 2.0 * np.pi * u2
        z = np.empty(2 * k)
        z[0::2] = r * np.cos(ang)
        z[1::2] = r * np.sin(ang)
        return z[:n].reshape(rows, cols)

    def keep_mask(self, rows: int, cols: int, drop_rate: float) -> np.ndarray:
        """0/1 mask; each entry is 0 with probability drop_rate."""
        return (self.uniforms(rows, cols) >= drop_rate).astype(np.float64)

    def below(self, n: int) -> int:
        """Integer in [0, n)."""
        return min(int(self.uniform() * n), n - 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), order randomized."""
        idx = list(range(n))
        self.shuffle(idx)
        return idx[:k]

    def fork(self) -> "Rng":
        """Independent child stream, seeded from this stream."""
        return Rng(self.next_u64())
