"""Counter-based random streams for reproducible parallel ensembles.

Every particle or coupled pair owns a Philox stream keyed by
``(seed, stream_index)``, so a draw depends only on the global seed, the
index and the position in that stream, never on scheduling or worker
count.  Draws are buffered in blocks: vectorized generation is ~25x
cheaper per value than scalar calls and consumes the underlying bit
stream in the same deterministic order.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 256


class Stream:
    """Buffered scalar draws from one keyed Philox stream."""

    __slots__ = ("gen", "_u", "_iu", "_n", "_in", "_g", "_ig", "_gshape")

    def __init__(self, seed: int, index: int = 0):
        self.gen = np.random.Generator(np.random.Philox(key=[seed, index]))
        self._u = None
        self._iu = 0
        self._n = None
        self._in = 0
        self._g = None
        self._ig = 0
        self._gshape = None

    # -- uniforms -----------------------------------------------------------

    def uniform(self) -> float:
        if self._u is None or self._iu >= _BLOCK:
            self._u = self.gen.random(_BLOCK)
            self._iu = 0
        v = self._u[self._iu]
        self._iu += 1
        return v

    def uniform_vec(self, k: int) -> np.ndarray:
        return self.gen.random(k)

    # -- normals ------------------------------------------------------------

    def normal(self) -> float:
        if self._n is None or self._in >= _BLOCK:
            self._n = self.gen.standard_normal(_BLOCK)
            self._in = 0
        v = self._n[self._in]
        self._in += 1
        return v

    def normal_vec(self, k: int) -> np.ndarray:
        if self._n is None or self._in + k > _BLOCK:
            self._n = self.gen.standard_normal(max(_BLOCK, k))
            self._in = 0
        v = self._n[self._in:self._in + k].copy()
        self._in += k
        return v

    # -- gammas (one cached shape, which is all the samplers need) ----------

    def standard_gamma(self, shape: float) -> float:
        if self._g is None or self._gshape != shape or self._ig >= _BLOCK:
            self._g = self.gen.standard_gamma(shape, _BLOCK)
            self._gshape = shape
            self._ig = 0
        v = self._g[self._ig]
        self._ig += 1
        return v

    def beta(self, a: float, b: float) -> float:
        return float(self.gen.beta(a, b))
