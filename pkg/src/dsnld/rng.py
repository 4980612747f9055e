"""Counter-based random streams.

All randomness goes through numpy's Philox4x64-10 bit generator, keyed by
``(seed, stream_code)``. A named stream ("environment", "particles",
"initial", ...) gets its own key, and an integer block index is written
into the third 64-bit counter word, so block ``b`` of stream ``s`` is a
disjoint, randomly addressable substream of length 2**128 draws.

Gaussians are produced by the inverse normal CDF applied to 53-bit
uniforms, never by rejection, so output depends only on
``(seed, stream, block, size)``.
"""

import zlib

import numpy as np
from scipy.special import ndtri

GENERATOR_ID = "philox4x64-10/ndtri-v1"

_MASK64 = (1 << 64) - 1


def stream_code(name):
    """Stable 32-bit code for a stream name (crc32)."""
    return zlib.crc32(name.encode("utf-8"))


class CounterStream:
    """Addressable substreams of a Philox generator.

    Parameters
    ----------
    seed : int
        64-bit seed. Negative values and larger ints are rejected.
    name : str
        Stream name; different names give statistically independent streams.
    """

    def __init__(self, seed, name):
        seed = int(seed)
        if seed < 0 or seed > _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.name = name
        self._key = np.array([seed, stream_code(name)], dtype=np.uint64)

    def _bitgen(self, block):
        counter = np.array([0, 0, int(block) & _MASK64, 0], dtype=np.uint64)
        return np.random.Philox(key=self._key, counter=counter)

    def uniforms(self, block, size):
        """Uniforms in the open interval (0, 1), 53-bit resolution."""
        raw = self._bitgen(block).random_raw(int(np.prod(size)))
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return u.reshape(size)

    def normals(self, block, size):
        """Standard normals by inverse CDF."""
        return ndtri(self.uniforms(block, size))

    def __repr__(self):
        return f"CounterStream(seed={self.seed}, name={self.name!r})"
