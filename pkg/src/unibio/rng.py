"""Counter-based random number generation.

All stochastic oracles draw noise through a Philox counter-based generator
keyed by ``(seed, stream_id)`` with a per-call counter, so that any call is
reproducible in isolation: the triple ``(seed, stream, counter)`` fully
determines the draw.  Streams separate oracle families; counters advance
monotonically per stream and are owned by :class:`RngState`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Stream ids, one per oracle family.  Values >= STREAM_DATA are reserved for
# dataset synthesis inside problem factories.
STREAM_UL_GRAD = 1  # grad_x F
STREAM_LL_GRAD = 2  # grad_y G
STREAM_CROSS = 3  # grad_xy G
STREAM_GEN_GRAD = 4  # dF/dz
STREAM_GEN_JAC = 5  # d(grad_y G)/dz
STREAM_DATA = 100


def philox_normal(seed: int, stream: int, counter: int, shape) -> np.ndarray:
    """Standard normal draw at an explicit (seed, stream, counter) triple.

    The per-call counter occupies the high word of the 256-bit Philox
    counter; numpy consumes blocks by incrementing the low word, so calls
    with distinct counters never overlap and replaying a triple reproduces
    the draw bit-for-bit.
    """
    key = np.array([seed, stream], dtype=np.uint64)
    ctr = np.array([0, 0, 0, counter], dtype=np.uint64)
    bits = np.random.Philox(key=key, counter=ctr)
    return np.random.Generator(bits).standard_normal(shape)


@dataclass
class RngState:
    """Owns the per-stream call counters for one run.

    Two runs constructed with the same seed replay identical noise as long
    as they issue the same sequence of draws per stream.
    """

    seed: int
    counters: dict[int, int] = field(default_factory=dict)

    def normal(self, stream: int, shape) -> np.ndarray:
        """Draw standard normals from ``stream`` and advance its counter."""
        k = self.counters.get(stream, 0)
        self.counters[stream] = k + 1
        return philox_normal(self.seed, stream, k, shape)

    def peek(self, stream: int) -> int:
        return self.counters.get(stream, 0)


def additive_noise(rng: RngState, stream: int, shape, sigma: float) -> np.ndarray:
    """Additive Gaussian oracle noise with total variance ``sigma**2``.

    Entries are i.i.d. N(0, sigma^2/m) with m the number of entries, so
    E||noise||_F^2 = sigma^2 regardless of shape.  With sigma == 0 no draw
    is consumed, keeping zero-noise runs bit-for-bit deterministic.
    """
    if sigma == 0.0:
        return np.zeros(shape)
    m = int(np.prod(shape))
    return (sigma / np.sqrt(m)) * rng.normal(stream, shape)
