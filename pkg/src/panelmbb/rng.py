"""Deterministic, counter-based random number streams.

All randomness in the package flows through :class:`Stream`, a thin wrapper
around numpy's Philox counter-based bit generator. A stream is identified by
a 64-bit seed (the Philox key) and a three-word lane (placed in the upper
words of the 256-bit Philox counter), so distinct lanes under one seed are
guaranteed-disjoint streams regardless of how much either one draws. Doubles
and Gaussians are produced from raw 64-bit outputs with fixed arithmetic
(shift-scale conversion, AS 241 inverse CDF), never through numpy's
distribution methods, so byte-level reproducibility does not hinge on the
numpy version.
"""

from __future__ import annotations

import numpy as np

from .normal import norm_ppf

_MASK64 = (1 << 64) - 1
# Second Philox key word, fixed for this package (first 16 hex digits of the
# golden ratio fraction). Distinguishes our streams from any other Philox use.
_KEY_CONST = 0x9E3779B97F4A7C15

_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def derive_seed(seed: int, index: int) -> int:
    """Derive the ``index``-th child seed from ``seed`` (splitmix64 output)."""
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class Stream:
    """One deterministic substream, identified by (seed, lane)."""

    def __init__(self, seed: int, lane: tuple[int, int, int] = (0, 0, 0)):
        if not 0 <= seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")
        key = np.array([seed, _KEY_CONST], dtype=np.uint64)
        counter = np.array([0, lane[0], lane[1], lane[2]], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key, counter=counter)
        self.seed = seed
        self.lane = tuple(lane)

    def raw(self, size: int) -> np.ndarray:
        """Next ``size`` raw 64-bit words."""
        return self._bitgen.random_raw(size)

    def uniforms(self, size: int) -> np.ndarray:
        """Doubles strictly inside (0, 1): ((raw >> 11) + 0.5) * 2**-53."""
        bits = self.raw(size) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * _INV_2_53

    def normals(self, size: int) -> np.ndarray:
        """Standard normal deviates via the inverse-CDF transform."""
        return norm_ppf(self.uniforms(size))

    def integers(self, high_inclusive: int, size: int) -> np.ndarray:
        """Uniform integers on {0, ..., high_inclusive}.

        Uses floor(u * (high+1)) on the (0,1) doubles; the induced bias is
        below 2**-52 per value, which is irrelevant next to Monte Carlo noise
        and keeps the draw a pure function of the raw stream.
        """
        if high_inclusive < 0:
            raise ValueError("high_inclusive must be nonnegative")
        u = self.uniforms(size)
        vals = (u * (high_inclusive + 1)).astype(np.int64)
        return np.minimum(vals, high_inclusive)
