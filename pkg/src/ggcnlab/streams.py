"""Deterministic per-trial random streams for the Monte-Carlo oracles.

Trial t owns a fixed window of the Philox counter space: raw 64-bit words
[t*stride, (t+1)*stride) for a stride padded to a multiple of 4 (Philox
emits 4 words per counter block). Any contiguous range of trials can be
materialized directly by setting the counter, so estimates are identical no
matter how trials are chunked or distributed across workers.

Uniforms use the top 53 bits of a word (matching numpy's Generator.random);
normals use the Box-Muller transform at a fixed two-words-per-normal layout.
"""

import numpy as np
from numpy.random import Philox

_INV_2_53 = np.float64(2.0 ** -53)


def _pad4(n):
    return 4 * ((n + 3) // 4)


class TrialPlan:
    """Maps trial indices to disjoint raw-word windows of one Philox key."""

    def __init__(self, seed, words_per_trial):
        if words_per_trial < 1:
            raise ValueError("words_per_trial must be >= 1")
        self.seed = int(seed)
        self.stride = _pad4(int(words_per_trial))

    def raw(self, t0, t1):
        """Raw words for trials [t0, t1) as a (t1-t0, stride) uint64 array."""
        if t1 <= t0:
            return np.empty((0, self.stride), dtype=np.uint64)
        block = t0 * self.stride // 4
        bg = Philox(key=self.seed, counter=[block, 0, 0, 0])
        words = bg.random_raw((t1 - t0) * self.stride)
        return words.reshape(t1 - t0, self.stride)


def uniforms(words):
    """[0,1) doubles from raw words, one per word."""
    return (words >> np.uint64(11)) * _INV_2_53


def normals(words):
    """Standard normals from raw words, two words per normal.

    The trailing axis must have even length; output halves it. Uses
    z = sqrt(-2 ln(1-u1)) cos(2 pi u2) so each normal's layout is fixed.
    """
    u = uniforms(words)
    if u.shape[-1] % 2:
        raise ValueError("normals need an even number of words")
    u = u.reshape(u.shape[:-1] + (u.shape[-1] // 2, 2))
    r = np.sqrt(-2.0 * np.log1p(-u[..., 0]))
    return r * np.cos(2.0 * np.pi * u[..., 1])
