"""Deterministic random streams for reproducible experiments.

Generator: numpy's Philox (counter-based, 64-bit words), keyed per trial by
``seed XOR trial_index``.  Gaussian variates are produced by the Box-Muller
transform applied to consecutive uniform pairs drawn in a fixed order, so the
stream of normals is a pure function of (seed, index, draw order) and does not
depend on numpy's rejection-sampling internals.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


class TrialStream:
    """One independent, reproducible random stream.

    :param seed: base 64-bit seed for the whole experiment.
    :param index: sub-stream index (trial number); the Philox key is
        ``seed XOR index``.
    """

    def __init__(self, seed, index=0):
        self.seed = int(seed) & _MASK64
        self.index = int(index) & _MASK64
        key = self.seed ^ self.index
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniform(self, size):
        """Uniform [0, 1) doubles, drawn in order."""
        return self._gen.random(size)

    def normal(self, size):
        """Standard normals via Box-Muller on consecutive uniform pairs.

        For k requested values, 2*ceil(k/2) uniforms are consumed in order;
        pair (u1, u2) yields r*cos(2 pi u2), r*sin(2 pi u2) with
        r = sqrt(-2 ln(1 - u1)).
        """
        shape = (size,) if np.isscalar(size) else tuple(size)
        k = int(np.prod(shape)) if shape else 1
        npairs = (k + 1) // 2
        u = self._gen.random(2 * npairs)
        r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
        ang = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * npairs)
        z[0::2] = r * np.cos(ang)
        z[1::2] = r * np.sin(ang)
        z = z[:k]
        return z.reshape(shape) if shape else float(z[0])
