# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`random` provides :class:`RandomStream`, the single source of randomness of *lacsh*.

A stream is built on the counter-based Philox4x64-10 bit generator of :mod:`numpy.random`, keyed by a
:class:`numpy.random.SeedSequence`. All deviates are derived from uniforms by inversion so that another implementation
sharing the raw 64-bit words reproduces the same draws:

* a uniform deviate takes the top 52 bits ``k`` of one raw word and returns ``(k + 0.5) / 2**52``, which lies in the
  open interval (0, 1);
* a standard normal deviate is ``ndtri(u)``;
* a standard gamma deviate of shape *s* is ``gammaincinv(s, u)``.

Independent sub-streams are obtained with :meth:`RandomStream.spawn`.
"""
import numpy as np
from scipy import special

_SCALE = 2.0 ** -52


class RandomStream:
    """
    A reproducible stream of random deviates.

    :param seed: an integer seed, a :class:`numpy.random.SeedSequence` or None for fresh entropy
    """
    def __init__(self, seed=None):
        if isinstance(seed, np.random.SeedSequence):
            self._seed_seq = seed
        else:
            self._seed_seq = np.random.SeedSequence(seed)
        self._bitgen = np.random.Philox(self._seed_seq)

    @property
    def seed_sequence(self):
        return self._seed_seq

    def spawn(self, n):
        """
        Derive *n* independent child streams.
        """
        return [RandomStream(child) for child in self._seed_seq.spawn(n)]

    @property
    def state(self):
        """
        The full bit generator state, a picklable dict; assigning it restores the stream position.
        """
        return self._bitgen.state

    @state.setter
    def state(self, value):
        self._bitgen.state = value

    def uniform(self, size=None):
        """
        Uniform deviates on the open interval (0, 1).
        """
        n = 1 if size is None else int(np.prod(size))
        raw = np.asarray(self._bitgen.random_raw(n), dtype=np.uint64)
        u = ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * _SCALE
        return float(u[0]) if size is None else u.reshape(size)

    def normal(self, size=None):
        """
        Standard normal deviates by inversion.
        """
        z = special.ndtri(self.uniform(size))
        return float(z) if size is None else z

    def gamma(self, shape, size=None):
        """
        Gamma deviates with the given *shape* and unit scale, by inversion.
        """
        g = special.gammaincinv(shape, self.uniform(size))
        return float(g) if size is None else g

    def chisquare(self, df, size=None):
        return 2.0 * self.gamma(np.asarray(df, dtype=float) / 2.0, size)

    def exponential(self, size=None):
        return -np.log(self.uniform(size))


def as_stream(rng):
    """
    Coerce *rng* (a :class:`RandomStream`, an integer seed or None) into a :class:`RandomStream`.
    """
    if isinstance(rng, RandomStream):
        return rng
    return RandomStream(rng)


__all__ = ['RandomStream', 'as_stream']
