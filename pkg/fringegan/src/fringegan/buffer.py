"""History buffer of generated pairs shown to the discriminator.

Feeding the discriminator only the most recent generator output lets the
two networks chase each other in circles; mixing in pairs generated by
earlier generator states damps that oscillation.  The buffer keeps a pool
of past (input, generated) pairs and answers each draw with either the
current pair or a stored one.
"""

import numpy as np
import torch

from .errors import InvalidConfigError


class HistoryBuffer:
    """Fixed-capacity pool of past (input, generated) tensor pairs.

    push stores a detached CPU copy of the pair: straight appends until the
    pool is full, then replacement of a uniformly random slot.  sample
    returns the current pair with probability current_probability and
    otherwise a uniformly random stored pair, so the conditioning input
    always travels with the output it produced.  All randomness comes from
    the seed given here.
    """

    def __init__(self, capacity=64, seed=0, current_probability=0.5):
        if capacity < 1:
            raise InvalidConfigError("capacity must be at least 1")
        if not 0.0 <= current_probability <= 1.0:
            raise InvalidConfigError("current_probability must be in [0, 1]")
        self.capacity = capacity
        self.current_probability = current_probability
        self._rng = np.random.default_rng(seed)
        self._pairs = []

    def __len__(self):
        return len(self._pairs)

    def push(self, pair):
        stored = tuple(t.detach().clone().cpu() for t in pair)
        if len(self._pairs) < self.capacity:
            self._pairs.append(stored)
        else:
            slot = int(self._rng.integers(self.capacity))
            self._pairs[slot] = stored

    def sample(self, current):
        if not self._pairs or self._rng.random() < self.current_probability:
            return current
        slot = int(self._rng.integers(len(self._pairs)))
        return self._pairs[slot]
