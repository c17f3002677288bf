"""Walker's alias method for constant-time categorical sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AliasTable:
    """Probability and alias rows of a Walker table over ``m`` outcomes."""

    prob: np.ndarray
    alias: np.ndarray

    @property
    def size(self) -> int:
        return self.prob.shape[0]

    def reconstructed(self) -> np.ndarray:
        """The distribution encoded by the table."""
        m = self.size
        p = self.prob.copy()
        np.add.at(p, self.alias, 1.0 - self.prob)
        return p / m

    def sample(self, rng: np.random.Generator) -> int:
        """One draw: a uniform picks the column, a second one flips its coin."""
        col = int(rng.random() * self.size)
        if rng.random() < self.prob[col]:
            return col
        return int(self.alias[col])

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vectorised draws; consumes the stream in a different order to :meth:`sample`."""
        u = rng.random((2, size))
        col = (u[0] * self.size).astype(np.int64)
        return np.where(u[1] < self.prob[col], col, self.alias[col])


def build_alias(weights) -> AliasTable:
    """Vose's linear-time construction of an alias table.

    Zero weights are allowed and are never sampled.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d array")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if not total > 0:
        raise ValueError("at least one weight must be positive")
    m = w.size
    scaled = w * (m / total)
    prob = np.ones(m)
    alias = np.arange(m, dtype=np.int64)
    small = [i for i in range(m) if scaled[i] < 1.0]
    large = [i for i in range(m) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large[-1]
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        if scaled[g] < 1.0:
            large.pop()
            small.append(g)
    # leftovers are 1 up to rounding
    for i in large:
        prob[i] = 1.0
    for i in small:
        prob[i] = 1.0
    prob.setflags(write=False)
    alias.setflags(write=False)
    return AliasTable(prob, alias)
