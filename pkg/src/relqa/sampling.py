"""Weighted O(1) sampling (alias method) and seed derivation helpers."""

from __future__ import annotations

import zlib

import numpy as np


class AliasTable:
    """Alias table over non-negative weights; draws cost O(1) each.

    Construction is the classic two-worklist scheme: probabilities are
    scaled so the average cell is 1, overfull cells donate mass to
    underfull ones, and each cell ends up with a threshold plus an alias.
    """

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d array")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        total = float(w.sum())
        if total <= 0.0:
            raise ValueError("weights must not all be zero")
        n = w.size
        scaled = w * (n / total)
        prob = np.ones(n, dtype=np.float64)
        alias = np.arange(n, dtype=np.int64)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] = (scaled[l] + scaled[s]) - 1.0
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        for i in small + large:
            prob[i] = 1.0
            alias[i] = i
        self.prob = prob
        self.alias = alias
        self.n = n
        self.weights = w
        self.probabilities = w / total

    def sample(self, rng: np.random.Generator, size=None):
        """One index (size=None) or an ndarray of indices."""
        if size is None:
            i = int(rng.integers(self.n))
            return i if rng.random() < self.prob[i] else int(self.alias[i])
        idx = rng.integers(self.n, size=size)
        keep = rng.random(size=size) < self.prob[idx]
        return np.where(keep, idx, self.alias[idx])


def stage_seed(root_seed: int, label: str) -> np.random.SeedSequence:
    """Derive a per-stage seed from the root seed and a fixed stage label."""
    return np.random.SeedSequence([int(root_seed), zlib.crc32(label.encode("utf-8"))])


def stage_rng(root_seed: int, label: str) -> np.random.Generator:
    """Generator seeded from (root seed, stage label); stable across runs."""
    return np.random.default_rng(stage_seed(root_seed, label))
