"""Mixture proposal: uniform mass epsilon/P everywhere plus (1 - epsilon) on a
softmax restricted to a retrieved top-K set."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError

MIN_EPSILON = 1e-6


def alias_table(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table for O(1) draws from a discrete law."""
    n = len(p)
    scaled = np.asarray(p, dtype=np.float64) * n
    prob = np.ones(n)
    alias = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = scaled[g] + scaled[s] - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    # leftovers are 1 up to rounding
    return prob, alias


@dataclass(frozen=True)
class MixtureProposal:
    epsilon: float
    n_items: int
    ids: np.ndarray
    kappa: np.ndarray
    _sorted_ids: np.ndarray
    _sorted_kappa: np.ndarray
    _alias_prob: np.ndarray
    _alias_idx: np.ndarray

    def prob(self, actions) -> np.ndarray:
        """Vectorised q(a) for an array of action ids."""
        a = np.asarray(actions, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() >= self.n_items):
            raise IndexError(f"action out of range for catalog of size {self.n_items}")
        out = np.full(a.shape, self.epsilon / self.n_items)
        if len(self._sorted_ids):
            pos = np.searchsorted(self._sorted_ids, a)
            pos = np.minimum(pos, len(self._sorted_ids) - 1)
            hit = self._sorted_ids[pos] == a
            out[hit] += (1.0 - self.epsilon) * self._sorted_kappa[pos[hit]]
        return out

    def log_prob(self, actions) -> np.ndarray:
        return np.log(self.prob(actions))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        uniform_arm = rng.random(n) < self.epsilon
        out = rng.integers(0, self.n_items, size=n)
        k = len(self.ids)
        n_top = int(n - uniform_arm.sum())
        if n_top and k:
            col = rng.integers(0, k, size=n_top)
            keep = rng.random(n_top) < self._alias_prob[col]
            pick = np.where(keep, col, self._alias_idx[col])
            out[~uniform_arm] = self.ids[pick]
        return out


def build_proposal(topk, epsilon: float, n_items: int) -> MixtureProposal:
    """``topk`` is a pair (ids, scores); kappa is the softmax of the scores."""
    epsilon = float(epsilon)
    if not MIN_EPSILON <= epsilon <= 1.0:
        raise ConfigurationError(f"epsilon must lie in [{MIN_EPSILON}, 1], got {epsilon}")
    ids, scores = topk
    ids = np.asarray(ids, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if ids.shape != scores.shape:
        raise ConfigurationError("top-K ids and scores differ in length")
    if len(np.unique(ids)) != len(ids):
        raise ConfigurationError("top-K ids must be distinct")
    if ids.size and (ids.min() < 0 or ids.max() >= n_items):
        raise IndexError("top-K id outside the catalog")
    if not np.all(np.isfinite(scores)):
        raise FloatingPointError("non-finite top-K score")
    if ids.size == 0 and epsilon < 1.0:
        raise ConfigurationError("an empty top-K set only supports epsilon = 1")
    if ids.size:
        e = np.exp(scores - scores.max())
        kappa = e / e.sum()
    else:
        kappa = np.zeros(0)
    order = np.argsort(ids)
    prob, alias = alias_table(kappa) if ids.size else (np.zeros(0), np.zeros(0, dtype=np.int64))
    return MixtureProposal(epsilon, int(n_items), ids, kappa, ids[order], kappa[order], prob, alias)


def proposal_prob(q: MixtureProposal, a: int) -> float:
    a = int(a)
    if not 0 <= a < q.n_items:
        raise IndexError(f"action {a} out of range for catalog of size {q.n_items}")
    return float(q.prob(np.array([a]))[0])


def proposal_sample(q: MixtureProposal, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    if n_samples < 2:
        raise ConfigurationError(f"need at least 2 samples, got {n_samples}")
    return q.sample(int(n_samples), rng)
