"""Domain types and exact softmax-policy math.

The policy scores an action ``a`` for a context ``x`` with the bilinear form
``f(a, x) = (theta.T @ x) @ beta[a]`` and samples from the softmax over the
whole catalog.  Everything in this module is the O(P) reference path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Raised when shapes or parameters are inconsistent."""


def _finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class Catalog:
    size: int

    def __post_init__(self):
        if int(self.size) < 2:
            raise ConfigurationError(f"catalog needs at least 2 actions, got {self.size}")

    def check(self, action: int) -> int:
        a = int(action)
        if not 0 <= a < self.size:
            raise IndexError(f"action {a} out of range for catalog of size {self.size}")
        return a


@dataclass(frozen=True)
class ItemEmbeddings:
    """Frozen P x L item matrix.  The array is made read-only on construction."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, order="C")
        if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
            raise ConfigurationError(f"item embeddings must be a non-empty 2-d array, got shape {m.shape}")
        _finite(m, "item embeddings")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_items(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


@dataclass
class PolicyParams:
    theta: np.ndarray

    def __post_init__(self):
        t = np.array(self.theta, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ConfigurationError(f"theta must be square, got shape {t.shape}")
        _finite(t, "theta")
        self.theta = t

    @classmethod
    def zeros(cls, dim: int) -> "PolicyParams":
        return cls(np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class LoggedBanditRecord:
    context: np.ndarray
    action: int
    propensity: float
    reward: float

    def __post_init__(self):
        if not 0.0 < self.propensity <= 1.0:
            raise ConfigurationError(f"propensity must lie in (0, 1], got {self.propensity}")


@dataclass
class ActionDistribution:
    probabilities: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.probabilities)

    def __getitem__(self, a):
        return self.probabilities[a]


def as_matrix(beta) -> np.ndarray:
    """Accept an :class:`ItemEmbeddings` or a raw array."""
    if isinstance(beta, ItemEmbeddings):
        return beta.matrix
    return np.asarray(beta, dtype=np.float64)


def as_theta(theta) -> np.ndarray:
    if isinstance(theta, PolicyParams):
        return theta.theta
    return np.asarray(theta, dtype=np.float64)


def user_vector(theta, x) -> np.ndarray:
    """h(x) = theta.T @ x, checked for shape agreement."""
    t = as_theta(theta)
    x = np.asarray(x, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ConfigurationError(f"theta must be square, got shape {t.shape}")
    if x.shape != (t.shape[0],):
        raise ConfigurationError(f"context of shape {x.shape} does not match theta {t.shape}")
    return t.T @ x


def all_scores(theta, x, beta) -> np.ndarray:
    b = as_matrix(beta)
    h = user_vector(theta, x)
    if b.ndim != 2 or b.shape[1] != h.shape[0]:
        raise ConfigurationError(f"embeddings of shape {b.shape} do not match dimension {h.shape[0]}")
    return b @ h


def relevance_score(theta, x, beta, a: int) -> float:
    b = as_matrix(beta)
    h = user_vector(theta, x)
    if b.shape[1] != h.shape[0]:
        raise ConfigurationError(f"embeddings of shape {b.shape} do not match dimension {h.shape[0]}")
    a = int(a)
    if not 0 <= a < b.shape[0]:
        raise IndexError(f"action {a} out of range for catalog of size {b.shape[0]}")
    return float(h @ b[a])


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - np.max(scores)
    e = np.exp(z)
    return e / e.sum()


def log_partition(scores: np.ndarray) -> float:
    m = np.max(scores)
    return float(m + np.log(np.exp(scores - m).sum()))


def policy_probabilities_exact(theta, x, beta) -> ActionDistribution:
    return ActionDistribution(softmax(all_scores(theta, x, beta)))


def policy_argmax_exact(theta, x, beta) -> int:
    # np.argmax returns the first maximal index, i.e. the lowest action id on ties
    return int(np.argmax(all_scores(theta, x, beta)))
