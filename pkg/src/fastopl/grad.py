"""Gradient estimators for the per-context objective sum_a pi(a|x) r(a, x).

All estimators return the reward-ascent direction.  With the linear user map
the score gradient is the outer product ``grad_theta f(a, x) = x beta[a]^T``,
so every estimator reduces to ``outer(x, v)`` for an L-vector ``v`` and is
computed that way in closed form.

``reward`` is any callable mapping an integer array of actions to an array of
rewards for the context at hand (see :mod:`fastopl.rewards`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .core import ConfigurationError, as_matrix, softmax, user_vector
from .proposal import MixtureProposal

ENUMERATION_LIMIT = 100_000
LOW_ESS_FRACTION = 0.01
_GUMBEL_BLOCK = 2_000_000


@dataclass
class GradientEstimate:
    grad: np.ndarray
    kind: str
    n_samples: int = 0
    ess: float = float("nan")
    max_weight: float = float("nan")
    weights: np.ndarray | None = None
    stderr: np.ndarray | None = None
    value: float = float("nan")  # estimated expected reward under the policy

    @property
    def low_ess(self) -> bool:
        return self.n_samples > 0 and self.ess < LOW_ESS_FRACTION * self.n_samples


def _prepare(theta, x, beta):
    b = as_matrix(beta)
    x = np.asarray(x, dtype=np.float64)
    h = user_vector(theta, x)
    if b.ndim != 2 or b.shape[1] != h.shape[0]:
        raise ConfigurationError(f"embeddings of shape {b.shape} do not match dimension {h.shape[0]}")
    return b, x, h


def _enumerate(theta, x, beta, reward, limit):
    b, x, h = _prepare(theta, x, beta)
    if b.shape[0] > limit:
        raise ConfigurationError(
            f"exact enumeration refused for a catalog of {b.shape[0]} items (limit {limit})"
        )
    pi = softmax(b @ h)
    r = np.asarray(reward(np.arange(b.shape[0])), dtype=np.float64)
    return b, x, pi, r


def exact_gradient(theta, x, beta, reward, limit: int = ENUMERATION_LIMIT) -> GradientEstimate:
    """E_pi[r(a) grad log pi(a|x)], summed over the whole catalog."""
    b, x, pi, r = _enumerate(theta, x, beta, reward, limit)
    mean_beta = pi @ b
    # grad log pi(a|x) = x (beta_a - E_pi beta)^T
    v = (pi * r) @ (b - mean_beta)
    return GradientEstimate(np.outer(x, v), "exact", value=float(pi @ r))


def exact_covariance_gradient(theta, x, beta, reward, limit: int = ENUMERATION_LIMIT) -> GradientEstimate:
    """Cov_pi[r(a), grad f(a, x)], summed over the whole catalog."""
    b, x, pi, r = _enumerate(theta, x, beta, reward, limit)
    r_bar = pi @ r
    mean_beta = pi @ b
    v = (pi * (r - r_bar)) @ (b - mean_beta)
    return GradientEstimate(np.outer(x, v), "exact-covariance", value=float(r_bar))


def gumbel_max_sample(scores: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Exact softmax draws: argmax of scores perturbed by i.i.d. Gumbel noise."""
    p = len(scores)
    rows = max(1, _GUMBEL_BLOCK // p)
    out = np.empty(n_samples, dtype=np.int64)
    for start in range(0, n_samples, rows):
        stop = min(start + rows, n_samples)
        u = rng.random((stop - start, p))
        noise = -np.log(-np.log(u))
        noise += scores
        out[start:stop] = np.argmax(noise, axis=1)
    return out


def inverse_cdf_sample(scores: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Exact softmax draws through the normalised cdf (one O(P) pass)."""
    cdf = np.cumsum(softmax(scores))
    idx = np.searchsorted(cdf, rng.random(n_samples) * cdf[-1], side="right")
    return np.minimum(idx, len(scores) - 1)


_SAMPLERS = {"gumbel": gumbel_max_sample, "inverse-cdf": inverse_cdf_sample}


def reinforce_mc_gradient(theta, x, beta, reward, n_samples: int, rng: np.random.Generator,
                          sampler: str = "gumbel") -> GradientEstimate:
    """Monte-Carlo REINFORCE with exact on-policy draws; O(S P) with Gumbel-max."""
    if n_samples < 1:
        raise ConfigurationError(f"need at least one sample, got {n_samples}")
    b, x, h = _prepare(theta, x, beta)
    scores = b @ h
    if not np.all(np.isfinite(scores)):
        raise FloatingPointError("non-finite policy score")
    actions = _SAMPLERS[sampler](scores, n_samples, rng)
    mean_beta = softmax(scores) @ b
    r = np.asarray(reward(actions), dtype=np.float64)
    terms = r[:, None] * (b[actions] - mean_beta)
    v = terms.mean(axis=0)
    se = np.outer(np.abs(x), terms.std(axis=0, ddof=1) if n_samples > 1 else np.zeros_like(v))
    return GradientEstimate(np.outer(x, v), "reinforce", n_samples, stderr=se / np.sqrt(n_samples),
                            value=float(r.mean()))


def snis_weights(scores: np.ndarray, log_q: np.ndarray) -> np.ndarray:
    """Self-normalised weights exp(f - log q) / sum, computed in log space."""
    logw = scores - log_q
    logw = logw - logw.max()
    w = np.exp(logw)
    return w / w.sum()


def snis_covariance_gradient(theta, x, beta, reward, proposal: MixtureProposal, n_samples: int,
                             rng: np.random.Generator) -> GradientEstimate:
    """Self-normalised importance-sampling estimate of the covariance gradient.

    Touches only the sampled rows of ``beta``; never forms a full-catalog sum.
    """
    if n_samples < 2:
        raise ConfigurationError(f"covariance estimation needs at least 2 samples, got {n_samples}")
    b = as_matrix(beta)
    x = np.asarray(x, dtype=np.float64)
    h = user_vector(theta, x)
    if b.shape[1] != h.shape[0]:
        raise ConfigurationError(f"embeddings of shape {b.shape} do not match dimension {h.shape[0]}")
    actions = proposal.sample(n_samples, rng)
    rows = b[actions]
    f = rows @ h
    if not np.all(np.isfinite(f)):
        bad = actions[~np.isfinite(f)][:5]
        raise FloatingPointError(f"non-finite score for sampled actions {bad.tolist()}")
    wbar = snis_weights(f, proposal.log_prob(actions))
    r = np.asarray(reward(actions), dtype=np.float64)
    r_bar = wbar @ r
    mean_row = wbar @ rows
    v = (wbar * (r - r_bar)) @ (rows - mean_row)
    return GradientEstimate(
        np.outer(x, v), "snis", n_samples,
        ess=float(1.0 / np.sum(wbar * wbar)), max_weight=float(wbar.max()), weights=wbar,
        value=float(r_bar),
    )


def objective(theta, x, beta, reward) -> float:
    """sum_a pi(a|x) r(a, x) by enumeration; the finite-difference target."""
    b = as_matrix(beta)
    pi = core.policy_probabilities_exact(theta, x, b).probabilities
    return float(pi @ np.asarray(reward(np.arange(b.shape[0])), dtype=np.float64))
