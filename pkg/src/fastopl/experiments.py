"""Desk-scale experiment routines shared by ``scripts/`` and the acceptance suite."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bench import mean_epoch_seconds
from .data import PreparedData, prepare
from .grad import exact_covariance_gradient, snis_covariance_gradient
from .mips import IndexConfig, build_index
from .proposal import build_proposal
from .rewards import IndicatorReward
from .synth import latent_factor_interactions, timing_task
from .trainer import TrainConfig, train


def random_gradient_instance(n_items: int, dim: int, seed: int, scale: float = 1.0, n_labels: int | None = None):
    """theta, x, beta and a label-set reward for gradient checks."""
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((dim, dim)) * scale / np.sqrt(dim)
    x = rng.standard_normal(dim)
    beta = rng.standard_normal((n_items, dim)) / np.sqrt(dim)
    n_labels = n_labels or max(1, n_items // 5)
    labels = rng.choice(n_items, size=n_labels, replace=False)
    return theta, x, beta, IndicatorReward(labels)


def snis_error_curve(n_items=100, dim=8, epsilon=0.8, topk=16, sample_sizes=(100, 1_000, 10_000, 100_000),
                     replications=50, seed=0):
    """Relative Frobenius error of the replication-mean SNIS estimate per sample size,
    plus the mean per-replication error."""
    theta, x, beta, reward = random_gradient_instance(n_items, dim, seed)
    exact = exact_covariance_gradient(theta, x, beta, reward).grad
    h = theta.T @ x
    scores = beta @ h
    ids = np.lexsort((np.arange(n_items), -scores))[:topk]
    q = build_proposal((ids, scores[ids]), epsilon, n_items)
    rng = np.random.default_rng(seed + 1)
    norm = np.linalg.norm(exact)
    mean_err, rep_err = {}, {}
    for s in sample_sizes:
        ests = np.stack([snis_covariance_gradient(theta, x, beta, reward, q, s, rng).grad for _ in range(replications)])
        mean_err[s] = float(np.linalg.norm(ests.mean(axis=0) - exact) / norm)
        rep_err[s] = float(np.mean([np.linalg.norm(e - exact) for e in ests]) / norm)
    return mean_err, rep_err


@dataclass
class TimingResult:
    n_items: int
    method: str
    mean_epoch_seconds: float
    epochs: int


def time_methods(n_items: int, dim: int = 10, n_users: int = 16, epochs: int = 5, topk: int = 256,
                 samples: int = 1000, epsilon: float = 0.8, methods=("reinforce", "snis"), seed: int = 0,
                 index=None):
    """Mean per-epoch wall time of each method on a random catalog (index build excluded)."""
    beta, data = timing_task(n_items, dim, n_users, seed=seed)
    if index is None and "snis" in methods:
        index = build_index(beta, IndexConfig(seed=seed))
    out = {}
    for m in methods:
        cfg = TrainConfig(method=m, epsilon=epsilon, topk=topk, samples=samples, batch_size=n_users,
                          epochs=epochs, seed=seed)
        _, rep = train(cfg, data, beta, index if m == "snis" else None)
        out[m] = TimingResult(n_items, m, mean_epoch_seconds(rep), len(rep.records))
    return out


def planted_task(n_items=5000, n_users=5000, dim=32, test_frac=0.5, seed=0) -> PreparedData:
    ds = latent_factor_interactions(n_users, n_items, seed=seed)
    return prepare(ds, dim, seed, test_frac=test_frac)


QUALITY_RUNS = {
    # exact softmax draws either way; inverse-cdf keeps the O(S P) sampler out of a quality comparison
    "reinforce": dict(method="reinforce", samples=1000, sampler="inverse-cdf"),
    "snis-eps0.5": dict(method="snis", epsilon=0.5, samples=1000),
    "snis-eps0.8": dict(method="snis", epsilon=0.8, samples=1000),
    "snis-eps1.0": dict(method="snis", epsilon=1.0, samples=1000),
    "snis-S50": dict(method="snis", epsilon=0.8, samples=50),
    "snis-S200": dict(method="snis", epsilon=0.8, samples=200),
}


def learning_quality(runs=None, epochs=50, lr=1e-4, topk=256, seed=0, data: PreparedData | None = None,
                     verbose=False):
    """Train every run on the planted task with shared seeds; returns reports by name."""
    data = data or planted_task(seed=seed)
    index = build_index(data.beta, IndexConfig(seed=seed))
    reports = {}
    for name, kw in (runs or QUALITY_RUNS).items():
        cfg = TrainConfig(topk=topk, lr=lr, epochs=epochs, seed=seed, **kw)
        t0 = time.perf_counter()
        _, reports[name] = train(cfg, data.train, data.beta, index, data.test)
        if verbose:
            r = reports[name]
            print(f"{name:>12s}  final R_test {r.final_reward:.4f}  ({time.perf_counter() - t0:.0f}s)", flush=True)
    return reports
