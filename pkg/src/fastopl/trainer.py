"""Offline policy training loop, test-time evaluation and timing."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ConfigurationError, as_matrix
from .data import EmbeddedDataset
from .grad import exact_gradient, reinforce_mc_gradient, snis_covariance_gradient
from .mips import IndexConfig, MipsIndex, build_index
from .optim import make_optimizer
from .proposal import build_proposal
from .rewards import IndicatorReward

log = logging.getLogger(__name__)

METHODS = ("exact", "reinforce", "snis")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    method: str = "snis"
    epsilon: float = 0.8
    topk: int = 256
    samples: int = 1000
    batch_size: int = 32
    optimizer: str = "adam"
    lr: float = 1e-4
    epochs: int = 50
    seed: int = 0
    sampler: str = "gumbel"
    eval_every: int = 1
    budget_seconds: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("epochs must be >= 0 and batch size >= 1")
        if self.method == "snis":
            if self.samples < 2:
                raise ConfigurationError("snis needs at least 2 samples")
            if self.topk < 1:
                raise ConfigurationError("snis needs a positive top-K")
            if not 0.0 < self.epsilon <= 1.0:
                raise ConfigurationError("snis needs epsilon in (0, 1]")
        if self.method == "reinforce" and self.samples < 1:
            raise ConfigurationError("reinforce needs at least 1 sample")

    def seeds(self) -> dict[str, int]:
        shuffle, sampling = np.random.SeedSequence(self.seed).spawn(2)
        return {"shuffle": int(shuffle.generate_state(1)[0]), "sampling": int(sampling.generate_state(1)[0])}


@dataclass
class EpochRecord:
    epoch: int
    reward_train: float
    reward_test: float
    wall_seconds: float  # cumulative training time
    ess_mean: float
    low_ess: int = 0


@dataclass
class RunReport:
    config: TrainConfig
    records: list[EpochRecord] = field(default_factory=list)
    total_seconds: float = 0.0
    steps: int = 0

    def epoch_seconds(self) -> np.ndarray:
        t = np.array([r.wall_seconds for r in self.records])
        return np.diff(np.concatenate([[0.0], t]))

    @property
    def final_reward(self) -> float:
        return self.records[-1].reward_test if self.records else float("nan")

    def to_dict(self) -> dict:
        return {"config": asdict(self.config), "records": [asdict(r) for r in self.records],
                "total_seconds": self.total_seconds, "steps": self.steps}


def evaluate(theta, beta, index: MipsIndex, test: EmbeddedDataset) -> float:
    """Share of test users whose top-1 retrieved item is in their held-out set."""
    if len(test) == 0:
        raise ConfigurationError("empty test set")
    h = np.asarray(test.contexts) @ np.asarray(theta)
    ids, _ = index.top_k_batch(h, 1)
    hits = sum(int(np.isin(ids[j, 0], test.labels[j])) for j in range(len(test)))
    return hits / len(test)


def batch_gradient(config: TrainConfig, theta: np.ndarray, contexts: np.ndarray, labels, beta,
                   index: MipsIndex | None, rng: np.random.Generator):
    """Mean per-context gradient over a minibatch plus the per-context estimates."""
    b = as_matrix(beta)
    n_items = b.shape[0]
    estimates = []
    if config.method == "snis":
        if config.epsilon < 1.0:
            if index is None:
                raise ConfigurationError("snis with epsilon < 1 needs a MIPS index")
            h = contexts @ theta
            top_ids, _ = index.top_k_batch(h, min(config.topk, n_items))
        for j, x in enumerate(contexts):
            if config.epsilon < 1.0:
                ids = top_ids[j][top_ids[j] >= 0]
                # exact inner products for the retrieved ids
                q = build_proposal((ids, b[ids] @ h[j]), config.epsilon, n_items)
            else:
                q = build_proposal((np.zeros(0, dtype=np.int64), np.zeros(0)), 1.0, n_items)
            estimates.append(snis_covariance_gradient(theta, x, b, IndicatorReward(labels[j]), q, config.samples, rng))
    elif config.method == "reinforce":
        for j, x in enumerate(contexts):
            estimates.append(reinforce_mc_gradient(theta, x, b, IndicatorReward(labels[j]), config.samples, rng,
                                                   sampler=config.sampler))
    else:
        for j, x in enumerate(contexts):
            estimates.append(exact_gradient(theta, x, b, IndicatorReward(labels[j])))
    grad = np.zeros_like(theta)
    for e in estimates:  # fixed-order reduction
        grad += e.grad
    return grad / len(estimates), estimates


def train(config: TrainConfig, data: EmbeddedDataset, beta, index: MipsIndex | None = None,
          test: EmbeddedDataset | None = None, theta0=None):
    """Run the training loop; returns (theta, RunReport).

    Timing covers gradient estimation (index queries and sampling included)
    and optimizer steps, not evaluation.
    """
    b = as_matrix(beta)
    dim = b.shape[1]
    if data.contexts.shape[1] != dim:
        raise ConfigurationError("context and embedding dimensions differ")
    theta = np.zeros((dim, dim)) if theta0 is None else np.array(theta0, dtype=np.float64)
    report = RunReport(config)
    if config.epochs == 0 and config.budget_seconds is None:
        return theta, report

    seeds = config.seeds()
    shuffle_rng = np.random.default_rng(seeds["shuffle"])
    rng = np.random.default_rng(seeds["sampling"])
    opt = make_optimizer(config.optimizer, config.lr)
    n = len(data)
    eval_index = index
    if eval_index is None and test is not None:
        eval_index = build_index(b, IndexConfig(variant="exact"))

    budget = config.budget_seconds
    checkpoints = [budget * k / 20 for k in range(1, 21)] if budget else []
    elapsed = 0.0
    epoch = 0
    acc_reward, acc_ess, acc_low, acc_n = 0.0, [], 0, 0

    def record(tag, with_test=True):
        nonlocal acc_reward, acc_ess, acc_low, acc_n
        r_test = float("nan")
        if with_test and test is not None and len(test):
            r_test = evaluate(theta, b, eval_index, test)
        report.records.append(EpochRecord(
            tag, acc_reward / max(acc_n, 1), r_test, elapsed,
            float(np.mean(acc_ess)) if acc_ess else float("nan"), acc_low,
        ))
        acc_reward, acc_ess, acc_low, acc_n = 0.0, [], 0, 0

    while True:
        if budget is None and epoch >= config.epochs:
            break
        if budget is not None and not checkpoints:
            break
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            t0 = time.perf_counter()
            try:
                grad, ests = batch_gradient(config, theta, data.contexts[idx], [data.labels[i] for i in idx], b,
                                            index, rng)
            except FloatingPointError as exc:
                raise TrainingError(f"numeric failure at step {report.steps}, contexts {idx.tolist()}: {exc}") from exc
            if not np.all(np.isfinite(grad)):
                bad = next(k for k, e in enumerate(ests) if not np.all(np.isfinite(e.grad)))
                raise TrainingError(
                    f"non-finite gradient at step {report.steps}, context {int(idx[bad])}, ess={ests[bad].ess}"
                )
            theta = opt.step(theta, grad)
            elapsed += time.perf_counter() - t0
            report.steps += 1
            acc_reward += sum(e.value for e in ests)
            acc_n += len(ests)
            acc_ess.extend(e.ess for e in ests if e.n_samples and np.isfinite(e.ess))
            acc_low += sum(e.low_ess for e in ests)
            while checkpoints and elapsed >= checkpoints[0]:
                checkpoints.pop(0)
                record(len(report.records) + 1)
            if budget is not None and not checkpoints:
                break
        epoch += 1
        if budget is None:
            record(epoch, epoch % config.eval_every == 0 or epoch == config.epochs)
    report.total_seconds = elapsed
    return theta, report
