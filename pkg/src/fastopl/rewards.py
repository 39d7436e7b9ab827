"""Reward estimators r(a, x) plugged into the policy objective.

Every estimator exposes ``__call__(actions) -> rewards`` for one fixed context
so that rewards are only ever evaluated on the actions a gradient estimator
actually touches.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ConfigurationError, LoggedBanditRecord


def indicator_reward(a: int, labels) -> float:
    return 1.0 if a in set(labels) else 0.0


def _check_tau(tau: float) -> None:
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError(f"clipping factor must lie in [0, 1], got {tau}")


def ips_clipped_reward(a: int, rec: LoggedBanditRecord, tau: float) -> float:
    _check_tau(tau)
    if a != rec.action:
        return 0.0
    return rec.reward / max(tau, rec.propensity)


def zero_model(a, context) -> float:
    return 0.0


def dr_clipped_reward(a: int, rec: LoggedBanditRecord, tau: float, model: Callable = zero_model) -> float:
    _check_tau(tau)
    base = float(model(a, rec.context))
    if a != rec.action:
        return base
    return (rec.reward - base) / max(tau, rec.propensity) + base


@dataclass
class IndicatorReward:
    """1[a in Y] for a sorted label array Y."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.unique(np.asarray(self.labels, dtype=np.int64))

    def __call__(self, actions) -> np.ndarray:
        a = np.asarray(actions, dtype=np.int64)
        if not len(self.labels):
            return np.zeros(a.shape)
        pos = np.minimum(np.searchsorted(self.labels, a), len(self.labels) - 1)
        return (self.labels[pos] == a).astype(np.float64)


@dataclass
class IPSReward:
    record: LoggedBanditRecord
    tau: float = 0.0

    def __post_init__(self):
        _check_tau(self.tau)

    def __call__(self, actions) -> np.ndarray:
        a = np.asarray(actions, dtype=np.int64)
        w = self.record.reward / max(self.tau, self.record.propensity)
        return np.where(a == self.record.action, w, 0.0)


@dataclass
class DRReward:
    record: LoggedBanditRecord
    tau: float = 0.0
    model: Callable = field(default=zero_model)

    def __post_init__(self):
        _check_tau(self.tau)

    def __call__(self, actions) -> np.ndarray:
        a = np.asarray(actions, dtype=np.int64)
        base = np.array([float(self.model(int(b), self.record.context)) for b in a.ravel()]).reshape(a.shape)
        corr = (self.record.reward - base) / max(self.tau, self.record.propensity)
        return np.where(a == self.record.action, corr + base, base)


@dataclass
class CustomReward:
    """Wrap an arbitrary per-action function of (action, context)."""

    fn: Callable
    context: np.ndarray | None = None

    def __call__(self, actions) -> np.ndarray:
        a = np.asarray(actions, dtype=np.int64)
        return np.array([float(self.fn(int(b), self.context)) for b in a.ravel()]).reshape(a.shape)
