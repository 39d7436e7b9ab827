"""First-order optimizers over theta.

Gradients handed in are reward-ascent directions.  The optimizers minimise
the negative reward, so they negate internally: an SGD step is
``theta + lr * grad``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError


def _check(theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != theta.shape:
        raise ConfigurationError(f"gradient shape {grad.shape} does not match theta {theta.shape}")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient; step rejected")
    return grad


@dataclass
class SGD:
    lr: float
    t: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError("learning rate must be positive")

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        loss_grad = -_check(theta, grad)
        self.t += 1
        return theta - self.lr * loss_grad


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError("learning rate must be positive")

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        g = -_check(theta, grad)
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (g * g)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, lr: float):
    if kind == "sgd":
        return SGD(lr)
    if kind == "adam":
        return Adam(lr)
    raise ConfigurationError(f"unknown optimizer {kind!r}")


def sgd_step(state: SGD, theta, grad) -> np.ndarray:
    return state.step(np.asarray(theta, dtype=np.float64), grad)


def adam_step(state: Adam, theta, grad) -> np.ndarray:
    return state.step(np.asarray(theta, dtype=np.float64), grad)
