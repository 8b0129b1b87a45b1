"""
优化器 - Adam、带动量的 SGD，以及全局范数梯度裁剪
"""

import math
from typing import Dict

import numpy as np


Tensors = Dict[str, np.ndarray]


def clip_by_global_norm(grads: Tensors, max_norm: float) -> float:
    """原地裁剪梯度，返回裁剪前的全局范数；max_norm <= 0 时不裁剪"""
    norm = math.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * factor
    return norm


class SGD:
    """带动量的梯度下降；momentum = 0 即普通梯度下降"""

    def __init__(self, learning_rate: float, momentum: float = 0.0):
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity: Tensors = {}

    def step(self, params: Tensors, grads: Tensors) -> None:
        for name, grad in grads.items():
            v = self.velocity.get(name)
            v = grad if v is None else self.momentum * v + grad
            self.velocity[name] = v
            params[name] -= self.learning_rate * v


class Adam:
    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Tensors = {}
        self.v: Tensors = {}

    def step(self, params: Tensors, grads: Tensors) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, grad in grads.items():
            m = self.m.get(name, np.zeros_like(grad))
            v = self.v.get(name, np.zeros_like(grad))
            m = self.beta1 * m + (1.0 - self.beta1) * grad
            v = self.beta2 * v + (1.0 - self.beta2) * grad ** 2
            self.m[name], self.v[name] = m, v
            params[name] -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name: str, learning_rate: float, momentum: float = 0.9):
    if name == 'adam':
        return Adam(learning_rate)
    if name == 'sgd':
        return SGD(learning_rate, momentum)
    raise ValueError(f"Unknown optimizer: {name}")
