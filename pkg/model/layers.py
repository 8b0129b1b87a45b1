"""
基础层 - 两层感知机、层归一化、行 softmax，均带解析反向传播
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np


LN_EPS = 1e-5


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """最后一维上的数值稳定 softmax"""
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ==================== 两层感知机 ====================

@dataclass
class MlpCache:
    x: np.ndarray
    pre: np.ndarray
    hidden: np.ndarray


def mlp_forward(x: np.ndarray, w1: np.ndarray, b1: np.ndarray,
                w2: np.ndarray, b2: np.ndarray) -> Tuple[np.ndarray, MlpCache]:
    """y = relu(x W1 + b1) W2 + b2"""
    if x.shape[-1] != w1.shape[0]:
        raise ValueError(f"Input width {x.shape[-1]} does not match layer input {w1.shape[0]}")
    pre = x @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    return hidden @ w2 + b2, MlpCache(x=x, pre=pre, hidden=hidden)


def mlp_backward(dy: np.ndarray, cache: MlpCache, w1: np.ndarray,
                 w2: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """返回 (dx, {w1, b1, w2, b2} 的梯度)"""
    grads = {
        'w2': cache.hidden.T @ dy,
        'b2': dy.sum(axis=0),
    }
    d_pre = (dy @ w2.T) * (cache.pre > 0)
    grads['w1'] = cache.x.T @ d_pre
    grads['b1'] = d_pre.sum(axis=0)
    return d_pre @ w1.T, grads


# ==================== 层归一化 ====================

@dataclass
class LayerNormCache:
    xhat: np.ndarray
    inv_std: np.ndarray
    gain: np.ndarray


def layer_norm_forward(x: np.ndarray, gain: np.ndarray, offset: np.ndarray,
                       eps: float = LN_EPS) -> Tuple[np.ndarray, LayerNormCache]:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    return xhat * gain + offset, LayerNormCache(xhat=xhat, inv_std=inv_std, gain=gain)


def layer_norm_backward(dy: np.ndarray, cache: LayerNormCache) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """返回 (dx, {gain, offset} 的梯度)"""
    grads = {
        'gain': (dy * cache.xhat).sum(axis=0),
        'offset': dy.sum(axis=0),
    }
    dxhat = dy * cache.gain
    d = dy.shape[-1]
    dx = (cache.inv_std / d) * (
        d * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - cache.xhat * (dxhat * cache.xhat).sum(axis=-1, keepdims=True)
    )
    return dx, grads
