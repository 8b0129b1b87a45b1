"""
全局关联 Transformer - 单层编码器与单层解码器（post-norm，无位置编码）的前向与反向
"""

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .layers import (
    LayerNormCache,
    MlpCache,
    layer_norm_backward,
    layer_norm_forward,
    mlp_backward,
    mlp_forward,
    softmax_rows,
)
from .params import AssocModelParams


Grads = Dict[str, np.ndarray]


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    """(N, D) -> (H, N, D/H)"""
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    """(H, N, D/H) -> (N, D)"""
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def _accumulate(grads: Grads, prefix: str, part: Grads) -> None:
    for key, value in part.items():
        name = f'{prefix}.{key}'
        if name in grads:
            grads[name] = grads[name] + value
        else:
            grads[name] = value


# ==================== 多头注意力 ====================

@dataclass
class AttentionCache:
    xq: np.ndarray
    xkv: np.ndarray
    qh: np.ndarray
    kh: np.ndarray
    vh: np.ndarray
    weights: np.ndarray      # (H, Nq, Nk) 注意力权重
    merged: np.ndarray
    scale: float


def attention_forward(xq: np.ndarray, xkv: np.ndarray, tensors: Dict[str, np.ndarray],
                      prefix: str, heads: int) -> Tuple[np.ndarray, AttentionCache]:
    """
    多头缩放点积注意力，每个头的缩放因子为 1/sqrt(D/H)

    Args:
        xq: 查询输入 (Nq, D)
        xkv: 键/值输入 (Nk, D)
        tensors: 参数表
        prefix: 参数名前缀，如 'enc.self_attn'
        heads: 头数

    Returns:
        Tuple[np.ndarray, AttentionCache]: 输出 (Nq, D) 与反向所需缓存
    """
    t = lambda key: tensors[f'{prefix}.{key}']
    d = t('wq').shape[0]
    if xq.shape[1] != d or xkv.shape[1] != d:
        raise ValueError(f"Attention '{prefix}' expects width {d}, got {xq.shape[1]} and {xkv.shape[1]}")
    q = xq @ t('wq') + t('bq')
    k = xkv @ t('wk') + t('bk')
    v = xkv @ t('wv') + t('bv')
    qh, kh, vh = _split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)
    scale = 1.0 / math.sqrt(d // heads)
    weights = softmax_rows((qh @ kh.transpose(0, 2, 1)) * scale)
    merged = _merge_heads(weights @ vh)
    out = merged @ t('wo') + t('bo')
    return out, AttentionCache(xq=xq, xkv=xkv, qh=qh, kh=kh, vh=vh,
                               weights=weights, merged=merged, scale=scale)


def attention_backward(dout: np.ndarray, cache: AttentionCache, tensors: Dict[str, np.ndarray],
                       prefix: str) -> Tuple[np.ndarray, np.ndarray, Grads]:
    """返回 (d_xq, d_xkv, 参数梯度)"""
    t = lambda key: tensors[f'{prefix}.{key}']
    heads = cache.qh.shape[0]
    grads = {
        'wo': cache.merged.T @ dout,
        'bo': dout.sum(axis=0),
    }
    d_ctx = _split_heads(dout @ t('wo').T, heads)
    d_weights = d_ctx @ cache.vh.transpose(0, 2, 1)
    d_vh = cache.weights.transpose(0, 2, 1) @ d_ctx
    d_scores = cache.weights * (d_weights - (d_weights * cache.weights).sum(axis=-1, keepdims=True))
    d_qh = (d_scores @ cache.kh) * cache.scale
    d_kh = (d_scores.transpose(0, 2, 1) @ cache.qh) * cache.scale

    d_q, d_k, d_v = _merge_heads(d_qh), _merge_heads(d_kh), _merge_heads(d_vh)
    grads['wq'] = cache.xq.T @ d_q
    grads['bq'] = d_q.sum(axis=0)
    grads['wk'] = cache.xkv.T @ d_k
    grads['bk'] = d_k.sum(axis=0)
    grads['wv'] = cache.xkv.T @ d_v
    grads['bv'] = d_v.sum(axis=0)
    d_xq = d_q @ t('wq').T
    d_xkv = d_k @ t('wk').T + d_v @ t('wv').T
    return d_xq, d_xkv, grads


def _ffn(x: np.ndarray, tensors: Dict[str, np.ndarray], prefix: str) -> Tuple[np.ndarray, MlpCache]:
    return mlp_forward(x, tensors[f'{prefix}.w1'], tensors[f'{prefix}.b1'],
                       tensors[f'{prefix}.w2'], tensors[f'{prefix}.b2'])


def _ffn_backward(dy: np.ndarray, cache: MlpCache, tensors: Dict[str, np.ndarray],
                  prefix: str) -> Tuple[np.ndarray, Grads]:
    return mlp_backward(dy, cache, tensors[f'{prefix}.w1'], tensors[f'{prefix}.w2'])


def _norm(x: np.ndarray, tensors: Dict[str, np.ndarray], prefix: str) -> Tuple[np.ndarray, LayerNormCache]:
    return layer_norm_forward(x, tensors[f'{prefix}.gain'], tensors[f'{prefix}.offset'])


# ==================== 编码器层 ====================

@dataclass
class EncoderCache:
    attn: AttentionCache
    norm1: LayerNormCache
    ffn: MlpCache
    norm2: LayerNormCache


def encoder_forward_cached(F: np.ndarray, params: AssocModelParams) -> Tuple[np.ndarray, EncoderCache]:
    """F_e = LN2(Z + FFN(Z))，Z = LN1(F + SelfAttn(F))"""
    t = params.tensors
    if F.ndim != 2 or F.shape[0] < 1:
        raise ValueError(f"Encoder expects a non-empty (N, D) matrix, got shape {F.shape}")
    attn, attn_cache = attention_forward(F, F, t, 'enc.self_attn', params.heads)
    z, norm1 = _norm(F + attn, t, 'enc.norm1')
    ff, ffn_cache = _ffn(z, t, 'enc.ffn')
    fe, norm2 = _norm(z + ff, t, 'enc.norm2')
    return fe, EncoderCache(attn=attn_cache, norm1=norm1, ffn=ffn_cache, norm2=norm2)


def encoder_forward(F: np.ndarray, params: AssocModelParams) -> np.ndarray:
    return encoder_forward_cached(F, params)[0]


def encoder_backward(d_fe: np.ndarray, cache: EncoderCache, params: AssocModelParams) -> Tuple[np.ndarray, Grads]:
    """返回 (dF, 参数梯度)"""
    t = params.tensors
    grads: Grads = {}
    d_sum2, g = layer_norm_backward(d_fe, cache.norm2)
    _accumulate(grads, 'enc.norm2', g)
    d_z_ffn, g = _ffn_backward(d_sum2, cache.ffn, t, 'enc.ffn')
    _accumulate(grads, 'enc.ffn', g)
    d_z = d_sum2 + d_z_ffn
    d_sum1, g = layer_norm_backward(d_z, cache.norm1)
    _accumulate(grads, 'enc.norm1', g)
    d_xq, d_xkv, g = attention_backward(d_sum1, cache.attn, t, 'enc.self_attn')
    _accumulate(grads, 'enc.self_attn', g)
    return d_sum1 + d_xq + d_xkv, grads


# ==================== 解码器层 ====================

@dataclass
class DecoderCache:
    self_attn: AttentionCache
    norm1: LayerNormCache
    cross_attn: AttentionCache
    norm2: LayerNormCache
    ffn: MlpCache
    norm3: LayerNormCache


def decoder_forward_cached(Q: np.ndarray, Fe: np.ndarray,
                           params: AssocModelParams) -> Tuple[np.ndarray, DecoderCache]:
    """自注意力 -> 与 F_e 的交叉注意力 -> 前馈，每步残差 + 层归一化"""
    t = params.tensors
    if Q.ndim != 2 or Q.shape[0] < 1 or Fe.ndim != 2 or Fe.shape[0] < 1:
        raise ValueError(f"Decoder expects non-empty matrices, got {Q.shape} and {Fe.shape}")
    s, self_cache = attention_forward(Q, Q, t, 'dec.self_attn', params.heads)
    z1, norm1 = _norm(Q + s, t, 'dec.norm1')
    c, cross_cache = attention_forward(z1, Fe, t, 'dec.cross_attn', params.heads)
    z2, norm2 = _norm(z1 + c, t, 'dec.norm2')
    ff, ffn_cache = _ffn(z2, t, 'dec.ffn')
    qd, norm3 = _norm(z2 + ff, t, 'dec.norm3')
    return qd, DecoderCache(self_attn=self_cache, norm1=norm1, cross_attn=cross_cache,
                            norm2=norm2, ffn=ffn_cache, norm3=norm3)


def decoder_forward(Q: np.ndarray, Fe: np.ndarray, params: AssocModelParams) -> np.ndarray:
    return decoder_forward_cached(Q, Fe, params)[0]


def decoder_backward(d_qd: np.ndarray, cache: DecoderCache,
                     params: AssocModelParams) -> Tuple[np.ndarray, np.ndarray, Grads]:
    """返回 (dQ, dF_e, 参数梯度)"""
    t = params.tensors
    grads: Grads = {}
    d_sum3, g = layer_norm_backward(d_qd, cache.norm3)
    _accumulate(grads, 'dec.norm3', g)
    d_z2_ffn, g = _ffn_backward(d_sum3, cache.ffn, t, 'dec.ffn')
    _accumulate(grads, 'dec.ffn', g)
    d_z2 = d_sum3 + d_z2_ffn
    d_sum2, g = layer_norm_backward(d_z2, cache.norm2)
    _accumulate(grads, 'dec.norm2', g)
    d_z1_cross, d_fe, g = attention_backward(d_sum2, cache.cross_attn, t, 'dec.cross_attn')
    _accumulate(grads, 'dec.cross_attn', g)
    d_z1 = d_sum2 + d_z1_cross
    d_sum1, g = layer_norm_backward(d_z1, cache.norm1)
    _accumulate(grads, 'dec.norm1', g)
    d_xq, d_xkv, g = attention_backward(d_sum1, cache.self_attn, t, 'dec.self_attn')
    _accumulate(grads, 'dec.self_attn', g)
    return d_sum1 + d_xq + d_xkv, d_fe, grads


def relu_signature(*caches) -> np.ndarray:
    """收集所有 ReLU 的激活模式，用于有限差分时检测跨越折点"""
    masks = []
    for cache in caches:
        if isinstance(cache, MlpCache):
            masks.append((cache.pre > 0).ravel())
        elif isinstance(cache, EncoderCache):
            masks.append((cache.ffn.pre > 0).ravel())
        elif isinstance(cache, DecoderCache):
            masks.append((cache.ffn.pre > 0).ravel())
    return np.concatenate(masks) if masks else np.zeros(0, dtype=bool)
