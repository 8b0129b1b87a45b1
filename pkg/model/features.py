"""
特征提取与融合 - 时空特征、外观/时空编码器、拼接融合
"""

from typing import Sequence

import numpy as np

from core.types import SceneDims, TargetObs
from .layers import mlp_forward
from .params import ST_DIM, EncoderParams


def spatiotemporal_feature(obs: TargetObs, dims: SceneDims) -> np.ndarray:
    """
    时空特征 (x1/w, y1/h, x2/w, y2/h, t/T, c/C)

    Args:
        obs: 检测目标
        dims: 场景尺寸

    Returns:
        np.ndarray: 长度为 6 的向量
    """
    if dims.width <= 0 or dims.height <= 0 or dims.horizon <= 0 or dims.cameras <= 0:
        raise ValueError(f"Scene dimensions must be positive: {dims}")
    box = obs.box
    return np.array([
        box.x1 / dims.width,
        box.y1 / dims.height,
        box.x2 / dims.width,
        box.y2 / dims.height,
        obs.frame.time / dims.horizon,
        obs.frame.camera / dims.cameras,
    ])


def spatiotemporal_matrix(observations: Sequence[TargetObs], dims: SceneDims) -> np.ndarray:
    if not observations:
        return np.zeros((0, ST_DIM))
    return np.stack([spatiotemporal_feature(obs, dims) for obs in observations])


def appearance_matrix(observations: Sequence[TargetObs], d_raw: int) -> np.ndarray:
    if not observations:
        return np.zeros((0, d_raw))
    app = np.stack([np.asarray(obs.app, dtype=np.float64) for obs in observations])
    if app.shape[1] != d_raw:
        raise ValueError(f"Appearance vectors have length {app.shape[1]}, model expects {d_raw}")
    return app


def encode_app(raw: np.ndarray, params: EncoderParams) -> np.ndarray:
    """外观编码 H_roi：第二层仿射(relu(第一层仿射(raw)))，支持单个向量或按行批量"""
    out, _ = mlp_forward(np.asarray(raw, dtype=np.float64), *params.layer('app'))
    return out


def encode_st(st: np.ndarray, params: EncoderParams) -> np.ndarray:
    """时空编码 H_st，输入长度为 6"""
    out, _ = mlp_forward(np.asarray(st, dtype=np.float64), *params.layer('st'))
    return out


def fuse(app_enc: np.ndarray, st_enc: np.ndarray) -> np.ndarray:
    """融合特征 = 外观编码 ⧺ 时空编码（外观在前）"""
    return np.concatenate([app_enc, st_enc], axis=-1)


def fused_features(observations: Sequence[TargetObs], dims: SceneDims, params: EncoderParams) -> np.ndarray:
    """批量计算检测目标的融合特征，形状 (N, D)"""
    d_raw = params.tensors['app.w1'].shape[0]
    app = encode_app(appearance_matrix(observations, d_raw), params)
    st = encode_st(spatiotemporal_matrix(observations, dims), params)
    return fuse(app, st)
