"""
训练 - 完整前向、解析梯度、窗口采样与优化循环
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from core.errors import DataError, DivergenceError
from core.geometry import assign_targets_to_gt
from core.types import FrameRef, SceneDims, TargetObs
from simworld.render import RenderedDetections
from simworld.world import GroundTruthScene
from .association import (
    AssocProbs,
    GtAssoc,
    association_loss,
    association_loss_grad,
    build_gt_association,
    per_frame_softmax,
    similarity,
)
from .attention import (
    DecoderCache,
    EncoderCache,
    decoder_backward,
    decoder_forward_cached,
    encoder_backward,
    encoder_forward_cached,
    relu_signature,
)
from .features import appearance_matrix, spatiotemporal_matrix
from .layers import MlpCache, mlp_backward, mlp_forward
from .optim import clip_by_global_norm, make_optimizer
from .params import ModelParams


logger = logging.getLogger(__name__)


@dataclass
class TrainingBatch:
    """一个时间窗口内的全部检测及其轨迹标签（None 为误检）"""
    observations: List[TargetObs]
    labels: List[Optional[int]]
    dims: SceneDims

    def __post_init__(self):
        if len(self.observations) != len(self.labels):
            raise ValueError(f"{len(self.observations)} observations but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def frames(self) -> List[FrameRef]:
        return [obs.frame for obs in self.observations]


# ==================== 前向与反向 ====================

@dataclass
class ForwardPass:
    """一次完整前向的中间结果，反向传播与梯度检查共用"""
    app: MlpCache
    st: MlpCache
    F: np.ndarray
    Fe: np.ndarray
    enc: EncoderCache
    Qd: np.ndarray
    dec: DecoderCache
    probs: AssocProbs
    gt: GtAssoc
    loss: float
    per_frame: np.ndarray

    def relu_signature(self) -> np.ndarray:
        return relu_signature(self.app, self.st, self.enc, self.dec)


def forward_pass(batch: TrainingBatch, params: ModelParams) -> ForwardPass:
    """特征编码 -> 编码器 -> 解码器 (Q = F) -> 相似度 -> 按帧 softmax -> 损失"""
    if len(batch) == 0:
        raise ValueError("Training batch is empty")
    enc_params = params.encoders
    raw = appearance_matrix(batch.observations, params.dims.d_raw)
    st = spatiotemporal_matrix(batch.observations, batch.dims)
    app_out, app_cache = mlp_forward(raw, *enc_params.layer('app'))
    st_out, st_cache = mlp_forward(st, *enc_params.layer('st'))
    F = np.concatenate([app_out, st_out], axis=1)

    Fe, enc_cache = encoder_forward_cached(F, params.assoc)
    Qd, dec_cache = decoder_forward_cached(F, Fe, params.assoc)
    frames = batch.frames
    G = similarity(Qd, Fe, frames, batch.labels)
    probs = per_frame_softmax(G)
    gt = build_gt_association(batch.labels, frames)
    loss, per_frame = association_loss(probs, gt)
    return ForwardPass(app=app_cache, st=st_cache, F=F, Fe=Fe, enc=enc_cache, Qd=Qd,
                       dec=dec_cache, probs=probs, gt=gt, loss=loss, per_frame=per_frame)


def forward_loss(batch: TrainingBatch, params: ModelParams) -> float:
    return forward_pass(batch, params).loss


def loss_gradients(batch: TrainingBatch, params: ModelParams,
                   loss_scale: float = 1.0) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    损失对全部可学习参数的解析梯度（逐层反向累积）

    Args:
        batch: 训练窗口
        params: 模型参数
        loss_scale: 损失的缩放系数，梯度随之线性缩放

    Returns:
        Tuple[float, Dict[str, np.ndarray]]: (缩放后的损失, 参数名 -> 梯度)

    Raises:
        DivergenceError: 损失非有限
    """
    fp = forward_pass(batch, params)
    loss = fp.loss * loss_scale
    if not np.isfinite(loss):
        raise DivergenceError(f"Non-finite association loss ({fp.loss}) on a batch of {len(batch)} targets")

    dG = association_loss_grad(fp.probs, fp.gt) * loss_scale
    d_qd = dG @ fp.Fe
    d_fe = dG.T @ fp.Qd

    d_q, d_fe_cross, grads = decoder_backward(d_qd, fp.dec, params.assoc)
    d_f_enc, enc_grads = encoder_backward(d_fe + d_fe_cross, fp.enc, params.assoc)
    grads.update(enc_grads)
    dF = d_f_enc + d_q

    d_roi = params.dims.d_roi
    tensors = params.encoders.tensors
    _, app_grads = mlp_backward(dF[:, :d_roi], fp.app, tensors['app.w1'], tensors['app.w2'])
    _, st_grads = mlp_backward(dF[:, d_roi:], fp.st, tensors['st.w1'], tensors['st.w2'])
    grads.update({f'app.{k}': v for k, v in app_grads.items()})
    grads.update({f'st.{k}': v for k, v in st_grads.items()})

    named = params.named_tensors()
    missing = set(named) - set(grads)
    if missing:
        raise DivergenceError(f"Backward pass produced no gradient for {sorted(missing)}")
    return loss, {name: grads[name] for name in named}


# ==================== 窗口采样 ====================

def label_detections(scene: GroundTruthScene, observations: Sequence[TargetObs]) -> List[Optional[int]]:
    """按帧将检测分配给真值轨迹（IoU 最大且大于 0.6）"""
    by_frame: Dict[FrameRef, List[int]] = {}
    for i, obs in enumerate(observations):
        by_frame.setdefault(obs.frame, []).append(i)
    labels: List[Optional[int]] = [None] * len(observations)
    for frame, idx in by_frame.items():
        assigned = assign_targets_to_gt([observations[i] for i in idx], scene.boxes_at(frame))
        for i, label in zip(idx, assigned):
            labels[i] = label
    return labels


@dataclass
class _LabeledScene:
    dims: SceneDims
    by_time: Dict[int, Tuple[List[TargetObs], List[Optional[int]]]] = field(default_factory=dict)


class WindowSampler:
    """
    从若干合成场景中随机抽取连续时间窗口

    标签由 label_detections 计算，而不是渲染时的身份，
    使训练监督与检测器驱动的流程一致。
    """

    def __init__(self, scenes: Sequence[Tuple[GroundTruthScene, RenderedDetections]],
                 window_frames: int, max_targets: int = 200):
        if window_frames < 1 or max_targets < 1:
            raise ValueError(f"window_frames and max_targets must be >= 1, got {window_frames}, {max_targets}")
        self.window_frames = window_frames
        self.max_targets = max_targets
        self.scenes: List[_LabeledScene] = []
        for scene, rendered in scenes:
            labels = label_detections(scene, rendered.observations)
            labeled = _LabeledScene(dims=scene.dims)
            for obs, label in zip(rendered.observations, labels):
                bucket = labeled.by_time.setdefault(obs.frame.time, ([], []))
                bucket[0].append(obs)
                bucket[1].append(label)
            if labeled.by_time:
                self.scenes.append(labeled)
        if not self.scenes:
            raise DataError("No detections available for training")

    def window(self, scene_index: int, start: int) -> TrainingBatch:
        """场景 scene_index 中从 start 开始的窗口，目标数超过上限时截掉靠后的时刻"""
        scene = self.scenes[scene_index]
        observations: List[TargetObs] = []
        labels: List[Optional[int]] = []
        for t in range(start, start + self.window_frames):
            if t not in scene.by_time:
                continue
            obs, labs = scene.by_time[t]
            if observations and len(observations) + len(obs) > self.max_targets:
                break
            observations.extend(obs[:self.max_targets])
            labels.extend(labs[:self.max_targets])
        return TrainingBatch(observations=observations, labels=labels, dims=scene.dims)

    def sample(self, rng: np.random.Generator) -> TrainingBatch:
        scene_index = int(rng.integers(0, len(self.scenes)))
        times = sorted(self.scenes[scene_index].by_time)
        start = times[int(rng.integers(0, len(times)))]
        return self.window(scene_index, start)

    def fixed_windows(self, count: int, seed: int) -> List[TrainingBatch]:
        """固定的留出窗口，用于对比不同参数的损失"""
        rng = np.random.default_rng(seed)
        return [self.sample(rng) for _ in range(count)]


# ==================== 训练循环 ====================

@dataclass
class TrainResult:
    params: ModelParams
    loss_curve: List[float]


def train(
    sampler: WindowSampler,
    params: ModelParams,
    iterations: int,
    learning_rate: float,
    seed: int = 0,
    optimizer: str = 'adam',
    momentum: float = 0.9,
    grad_clip: float = 0.0,
    progress: bool = True,
) -> TrainResult:
    """
    在随机窗口上迭代优化关联损失

    Args:
        sampler: 窗口采样器
        params: 初始参数（不会被修改）
        iterations: 迭代次数，0 时原样返回参数副本
        learning_rate: 学习率
        seed: 采样随机种子
        optimizer: 'adam' 或 'sgd'
        momentum: sgd 的动量
        grad_clip: 全局梯度范数上限，0 表示不裁剪
        progress: 是否显示进度条

    Returns:
        TrainResult: 训练后的参数与每次迭代的损失

    Raises:
        DivergenceError: 损失或参数出现非有限值
    """
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    trained = params.copy()
    curve: List[float] = []
    if iterations == 0:
        return TrainResult(params=trained, loss_curve=curve)

    rng = np.random.default_rng(seed)
    opt = make_optimizer(optimizer, learning_rate, momentum)
    tensors = trained.named_tensors()
    logger.info(f"Training for {iterations} iterations ({optimizer}, lr={learning_rate})")

    for it in tqdm(range(iterations), desc="train", disable=not progress):
        batch = sampler.sample(rng)
        loss, grads = loss_gradients(batch, trained)
        norm = clip_by_global_norm(grads, grad_clip)
        opt.step(tensors, grads)
        curve.append(loss)
        logger.debug(f"iteration {it}: loss={loss:.6f} targets={len(batch)} grad_norm={norm:.4f}")
        if not trained.is_finite():
            raise DivergenceError(f"Parameters became non-finite at iteration {it}")

    logger.info(f"Training finished: first loss {curve[0]:.4f}, last loss {curve[-1]:.4f}")
    return TrainResult(params=trained, loss_curve=curve)


def evaluate_loss(params: ModelParams, batches: Sequence[TrainingBatch]) -> float:
    """留出窗口上的平均关联损失"""
    if not batches:
        raise ValueError("evaluate_loss needs at least one batch")
    return float(np.mean([forward_loss(batch, params) for batch in batches]))
