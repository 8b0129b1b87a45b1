"""
关联矩阵 - 相似度、按帧 softmax（含空目标）、真值关联矩阵与交叉熵损失
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.types import FrameRef
from .attention import decoder_forward, encoder_forward
from .params import AssocModelParams


# 对数截断下限
LOG_CLAMP = 1e-12


# ==================== 数据结构 ====================

@dataclass
class FrameGroups:
    """列按帧分组：frames[g] 对应列下标 columns[g]，帧按 (time, camera) 升序"""
    frames: List[FrameRef]
    columns: List[np.ndarray]

    def __len__(self) -> int:
        return len(self.frames)

    @classmethod
    def from_frames(cls, col_frames: Sequence[FrameRef]) -> 'FrameGroups':
        buckets: Dict[FrameRef, List[int]] = {}
        for j, frame in enumerate(col_frames):
            buckets.setdefault(frame, []).append(j)
        frames = sorted(buckets)
        return cls(frames=frames, columns=[np.array(buckets[f], dtype=np.int64) for f in frames])


@dataclass
class SimilarityMatrix:
    """G：N_q x N 原始得分，附带列的帧信息与行的身份（可选）"""
    values: np.ndarray
    col_frames: List[FrameRef]
    row_ids: Optional[List[Optional[int]]] = None

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.col_frames):
            raise ValueError(f"Similarity shape {self.values.shape} does not match {len(self.col_frames)} columns")
        if self.row_ids is not None and len(self.row_ids) != self.values.shape[0]:
            raise ValueError(f"Row metadata length {len(self.row_ids)} does not match {self.values.shape[0]} rows")

    @property
    def groups(self) -> FrameGroups:
        return FrameGroups.from_frames(self.col_frames)


@dataclass
class AssocProbs:
    """
    关联概率 H 与每个 (查询, 帧) 的空目标概率 h_i0

    null_probs 的第 g 列对应 groups.frames[g]。
    """
    probs: np.ndarray
    null_probs: np.ndarray
    groups: FrameGroups

    def null_prob(self, row: int, frame: FrameRef) -> float:
        return float(self.null_probs[row, self.groups.frames.index(frame)])


@dataclass
class GtAssoc:
    """
    真值关联：X_ij = 1 当且仅当 p_i 与 p_j 属于同一轨迹；x0 为每个 (目标, 帧) 的空目标指示

    loss_rows 标记参与损失的行（有标签的目标）。
    """
    X: np.ndarray
    x0: np.ndarray
    groups: FrameGroups
    loss_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


# ==================== 前向 ====================

def similarity(Qd: np.ndarray, Fe: np.ndarray,
               col_frames: Optional[Sequence[FrameRef]] = None,
               row_ids: Optional[Sequence[Optional[int]]] = None) -> SimilarityMatrix:
    """G = Q_d F_e^T，不做缩放"""
    if Qd.ndim != 2 or Fe.ndim != 2 or Qd.shape[1] != Fe.shape[1]:
        raise ValueError(f"Similarity expects matching inner dims, got {Qd.shape} and {Fe.shape}")
    if col_frames is None:
        # 无帧信息时所有列视为同一帧
        col_frames = [FrameRef(time=1, camera=1)] * Fe.shape[0]
    return SimilarityMatrix(values=Qd @ Fe.T, col_frames=list(col_frames),
                            row_ids=list(row_ids) if row_ids is not None else None)


def per_frame_softmax(G: SimilarityMatrix) -> AssocProbs:
    """
    按帧归一化的 softmax，空目标得分恒为 0

    H_ij = exp(G_ij) / (exp(0) + Σ_{q∈帧} exp(G_iq))，最大值减法时 0 一并参与取最大。

    Args:
        G: 相似度矩阵

    Returns:
        AssocProbs: 关联概率与空目标概率
    """
    values = G.values
    groups = G.groups
    probs = np.zeros_like(values)
    nulls = np.zeros((values.shape[0], len(groups)))
    for g, cols in enumerate(groups.columns):
        sub = values[:, cols]
        peak = np.maximum(sub.max(axis=1, keepdims=True), 0.0)
        e = np.exp(sub - peak)
        e0 = np.exp(-peak)
        denom = e0 + e.sum(axis=1, keepdims=True)
        probs[:, cols] = e / denom
        nulls[:, g] = (e0 / denom)[:, 0]
    return AssocProbs(probs=probs, null_probs=nulls, groups=groups)


def build_gt_association(labels: Sequence[Optional[int]], col_frames: Sequence[FrameRef]) -> GtAssoc:
    """
    由每个目标的轨迹标签构造真值关联矩阵

    X_ij = 1 当且仅当两者都有标签且相同；x0[i, g] = 1 当且仅当 p_i 的轨迹在帧 g 中
    没有成员。无标签目标（误检）的行全部落在空目标上，并从损失中排除。

    Args:
        labels: 长度 N 的标签列表，None 表示无标签
        col_frames: 每个目标所在的帧

    Returns:
        GtAssoc: 真值关联

    Raises:
        ValueError: 长度不一致，或同一帧中出现重复标签
    """
    if len(labels) != len(col_frames):
        raise ValueError(f"labels ({len(labels)}) and frames ({len(col_frames)}) differ in length")
    n = len(labels)
    groups = FrameGroups.from_frames(col_frames)
    seen = set()
    for label, frame in zip(labels, col_frames):
        if label is None:
            continue
        if (label, frame) in seen:
            raise ValueError(f"Label {label} appears twice in frame {frame}")
        seen.add((label, frame))

    arr = np.array([-1 if lab is None else lab for lab in labels], dtype=np.int64)
    labeled = np.array([lab is not None for lab in labels], dtype=bool)
    X = ((arr[:, None] == arr[None, :]) & labeled[:, None] & labeled[None, :]).astype(np.float64)
    x0 = np.zeros((n, len(groups)))
    for g, cols in enumerate(groups.columns):
        x0[:, g] = 1.0 - X[:, cols].sum(axis=1)
    return GtAssoc(X=X, x0=x0, groups=groups, loss_rows=labeled)


def association_loss(probs: AssocProbs, gt: GtAssoc) -> Tuple[float, np.ndarray]:
    """
    按帧交叉熵损失

    L^{ct} = -(1/N) Σ_i [Σ_{j∈帧} X_ij log H_ij + x0 log h_i0]，N 为参与损失的行数，
    总损失为各帧之和。

    Returns:
        Tuple[float, np.ndarray]: (总损失, 每帧损失)
    """
    if probs.probs.shape[0] != gt.X.shape[0] or probs.probs.shape[1] != gt.X.shape[1]:
        raise ValueError(f"Probability shape {probs.probs.shape} does not match ground truth {gt.X.shape}")
    rows = gt.loss_rows
    n = int(rows.sum())
    per_frame = np.zeros(len(probs.groups))
    if n == 0:
        return 0.0, per_frame
    log_h = np.log(np.maximum(probs.probs[rows], LOG_CLAMP))
    log_null = np.log(np.maximum(probs.null_probs[rows], LOG_CLAMP))
    X = gt.X[rows]
    x0 = gt.x0[rows]
    for g, cols in enumerate(probs.groups.columns):
        per_frame[g] = -((X[:, cols] * log_h[:, cols]).sum() + (x0[:, g] * log_null[:, g]).sum()) / n
    return float(per_frame.sum()), per_frame


def association_loss_grad(probs: AssocProbs, gt: GtAssoc) -> np.ndarray:
    """
    损失对 G 的梯度

    对每个 (行, 帧)：dL/dG_k = (p_k Σa - a_k) / N，a 为被截断之外的真值权重
    （概率落到截断下限以下的项对 G 没有梯度）。
    """
    rows = gt.loss_rows
    n = int(rows.sum())
    dG = np.zeros_like(probs.probs)
    if n == 0:
        return dG
    a = gt.X * (probs.probs > LOG_CLAMP)
    a0 = gt.x0 * (probs.null_probs > LOG_CLAMP)
    for g, cols in enumerate(probs.groups.columns):
        total = a[:, cols].sum(axis=1, keepdims=True) + a0[:, g:g + 1]
        dG[:, cols] = probs.probs[:, cols] * total - a[:, cols]
    dG[~rows] = 0.0
    return dG / n


def forward_training(F: np.ndarray, params: AssocModelParams,
                     col_frames: Optional[Sequence[FrameRef]] = None,
                     labels: Optional[Sequence[Optional[int]]] = None) -> Tuple[SimilarityMatrix, AssocProbs]:
    """训练时的前向：Q = F，编码器 -> 解码器 -> 相似度 -> 按帧 softmax"""
    if F.ndim != 2 or F.shape[0] < 1:
        raise ValueError(f"forward_training expects a non-empty (N, D) matrix, got {F.shape}")
    Fe = encoder_forward(F, params)
    Qd = decoder_forward(F, Fe, params)
    G = similarity(Qd, Fe, col_frames, labels)
    return G, per_frame_softmax(G)
