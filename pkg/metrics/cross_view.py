"""
跨视角指标 - 逐帧检测对应、CVMA 与 CVIDF1 / CVIDP / CVIDR
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from core.geometry import iou_matrix
from core.types import BoxPx, FrameRef, Trajectory


logger = logging.getLogger(__name__)

Labeled = Sequence[Tuple[int, BoxPx]]


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")


@dataclass
class FrameMatch:
    """一帧内的对应：(真值下标, 预测下标) 对、漏检下标、误检下标"""
    pairs: List[Tuple[int, int]] = field(default_factory=list)
    misses: List[int] = field(default_factory=list)
    false_positives: List[int] = field(default_factory=list)


@dataclass
class FrameCounters:
    """某一时刻在所有相机上累计的计数"""
    time: int
    misses: int = 0
    false_positives: int = 0
    mismatches: int = 0
    gt_count: int = 0


@dataclass
class CvScores:
    cvma: Optional[float]
    cvidp: Optional[float]
    cvidr: Optional[float]
    cvidf1: Optional[float]
    idtp: int
    idfp: int
    idfn: int
    misses: int = 0
    false_positives: int = 0
    mismatches: int = 0
    gt_detections: int = 0
    pred_detections: int = 0


# ==================== 逐帧对应 ====================

def match_frame(gt: Labeled, preds: Labeled, config: EvalConfig = EvalConfig()) -> FrameMatch:
    """
    单帧内真值与预测的一对一对应

    只考虑 IoU >= 阈值的配对，先最大化匹配数，再最大化 IoU 总和
    （权重 = 常数 K + IoU，K 大于任何可能的 IoU 总和）。

    Args:
        gt: 同一 (camera, time) 的 (id, 框) 列表
        preds: 同一帧的预测 (id, 框) 列表
        config: 评估配置

    Returns:
        FrameMatch: 对应结果
    """
    result = FrameMatch()
    if gt and preds:
        ious = iou_matrix([box for _, box in gt], [box for _, box in preds])
        valid = ious >= config.iou_threshold
        bonus = min(len(gt), len(preds)) + 1.0
        weights = np.where(valid, bonus + ious, 0.0)
        rows, cols = linear_sum_assignment(weights, maximize=True)
        result.pairs = sorted((int(r), int(c)) for r, c in zip(rows, cols) if valid[r, c])
    matched_gt = {g for g, _ in result.pairs}
    matched_pred = {p for _, p in result.pairs}
    result.misses = [g for g in range(len(gt)) if g not in matched_gt]
    result.false_positives = [p for p in range(len(preds)) if p not in matched_pred]
    return result


def _trajectories(source) -> List[Trajectory]:
    return list(source.trajectories) if hasattr(source, 'trajectories') else list(source)


def _index(trajectories: Iterable[Trajectory]) -> Dict[FrameRef, List[Tuple[int, BoxPx]]]:
    index: Dict[FrameRef, List[Tuple[int, BoxPx]]] = {}
    for traj in trajectories:
        for frame, box in traj.members:
            index.setdefault(frame, []).append((traj.id, box))
    return index


def correspondences(gt, preds, config: EvalConfig = EvalConfig()
                    ) -> Iterator[Tuple[FrameRef, Labeled, Labeled, FrameMatch]]:
    """按 (time, camera) 升序遍历所有出现过的帧并给出对应"""
    gt_index = _index(_trajectories(gt))
    pred_index = _index(_trajectories(preds))
    for frame in sorted(set(gt_index) | set(pred_index)):
        g = gt_index.get(frame, [])
        p = pred_index.get(frame, [])
        yield frame, g, p, match_frame(g, p, config)


# ==================== CVMA ====================

def cvma(gt, preds, config: EvalConfig = EvalConfig()) -> Tuple[Optional[float], List[FrameCounters]]:
    """
    CVMA = 1 - Σ(m + fp + 2·mme) / Σg

    某真值身份被对应到的预测 id 与它上一次（任意相机）被对应到的预测 id 不同
    时计一次误配。

    Args:
        gt: 真值场景或真值轨迹列表
        preds: 预测轨迹列表
        config: 评估配置

    Returns:
        Tuple[Optional[float], List[FrameCounters]]: 分数（无真值时为 None）与逐时刻计数
    """
    counters: Dict[int, FrameCounters] = {}
    last_pred: Dict[int, int] = {}
    for frame, g, p, match in correspondences(gt, preds, config):
        c = counters.setdefault(frame.time, FrameCounters(time=frame.time))
        c.gt_count += len(g)
        c.misses += len(match.misses)
        c.false_positives += len(match.false_positives)
        for gi, pi in match.pairs:
            gid, pid = g[gi][0], p[pi][0]
            if gid in last_pred and last_pred[gid] != pid:
                c.mismatches += 1
            last_pred[gid] = pid

    per_time = [counters[t] for t in sorted(counters)]
    total_gt = sum(c.gt_count for c in per_time)
    if total_gt == 0:
        logger.warning("CVMA undefined: ground truth is empty")
        return None, per_time
    errors = sum(c.misses + c.false_positives + 2 * c.mismatches for c in per_time)
    return 1.0 - errors / total_gt, per_time


# ==================== CVIDF1 ====================

def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den > 0 else None


def cvidf1(gt, preds, config: EvalConfig = EvalConfig()) -> CvScores:
    """
    CVIDF1 = 2·CVIDP·CVIDR / (CVIDP + CVIDR)

    真值身份与预测 id 之间做一次全局二分匹配（匈牙利，最大化被覆盖的检测数），
    IDTP 为匹配身份对上的对应检测数。

    Args:
        gt: 真值场景或真值轨迹列表
        preds: 预测轨迹列表
        config: 评估配置

    Returns:
        CvScores: 身份指标（cvma 字段为 None，完整报告见 evaluate）
    """
    overlap: Counter = Counter()
    gt_total = pred_total = 0
    for _, g, p, match in correspondences(gt, preds, config):
        gt_total += len(g)
        pred_total += len(p)
        for gi, pi in match.pairs:
            overlap[(g[gi][0], p[pi][0])] += 1

    idtp = 0
    if overlap:
        gt_ids = sorted({gid for gid, _ in overlap})
        pred_ids = sorted({pid for _, pid in overlap})
        counts = np.zeros((len(gt_ids), len(pred_ids)))
        for (gid, pid), n in overlap.items():
            counts[gt_ids.index(gid), pred_ids.index(pid)] = n
        rows, cols = linear_sum_assignment(counts, maximize=True)
        idtp = int(counts[rows, cols].sum())

    idfp = pred_total - idtp
    idfn = gt_total - idtp
    precision = _ratio(idtp, idtp + idfp)
    recall = _ratio(idtp, idtp + idfn)
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return CvScores(cvma=None, cvidp=precision, cvidr=recall, cvidf1=f1, idtp=idtp, idfp=idfp, idfn=idfn,
                    gt_detections=gt_total, pred_detections=pred_total)


def evaluate(gt, preds, config: EvalConfig = EvalConfig()) -> CvScores:
    """CVMA 与 CVIDF1 的完整报告"""
    score, counters = cvma(gt, preds, config)
    scores = cvidf1(gt, preds, config)
    scores.cvma = score
    scores.misses = sum(c.misses for c in counters)
    scores.false_positives = sum(c.false_positives for c in counters)
    scores.mismatches = sum(c.mismatches for c in counters)
    logger.info(f"Evaluated {scores.gt_detections} GT / {scores.pred_detections} predicted detections")
    return scores
