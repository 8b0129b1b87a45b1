"""
框几何 - IoU、检测到真值轨迹的分配、滑动窗口起点
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from .types import BoxPx, TargetObs


# 检测被判为属于真值轨迹所需的最小 IoU（严格大于）
GT_IOU_THRESHOLD = 0.6


def iou(a: BoxPx, b: BoxPx) -> float:
    """
    交并比

    Args:
        a: 框 a
        b: 框 b

    Returns:
        float: 交集面积 / 并集面积；并集面积为 0 时返回 0
    """
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def iou_matrix(boxes_a: Sequence[BoxPx], boxes_b: Sequence[BoxPx]) -> np.ndarray:
    """两组框两两之间的 IoU，形状 (len(a), len(b))"""
    if not boxes_a or not boxes_b:
        return np.zeros((len(boxes_a), len(boxes_b)))
    a = np.stack([box.as_array() for box in boxes_a])[:, None, :]
    b = np.stack([box.as_array() for box in boxes_b])[None, :, :]
    iw = np.clip(np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0]), 0.0, None)
    ih = np.clip(np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1]), 0.0, None)
    inter = iw * ih
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def assign_targets_to_gt(
    detections_in_frame: Sequence[TargetObs],
    gt_boxes_in_frame: Sequence[Tuple[int, BoxPx]],
) -> List[Optional[int]]:
    """
    将同一帧内的检测分配给真值轨迹

    真值框 τ_k 只分配给与它 IoU 最大的那个检测（并列取最小检测下标），
    且该 IoU 必须大于 0.6。若两个真值框都落到同一个检测上，IoU 更高者胜出
    （并列取先出现的真值框）。

    Args:
        detections_in_frame: 同一 (camera, time) 的检测列表
        gt_boxes_in_frame: 同一帧的 (轨迹 id, 真值框) 列表

    Returns:
        List[Optional[int]]: 每个检测的轨迹 id，未分配为 None
    """
    labels: List[Optional[int]] = [None] * len(detections_in_frame)
    if not detections_in_frame or not gt_boxes_in_frame:
        return labels

    ious = iou_matrix([d.box for d in detections_in_frame], [box for _, box in gt_boxes_in_frame])

    # 每个检测上的最佳候选 (iou, 真值下标)
    best: dict = {}
    for k, (traj_id, _) in enumerate(gt_boxes_in_frame):
        n = int(np.argmax(ious[:, k]))
        value = float(ious[n, k])
        if value <= GT_IOU_THRESHOLD:
            continue
        if n not in best or value > best[n][0]:
            best[n] = (value, k)

    for n, (_, k) in best.items():
        labels[n] = gt_boxes_in_frame[k][0]
    return labels


def window_start(current_time: int, window: int) -> int:
    """滑动窗口起点 T_s = max(1, T - W + 1)"""
    if current_time < 1 or window < 1:
        raise ValueError(f"window_start expects T >= 1 and W >= 1, got T={current_time}, W={window}")
    return max(1, current_time - window + 1)
