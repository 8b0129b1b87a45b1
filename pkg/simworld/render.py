"""
检测渲染 - 从真值场景生成带噪声的检测集合 P = {p_n} 及其真值身份
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from core.types import BoxPx, FrameRef, TargetObs
from .world import EmbeddingModel, GroundTruthScene, NoiseModel


logger = logging.getLogger(__name__)

# 真检测与误检的置信度区间
TRUE_SCORE_RANGE = (0.6, 1.0)
FALSE_SCORE_RANGE = (0.2, 0.8)
FP_SIZE_RANGE = (40.0, 160.0)


@dataclass
class RenderedDetections:
    """按 (time, camera) 排序的检测列表及一一对应的真值身份（误检为 None）"""
    observations: List[TargetObs] = field(default_factory=list)
    labels: List[Optional[int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.observations)

    def by_time(self) -> Iterator[Tuple[int, List[TargetObs], List[Optional[int]]]]:
        """按时刻分组（跨所有相机）"""
        groups: Dict[int, Tuple[List[TargetObs], List[Optional[int]]]] = {}
        for obs, label in zip(self.observations, self.labels):
            bucket = groups.setdefault(obs.frame.time, ([], []))
            bucket[0].append(obs)
            bucket[1].append(label)
        for time in sorted(groups):
            yield time, groups[time][0], groups[time][1]


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def _jitter_box(rng: np.random.Generator, box: BoxPx, std: float, width: float, height: float) -> BoxPx:
    noisy = box.as_array() + rng.normal(scale=std, size=4)
    xs = np.clip(np.sort(noisy[[0, 2]]), 0.0, width)
    ys = np.clip(np.sort(noisy[[1, 3]]), 0.0, height)
    return BoxPx(float(xs[0]), float(ys[0]), float(xs[1]), float(ys[1]))


def render_detections(
    scene: GroundTruthScene,
    noise: NoiseModel,
    emb: EmbeddingModel,
    seed: int = 0,
) -> RenderedDetections:
    """
    渲染检测

    每个真值成员产生一个检测，除非被随机漏检或遮挡脚本命中；检测框为真值框
    加高斯抖动，外观为 normalize(锚向量 + 相机偏置 + 高斯噪声)。误检在画面内
    均匀采样，外观为随机单位向量，身份为 None。结果只取决于输入与 seed。

    Args:
        scene: 真值场景
        noise: 噪声模型
        emb: 外观模型（必须覆盖场景中的全部身份）
        seed: 随机种子

    Returns:
        RenderedDetections: 检测及其真值身份
    """
    dims = scene.dims
    missing = [traj.id for traj in scene.trajectories if traj.id not in emb.anchors]
    if missing:
        raise ValueError(f"Embedding model has no anchor for identities {missing}")
    for occ in noise.occlusions:
        if not (1 <= occ.start <= occ.end <= dims.horizon):
            raise ValueError(f"Occlusion interval outside [1..{dims.horizon}]: {occ}")

    rng = np.random.default_rng(seed)
    out = RenderedDetections()

    for t in range(1, dims.horizon + 1):
        for c in range(1, dims.cameras + 1):
            frame = FrameRef(time=t, camera=c)
            for identity, gt_box in sorted(scene.boxes_at(frame), key=lambda item: item[0]):
                if noise.miss_prob > 0 and rng.random() < noise.miss_prob:
                    continue
                if noise.is_occluded(identity, frame):
                    continue
                box = gt_box
                if noise.jitter > 0:
                    box = _jitter_box(rng, gt_box, noise.jitter, dims.width, dims.height)
                app = emb.anchors[identity] + emb.camera_bias[c]
                if emb.sigma > 0:
                    app = app + rng.normal(scale=emb.sigma, size=emb.dim)
                score = float(rng.uniform(*TRUE_SCORE_RANGE))
                out.observations.append(TargetObs(box=box, frame=frame, app=_normalize(app), det_score=score))
                out.labels.append(identity)

            if noise.fp_rate > 0:
                for _ in range(int(rng.poisson(noise.fp_rate))):
                    h = float(rng.uniform(*FP_SIZE_RANGE))
                    w = h * float(rng.uniform(0.3, 1.0))
                    cx = float(rng.uniform(0.0, dims.width))
                    cy = float(rng.uniform(0.0, dims.height))
                    box = BoxPx(max(cx - w / 2, 0.0), max(cy - h / 2, 0.0),
                                min(cx + w / 2, dims.width), min(cy + h / 2, dims.height))
                    app = _normalize(rng.normal(size=emb.dim))
                    score = float(rng.uniform(*FALSE_SCORE_RANGE))
                    out.observations.append(TargetObs(box=box, frame=frame, app=app, det_score=score))
                    out.labels.append(None)

    logger.info(f"Rendered {len(out)} detections "
                f"({sum(label is None for label in out.labels)} false positives)")
    return out
