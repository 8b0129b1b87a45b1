"""
领域类型定义 - 检测框、帧引用、检测目标、轨迹与场景尺寸
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class BoxPx:
    """像素坐标下的轴对齐矩形 (x1, y1, x2, y2)"""
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in coords):
            raise ValueError(f"Box coordinates must be finite: {coords}")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"Box corners out of order: {coords}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)


@dataclass(frozen=True, order=True)
class FrameRef:
    """
    帧引用：某个相机在某个时刻的图像

    排序键为 (time, camera)，与轨迹成员的排序约定一致。
    """
    time: int
    camera: int

    def __post_init__(self):
        if self.camera < 1 or self.time < 1:
            raise ValueError(f"Frame indices are 1-based: camera={self.camera}, time={self.time}")


@dataclass(frozen=True, eq=False)
class TargetObs:
    """一个检测目标 p_n = (b_n, t_n, c_n) 及其原始外观特征"""
    box: BoxPx
    frame: FrameRef
    app: np.ndarray
    det_score: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.det_score <= 1.0:
            raise ValueError(f"det_score must lie in [0,1], got {self.det_score}")


@dataclass
class Trajectory:
    """
    轨迹：同一身份在所有相机、所有时刻上的检测框

    members 按 (time, camera) 排序，每个 (camera, time) 至多一个成员。
    scores 可选，与 members 一一对应（预测轨迹保存检测置信度）。
    """
    id: int
    members: List[Tuple[FrameRef, BoxPx]] = field(default_factory=list)
    scores: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        frames = [frame for frame, _ in self.members]
        if frames != sorted(frames):
            raise ValueError(f"Trajectory {self.id}: members must be sorted by (time, camera)")
        if len(set(frames)) != len(frames):
            raise ValueError(f"Trajectory {self.id}: duplicate member in one (camera, time) frame")
        if self.scores and len(self.scores) != len(self.members):
            raise ValueError(f"Trajectory {self.id}: scores do not align with members")

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SceneDims:
    """每个相机的画面宽高、总帧数 T 与相机数 C"""
    width: float
    height: float
    horizon: int
    cameras: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.horizon <= 0 or self.cameras <= 0:
            raise ValueError(f"Scene dimensions must be positive: {self}")

    def contains(self, box: BoxPx) -> bool:
        return box.x1 >= 0 and box.y1 >= 0 and box.x2 <= self.width and box.y2 <= self.height

    def contains_frame(self, frame: FrameRef) -> bool:
        return frame.camera <= self.cameras and frame.time <= self.horizon


def sort_members(members: List[Tuple[FrameRef, BoxPx]],
                 scores: Optional[List[float]] = None):
    """按 (time, camera) 排序成员，并同步重排 scores"""
    order = sorted(range(len(members)), key=lambda i: members[i][0])
    sorted_members = [members[i] for i in order]
    if scores:
        return sorted_members, [scores[i] for i in order]
    return sorted_members, []
