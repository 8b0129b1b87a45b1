"""
跟踪器状态 - 滑动窗口缓存、活跃轨迹、记忆库与状态工厂
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

import numpy as np

from core.types import BoxPx, FrameRef, SceneDims, TargetObs


@dataclass(frozen=True)
class TrackerConfig:
    """
    在线推理配置

    window 为时间窗口 W（帧），theta1 / theta2 分别是窗口关联与记忆库
    复活的概率阈值，n_mem 为记忆特征的平均深度。
    """
    window: int = 60
    step: int = 1
    theta1: float = 0.1
    theta2: float = 0.2
    n_mem: int = 10
    min_traj_len: int = 10
    memory_capacity: Optional[int] = None
    use_memory: bool = True
    det_threshold: float = 0.52

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.step != 1:
            raise ValueError(f"step is fixed to 1, got {self.step}")
        for name in ('theta1', 'theta2', 'det_threshold'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0,1], got {value}")
        if self.n_mem < 1 or self.min_traj_len < 1:
            raise ValueError(f"n_mem and min_traj_len must be >= 1, got {self.n_mem}, {self.min_traj_len}")
        if self.memory_capacity is not None and self.memory_capacity < 1:
            raise ValueError(f"memory_capacity must be >= 1 when set, got {self.memory_capacity}")


# ==================== 窗口缓存 ====================

@dataclass
class CachedFrame:
    """一个时刻（所有相机）的检测、融合特征与已分配的轨迹 id"""
    time: int
    observations: List[TargetObs]
    features: np.ndarray
    ids: List[Optional[int]]


class WindowCache:
    """最近 W 个时刻的检测缓存，按时间升序"""

    def __init__(self):
        self.frames: Deque[CachedFrame] = deque()

    def evict_before(self, start: int) -> int:
        """移除早于 start 的时刻，返回移除的目标数"""
        removed = 0
        while self.frames and self.frames[0].time < start:
            removed += len(self.frames.popleft().observations)
        return removed

    def append(self, frame: CachedFrame) -> None:
        if self.frames and frame.time <= self.frames[-1].time:
            raise ValueError(f"Cache frames must be appended in time order: {frame.time} after {self.frames[-1].time}")
        self.frames.append(frame)

    def flatten(self, d_model: int) -> Tuple[List[TargetObs], np.ndarray, List[Optional[int]]]:
        """全部缓存目标、特征矩阵 (N, D) 与 id 列表"""
        observations = [obs for f in self.frames for obs in f.observations]
        ids = [i for f in self.frames for i in f.ids]
        if not self.frames:
            return observations, np.zeros((0, d_model)), ids
        return observations, np.concatenate([f.features for f in self.frames], axis=0), ids

    @property
    def time_steps(self) -> int:
        return len(self.frames)

    @property
    def span(self) -> int:
        """首尾时刻覆盖的帧数"""
        if not self.frames:
            return 0
        return self.frames[-1].time - self.frames[0].time + 1

    def __len__(self) -> int:
        return sum(len(f.observations) for f in self.frames)


# ==================== 轨迹与记忆库 ====================

@dataclass
class ActiveTrajectory:
    id: int
    n_mem: int
    members: List[Tuple[FrameRef, BoxPx]] = field(default_factory=list)
    scores: List[float] = field(default_factory=list)
    history: Deque[np.ndarray] = field(default_factory=deque)
    last_seen: int = 0

    def __post_init__(self):
        self.history = deque(self.history, maxlen=self.n_mem)

    def add(self, obs: TargetObs, feature: np.ndarray) -> None:
        if self.members and obs.frame <= self.members[-1][0]:
            raise ValueError(f"Trajectory {self.id}: member {obs.frame} out of order")
        self.members.append((obs.frame, obs.box))
        self.scores.append(obs.det_score)
        self.history.append(np.asarray(feature, dtype=np.float64))
        self.last_seen = obs.frame.time


@dataclass
class MemoryEntry:
    """退役轨迹：f̃ 在退役时计算一次"""
    id: int
    feature: np.ndarray
    last_seen: int
    trajectory: ActiveTrajectory


class MemoryBank:
    """退役轨迹的记忆库；设置 capacity 时淘汰 last_seen 最早的条目"""

    def __init__(self, capacity: Optional[int] = None):
        self.capacity = capacity
        self.entries: Dict[int, MemoryEntry] = {}

    def add(self, entry: MemoryEntry) -> List[MemoryEntry]:
        """加入条目，返回被淘汰的条目"""
        if entry.id in self.entries:
            raise ValueError(f"Trajectory {entry.id} is already in the memory bank")
        self.entries[entry.id] = entry
        evicted = []
        while self.capacity is not None and len(self.entries) > self.capacity:
            oldest = min(self.entries.values(), key=lambda e: (e.last_seen, e.id))
            evicted.append(self.entries.pop(oldest.id))
        return evicted

    def pop(self, traj_id: int) -> MemoryEntry:
        return self.entries.pop(traj_id)

    def ids(self) -> List[int]:
        return sorted(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, traj_id: int) -> bool:
        return traj_id in self.entries


# ==================== 跟踪器状态 ====================

@dataclass
class StepSummary:
    time: int
    window_matches: int = 0
    revived: int = 0
    created: int = 0
    retired: int = 0
    dropped: int = 0


@dataclass
class TrackerState:
    config: TrackerConfig
    dims: SceneDims
    cache: WindowCache = field(default_factory=WindowCache)
    active: Dict[int, ActiveTrajectory] = field(default_factory=dict)
    buffer: List[TargetObs] = field(default_factory=list)
    memory: MemoryBank = field(default_factory=MemoryBank)
    evicted: List[ActiveTrajectory] = field(default_factory=list)
    next_id: int = 1
    last_time: Optional[int] = None
    last_summary: Optional[StepSummary] = None

    def check(self) -> None:
        """缓存中每个已分配目标都必须指向一条活跃轨迹"""
        for frame in self.cache.frames:
            for traj_id in frame.ids:
                if traj_id is not None and traj_id not in self.active:
                    raise ValueError(f"Cached target references unknown trajectory {traj_id}")


def create_initial_state(config: TrackerConfig, dims: SceneDims) -> TrackerState:
    """
    创建初始跟踪器状态

    Args:
        config: 跟踪配置
        dims: 场景尺寸

    Returns:
        TrackerState: 空缓存、无轨迹、空记忆库
    """
    return TrackerState(config=config, dims=dims, memory=MemoryBank(config.memory_capacity))
