"""
合成多相机场景 - 地面随机游走 + 仿射投影得到各相机的真值轨迹
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.types import BoxPx, FrameRef, SceneDims, Trajectory


logger = logging.getLogger(__name__)

# 仿射系数 (a, b, c, d, e, f)：u = a*x + b*y + c，v = d*x + e*y + f
Affine = Tuple[float, float, float, float, float, float]

# 检测框宽高比（宽 / 高）
BOX_ASPECT = 0.4


# ==================== 配置类型 ====================

@dataclass(frozen=True)
class Occlusion:
    """强制漏检区间：identity 在 camera 上 [start, end] 帧内不产生检测"""
    identity: int
    camera: int
    start: int
    end: int


@dataclass(frozen=True)
class WorldConfig:
    """场景生成配置"""
    cameras: int = 2
    frames: int = 100
    identities: int = 5
    width: float = 1920.0
    height: float = 1080.0
    affines: Tuple[Affine, ...] = ()        # 为空时使用 default_affines
    ground_size: float = 100.0              # 地面为 [0, ground_size]^2
    speed_range: Tuple[float, float] = (0.3, 1.2)
    box_size_range: Tuple[float, float] = (80.0, 160.0)   # 框高（像素）
    entry_spread: int = 0                   # 入场最多延迟的帧数
    exit_spread: int = 0                    # 离场最多提前的帧数
    seed: int = 0

    @property
    def dims(self) -> SceneDims:
        return SceneDims(width=self.width, height=self.height, horizon=self.frames, cameras=self.cameras)


@dataclass(frozen=True)
class NoiseModel:
    """检测噪声：框抖动、随机漏检、误检率与遮挡脚本"""
    jitter: float = 0.0
    miss_prob: float = 0.0
    fp_rate: float = 0.0
    occlusions: Tuple[Occlusion, ...] = ()

    def __post_init__(self):
        if self.jitter < 0:
            raise ValueError(f"jitter must be >= 0, got {self.jitter}")
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ValueError(f"miss_prob must lie in [0,1], got {self.miss_prob}")
        if self.fp_rate < 0:
            raise ValueError(f"fp_rate must be >= 0, got {self.fp_rate}")

    def is_occluded(self, identity: int, frame: FrameRef) -> bool:
        return any(
            occ.identity == identity and occ.camera == frame.camera and occ.start <= frame.time <= occ.end
            for occ in self.occlusions
        )


@dataclass(frozen=True, eq=False)
class EmbeddingModel:
    """身份条件外观特征：单位锚向量 + 相机偏置 + 高斯噪声"""
    dim: int
    anchors: Dict[int, np.ndarray]
    camera_bias: Dict[int, np.ndarray]
    sigma: float = 0.0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"Embedding dimension must be >= 2, got {self.dim}")
        for identity, anchor in self.anchors.items():
            if anchor.shape != (self.dim,) or not np.isclose(np.linalg.norm(anchor), 1.0):
                raise ValueError(f"Anchor of identity {identity} must be a unit vector of length {self.dim}")


@dataclass
class GroundTruthScene:
    """同步多相机真值：每个身份一条轨迹"""
    dims: SceneDims
    trajectories: List[Trajectory] = field(default_factory=list)
    _index: Optional[Dict[FrameRef, List[Tuple[int, BoxPx]]]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ids = [traj.id for traj in self.trajectories]
        if len(set(ids)) != len(ids):
            raise ValueError("Scene trajectory ids must be unique")

    def boxes_at(self, frame: FrameRef) -> List[Tuple[int, BoxPx]]:
        """某一帧上所有真值框 (轨迹 id, 框)"""
        if self._index is None:
            index: Dict[FrameRef, List[Tuple[int, BoxPx]]] = {}
            for traj in self.trajectories:
                for member_frame, box in traj.members:
                    index.setdefault(member_frame, []).append((traj.id, box))
            self._index = index
        return list(self._index.get(frame, []))

    @property
    def member_count(self) -> int:
        return sum(len(traj) for traj in self.trajectories)


# ==================== 相机几何 ====================

def default_affines(cameras: int, width: float, height: float, ground_size: float) -> Tuple[Affine, ...]:
    """
    默认相机：每个相机把整个地面正方形映射到画面中央，旋转角与缩放各不相同

    Args:
        cameras: 相机数
        width: 画面宽
        height: 画面高
        ground_size: 地面边长

    Returns:
        Tuple[Affine, ...]: 每个相机的仿射系数
    """
    half = ground_size / 2.0
    base_scale = 0.8 * min(width, height) / (ground_size * math.sqrt(2.0))
    affines = []
    for c in range(cameras):
        theta = 2.0 * math.pi * c / cameras
        scale = base_scale * max(0.5, 1.0 - 0.05 * c)
        cos_t, sin_t = math.cos(theta) * scale, math.sin(theta) * scale
        # 以地面中心为原点旋转，再平移到画面中心
        cx, cy = width / 2.0, height / 2.0
        affines.append((
            cos_t, -sin_t, cx - cos_t * half + sin_t * half,
            sin_t, cos_t, cy - sin_t * half - cos_t * half,
        ))
    return tuple(affines)


def affine_determinant(affine: Affine) -> float:
    a, b, _, d, e, _ = affine
    return a * e - b * d


def project(affine: Affine, x: float, y: float) -> Tuple[float, float]:
    a, b, c, d, e, f = affine
    return a * x + b * y + c, d * x + e * y + f


def _box_for(foot_u: float, foot_v: float, size: float, dims: SceneDims) -> Optional[BoxPx]:
    """以脚点为底边中点构造框并裁剪到画面；脚点不在画面内或裁剪后为空返回 None"""
    if not (0.0 <= foot_u <= dims.width and 0.0 <= foot_v <= dims.height):
        return None
    half_w = BOX_ASPECT * size / 2.0
    x1 = min(max(foot_u - half_w, 0.0), dims.width)
    x2 = min(max(foot_u + half_w, 0.0), dims.width)
    y1 = min(max(foot_v - size, 0.0), dims.height)
    y2 = min(max(foot_v, 0.0), dims.height)
    if x2 <= x1 or y2 <= y1:
        return None
    return BoxPx(x1, y1, x2, y2)


# ==================== 场景生成 ====================

def _walk(rng: np.random.Generator, frames: int, ground: float, speed: float) -> np.ndarray:
    """航点随机游走，返回 (frames, 2) 的地面坐标"""
    low, high = 0.05 * ground, 0.95 * ground
    pos = rng.uniform(0.1 * ground, 0.9 * ground, size=2)
    waypoint = rng.uniform(low, high, size=2)
    path = np.empty((frames, 2))
    for t in range(frames):
        path[t] = pos
        delta = waypoint - pos
        dist = float(np.hypot(delta[0], delta[1]))
        if dist <= speed:
            pos = waypoint
            waypoint = rng.uniform(low, high, size=2)
        else:
            pos = pos + delta * (speed / dist)
    return path


def generate_scene(config: WorldConfig) -> GroundTruthScene:
    """
    生成合成真值场景

    所有身份在共享地面上做航点随机游走；各相机的框由脚点的仿射投影和身份
    自身的框高决定，并裁剪到画面内。同一 config（含 seed）得到逐位相同的场景。

    Args:
        config: 场景配置

    Returns:
        GroundTruthScene: 真值场景，轨迹 id 为 1..I
    """
    if config.cameras < 1 or config.frames < 1 or config.identities < 1:
        raise ValueError(f"WorldConfig needs cameras, frames, identities >= 1: {config}")

    dims = config.dims
    affines = config.affines or default_affines(config.cameras, config.width, config.height, config.ground_size)
    if len(affines) != config.cameras:
        raise ValueError(f"Expected {config.cameras} affine transforms, got {len(affines)}")
    for c, affine in enumerate(affines, start=1):
        if abs(affine_determinant(affine)) < 1e-12:
            raise ValueError(f"Affine transform of camera {c} is singular")

    rng = np.random.default_rng(config.seed)
    trajectories = []
    for identity in range(1, config.identities + 1):
        speed = float(rng.uniform(*config.speed_range))
        size = float(rng.uniform(*config.box_size_range))
        entry = 1 + int(rng.integers(0, config.entry_spread + 1))
        exit_ = config.frames - int(rng.integers(0, config.exit_spread + 1))
        exit_ = max(exit_, entry)
        path = _walk(rng, config.frames, config.ground_size, speed)

        members = []
        for t in range(entry, exit_ + 1):
            x, y = path[t - 1]
            for c, affine in enumerate(affines, start=1):
                box = _box_for(*project(affine, x, y), size, dims)
                if box is not None:
                    members.append((FrameRef(time=t, camera=c), box))
        trajectories.append(Trajectory(id=identity, members=members))

    scene = GroundTruthScene(dims=dims, trajectories=trajectories)
    logger.info(f"Generated scene: {config.identities} identities, {config.cameras} cameras, "
                f"{config.frames} frames, {scene.member_count} boxes")
    return scene


def make_embedding_model(
    identities: Sequence[int],
    cameras: int,
    dim: int = 32,
    sigma: float = 0.05,
    camera_bias_std: float = 0.0,
    seed: int = 0,
) -> EmbeddingModel:
    """随机单位锚向量（每个身份一个）与相机偏置"""
    rng = np.random.default_rng(seed)
    anchors = {}
    for identity in identities:
        vec = rng.normal(size=dim)
        anchors[identity] = vec / np.linalg.norm(vec)
    camera_bias = {}
    for c in range(1, cameras + 1):
        camera_bias[c] = rng.normal(scale=camera_bias_std, size=dim) if camera_bias_std > 0 else np.zeros(dim)
    return EmbeddingModel(dim=dim, anchors=anchors, camera_bias=camera_bias, sigma=sigma)
