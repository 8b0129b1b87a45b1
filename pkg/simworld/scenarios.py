"""
预置场景 - 简单基准场景与长时遮挡场景
"""

import logging
from typing import Tuple

from .world import GroundTruthScene, NoiseModel, Occlusion, WorldConfig, generate_scene


logger = logging.getLogger(__name__)

# 长时遮挡：被遮挡身份、遮挡起点与持续帧数
OCCLUDED_IDENTITY = 3
OCCLUSION_START = 31
OCCLUSION_FRAMES = 152
OCCLUSION_HORIZON = 240


def easy_world_config(seed: int = 7) -> WorldConfig:
    """2 相机、5 个身份、100 帧；所有身份始终在两个相机中可见"""
    return WorldConfig(cameras=2, frames=100, identities=5, seed=seed)


def scripted_occlusion_scene(window: int, seed: int = 11) -> Tuple[GroundTruthScene, NoiseModel]:
    """
    长时遮挡场景

    两个相机、三个身份；身份 3 在所有相机中连续 152 帧不可见，
    对 W <= 151 的时间窗口而言遮挡时长必然超过窗口。

    Args:
        window: 跟踪器的时间窗口 W
        seed: 场景随机种子

    Returns:
        Tuple[GroundTruthScene, NoiseModel]: 场景与包含遮挡脚本的噪声模型
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if window >= OCCLUSION_FRAMES:
        logger.warning(f"Occlusion gap {OCCLUSION_FRAMES} does not exceed window {window}")

    config = WorldConfig(cameras=2, frames=OCCLUSION_HORIZON, identities=3, seed=seed)
    scene = generate_scene(config)
    end = OCCLUSION_START + OCCLUSION_FRAMES - 1
    occlusions = tuple(
        Occlusion(identity=OCCLUDED_IDENTITY, camera=c, start=OCCLUSION_START, end=end)
        for c in range(1, config.cameras + 1)
    )
    return scene, NoiseModel(occlusions=occlusions)
