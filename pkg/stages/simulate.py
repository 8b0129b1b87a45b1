"""
simulate 命令 - 生成真值轨迹文件与检测文件
"""

import logging
import os
from typing import Dict, Tuple

from simworld.render import RenderedDetections, render_detections
from simworld.world import GroundTruthScene, generate_scene
from utils.config import RunConfig, ScenarioConfig
from utils.trackio import records_from_detections, records_from_trajectories, write_appearance, write_tracks


logger = logging.getLogger(__name__)

GT_FILE = 'gt.txt'
DET_FILE = 'det.txt'


def build_scene(scenario: ScenarioConfig, seed_offset: int = 0) -> Tuple[GroundTruthScene, RenderedDetections]:
    """
    按配置生成场景并渲染检测

    Args:
        scenario: 场景配置
        seed_offset: 加到所有场景种子上的偏移，用于生成互不相同的训练场景

    Returns:
        Tuple[GroundTruthScene, RenderedDetections]: 真值场景与检测
    """
    scene = generate_scene(scenario.world_config(seed_offset))
    rendered = render_detections(scene, scenario.noise_model(), scenario.embedding_model(seed_offset),
                                 seed=scenario.noise.seed + seed_offset)
    return scene, rendered


def cmd_simulate(config: RunConfig, out_dir: str) -> Dict[str, str]:
    """
    写出 gt.txt、det.txt 与 det.txt.app.npy

    Args:
        config: 运行配置
        out_dir: 输出目录

    Returns:
        Dict[str, str]: {'gt': ..., 'det': ..., 'app': ...}
    """
    os.makedirs(out_dir, exist_ok=True)
    scene, rendered = build_scene(config.scenario)
    gt_path = os.path.join(out_dir, GT_FILE)
    det_path = os.path.join(out_dir, DET_FILE)
    write_tracks(gt_path, records_from_trajectories(scene.trajectories))
    write_tracks(det_path, records_from_detections(rendered.observations))
    app_path = write_appearance(det_path, rendered.observations, config.scenario.embedding.dim)
    logger.info(f"Simulated {len(scene.trajectories)} identities, {scene.member_count} GT boxes, "
                f"{len(rendered)} detections")
    return {'gt': gt_path, 'det': det_path, 'app': app_path}
