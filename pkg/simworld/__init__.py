"""
Simworld module - 确定性的合成多相机场景与检测
"""

from .world import (
    Occlusion,
    WorldConfig,
    NoiseModel,
    EmbeddingModel,
    GroundTruthScene,
    default_affines,
    generate_scene,
    make_embedding_model,
)
from .render import RenderedDetections, render_detections
from .scenarios import easy_world_config, scripted_occlusion_scene

__all__ = [
    'Occlusion', 'WorldConfig', 'NoiseModel', 'EmbeddingModel', 'GroundTruthScene',
    'default_affines', 'generate_scene', 'make_embedding_model',
    'RenderedDetections', 'render_detections',
    'easy_world_config', 'scripted_occlusion_scene',
]
