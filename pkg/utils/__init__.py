"""
Utils module - 配置、轨迹文件与权重/检查点读写
"""

from .config import RunConfig, load_config, config_from_dict
from .trackio import TrackRecord, read_tracks, write_tracks, read_detections
from .checkpoint import save_weights, load_weights, save_checkpoint, load_checkpoint

__all__ = [
    'RunConfig', 'load_config', 'config_from_dict',
    'TrackRecord', 'read_tracks', 'write_tracks', 'read_detections',
    'save_weights', 'load_weights', 'save_checkpoint', 'load_checkpoint',
]
